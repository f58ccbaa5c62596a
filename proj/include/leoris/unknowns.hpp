// SPDX-License-Identifier: Apache-2.0
//
// leoris: position error bounds for LEO satellite and RIS aided localization
// Copyright (C) 2026 The leoris authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef LEORIS_UNKNOWNS_HPP
#define LEORIS_UNKNOWNS_HPP

#include <string>
#include <vector>

namespace leoris
{
    // Ordering of the unknown vector: position x/y/z, then the optional clock
    // bias, then Re/Im of every path gain.
    struct UnknownsLayout
    {
        int n_paths = 0;
        bool clock_bias = false;

        int size() const { return 3 + (clock_bias ? 1 : 0) + 2 * n_paths; }
        int bias_index() const { return clock_bias ? 3 : -1; }
        int gain_index(int path) const { return 3 + (clock_bias ? 1 : 0) + 2 * path; }
        int nuisance_count() const { return size() - 3; }

        std::vector<std::string> labels() const
        {
            std::vector<std::string> l{"x", "y", "z"};
            if (clock_bias)
                l.emplace_back("clock_bias");
            for (int k = 0; k < n_paths; ++k)
            {
                l.push_back("re_gain_" + std::to_string(k));
                l.push_back("im_gain_" + std::to_string(k));
            }
            return l;
        }
    };
}

#endif
