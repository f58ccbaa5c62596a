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

#ifndef LEORIS_CONSTANTS_HPP
#define LEORIS_CONSTANTS_HPP

#include <numbers>

namespace leoris
{
    inline constexpr double kPi = std::numbers::pi;
    inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

    inline constexpr double kSpeedOfLight = 299'792'458.0;     // m/s, exact
    inline constexpr double kEarthRadius = 6'371'000.0;        // m, mean radius
    inline constexpr double kEarthMu = 3.986004418e14;         // m^3/s^2
    inline constexpr double kBoltzmann = 1.380649e-23;         // J/K, exact

    // Distances below this are treated as coincident points.
    inline constexpr double kMinSeparation = 1e-9;
}

#endif
