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

#ifndef LEORIS_RANDOM_HPP
#define LEORIS_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

#include "constants.hpp"

namespace leoris
{
    // Deterministic random stream. Streams are keyed by (seed, tags...) so that
    // every satellite, panel and trial owns an independent sequence and adding
    // an entity never perturbs the draws of the others.
    //
    // Conversions to floating point are done here instead of through the
    // <random> distributions, whose output is implementation defined.
    class Rng
    {
    public:
        explicit Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags = {})
        {
            std::uint64_t state = mix(seed ^ 0x6a09e667f3bcc909ULL);
            for (auto t : tags)
                state = mix(state ^ mix(t + 0x9e3779b97f4a7c15ULL));
            engine_.seed(state);
        }

        std::uint64_t next() { return engine_(); }

        // Uniform on [0, 1) with 53 random bits.
        double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

        double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

        // Uniform phase on [0, 2 pi).
        double phase() { return kTwoPi * uniform(); }

        // Standard normal via Box-Muller.
        double normal()
        {
            if (has_spare_)
            {
                has_spare_ = false;
                return spare_;
            }
            double u1 = 0.0;
            while (u1 <= 0.0)
                u1 = uniform();
            const double u2 = uniform();
            const double r = std::sqrt(-2.0 * std::log(u1));
            spare_ = r * std::sin(kTwoPi * u2);
            has_spare_ = true;
            return r * std::cos(kTwoPi * u2);
        }

    private:
        static std::uint64_t mix(std::uint64_t z)
        {
            z += 0x9e3779b97f4a7c15ULL;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            return z ^ (z >> 31);
        }

        std::mt19937_64 engine_;
        double spare_ = 0.0;
        bool has_spare_ = false;
    };

    // Stream tags in use across the library.
    namespace stream
    {
        inline constexpr std::uint64_t constellation = 1;
        inline constexpr std::uint64_t beam = 2;
        inline constexpr std::uint64_t ris_profile = 3;
        inline constexpr std::uint64_t gain_phase = 4;
        inline constexpr std::uint64_t noise = 5;
        inline constexpr std::uint64_t scenario = 6;
    }
}

#endif
