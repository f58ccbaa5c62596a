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

#ifndef LEORIS_CONSTELLATION_HPP
#define LEORIS_CONSTELLATION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "constants.hpp"
#include "error.hpp"
#include "geometry.hpp"
#include "random.hpp"

namespace leoris
{
    // Centre of the Earth in the local frame (origin on the ground).
    inline Point3 earth_center() { return {0.0, 0.0, -kEarthRadius}; }

    struct SatelliteState
    {
        Point3 position = Point3::Zero();
        Velocity3 velocity = Velocity3::Zero();
        int array_rows = 8;
        int array_cols = 8;
        OrientationFrame array_orientation; // boresight towards the scenario origin
    };

    struct ConstellationSpec
    {
        int count = 1;
        double altitude_m = 600e3;
        double elevation_mask_rad = 10.0 * kPi / 180.0;
        std::uint64_t rng_seed = 0;
        int array_rows = 8;
        int array_cols = 8;
    };

    inline double circular_orbital_speed(double h)
    {
        if (!(h > 0.0) || !std::isfinite(h))
            throw InvalidAltitude("altitude must be positive and finite");
        return std::sqrt(kEarthMu / (kEarthRadius + h));
    }

    // Elevation of the satellite above the horizontal plane at `ground`.
    inline double elevation_angle(const Point3 &sat_pos, const Point3 &ground)
    {
        const Direction3 u = los_direction(ground, sat_pos);
        return std::asin(std::clamp(u.z(), -1.0, 1.0));
    }

    // Point at altitude h seen from the origin under (azimuth, elevation).
    // Azimuth is a compass bearing: 0 = north, pi/2 = east.
    inline Point3 point_on_shell(double azimuth, double elevation, double h)
    {
        const double ce = std::cos(elevation);
        const Eigen::Vector3d e{ce * std::sin(azimuth), ce * std::cos(azimuth), std::sin(elevation)};
        const double R = kEarthRadius;
        const double ez = e.z();
        const double range = -R * ez + std::sqrt(R * R * ez * ez + 2.0 * R * h + h * h);
        return range * e;
    }

    // One satellite on the shell, drawn from its own stream so that satellite i
    // is identical in every constellation drawn with the same seed.
    inline SatelliteState draw_satellite(const ConstellationSpec &spec, int index)
    {
        Rng rng(spec.rng_seed, {stream::constellation, static_cast<std::uint64_t>(index)});
        const double az = rng.phase();
        const double el = rng.uniform(spec.elevation_mask_rad, kPi / 2.0);
        const double psi = rng.phase();

        SatelliteState s;
        s.array_rows = spec.array_rows;
        s.array_cols = spec.array_cols;
        s.position = point_on_shell(az, el, spec.altitude_m);

        const Eigen::Vector3d radial = (s.position - earth_center()).normalized();
        Eigen::Vector3d t1 = Eigen::Vector3d::UnitZ().cross(radial);
        if (t1.norm() < 1e-12)
            t1 = Eigen::Vector3d::UnitX();
        t1.normalize();
        const Eigen::Vector3d t2 = radial.cross(t1);
        s.velocity = circular_orbital_speed(spec.altitude_m) * (std::cos(psi) * t1 + std::sin(psi) * t2);
        s.array_orientation = OrientationFrame::facing(-s.position);
        return s;
    }

    inline void validate(const ConstellationSpec &spec)
    {
        if (spec.count < 1)
            throw InvalidInput("constellation needs at least one satellite");
        if (!(spec.altitude_m > 0.0) || !std::isfinite(spec.altitude_m))
            throw InvalidAltitude("altitude must be positive and finite");
        if (!(spec.elevation_mask_rad >= 0.0) || !(spec.elevation_mask_rad < kPi / 2.0))
            throw InvalidMask("elevation mask must lie in [0, pi/2)");
        if (spec.array_rows < 1 || spec.array_cols < 1)
            throw InvalidInput("satellite array needs at least one element");
    }

    inline std::vector<SatelliteState> draw_constellation(const ConstellationSpec &spec)
    {
        validate(spec);
        std::vector<SatelliteState> sats;
        sats.reserve(static_cast<std::size_t>(spec.count));
        for (int i = 0; i < spec.count; ++i)
            sats.push_back(draw_satellite(spec, i));
        return sats;
    }
}

#endif
