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

#ifndef LEORIS_ENVIRONMENT_HPP
#define LEORIS_ENVIRONMENT_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "geometry.hpp"
#include "linkbudget.hpp"

namespace leoris
{
    // Axis-aligned box standing on the ground plane.
    struct Building
    {
        double x_min = 0.0, y_min = 0.0;
        double x_max = 0.0, y_max = 0.0;
        double height = 10.0;
        BuildingClass building_class = BuildingClass::traditional;

        bool contains(const Point3 &p) const
        {
            return p.x() > x_min && p.x() < x_max && p.y() > y_min && p.y() < y_max && p.z() >= 0.0 &&
                   p.z() < height;
        }

        bool footprint_contains(double x, double y) const
        {
            return x > x_min && x < x_max && y > y_min && y < y_max;
        }

        // True when the open segment a-b passes through the interior over a
        // non-zero length (slab test). Grazing a face does not count.
        bool crossed_by(const Point3 &a, const Point3 &b) const
        {
            const Eigen::Vector3d lo{x_min, y_min, 0.0};
            const Eigen::Vector3d hi{x_max, y_max, height};
            const Eigen::Vector3d d = b - a;
            double t0 = 0.0, t1 = 1.0;
            for (int i = 0; i < 3; ++i)
            {
                if (std::abs(d[i]) < 1e-300)
                {
                    if (a[i] <= lo[i] || a[i] >= hi[i])
                        return false;
                    continue;
                }
                double ta = (lo[i] - a[i]) / d[i];
                double tb = (hi[i] - a[i]) / d[i];
                if (ta > tb)
                    std::swap(ta, tb);
                t0 = std::max(t0, ta);
                t1 = std::min(t1, tb);
                if (t0 >= t1)
                    return false;
            }
            return (t1 - t0) * d.norm() > 1e-6;
        }
    };

    // Index of the building whose footprint holds the point, if any.
    inline std::optional<int> building_containing(const std::vector<Building> &buildings, const Point3 &p)
    {
        for (std::size_t i = 0; i < buildings.size(); ++i)
            if (buildings[i].contains(p))
                return static_cast<int>(i);
        return std::nullopt;
    }

    // Wall of `b` that holds point p within `tol` and whose outward normal
    // matches `normal`. Returns the outward unit normal when found.
    inline std::optional<Eigen::Vector3d> facade_normal(const Building &b, const Point3 &p, double tol = 0.01)
    {
        struct Wall
        {
            int axis;
            double coord;
            double sign;
        };
        const Wall walls[] = {{0, b.x_min, -1.0}, {0, b.x_max, 1.0}, {1, b.y_min, -1.0}, {1, b.y_max, 1.0}};
        for (const auto &w : walls)
        {
            if (std::abs(p[w.axis] - w.coord) > tol)
                continue;
            const int other = 1 - w.axis;
            const double lo = other == 0 ? b.x_min : b.y_min;
            const double hi = other == 0 ? b.x_max : b.y_max;
            if (p[other] < lo - tol || p[other] > hi + tol || p.z() < -tol || p.z() > b.height + tol)
                continue;
            Eigen::Vector3d n = Eigen::Vector3d::Zero();
            n[w.axis] = w.sign;
            return n;
        }
        return std::nullopt;
    }

    // Total penetration loss of a propagation leg: one building-entry loss per
    // building the leg passes through. `skip` excludes a host building.
    inline double leg_penetration_loss(const std::vector<Building> &buildings, const Point3 &a, const Point3 &b,
                                       double fc, const BudgetConfig &budget, int skip = -1)
    {
        double loss = 0.0;
        for (std::size_t i = 0; i < buildings.size(); ++i)
        {
            if (static_cast<int>(i) == skip)
                continue;
            if (buildings[i].crossed_by(a, b) || buildings[i].contains(b))
                loss += o2i_penetration_loss(true, buildings[i].building_class, fc, budget);
        }
        return loss;
    }
}

#endif
