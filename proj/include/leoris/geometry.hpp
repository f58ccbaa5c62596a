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

#ifndef LEORIS_GEOMETRY_HPP
#define LEORIS_GEOMETRY_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "constants.hpp"
#include "error.hpp"

namespace leoris
{
    // Positions are metres in a local east-north-up frame whose origin lies on
    // the ground at the scenario centre. Velocities are m/s in the same frame.
    using Point3 = Eigen::Vector3d;
    using Velocity3 = Eigen::Vector3d;

    // Elevations closer than this to +-pi/2 are flagged as near-singular.
    inline constexpr double kGimbalMargin = 1e-6;

    // Unit vector. Construction normalizes; the zero vector is rejected.
    class Direction3
    {
    public:
        explicit Direction3(const Eigen::Vector3d &v)
        {
            const double n = v.norm();
            if (!(n >= kMinSeparation) || !std::isfinite(n))
                throw DegenerateGeometry("cannot form a direction from a zero-length vector");
            u_ = v / n;
        }

        const Eigen::Vector3d &vec() const noexcept { return u_; }
        double x() const noexcept { return u_.x(); }
        double y() const noexcept { return u_.y(); }
        double z() const noexcept { return u_.z(); }

    private:
        Eigen::Vector3d u_;
    };

    // Azimuth in (-pi, pi], elevation in [-pi/2, pi/2].
    struct AngleTuple
    {
        double azimuth = 0.0;
        double elevation = 0.0;
        bool gimbal_warning = false;
    };

    // Rotation whose columns are the local x/y/z axes of an array face expressed
    // in the global frame. The local z axis is the array boresight.
    class OrientationFrame
    {
    public:
        OrientationFrame() : r_(Eigen::Matrix3d::Identity()) {}

        explicit OrientationFrame(const Eigen::Matrix3d &r) : r_(r)
        {
            if (!r.allFinite())
                throw InvalidInput("orientation frame has non-finite entries");
            if ((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-10)
                throw InvalidInput("orientation frame is not orthonormal");
            if (std::abs(r.determinant() - 1.0) > 1e-10)
                throw InvalidInput("orientation frame is not a proper rotation");
        }

        // Frame with the given boresight. The local x axis is kept horizontal
        // (perpendicular to global up) whenever the boresight is not vertical.
        static OrientationFrame facing(const Eigen::Vector3d &boresight)
        {
            const Eigen::Vector3d z = Direction3(boresight).vec();
            Eigen::Vector3d x = Eigen::Vector3d::UnitZ().cross(z);
            if (x.norm() < 1e-9)
                x = Eigen::Vector3d::UnitX();
            x.normalize();
            x = (x - x.dot(z) * z).normalized();
            const Eigen::Vector3d y = z.cross(x);
            Eigen::Matrix3d r;
            r.col(0) = x;
            r.col(1) = y;
            r.col(2) = z;
            return OrientationFrame(r);
        }

        const Eigen::Matrix3d &matrix() const noexcept { return r_; }
        Eigen::Vector3d boresight() const { return r_.col(2); }

        Eigen::Vector3d to_local(const Eigen::Vector3d &global) const { return r_.transpose() * global; }
        Eigen::Vector3d to_global(const Eigen::Vector3d &local) const { return r_ * local; }

    private:
        Eigen::Matrix3d r_;
    };

    inline Direction3 los_direction(const Point3 &from, const Point3 &to)
    {
        const Eigen::Vector3d d = to - from;
        if (d.norm() < kMinSeparation)
            throw DegenerateGeometry("coincident points");
        return Direction3(d);
    }

    inline double distance(const Point3 &a, const Point3 &b)
    {
        const double d = (a - b).norm();
        if (d < kMinSeparation)
            throw DegenerateGeometry("coincident points");
        return d;
    }

    inline double propagation_delay(const Point3 &a, const Point3 &b)
    {
        return distance(a, b) / kSpeedOfLight;
    }

    // Doppler shift seen at `target`. An approaching satellite gives a positive
    // shift: nu = (v . u) fc / c with u pointing from the satellite to the target.
    inline double doppler_shift(const Point3 &sat_pos, const Velocity3 &sat_vel, const Point3 &target, double fc)
    {
        if (!(fc > 0.0))
            throw InvalidInput("carrier frequency must be positive");
        const Direction3 u = los_direction(sat_pos, target);
        return sat_vel.dot(u.vec()) * fc / kSpeedOfLight;
    }

    // Angles of a unit vector given in local array coordinates.
    inline AngleTuple angles_from_local(const Eigen::Vector3d &w)
    {
        AngleTuple a;
        const double rho = std::hypot(w.x(), w.y());
        // atan2 stays well conditioned near boresight, where asin loses digits.
        a.elevation = std::atan2(w.z(), rho);
        a.azimuth = rho < 1e-12 ? 0.0 : std::atan2(w.y(), w.x());
        if (a.azimuth <= -kPi)
            a.azimuth = kPi;
        a.gimbal_warning = std::abs(a.elevation) > kPi / 2.0 - kGimbalMargin;
        return a;
    }

    // Inverse of angles_from_local.
    inline Eigen::Vector3d local_direction(const AngleTuple &a)
    {
        const double ce = std::cos(a.elevation);
        return {ce * std::cos(a.azimuth), ce * std::sin(a.azimuth), std::sin(a.elevation)};
    }

    inline AngleTuple departure_angles(const Point3 &src, const OrientationFrame &src_frame, const Point3 &dst)
    {
        return angles_from_local(src_frame.to_local(los_direction(src, dst).vec()));
    }

    // d(local unit vector towards `user`)/d(user), 3x3. Rows are local x/y/z.
    inline Eigen::Matrix3d local_direction_jacobian(const Point3 &anchor, const OrientationFrame &frame,
                                                    const Point3 &user)
    {
        const double d = distance(anchor, user);
        const Eigen::Vector3d u = (user - anchor) / d;
        const Eigen::Matrix3d proj = (Eigen::Matrix3d::Identity() - u * u.transpose()) / d;
        return frame.matrix().transpose() * proj;
    }

    // Gradients of the geometric observables with respect to the user position.
    // Each member is d(observable)/d(p) as a 3-vector.
    struct ObservableJacobians
    {
        Eigen::Vector3d delay = Eigen::Vector3d::Zero();     // s/m
        Eigen::Vector3d azimuth = Eigen::Vector3d::Zero();   // rad/m
        Eigen::Vector3d elevation = Eigen::Vector3d::Zero(); // rad/m
        Eigen::Vector3d doppler = Eigen::Vector3d::Zero();   // Hz/m
        bool gimbal_warning = false;
    };

    namespace detail
    {
        // Angle gradients from the local direction w and its Jacobian dw/dp.
        inline void angle_gradients(const Eigen::Vector3d &w, const Eigen::Matrix3d &dw, ObservableJacobians &j)
        {
            const double rho2 = w.x() * w.x() + w.y() * w.y();
            const double rho = std::sqrt(rho2);
            j.gimbal_warning = std::abs(std::asin(std::clamp(w.z(), -1.0, 1.0))) > kPi / 2.0 - kGimbalMargin;
            if (rho < 1e-12)
            {
                // Boresight: azimuth is pinned to zero and its gradient is undefined.
                j.azimuth.setZero();
                j.elevation.setZero();
                j.gimbal_warning = true;
                return;
            }
            j.azimuth = ((w.x() * dw.row(1) - w.y() * dw.row(0)) / rho2).transpose();
            j.elevation = (dw.row(2) / rho).transpose();
        }
    }

    // LoS path from a satellite: delay, satellite AoD and Doppler all move with p.
    inline ObservableJacobians los_jacobians(const Point3 &sat_pos, const Velocity3 &sat_vel,
                                             const OrientationFrame &sat_frame, const Point3 &user, double fc)
    {
        if (!(fc > 0.0))
            throw InvalidInput("carrier frequency must be positive");
        ObservableJacobians j;
        const double d = distance(sat_pos, user);
        const Eigen::Vector3d u = (user - sat_pos) / d;
        j.delay = u / kSpeedOfLight;
        const Eigen::Matrix3d proj = (Eigen::Matrix3d::Identity() - u * u.transpose()) / d;
        j.doppler = fc / kSpeedOfLight * (proj * sat_vel);
        const Eigen::Vector3d w = sat_frame.to_local(u);
        detail::angle_gradients(w, sat_frame.matrix().transpose() * proj, j);
        return j;
    }

    // Satellite -> RIS -> user path. Only the RIS -> user leg depends on p; the
    // RIS is static, so the path carries no position-dependent Doppler.
    inline ObservableJacobians relay_jacobians(const Point3 &ris_pos, const OrientationFrame &ris_frame,
                                               const Point3 &user)
    {
        ObservableJacobians j;
        const double d = distance(ris_pos, user);
        const Eigen::Vector3d u = (user - ris_pos) / d;
        j.delay = u / kSpeedOfLight;
        const Eigen::Matrix3d proj = (Eigen::Matrix3d::Identity() - u * u.transpose()) / d;
        detail::angle_gradients(ris_frame.to_local(u), ris_frame.matrix().transpose() * proj, j);
        return j;
    }
}

#endif
