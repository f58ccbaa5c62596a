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

#ifndef LEORIS_CHANNEL_HPP
#define LEORIS_CHANNEL_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "constants.hpp"
#include "constellation.hpp"
#include "environment.hpp"
#include "error.hpp"
#include "geometry.hpp"
#include "linkbudget.hpp"
#include "random.hpp"
#include "unknowns.hpp"

namespace leoris
{
    using cd = std::complex<double>;
    inline constexpr cd kJ{0.0, 1.0};

    // Inter-element spacing of every array, in wavelengths.
    inline constexpr double kHalfWavelength = 0.5;

    // ---------- Waveform ----------

    struct WaveformConfig
    {
        double fc = 28e9;
        double bandwidth = 300e6;
        int n_subcarriers = 3000;
        int n_transmissions = 5;
        std::optional<double> symbol_period; // defaults to 1 / spacing

        double spacing() const { return bandwidth / n_subcarriers; }
        double period() const { return symbol_period.value_or(1.0 / spacing()); }

        // Baseband frequency of subcarrier n; the band is centred on fc.
        double baseband_frequency(int n) const { return (n - 0.5 * (n_subcarriers - 1)) * spacing(); }
    };

    inline void validate(const WaveformConfig &w)
    {
        if (!(w.fc > 0.0) || !std::isfinite(w.fc))
            throw InvalidInput("carrier frequency must be positive");
        if (!(w.bandwidth > 0.0) || !std::isfinite(w.bandwidth))
            throw InvalidInput("bandwidth must be positive");
        if (w.n_subcarriers < 1)
            throw InvalidInput("need at least one subcarrier");
        if (w.n_transmissions < 1)
            throw InvalidInput("need at least one transmission");
        if (w.symbol_period && !(*w.symbol_period >= (1.0 / w.spacing()) * (1.0 - 1e-12)))
            throw InvalidInput("symbol period shorter than 1 / subcarrier spacing");
    }

    // ---------- RIS ----------

    enum class RisMode
    {
        reflect_only,
        active_reflect,
        star,
        active_star
    };

    enum class RisBranch
    {
        reflect = 0,
        refract = 1
    };

    inline bool is_active(RisMode m) { return m == RisMode::active_reflect || m == RisMode::active_star; }
    inline bool has_refraction(RisMode m) { return m == RisMode::star || m == RisMode::active_star; }

    inline std::string_view to_string(RisMode m)
    {
        switch (m)
        {
        case RisMode::reflect_only:
            return "reflect_only";
        case RisMode::active_reflect:
            return "active_reflect";
        case RisMode::star:
            return "star";
        case RisMode::active_star:
            return "active_star";
        }
        return "?";
    }

    inline std::optional<RisMode> ris_mode_from_string(std::string_view s)
    {
        for (auto m : {RisMode::reflect_only, RisMode::active_reflect, RisMode::star, RisMode::active_star})
            if (to_string(m) == s)
                return m;
        return std::nullopt;
    }

    struct RisPanel
    {
        Point3 position = Point3::Zero();
        OrientationFrame orientation; // local z = outward facade normal (reflect side)
        int rows = 20;
        int cols = 20;
        RisMode mode = RisMode::active_star;
        double epsilon = 0.5;
        double supply_power_dbm = 0.0;

        // Noise figure of the reflection amplifiers; unset means noiseless.
        std::optional<double> amplifier_noise_figure_db = 7.0;

        // Unit-modulus element phases, one vector per transmission and branch.
        std::vector<Eigen::VectorXcd> reflect_profiles;
        std::vector<Eigen::VectorXcd> refract_profiles;

        // Resolved amplitude gain of the amplifiers (1 for passive panels).
        double amp_gain = 1.0;
        int host_building = -1;

        int elements() const { return rows * cols; }
        Eigen::Vector3d normal() const { return orientation.boresight(); }

        const std::vector<Eigen::VectorXcd> &profiles(RisBranch b) const
        {
            return b == RisBranch::reflect ? reflect_profiles : refract_profiles;
        }
    };

    inline void validate(const RisPanel &p)
    {
        if (p.rows < 1 || p.cols < 1)
            throw InvalidInput("RIS needs at least one element");
        if (!(p.epsilon >= 0.0 && p.epsilon <= 1.0))
            throw InvalidInput("RIS reflection coefficient must lie in [0, 1]");
        for (const auto *set : {&p.reflect_profiles, &p.refract_profiles})
            for (const auto &v : *set)
            {
                if (v.size() != p.elements())
                    throw InvalidInput("RIS profile length does not match the element count");
                if (((v.cwiseAbs().array() - 1.0).abs() > 1e-12).any())
                    throw InvalidInput("RIS profile entries must be unit modulus");
            }
    }

    // ---------- Arrays and beamforming ----------

    // Planar array response for a unit direction w given in the array frame.
    // Element (r, c) sits at index r * cols + c with phase
    // 2 pi spacing (r w_y + c w_x).
    inline Eigen::VectorXcd array_response(int rows, int cols, double spacing, const Eigen::Vector3d &w)
    {
        Eigen::VectorXcd row_phase(rows), col_phase(cols);
        for (int r = 0; r < rows; ++r)
            row_phase[r] = std::polar(1.0, kTwoPi * spacing * r * w.y());
        for (int c = 0; c < cols; ++c)
            col_phase[c] = std::polar(1.0, kTwoPi * spacing * c * w.x());
        Eigen::VectorXcd a(rows * cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                a[r * cols + c] = row_phase[r] * col_phase[c];
        return a;
    }

    inline Eigen::VectorXcd array_response(int rows, int cols, double spacing, const AngleTuple &angles)
    {
        return array_response(rows, cols, spacing, local_direction(angles));
    }

    // i.i.d. uniform phases scaled to unit total power.
    inline Eigen::VectorXcd random_beamformer(int length, Rng &rng)
    {
        if (length < 1)
            throw InvalidInput("beamformer length must be positive");
        Eigen::VectorXcd f(length);
        const double scale = 1.0 / std::sqrt(static_cast<double>(length));
        for (int i = 0; i < length; ++i)
            f[i] = std::polar(scale, rng.phase());
        return f;
    }

    inline Eigen::VectorXcd random_profile(int length, Rng &rng)
    {
        Eigen::VectorXcd v(length);
        for (int i = 0; i < length; ++i)
            v[i] = std::polar(1.0, rng.phase());
        return v;
    }

    // Amplitude of a STAR branch: reflected power eps^2, refracted 1 - eps^2.
    inline double branch_amplitude(const RisPanel &panel, RisBranch branch)
    {
        if (branch == RisBranch::refract)
        {
            if (!has_refraction(panel.mode))
                throw BranchUnsupported("panel mode " + std::string(to_string(panel.mode)) + " does not refract");
            return std::sqrt(1.0 - panel.epsilon * panel.epsilon);
        }
        return panel.epsilon;
    }

    inline Eigen::VectorXcd star_coefficients(const RisPanel &panel, RisBranch branch, int t)
    {
        const double amp = branch_amplitude(panel, branch) * (is_active(panel.mode) ? panel.amp_gain : 1.0);
        const auto &prof = panel.profiles(branch);
        if (t < 0 || t >= static_cast<int>(prof.size()))
            throw InvalidInput("transmission index out of range for RIS profile");
        return amp * prof[static_cast<std::size_t>(t)];
    }

    // Amplitude gain of a reflection amplifier that adds the supply power to the
    // incident power: A = sqrt((P_inc + P_supply) / P_inc) >= 1.
    inline double active_gain(double incident_power_w, double supply_power_dbm)
    {
        if (!(incident_power_w > 0.0) || !std::isfinite(incident_power_w))
            throw InvalidInput("incident power must be positive");
        const double supply = dbm_to_watts(supply_power_dbm);
        return std::sqrt((incident_power_w + supply) / incident_power_w);
    }

    // Position gradients of the observables of a LoS path (no panel) or of the
    // panel -> user leg of a relayed path.
    inline ObservableJacobians position_jacobians(const SatelliteState &sat, const RisPanel *ris, const Point3 &user,
                                                  double fc)
    {
        if (ris)
            return relay_jacobians(ris->position, ris->orientation, user);
        return los_jacobians(sat.position, sat.velocity, sat.array_orientation, user, fc);
    }

    // ---------- Scene ----------

    // Satellite -> panel illumination, independent of the user.
    struct RelayLeg
    {
        bool illuminated = false;
        double distance_m = 0.0;
        double o2i_db = 0.0;
        AngleTuple sat_aod;
        AngleTuple incidence;                                 // towards the satellite, panel frame
        std::array<std::vector<Eigen::VectorXcd>, 2> weights; // [branch][t]: sat beam x coefficient x incidence
    };

    // Everything that does not depend on the user position: satellites with
    // their random beams, panels with their random profiles and resolved
    // amplifier gains, buildings, and the link budget.
    struct Scene
    {
        WaveformConfig waveform;
        BudgetConfig budget;
        std::vector<SatelliteState> satellites;
        std::vector<std::vector<Eigen::VectorXcd>> beams; // [sat][t], unit norm
        std::vector<RisPanel> panels;
        std::vector<Building> buildings;
        bool clock_bias_unknown = false;
        // Signals of different satellites reach the user on separable
        // resources, so only paths of the same satellite superpose. When false,
        // all paths add into one observation and interfere across satellites.
        bool separate_satellites = true;
        std::vector<std::vector<RelayLeg>> relays; // [sat][panel]

        double tx_power_per_subcarrier_w() const
        {
            return dbm_to_watts(budget.tx_power_dbm) / waveform.n_subcarriers;
        }

        // Common gain terms of every path except the transmit power, in dB.
        double antenna_gain_db() const
        {
            return budget.sat_antenna_gain_dbi + receiver_gain_db(budget, waveform.fc) - budget.polarization_loss_db;
        }

        // Common gain terms of every path, in dB relative to 1 W per subcarrier.
        double common_gain_db() const
        {
            return budget.tx_power_dbm - 30.0 - power_to_db(waveform.n_subcarriers) + antenna_gain_db();
        }
    };

    namespace detail
    {
        inline int find_host(const std::vector<Building> &buildings, const RisPanel &panel)
        {
            for (std::size_t i = 0; i < buildings.size(); ++i)
                if (auto n = facade_normal(buildings[i], panel.position))
                    if (n->dot(panel.normal()) > 1.0 - 1e-9)
                        return static_cast<int>(i);
            return -1;
        }

        // Thermal noise of all amplifiers of a panel over a bandwidth.
        inline double amplifier_noise_w(const RisPanel &panel, double bandwidth)
        {
            if (!is_active(panel.mode) || !panel.amplifier_noise_figure_db)
                return 0.0;
            return panel.elements() * noise_power_per_subcarrier(bandwidth, *panel.amplifier_noise_figure_db, 290.0);
        }
    }

    // Draws beams and RIS profiles for `seed`, resolves amplifier gains and the
    // satellite -> panel legs. Beams of satellite i and profiles of panel j come
    // from their own streams, so nested constellations share draws.
    inline Scene make_scene(const WaveformConfig &waveform, const BudgetConfig &budget,
                            std::vector<SatelliteState> satellites, std::vector<RisPanel> panels,
                            std::vector<Building> buildings, bool clock_bias_unknown, std::uint64_t seed)
    {
        validate(waveform);
        validate(budget);
        Scene s;
        s.waveform = waveform;
        s.budget = budget;
        s.satellites = std::move(satellites);
        s.panels = std::move(panels);
        s.buildings = std::move(buildings);
        s.clock_bias_unknown = clock_bias_unknown;
        const int T = waveform.n_transmissions;

        s.beams.resize(s.satellites.size());
        for (std::size_t i = 0; i < s.satellites.size(); ++i)
        {
            Rng rng(seed, {stream::beam, static_cast<std::uint64_t>(i)});
            const int len = s.satellites[i].array_rows * s.satellites[i].array_cols;
            for (int t = 0; t < T; ++t)
                s.beams[i].push_back(random_beamformer(len, rng));
        }

        for (std::size_t j = 0; j < s.panels.size(); ++j)
        {
            auto &p = s.panels[j];
            for (auto branch : {RisBranch::reflect, RisBranch::refract})
            {
                auto &prof = branch == RisBranch::reflect ? p.reflect_profiles : p.refract_profiles;
                if (static_cast<int>(prof.size()) >= T)
                    continue;
                prof.clear();
                Rng rng(seed, {stream::ris_profile, static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(branch)});
                for (int t = 0; t < T; ++t)
                    prof.push_back(random_profile(p.elements(), rng));
            }
            validate(p);
            p.host_building = detail::find_host(s.buildings, p);
        }

        const double fc = waveform.fc;
        const double p_tx = dbm_to_watts(budget.tx_power_dbm) * db_to_power(budget.sat_antenna_gain_dbi);
        s.relays.assign(s.satellites.size(), std::vector<RelayLeg>(s.panels.size()));
        for (std::size_t j = 0; j < s.panels.size(); ++j)
        {
            auto &panel = s.panels[j];
            double strongest = 0.0;
            for (std::size_t i = 0; i < s.satellites.size(); ++i)
            {
                const auto &sat = s.satellites[i];
                auto &leg = s.relays[i][j];
                leg.illuminated = panel.normal().dot(sat.position - panel.position) > 0.0;
                if (!leg.illuminated)
                    continue;
                leg.distance_m = distance(sat.position, panel.position);
                leg.o2i_db = leg_penetration_loss(s.buildings, sat.position, panel.position, fc, budget,
                                                  panel.host_building);
                leg.sat_aod = departure_angles(sat.position, sat.array_orientation, panel.position);
                leg.incidence = departure_angles(panel.position, panel.orientation, sat.position);
                // Random beams have unit average gain, so the per-element incident
                // power uses the isotropic budget.
                const double per_element = p_tx * db_to_power(-free_space_path_loss(leg.distance_m, fc) - leg.o2i_db);
                strongest = std::max(strongest, per_element * panel.elements());
            }
            panel.amp_gain = 1.0;
            if (is_active(panel.mode))
            {
                const double incident = strongest + detail::amplifier_noise_w(panel, waveform.bandwidth);
                if (incident > 0.0)
                    panel.amp_gain = active_gain(incident, panel.supply_power_dbm);
            }

            for (std::size_t i = 0; i < s.satellites.size(); ++i)
            {
                const auto &sat = s.satellites[i];
                auto &leg = s.relays[i][j];
                if (!leg.illuminated)
                    continue;
                const Eigen::VectorXcd a_sat =
                    array_response(sat.array_rows, sat.array_cols, kHalfWavelength, leg.sat_aod);
                const Eigen::VectorXcd a_in = array_response(panel.rows, panel.cols, kHalfWavelength, leg.incidence);
                for (auto branch : {RisBranch::reflect, RisBranch::refract})
                {
                    if (branch == RisBranch::refract && !has_refraction(panel.mode))
                        continue;
                    auto &w = leg.weights[static_cast<int>(branch)];
                    for (int t = 0; t < T; ++t)
                    {
                        const cd b_sat = a_sat.transpose() * s.beams[i][static_cast<std::size_t>(t)];
                        w.push_back(b_sat * star_coefficients(panel, branch, t).cwiseProduct(a_in));
                    }
                }
            }
        }
        return s;
    }

    // ---------- Paths ----------

    enum class PathKind
    {
        los,
        via_ris
    };

    // Static description of one path as seen by a given user. The observation
    // of a path is amplitude * weights_t^T a(w(p)) * exp(-j 2 pi f tau) *
    // exp(j 2 pi nu t T), where a() is the response of the array at `anchor`
    // (the satellite for LoS, the panel for relayed paths).
    struct PathSpec
    {
        PathKind kind = PathKind::los;
        int satellite = 0;
        int ris = -1;
        RisBranch branch = RisBranch::reflect;

        Point3 anchor = Point3::Zero();
        OrientationFrame frame;
        int rows = 1;
        int cols = 1;
        double delay_offset_s = 0.0; // satellite -> panel leg of relayed paths
        bool has_doppler = false;
        Velocity3 velocity = Velocity3::Zero();
        double fc = 0.0;

        std::vector<Eigen::VectorXcd> weights; // per transmission
        cd amplitude{0.0, 0.0};                // link-budget amplitude with its phase
        PathBudget budget;
    };

    // Path quantities evaluated at a point of the unknown vector.
    struct PathState
    {
        double delay_s = 0.0;
        double doppler_hz = 0.0;
        cd gain{0.0, 0.0};
        AngleTuple aod;
        ObservableJacobians jac;
        std::vector<cd> beam;                  // b_t
        std::vector<Eigen::Vector3cd> dbeam_dp; // d b_t / d p
        std::vector<cd> dbeam_daz, dbeam_del;  // d b_t / d(azimuth, elevation)
    };

    // Reporting view of a path at the true parameters.
    struct PropagationPath
    {
        PathKind kind = PathKind::los;
        int satellite_id = 0;
        std::optional<int> ris_id;
        std::optional<RisBranch> branch;
        double delay_s = 0.0;
        AngleTuple sat_aod;
        std::optional<AngleTuple> ris_aod;
        std::optional<double> doppler_hz;
        cd amplitude{0.0, 0.0};
        std::vector<cd> complex_gain; // per transmission: amplitude * b_t
        ObservableJacobians jacobians;
        PathBudget budget;
    };

    // Observation model of one user: the noiseless OFDM mean and its
    // derivatives with respect to the unknowns.
    class ObservationModel
    {
    public:
        ObservationModel(const Scene &scene, const Point3 &user) : waveform_(scene.waveform), user_(user)
        {
            build(scene);
            layout_.n_paths = static_cast<int>(paths_.size());
            layout_.clock_bias = scene.clock_bias_unknown;
            separate_satellites_ = scene.separate_satellites;
        }

        // Direct construction from explicit paths (toy and test scenarios).
        ObservationModel(const WaveformConfig &waveform, const Point3 &user, std::vector<PathSpec> paths,
                         double noise_variance, bool clock_bias_unknown = false, bool separate_satellites = false)
            : waveform_(waveform), user_(user), paths_(std::move(paths)), noise_variance_(noise_variance),
              separate_satellites_(separate_satellites)
        {
            validate(waveform_);
            layout_.n_paths = static_cast<int>(paths_.size());
            layout_.clock_bias = clock_bias_unknown;
        }

        const WaveformConfig &waveform() const { return waveform_; }
        const UnknownsLayout &layout() const { return layout_; }
        const std::vector<PathSpec> &paths() const { return paths_; }
        const Point3 &user() const { return user_; }
        bool indoor() const { return indoor_; }

        // Per-subcarrier noise power: receiver thermal noise plus amplified
        // noise re-radiated by active panels towards this user.
        double noise_variance() const { return noise_variance_; }
        double relay_noise() const { return relay_noise_; }

        // Observation stream a path belongs to: its satellite when satellites
        // are separated, otherwise a single shared stream.
        bool separate_satellites() const { return separate_satellites_; }
        int stream_of(int k) const
        {
            return separate_satellites_ ? paths_[static_cast<std::size_t>(k)].satellite : 0;
        }
        std::vector<int> streams() const
        {
            std::vector<int> out;
            for (int k = 0; k < layout_.n_paths; ++k)
                if (std::find(out.begin(), out.end(), stream_of(k)) == out.end())
                    out.push_back(stream_of(k));
            std::sort(out.begin(), out.end());
            return out;
        }

        // Transmit power per subcarrier (W) factored out of every path
        // amplitude. The Fisher information scales exactly with it as long as
        // no active panel is involved.
        double power_scale() const { return power_scale_; }

        // Same model with the transmit power factored out: amplitudes are those
        // of 1 W per subcarrier and the noise is unchanged.
        ObservationModel unit_power() const
        {
            std::vector<PathSpec> paths = paths_;
            for (std::size_t k = 0; k < paths.size(); ++k)
                paths[k].amplitude = unit_amplitudes_.empty() ? paths[k].amplitude : unit_amplitudes_[k];
            ObservationModel m(waveform_, user_, std::move(paths), noise_variance_, layout_.clock_bias,
                               separate_satellites_);
            m.relay_noise_ = relay_noise_;
            m.indoor_ = indoor_;
            m.sat_aod_to_ris_ = sat_aod_to_ris_;
            return m;
        }

        Eigen::VectorXd true_parameters() const
        {
            Eigen::VectorXd eta = Eigen::VectorXd::Zero(layout_.size());
            eta.head<3>() = user_;
            for (int k = 0; k < layout_.n_paths; ++k)
            {
                eta[layout_.gain_index(k)] = paths_[static_cast<std::size_t>(k)].amplitude.real();
                eta[layout_.gain_index(k) + 1] = paths_[static_cast<std::size_t>(k)].amplitude.imag();
            }
            return eta;
        }

        PathState evaluate(const PathSpec &path, const Eigen::VectorXd &eta, int k) const
        {
            const int T = waveform_.n_transmissions;
            const Point3 p = eta.head<3>();
            PathState st;
            const double d = distance(path.anchor, p);
            const Eigen::Vector3d u = (p - path.anchor) / d;
            const double bias = layout_.clock_bias ? eta[layout_.bias_index()] : 0.0;
            st.delay_s = path.delay_offset_s + d / kSpeedOfLight + bias;
            st.gain = cd(eta[layout_.gain_index(k)], eta[layout_.gain_index(k) + 1]);
            if (path.has_doppler)
            {
                st.doppler_hz = path.velocity.dot(u) * path.fc / kSpeedOfLight;
                st.jac = los_jacobians(path.anchor, path.velocity, path.frame, p, path.fc);
            }
            else
            {
                st.jac = relay_jacobians(path.anchor, path.frame, p);
            }

            const Eigen::Vector3d w = path.frame.to_local(u);
            st.aod = angles_from_local(w);
            const Eigen::Matrix3d dw = local_direction_jacobian(path.anchor, path.frame, p);
            const Eigen::VectorXcd a = array_response(path.rows, path.cols, kHalfWavelength, w);

            // d w / d(az, el) for the angle parameterization.
            const double ca = std::cos(st.aod.azimuth), sa = std::sin(st.aod.azimuth);
            const double ce = std::cos(st.aod.elevation), se = std::sin(st.aod.elevation);
            const double dwx_daz = -ce * sa, dwy_daz = ce * ca;
            const double dwx_del = -se * ca, dwy_del = -se * sa;

            const cd scale = kJ * kTwoPi * kHalfWavelength;
            st.beam.resize(T);
            st.dbeam_dp.resize(T);
            st.dbeam_daz.resize(T);
            st.dbeam_del.resize(T);
            for (int t = 0; t < T; ++t)
            {
                const Eigen::VectorXcd &v = path.weights[static_cast<std::size_t>(t)];
                cd s0 = 0.0, sr = 0.0, sc = 0.0;
                for (int r = 0; r < path.rows; ++r)
                    for (int c = 0; c < path.cols; ++c)
                    {
                        const cd x = v[r * path.cols + c] * a[r * path.cols + c];
                        s0 += x;
                        sr += x * static_cast<double>(r);
                        sc += x * static_cast<double>(c);
                    }
                const cd db_dwx = scale * sc, db_dwy = scale * sr;
                st.beam[t] = s0;
                st.dbeam_dp[t] = db_dwx * dw.row(0).transpose().cast<cd>() + db_dwy * dw.row(1).transpose().cast<cd>();
                st.dbeam_daz[t] = db_dwx * dwx_daz + db_dwy * dwy_daz;
                st.dbeam_del[t] = db_dwx * dwx_del + db_dwy * dwy_del;
            }
            return st;
        }

        std::vector<PathState> evaluate(const Eigen::VectorXd &eta) const
        {
            check(eta);
            std::vector<PathState> out;
            out.reserve(paths_.size());
            for (std::size_t k = 0; k < paths_.size(); ++k)
                out.push_back(evaluate(paths_[k], eta, static_cast<int>(k)));
            return out;
        }

        // mu_{t,n} = sum_k g_k b_{k,t} exp(-j 2 pi f_n tau_k) exp(j 2 pi nu_k t T),
        // over the paths of one observation stream (all paths if stream < 0).
        cd mean(const std::vector<PathState> &states, int t, int n, int stream = -1) const
        {
            check_index(t, n);
            const double f = waveform_.baseband_frequency(n);
            const double tt = t * waveform_.period();
            cd mu = 0.0;
            for (std::size_t k = 0; k < states.size(); ++k)
            {
                if (stream >= 0 && stream_of(static_cast<int>(k)) != stream)
                    continue;
                const auto &st = states[k];
                mu += st.gain * st.beam[static_cast<std::size_t>(t)] * phasor(-f * st.delay_s) *
                      phasor(st.doppler_hz * tt);
            }
            return mu;
        }

        cd mean(const Eigen::VectorXd &eta, int t, int n, int stream = -1) const
        {
            return mean(evaluate(eta), t, n, stream);
        }

        // d mu_{t,n} / d eta in the layout order.
        Eigen::VectorXcd gradient(const std::vector<PathState> &states, int t, int n, int stream = -1) const
        {
            check_index(t, n);
            const double f = waveform_.baseband_frequency(n);
            const double tt = t * waveform_.period();
            Eigen::VectorXcd g = Eigen::VectorXcd::Zero(layout_.size());
            for (std::size_t k = 0; k < states.size(); ++k)
            {
                if (stream >= 0 && stream_of(static_cast<int>(k)) != stream)
                    continue;
                const auto &st = states[k];
                const cd b = st.beam[static_cast<std::size_t>(t)];
                const cd ph = phasor(-f * st.delay_s) * phasor(st.doppler_hz * tt);
                const cd gb = st.gain * b * ph;
                Eigen::Vector3cd dp = st.gain * ph * st.dbeam_dp[static_cast<std::size_t>(t)];
                dp += gb * (-kJ * kTwoPi * f) * st.jac.delay.cast<cd>();
                dp += gb * (kJ * kTwoPi * tt) * st.jac.doppler.cast<cd>();
                g.head<3>() += dp;
                if (layout_.clock_bias)
                    g[layout_.bias_index()] += gb * (-kJ * kTwoPi * f);
                const int gi = layout_.gain_index(static_cast<int>(k));
                g[gi] = b * ph;
                g[gi + 1] = kJ * b * ph;
            }
            return g;
        }

        Eigen::VectorXcd gradient(const Eigen::VectorXd &eta, int t, int n, int stream = -1) const
        {
            return gradient(evaluate(eta), t, n, stream);
        }

        std::vector<PropagationPath> propagation_paths() const
        {
            const auto states = evaluate(true_parameters());
            std::vector<PropagationPath> out;
            for (std::size_t k = 0; k < paths_.size(); ++k)
            {
                const auto &ps = paths_[k];
                const auto &st = states[k];
                PropagationPath pp;
                pp.kind = ps.kind;
                pp.satellite_id = ps.satellite;
                pp.delay_s = st.delay_s;
                pp.amplitude = ps.amplitude;
                pp.budget = ps.budget;
                pp.jacobians = st.jac;
                for (const auto &b : st.beam)
                    pp.complex_gain.push_back(ps.amplitude * b);
                if (ps.kind == PathKind::los)
                {
                    pp.sat_aod = st.aod;
                    pp.doppler_hz = st.doppler_hz;
                }
                else
                {
                    pp.ris_id = ps.ris;
                    pp.branch = ps.branch;
                    pp.ris_aod = st.aod;
                    pp.sat_aod = sat_aod_to_ris_[k];
                }
                out.push_back(pp);
            }
            return out;
        }

        static cd phasor(double cycles)
        {
            // Reduce to the fractional cycle first; large delay-frequency
            // products would otherwise lose phase accuracy inside sin/cos.
            const double frac = cycles - std::round(cycles);
            return std::polar(1.0, kTwoPi * frac);
        }

    private:
        void check(const Eigen::VectorXd &eta) const
        {
            if (eta.size() != layout_.size())
                throw ScenarioInvalid("unknown vector does not match the layout");
        }

        void check_index(int t, int n) const
        {
            if (t < 0 || t >= waveform_.n_transmissions || n < 0 || n >= waveform_.n_subcarriers)
                throw ScenarioInvalid("transmission or subcarrier index out of range");
        }

        void build(const Scene &scene)
        {
            const auto &bud = scene.budget;
            const double fc = scene.waveform.fc;
            // Amplitudes are built for 1 W per subcarrier and scaled afterwards,
            // so that the unit-power model is independent of the transmit power.
            power_scale_ = scene.tx_power_per_subcarrier_w();
            const double tx_amp = std::sqrt(power_scale_);
            const std::array<double, 1> gains{scene.antenna_gain_db()};
            const auto host_of_user = building_containing(scene.buildings, user_);
            indoor_ = host_of_user.has_value();

            noise_variance_ = noise_power_per_subcarrier(scene.waveform.spacing(), bud.noise_figure_db,
                                                         bud.antenna_temperature_k);
            for (std::size_t i = 0; i < scene.satellites.size(); ++i)
            {
                const auto &sat = scene.satellites[i];
                PathSpec los;
                los.kind = PathKind::los;
                los.satellite = static_cast<int>(i);
                los.anchor = sat.position;
                los.frame = sat.array_orientation;
                los.rows = sat.array_rows;
                los.cols = sat.array_cols;
                los.has_doppler = true;
                los.velocity = sat.velocity;
                los.fc = fc;
                los.weights = scene.beams[i];
                const double d = distance(sat.position, user_);
                const double o2i = leg_penetration_loss(scene.buildings, sat.position, user_, fc, bud);
                const std::array<Leg, 1> legs{Leg{d, fc}};
                los.budget = path_amplitude(legs, gains, o2i);
                unit_amplitudes_.push_back(
                    std::polar(los.budget.rx_amplitude_linear, -kTwoPi * frac_cycles(fc * d / kSpeedOfLight)));
                los.amplitude = tx_amp * unit_amplitudes_.back();
                rescale(los.budget);
                paths_.push_back(std::move(los));
                sat_aod_to_ris_.emplace_back();
            }

            for (std::size_t j = 0; j < scene.panels.size(); ++j)
            {
                const auto &panel = scene.panels[j];
                const double side = panel.normal().dot(user_ - panel.position);
                if (std::abs(side) < 1e-9)
                    continue;
                const RisBranch branch = side > 0.0 ? RisBranch::reflect : RisBranch::refract;
                if (branch == RisBranch::refract && !has_refraction(panel.mode))
                    continue;
                const double d2 = distance(panel.position, user_);
                // The refracted wave enters the host building through the panel;
                // it only pays entry loss again if it has to leave the host.
                int skip = panel.host_building;
                if (branch == RisBranch::refract && host_of_user != std::optional<int>(panel.host_building))
                    skip = -1;
                const double o2i2 = leg_penetration_loss(scene.buildings, panel.position, user_, fc, bud, skip);
                const double user_leg = db_to_power(receiver_gain_db(bud, fc) - free_space_path_loss(d2, fc) -
                                                    o2i2 - bud.polarization_loss_db);

                if (is_active(panel.mode) && panel.amplifier_noise_figure_db)
                {
                    const double amp = branch_amplitude(panel, branch) * panel.amp_gain;
                    relay_noise_ += panel.elements() * amp * amp *
                                    noise_power_per_subcarrier(scene.waveform.spacing(),
                                                               *panel.amplifier_noise_figure_db, 290.0) *
                                    user_leg;
                }

                for (std::size_t i = 0; i < scene.satellites.size(); ++i)
                {
                    const auto &leg = scene.relays[i][j];
                    if (!leg.illuminated)
                        continue;
                    PathSpec rp;
                    rp.kind = PathKind::via_ris;
                    rp.satellite = static_cast<int>(i);
                    rp.ris = static_cast<int>(j);
                    rp.branch = branch;
                    rp.anchor = panel.position;
                    rp.frame = panel.orientation;
                    rp.rows = panel.rows;
                    rp.cols = panel.cols;
                    rp.delay_offset_s = leg.distance_m / kSpeedOfLight;
                    rp.has_doppler = false;
                    rp.fc = fc;
                    rp.weights = leg.weights[static_cast<int>(branch)];
                    const std::array<Leg, 2> legs{Leg{leg.distance_m, fc}, Leg{d2, fc}};
                    rp.budget = path_amplitude(legs, gains, leg.o2i_db + o2i2);
                    unit_amplitudes_.push_back(std::polar(
                        rp.budget.rx_amplitude_linear, -kTwoPi * frac_cycles(fc * (leg.distance_m + d2) / kSpeedOfLight)));
                    rp.amplitude = tx_amp * unit_amplitudes_.back();
                    rescale(rp.budget);
                    paths_.push_back(std::move(rp));
                    sat_aod_to_ris_.push_back(leg.sat_aod);
                }
            }
            noise_variance_ += relay_noise_;
        }

        static double frac_cycles(double cycles) { return cycles - std::floor(cycles); }

        void rescale(PathBudget &b) const
        {
            b.aggregate_gain_db += power_to_db(power_scale_);
            b.rx_amplitude_linear *= std::sqrt(power_scale_);
        }

        WaveformConfig waveform_;
        Point3 user_;
        std::vector<PathSpec> paths_;
        std::vector<AngleTuple> sat_aod_to_ris_;
        UnknownsLayout layout_;
        double noise_variance_ = 0.0;
        double relay_noise_ = 0.0;
        double power_scale_ = 1.0;
        std::vector<cd> unit_amplitudes_;
        bool separate_satellites_ = false;
        bool indoor_ = false;
    };
}

#endif
