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

#ifndef LEORIS_FIM_HPP
#define LEORIS_FIM_HPP

#include <Eigen/Dense>
#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <vector>

#include "channel.hpp"
#include "constants.hpp"
#include "error.hpp"
#include "random.hpp"
#include "unknowns.hpp"

namespace leoris
{
    // Contribution of one path to the gradient of the mean:
    //   d mu_{t,n} / d x[index] = exp(-j 2 pi f_n delay) (A_t + f_n B_t)
    // Every path in the model has this form, which lets the Fisher information
    // be assembled from per-pair frequency moments instead of a sum over all
    // subcarriers.
    struct PathTerm
    {
        int stream = 0; // terms of different streams do not interact
        std::vector<int> index;
        double delay_s = 0.0;
        std::vector<Eigen::VectorXcd> A; // per transmission, size index.size()
        std::vector<Eigen::VectorXcd> B;
    };

    // S_q = sum_n f_n^q exp(j 2 pi f_n dtau), q = 0, 1, 2.
    inline std::array<cd, 3> delay_moments(const WaveformConfig &w, double dtau)
    {
        const int N = w.n_subcarriers;
        const double df = w.spacing();
        // Phasor recurrence, re-anchored every block to bound round-off growth.
        constexpr int block = 64;
        const cd step = ObservationModel::phasor(df * dtau);
        std::array<cd, 3> s{0.0, 0.0, 0.0};
        cd z = 0.0;
        for (int n = 0; n < N; ++n)
        {
            const double f = w.baseband_frequency(n);
            if (n % block == 0)
                z = ObservationModel::phasor(f * dtau);
            else
                z *= step;
            s[0] += z;
            s[1] += f * z;
            s[2] += f * f * z;
        }
        return s;
    }

    inline Eigen::MatrixXd assemble_structured(int dim, const std::vector<PathTerm> &terms, const WaveformConfig &w,
                                               double noise_variance)
    {
        if (!(noise_variance > 0.0) || !std::isfinite(noise_variance))
            throw NoisePowerZero("noise variance must be positive");
        const int T = w.n_transmissions;
        const std::size_t K = terms.size();
        Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(dim, dim);
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t l = k; l < K; ++l)
            {
                const auto &a = terms[k];
                const auto &b = terms[l];
                if (a.stream != b.stream)
                    continue;
                const auto s = delay_moments(w, a.delay_s - b.delay_s);
                const int mk = static_cast<int>(a.index.size());
                const int ml = static_cast<int>(b.index.size());
                Eigen::MatrixXcd blk = Eigen::MatrixXcd::Zero(mk, ml);
                for (int t = 0; t < T; ++t)
                {
                    const auto &Ak = a.A[static_cast<std::size_t>(t)], &Bk = a.B[static_cast<std::size_t>(t)];
                    const auto &Al = b.A[static_cast<std::size_t>(t)], &Bl = b.B[static_cast<std::size_t>(t)];
                    blk.noalias() += s[0] * Ak.conjugate() * Al.transpose();
                    blk.noalias() += s[1] * (Ak.conjugate() * Bl.transpose() + Bk.conjugate() * Al.transpose());
                    blk.noalias() += s[2] * Bk.conjugate() * Bl.transpose();
                }
                for (int i = 0; i < mk; ++i)
                    for (int j = 0; j < ml; ++j)
                    {
                        acc(a.index[i], b.index[j]) += blk(i, j);
                        if (k != l)
                            acc(b.index[j], a.index[i]) += std::conj(blk(i, j));
                    }
            }
        Eigen::MatrixXd F = (2.0 / noise_variance) * acc.real();
        return 0.5 * (F + F.transpose());
    }

    // Per-path terms with respect to the unknowns [p; bias; Re/Im gains].
    inline std::vector<PathTerm> direct_terms(const ObservationModel &model, const Eigen::VectorXd &eta)
    {
        const auto &lay = model.layout();
        const auto states = model.evaluate(eta);
        const int T = model.waveform().n_transmissions;
        const double Ts = model.waveform().period();
        std::vector<PathTerm> terms;
        for (int k = 0; k < lay.n_paths; ++k)
        {
            const auto &st = states[static_cast<std::size_t>(k)];
            PathTerm pt;
            pt.stream = model.stream_of(k);
            pt.delay_s = st.delay_s;
            pt.index = {0, 1, 2};
            if (lay.clock_bias)
                pt.index.push_back(lay.bias_index());
            const int g = static_cast<int>(pt.index.size());
            pt.index.push_back(lay.gain_index(k));
            pt.index.push_back(lay.gain_index(k) + 1);
            const int m = static_cast<int>(pt.index.size());
            for (int t = 0; t < T; ++t)
            {
                const cd D = ObservationModel::phasor(st.doppler_hz * t * Ts);
                const cd b = st.beam[static_cast<std::size_t>(t)];
                Eigen::VectorXcd A = Eigen::VectorXcd::Zero(m), B = Eigen::VectorXcd::Zero(m);
                const Eigen::Vector3cd ap = st.gain * D *
                                            (st.dbeam_dp[static_cast<std::size_t>(t)] +
                                             b * (kJ * kTwoPi * (t * Ts)) * st.jac.doppler.cast<cd>());
                const Eigen::Vector3cd bp = st.gain * D * b * (-kJ * kTwoPi) * st.jac.delay.cast<cd>();
                A.head<3>() = ap;
                B.head<3>() = bp;
                if (lay.clock_bias)
                    B[3] = st.gain * D * b * (-kJ * kTwoPi);
                A[g] = D * b;
                A[g + 1] = kJ * D * b;
                pt.A.push_back(std::move(A));
                pt.B.push_back(std::move(B));
            }
            terms.push_back(std::move(pt));
        }
        return terms;
    }

    // Terms with respect to the stacked channel parameters, per path
    // [delay, azimuth, elevation, (Doppler), Re gain, Im gain], plus the
    // Jacobian J = d(channel parameters) / d(unknowns).
    struct ChannelTerms
    {
        int dim = 0;
        std::vector<PathTerm> terms;
        Eigen::MatrixXd J;
    };

    inline ChannelTerms channel_terms(const ObservationModel &model, const Eigen::VectorXd &eta)
    {
        const auto &lay = model.layout();
        const auto states = model.evaluate(eta);
        const int T = model.waveform().n_transmissions;
        const double Ts = model.waveform().period();
        ChannelTerms out;
        for (const auto &ps : model.paths())
            out.dim += ps.has_doppler ? 6 : 5;
        out.J = Eigen::MatrixXd::Zero(out.dim, lay.size());

        int o = 0;
        for (int k = 0; k < lay.n_paths; ++k)
        {
            const auto &st = states[static_cast<std::size_t>(k)];
            const bool dop = model.paths()[static_cast<std::size_t>(k)].has_doppler;
            const int m = dop ? 6 : 5;
            const int re = dop ? 4 : 3;
            PathTerm pt;
            pt.stream = model.stream_of(k);
            pt.delay_s = st.delay_s;
            for (int i = 0; i < m; ++i)
                pt.index.push_back(o + i);
            for (int t = 0; t < T; ++t)
            {
                const cd D = ObservationModel::phasor(st.doppler_hz * t * Ts);
                const cd b = st.beam[static_cast<std::size_t>(t)];
                Eigen::VectorXcd A = Eigen::VectorXcd::Zero(m), B = Eigen::VectorXcd::Zero(m);
                B[0] = st.gain * D * b * (-kJ * kTwoPi);
                A[1] = st.gain * D * st.dbeam_daz[static_cast<std::size_t>(t)];
                A[2] = st.gain * D * st.dbeam_del[static_cast<std::size_t>(t)];
                if (dop)
                    A[3] = st.gain * D * b * (kJ * kTwoPi * (t * Ts));
                A[re] = D * b;
                A[re + 1] = kJ * D * b;
                pt.A.push_back(std::move(A));
                pt.B.push_back(std::move(B));
            }
            out.terms.push_back(std::move(pt));

            out.J.block<1, 3>(o, 0) = st.jac.delay.transpose();
            if (lay.clock_bias)
                out.J(o, lay.bias_index()) = 1.0;
            out.J.block<1, 3>(o + 1, 0) = st.jac.azimuth.transpose();
            out.J.block<1, 3>(o + 2, 0) = st.jac.elevation.transpose();
            if (dop)
                out.J.block<1, 3>(o + 3, 0) = st.jac.doppler.transpose();
            out.J(o + re, lay.gain_index(k)) = 1.0;
            out.J(o + re + 1, lay.gain_index(k) + 1) = 1.0;
            o += m;
        }
        return out;
    }

    // Brute-force F = (2 / sigma^2) Re(G^H G) over every (stream, t, n).
    inline Eigen::MatrixXd assemble_dense(const ObservationModel &model, const Eigen::VectorXd &eta)
    {
        const double s2 = model.noise_variance();
        if (!(s2 > 0.0))
            throw NoisePowerZero("noise variance must be positive");
        const auto states = model.evaluate(eta);
        const auto &w = model.waveform();
        const int dim = model.layout().size();
        const auto streams = model.streams();
        const int rows = w.n_transmissions * w.n_subcarriers;
        Eigen::MatrixXcd G(rows * static_cast<int>(streams.size()), dim);
        for (std::size_t s = 0; s < streams.size(); ++s)
            for (int t = 0; t < w.n_transmissions; ++t)
                for (int n = 0; n < w.n_subcarriers; ++n)
                    G.row(static_cast<int>(s) * rows + t * w.n_subcarriers + n) =
                        model.gradient(states, t, n, streams[s]).transpose();
        Eigen::MatrixXd F = (2.0 / s2) * (G.adjoint() * G).real();
        return 0.5 * (F + F.transpose());
    }

    inline Eigen::MatrixXd assemble_fim(const ObservationModel &model, const Eigen::VectorXd &eta)
    {
        return assemble_structured(model.layout().size(), direct_terms(model, eta), model.waveform(),
                                   model.noise_variance());
    }

    inline Eigen::MatrixXd assemble_fim(const ObservationModel &model)
    {
        return assemble_fim(model, model.true_parameters());
    }

    struct EfimResult
    {
        Eigen::Matrix3d efim = Eigen::Matrix3d::Zero();
        bool nuisance_degenerate = false;
    };

    // Schur complement of the nuisance block. Rows and columns are Jacobi
    // scaled first because positions, delays and gains differ by many orders
    // of magnitude; singular nuisance blocks fall back to a pseudoinverse.
    inline EfimResult efim_position(const Eigen::MatrixXd &F, const UnknownsLayout &layout)
    {
        if (F.rows() != layout.size() || F.cols() != layout.size())
            throw ScenarioInvalid("FIM size does not match the unknowns layout");
        const int n = layout.size();
        Eigen::VectorXd s(n);
        for (int i = 0; i < n; ++i)
            s[i] = F(i, i) > 0.0 ? 1.0 / std::sqrt(F(i, i)) : 1.0;
        const Eigen::MatrixXd Fs = s.asDiagonal() * F * s.asDiagonal();

        EfimResult r;
        Eigen::Matrix3d Es = Fs.topLeftCorner<3, 3>();
        const int m = n - 3;
        if (m > 0)
        {
            const Eigen::MatrixXd Fnn = Fs.bottomRightCorner(m, m);
            const Eigen::MatrixXd Fnp = Fs.bottomLeftCorner(m, 3);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Fnn);
            const Eigen::VectorXd ev = es.eigenvalues();
            const double top = std::max(ev.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
            Eigen::VectorXd inv = Eigen::VectorXd::Zero(m);
            for (int i = 0; i < m; ++i)
            {
                if (ev[i] > 1e-12 * top)
                    inv[i] = 1.0 / ev[i];
                else
                    r.nuisance_degenerate = true;
            }
            const Eigen::MatrixXd Q = es.eigenvectors().transpose() * Fnp;
            Es -= Q.transpose() * inv.asDiagonal() * Q;
        }
        const Eigen::Vector3d sp = s.head<3>();
        r.efim = sp.cwiseInverse().asDiagonal() * Es * sp.cwiseInverse().asDiagonal();
        r.efim = 0.5 * (r.efim + r.efim.transpose()).eval();
        return r;
    }

    struct PebResult
    {
        double peb_m = std::numeric_limits<double>::infinity();
        std::optional<Eigen::Vector3d> null_direction;
        double min_eigenvalue = 0.0;
        double max_eigenvalue = 0.0;
    };

    inline PebResult peb_details(const Eigen::Matrix3d &E)
    {
        PebResult r;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(0.5 * (E + E.transpose()));
        const Eigen::Vector3d ev = es.eigenvalues();
        r.min_eigenvalue = ev[0];
        r.max_eigenvalue = ev[2];
        if (!(ev[2] > 0.0) || ev[0] <= 1e-12 * ev[2])
        {
            r.null_direction = es.eigenvectors().col(0);
            return r;
        }
        r.peb_m = std::sqrt(ev.cwiseInverse().sum());
        return r;
    }

    inline double peb(const Eigen::Matrix3d &E) { return peb_details(E).peb_m; }

    struct FimDiagnostics
    {
        bool nuisance_degenerate = false;
        std::optional<Eigen::Vector3d> null_direction;
        double efim_condition = std::numeric_limits<double>::infinity();
    };

    struct FimResult
    {
        Eigen::MatrixXd fim;
        Eigen::Matrix3d efim_position = Eigen::Matrix3d::Zero();
        double peb_m = std::numeric_limits<double>::infinity();
        FimDiagnostics diagnostics;
    };

    // The bound is evaluated on the unit-power model and rescaled at the end,
    // so that the transmit power never mixes into the rounding of the Schur
    // complement. Gains are re-parameterized per unit power, which leaves the
    // position information unchanged.
    inline FimResult compute_peb(const ObservationModel &model)
    {
        FimResult r;
        const ObservationModel unit = model.unit_power();
        const double scale = model.power_scale();
        const Eigen::MatrixXd F = assemble_fim(unit);
        Eigen::VectorXd s = Eigen::VectorXd::Ones(F.rows());
        s.head(model.layout().clock_bias ? 4 : 3).setConstant(std::sqrt(scale));
        r.fim = s.asDiagonal() * F * s.asDiagonal();
        const auto e = efim_position(F, model.layout());
        r.efim_position = scale * e.efim;
        const auto p = peb_details(e.efim);
        r.peb_m = p.peb_m / std::sqrt(scale);
        r.diagnostics.nuisance_degenerate = e.nuisance_degenerate;
        r.diagnostics.null_direction = p.null_direction;
        if (p.min_eigenvalue > 0.0)
            r.diagnostics.efim_condition = p.max_eigenvalue / p.min_eigenvalue;
        return r;
    }

    // Max |F_direct - J^T F_eta J| over sqrt(F_ii F_jj), on the full unknowns.
    inline double chain_rule_check(const ObservationModel &model)
    {
        const Eigen::VectorXd eta = model.true_parameters();
        const Eigen::MatrixXd direct = assemble_fim(model, eta);
        const auto ct = channel_terms(model, eta);
        const Eigen::MatrixXd Feta =
            assemble_structured(ct.dim, ct.terms, model.waveform(), model.noise_variance());
        const Eigen::MatrixXd chained = ct.J.transpose() * Feta * ct.J;
        double worst = 0.0;
        for (int i = 0; i < direct.rows(); ++i)
            for (int j = 0; j < direct.cols(); ++j)
            {
                const double den = std::sqrt(direct(i, i) * direct(j, j));
                if (den > 0.0)
                    worst = std::max(worst, std::abs(direct(i, j) - chained(i, j)) / den);
                else if (direct(i, j) != chained(i, j))
                    worst = std::max(worst, std::abs(direct(i, j) - chained(i, j)));
            }
        return worst;
    }

    // ---------- Delay estimation toy ----------

    // One path with a known gain and an unknown delay observed over an OFDM
    // band: y_n = g exp(-j 2 pi f_n tau) + w_n.
    struct DelayToy
    {
        WaveformConfig waveform;
        cd gain{1.0, 0.0};
        double delay_s = 0.0;
        double snr_db = 30.0; // post-integration, N |g|^2 / sigma^2
        int n_paths = 1;

        double noise_variance() const
        {
            return waveform.n_subcarriers * std::norm(gain) / db_to_power(snr_db);
        }
    };

    inline PathTerm delay_term(const DelayToy &toy)
    {
        PathTerm pt;
        pt.index = {0};
        pt.delay_s = toy.delay_s;
        pt.A.push_back(Eigen::VectorXcd::Zero(1));
        pt.B.push_back(Eigen::VectorXcd::Constant(1, toy.gain * (-kJ * kTwoPi)));
        return pt;
    }

    // CRLB of the delay from the assembled one-parameter FIM.
    inline double delay_crlb(const DelayToy &toy)
    {
        WaveformConfig w = toy.waveform;
        w.n_transmissions = 1;
        const Eigen::MatrixXd F = assemble_structured(1, {delay_term(toy)}, w, toy.noise_variance());
        return 1.0 / F(0, 0);
    }

    struct MlOracleResult
    {
        double rmse_s = 0.0;
        double crlb_std_s = 0.0;
        std::vector<double> errors_s;
    };

    // ML delay estimates: the known-gain log-likelihood is maximised by
    // R(tau) = Re(conj(g) sum_n y_n exp(j 2 pi f_n tau)). A zero-padded inverse
    // FFT evaluates R on a fine grid, a parabola through the peak refines it
    // and a few Newton steps on the exact R polish the estimate.
    inline MlOracleResult ml_delay_oracle(const DelayToy &toy, int trials, Rng &rng, bool noiseless = false)
    {
        if (toy.n_paths != 1)
            throw ScenarioInvalid("the delay oracle handles a single path only");
        if (trials < 1)
            throw InvalidInput("need at least one trial");
        validate(toy.waveform);
        const int N = toy.waveform.n_subcarriers;
        const double df = toy.waveform.spacing();
        const int pad = 16;
        int L = 1;
        while (L < pad * N)
            L <<= 1;
        const double sigma = std::sqrt(toy.noise_variance() / 2.0);
        const double center = 0.5 * (N - 1);
        const double period = 1.0 / df;

        std::vector<double> f(static_cast<std::size_t>(N));
        std::vector<cd> clean(static_cast<std::size_t>(N));
        for (int n = 0; n < N; ++n)
        {
            f[static_cast<std::size_t>(n)] = toy.waveform.baseband_frequency(n);
            clean[static_cast<std::size_t>(n)] =
                toy.gain * ObservationModel::phasor(-f[static_cast<std::size_t>(n)] * toy.delay_s);
        }

        fftw_complex *buf = fftw_alloc_complex(static_cast<std::size_t>(L));
        fftw_plan plan = fftw_plan_dft_1d(L, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
        std::vector<cd> y(static_cast<std::size_t>(N));
        std::vector<double> R(static_cast<std::size_t>(L));

        auto corr = [&](double tau, double &d1, double &d2) {
            cd s0 = 0.0, s1 = 0.0, s2 = 0.0;
            for (int n = 0; n < N; ++n)
            {
                const double fn = f[static_cast<std::size_t>(n)];
                const cd z = y[static_cast<std::size_t>(n)] * ObservationModel::phasor(fn * tau);
                s0 += z;
                s1 += fn * z;
                s2 += fn * fn * z;
            }
            const cd gc = std::conj(toy.gain);
            d1 = std::real(gc * kJ * kTwoPi * s1);
            d2 = std::real(gc * (-kTwoPi * kTwoPi) * s2);
            return std::real(gc * s0);
        };

        MlOracleResult res;
        double sum2 = 0.0;
        for (int trial = 0; trial < trials; ++trial)
        {
            for (int n = 0; n < N; ++n)
            {
                cd w = noiseless ? cd(0.0, 0.0) : cd(sigma * rng.normal(), sigma * rng.normal());
                y[static_cast<std::size_t>(n)] = clean[static_cast<std::size_t>(n)] + w;
            }
            for (int i = 0; i < L; ++i)
            {
                buf[i][0] = i < N ? y[static_cast<std::size_t>(i)].real() : 0.0;
                buf[i][1] = i < N ? y[static_cast<std::size_t>(i)].imag() : 0.0;
            }
            fftw_execute(plan);
            int best = 0;
            for (int m = 0; m < L; ++m)
            {
                // Grid delay tau_m = m / (L df); undo the band centring.
                const cd v = cd(buf[m][0], buf[m][1]) * ObservationModel::phasor(-center * m / static_cast<double>(L));
                R[static_cast<std::size_t>(m)] = std::real(std::conj(toy.gain) * v);
                if (R[static_cast<std::size_t>(m)] > R[static_cast<std::size_t>(best)])
                    best = m;
            }
            const double rm = R[static_cast<std::size_t>((best + L - 1) % L)];
            const double r0 = R[static_cast<std::size_t>(best)];
            const double rp = R[static_cast<std::size_t>((best + 1) % L)];
            const double den = rm - 2.0 * r0 + rp;
            const double shift = den < 0.0 ? 0.5 * (rm - rp) / den : 0.0;
            double tau = (best + shift) * period / L;
            for (int it = 0; it < 8; ++it)
            {
                double d1 = 0.0, d2 = 0.0;
                corr(tau, d1, d2);
                if (!(d2 < 0.0))
                    break;
                const double step = d1 / d2;
                tau -= step;
                if (std::abs(step) < 1e-18)
                    break;
            }
            // Map the wrapped estimate next to the true delay.
            double err = std::remainder(tau - toy.delay_s, period);
            res.errors_s.push_back(err);
            sum2 += err * err;
        }
        fftw_destroy_plan(plan);
        fftw_free(buf);
        res.rmse_s = std::sqrt(sum2 / trials);
        res.crlb_std_s = std::sqrt(delay_crlb(toy));
        return res;
    }
}

#endif
