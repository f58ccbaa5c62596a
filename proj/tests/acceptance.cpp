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

// Acceptance run. Prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails.

#include <leoris/fim.hpp>
#include <leoris/scenario.hpp>

#include "support/scenarios.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#ifndef LEORIS_SOURCE_DIR
#define LEORIS_SOURCE_DIR "."
#endif

using namespace leoris;

namespace
{
    struct Outcome
    {
        bool pass = false;
        std::string detail;
    };

    int failures = 0;

    void report(const std::string &name, const std::function<Outcome()> &fn)
    {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try
        {
            o = fn();
        }
        catch (const std::exception &e)
        {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failures += o.pass ? 0 : 1;
        std::printf("%s %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), s);
        std::fflush(stdout);
    }

    double elapsed(std::chrono::steady_clock::time_point t0)
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }

    std::string fmt(const char *f, auto... args)
    {
        char buf[512];
        std::snprintf(buf, sizeof(buf), f, args...);
        return buf;
    }

    std::string slurp(const std::string &path)
    {
        std::ifstream f(path, std::ios::binary);
        if (!f)
            throw Error("cannot read " + path);
        std::ostringstream s;
        s << f.rdbuf();
        return s.str();
    }

    ScenarioConfig load(const std::string &name)
    {
        return parse_config(slurp(std::string(LEORIS_SOURCE_DIR) + "/configs/" + name));
    }

    WaveformConfig toy_waveform(int n)
    {
        WaveformConfig w;
        w.n_subcarriers = n;
        w.bandwidth = n * 1e5;
        w.n_transmissions = 1;
        return w;
    }

    // ---------- Property suites ----------

    Outcome fim_validity()
    {
        const auto t0 = std::chrono::steady_clock::now();
        double worst_sym = 0.0, worst_psd = 0.0;
        for (std::uint64_t seed = 1; seed <= 100; ++seed)
        {
            const auto s = support::random_scenario(1000 + seed);
            const Eigen::MatrixXd F = assemble_fim(ObservationModel(s.scene, s.user));
            const double top = std::max(F.cwiseAbs().maxCoeff(), 1e-300);
            worst_sym = std::max(worst_sym, (F - F.transpose()).cwiseAbs().maxCoeff() / top);
            // PSD is checked on the Jacobi-scaled matrix so that badly scaled
            // nuisance columns do not hide negative directions.
            const Eigen::VectorXd d = F.diagonal().cwiseSqrt().cwiseMax(1e-300).cwiseInverse();
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d.asDiagonal() * F * d.asDiagonal());
            const Eigen::VectorXd ev = es.eigenvalues();
            worst_psd = std::max(worst_psd, -ev.minCoeff() / ev.maxCoeff());
        }
        const double t = elapsed(t0);
        return {worst_sym <= 1e-10 && worst_psd <= 1e-10 && t < 60.0,
                fmt("100 scenarios, max asym %.2e, max -eig_min/eig_max %.2e, %.1f s", worst_sym, worst_psd, t)};
    }

    Outcome gradient_correctness()
    {
        double worst = 0.0;
        for (std::uint64_t seed = 1; seed <= 50; ++seed)
        {
            const auto s = support::random_scenario(2000 + seed);
            ObservationModel m(s.scene, s.user);
            const Eigen::VectorXd eta = m.true_parameters();
            const auto states = m.evaluate(eta);
            const int T = m.waveform().n_transmissions, N = m.waveform().n_subcarriers;
            for (auto [t, n] : {std::pair{0, 0}, {T - 1, N - 1}, {T / 2, N / 2}, {1 % T, N / 7}})
            {
                const Eigen::VectorXcd g = m.gradient(states, t, n);
                const double scale = g.norm();
                for (int i = 0; i < eta.size(); ++i)
                {
                    // Richardson-extrapolated central differences: millimetres for
                    // the position, picoseconds for the clock bias, and a step
                    // relative to the value for the gains.
                    double h0 = 1e-3 * std::abs(eta[i]);
                    if (i < 3)
                        h0 = 1e-3;
                    else if (i == m.layout().bias_index())
                        h0 = 1e-12;
                    auto central = [&](double h) {
                        Eigen::VectorXd ep = eta, em = eta;
                        ep[i] += h;
                        em[i] -= h;
                        return (m.mean(ep, t, n) - m.mean(em, t, n)) / (2.0 * h);
                    };
                    const cd fd = (4.0 * central(h0 / 2) - central(h0)) / 3.0;
                    if (scale > 0.0)
                        worst = std::max(worst, std::abs(fd - g[i]) / scale);
                }
            }
        }
        return {worst <= 1e-6, fmt("50 scenarios, max |fd - analytic| / |grad| = %.2e", worst)};
    }

    Outcome chain_rule()
    {
        double worst = 0.0;
        for (std::uint64_t seed = 1; seed <= 100; ++seed)
        {
            const auto s = support::random_scenario(3000 + seed);
            worst = std::max(worst, chain_rule_check(ObservationModel(s.scene, s.user)));
        }
        return {worst <= 1e-8, fmt("100 scenarios, max relative mismatch %.2e", worst)};
    }

    Outcome closed_form()
    {
        double worst = 0.0;
        for (int n : {2, 64, 3000, 3001})
        {
            DelayToy toy;
            toy.waveform = toy_waveform(n);
            toy.gain = cd(2e-6, -1e-6);
            toy.delay_s = 2.1e-3;
            toy.snr_db = 17.0;
            const Eigen::MatrixXd F = assemble_structured(1, {delay_term(toy)}, toy.waveform, toy.noise_variance());
            double mean = 0.0, ms = 0.0;
            for (int i = 0; i < n; ++i)
                mean += toy.waveform.baseband_frequency(i) / n;
            for (int i = 0; i < n; ++i)
                ms += std::pow(toy.waveform.baseband_frequency(i) - mean, 2) / n;
            const double snr = n * std::norm(toy.gain) / toy.noise_variance();
            worst = std::max(worst, std::abs(F(0, 0) / (8.0 * kPi * kPi * snr * ms) - 1.0));
        }

        // One scalar anchor per axis, each heard in its own transmission.
        WaveformConfig w = toy_waveform(3000);
        w.n_transmissions = 3;
        const cd g(1e-7, 0.5e-7);
        const double s2 = 1e-14;
        std::vector<PathSpec> paths;
        for (int k = 0; k < 3; ++k)
        {
            PathSpec p;
            p.anchor = Point3::Zero();
            p.anchor[k] = 7e5;
            p.frame = OrientationFrame::facing(-p.anchor);
            p.amplitude = g;
            p.fc = 28e9;
            for (int t = 0; t < 3; ++t)
                p.weights.push_back(Eigen::VectorXcd::Constant(1, t == k ? 1.0 : 0.0));
            paths.push_back(p);
        }
        ObservationModel m(w, Point3::Zero(), paths, s2);
        DelayToy toy;
        toy.waveform = toy_waveform(3000);
        toy.gain = g;
        toy.snr_db = 10 * std::log10(3000 * std::norm(g) / s2);
        const double J = 1.0 / delay_crlb(toy);
        const double anchors = std::abs(compute_peb(m).peb_m / (kSpeedOfLight * std::sqrt(3.0 / J)) - 1.0);
        return {worst <= 1e-9 && anchors <= 1e-9,
                fmt("delay FIM max rel err %.2e, three-anchor PEB rel err %.2e", worst, anchors)};
    }

    Outcome power_scaling()
    {
        double worst = 0.0;
        int finite = 0;
        for (std::uint64_t seed = 1; seed <= 30; ++seed)
        {
            support::RandomScenarioOptions opt{.allow_active = false};
            const auto base = support::random_scenario(4000 + seed, opt);
            const double p0 = compute_peb(ObservationModel(base.scene, base.user)).peb_m;
            if (!std::isfinite(p0))
                continue;
            ++finite;
            for (double k : {2.0, 10.0, 1e3})
            {
                opt.tx_offset_db = 10.0 * std::log10(k);
                const auto s = support::random_scenario(4000 + seed, opt);
                const double pk = compute_peb(ObservationModel(s.scene, s.user)).peb_m;
                worst = std::max(worst, std::abs(pk / p0 * std::sqrt(k) - 1.0));
            }
        }
        return {finite >= 10 && worst <= 1e-12,
                fmt("%d passive scenarios, k in {2, 10, 1000}, max rel err %.2e", finite, worst)};
    }

    Outcome ml_sanity()
    {
        const auto t0 = std::chrono::steady_clock::now();
        DelayToy toy;
        toy.waveform = toy_waveform(3000);
        toy.waveform.bandwidth = 300e6;
        toy.gain = cd(1e-6, 0.0);
        toy.delay_s = 3.7e-9;
        toy.snr_db = 30.0;
        Rng rng(20261016);
        const auto r = ml_delay_oracle(toy, 500, rng);
        const double ratio = r.rmse_s / r.crlb_std_s;
        const double t = elapsed(t0);
        return {ratio >= 1.0 && ratio <= 2.0 && t < 120.0,
                fmt("RMSE %.4g s, sqrt(CRLB) %.4g s, ratio %.3f, %.1f s", r.rmse_s, r.crlb_std_s, ratio, t)};
    }

    // ---------- Sweeps ----------

    std::map<std::pair<std::string, int>, double> median_table(const SweepResult &r)
    {
        std::map<std::pair<std::string, int>, double> out;
        for (const auto &g : sweep_medians(r))
            out[{g.label, g.sweep}] = g.median_m;
        return out;
    }

    Outcome monotonicity(const ScenarioConfig &c, const SweepResult &r)
    {
        std::map<std::pair<std::string, std::uint64_t>, double> last;
        int violations = 0, checked = 0;
        for (const auto &row : r.rows)
        {
            const auto key = std::make_pair(row.label, row.seed);
            auto it = last.find(key);
            if (it != last.end())
            {
                ++checked;
                const bool ok = std::isinf(it->second) || row.peb_m <= it->second * (1.0 + 1e-12);
                violations += ok ? 0 : 1;
            }
            last[key] = row.peb_m;
        }
        return {c.satcount.nested && checked > 0 && violations == 0,
                fmt("%d consecutive pairs over %zu labels x %zu seeds, %d increases", checked, c.satcount.labels.size(),
                    c.seeds.size(), violations)};
    }

    Outcome satcount_trends(const ScenarioConfig &c, const SweepResult &r, double seconds)
    {
        const auto m = median_table(r);
        bool a = true, b = true, cc = true;
        double a_min = INFINITY, b_min = INFINITY, b_max = 0.0;
        for (int k = 6; k <= c.satcount.max_count; ++k)
        {
            const double ra = m.at({"leo_indoor", k}) / m.at({"leo_ris_indoor", k});
            a_min = std::min(a_min, ra);
            a = a && ra >= 5.0;
            const double rb = m.at({"meo_outdoor", k}) / m.at({"leo_outdoor", k});
            b_min = std::min(b_min, rb);
            b_max = std::max(b_max, rb);
            b = b && rb >= 3.0 && rb <= 30.0;
        }
        std::string worst_label;
        for (const auto &l : c.satcount.labels)
        {
            const double p2 = m.at({l.label, 2}), p6 = m.at({l.label, 6}), p12 = m.at({l.label, 12});
            const double early = std::isinf(p2) ? (std::isinf(p6) ? 0.0 : 1.0) : 1.0 - p6 / p2;
            const double late = std::isinf(p6) ? 0.0 : 1.0 - p12 / p6;
            if (!(late < early))
            {
                cc = false;
                worst_label = l.label;
            }
        }
        const double d = m.at({"leo_ris_indoor", 10});
        const bool dd = d >= 0.1 && d <= 10.0;
        return {a && b && cc && dd && seconds < 300.0,
                fmt("(a) min no-RIS/RIS indoor ratio %.2f %s; (b) MEO/LEO outdoor ratio in [%.2f, %.2f] %s; "
                    "(c) saturation %s%s; (d) indoor LEO+RIS median at 10 sats %.3f m %s; %.1f s",
                    a_min, a ? "ok" : "low", b_min, b_max, b ? "ok" : "out of range", cc ? "ok" : "fails for ",
                    worst_label.c_str(), d, dd ? "ok" : "out of range", seconds)};
    }

    Outcome areamap_trends(const ScenarioConfig &c, const GridResult &r, double seconds)
    {
        const auto s = grid_summaries(r);
        bool inc = true, dec = true;
        std::string means;
        for (std::size_t i = 0; i < s.size(); ++i)
        {
            means += fmt("eps %.2f in %.3f out %.3f; ", s[i].epsilon, s[i].mean_indoor_m, s[i].mean_outdoor_m);
            if (i > 0)
            {
                inc = inc && s[i].mean_indoor_m > s[i - 1].mean_indoor_m;
                dec = dec && s[i].mean_outdoor_m < s[i - 1].mean_outdoor_m;
            }
        }

        // Near-panel indoor cells: within 10 m of a panel, checked per epsilon
        // against that map's 90th-percentile outdoor cell.
        bool beats = false;
        double best_near = INFINITY, p90_at_best = INFINITY;
        for (double eps : c.area_map.epsilons)
        {
            std::vector<double> outdoor;
            double near = INFINITY;
            for (const auto &g : r.rows)
            {
                if (g.epsilon != eps)
                    continue;
                if (!g.indoor)
                {
                    outdoor.push_back(as_written(g.peb_m));
                    continue;
                }
                for (const auto &p : c.ris_panels)
                    if (std::hypot(g.x_m - p.position.x(), g.y_m - p.position.y()) <= 10.0)
                        near = std::min(near, as_written(g.peb_m));
            }
            if (outdoor.empty())
                continue;
            std::sort(outdoor.begin(), outdoor.end());
            const std::size_t rank = static_cast<std::size_t>(std::ceil(0.9 * outdoor.size())) - 1;
            const double p90 = outdoor[rank];
            if (near < best_near)
            {
                best_near = near;
                p90_at_best = p90;
            }
            beats = beats || near < p90;
        }
        return {inc && dec && beats && seconds < 600.0,
                fmt("%sindoor increasing %s, outdoor decreasing %s; best near-panel indoor %.3f m vs outdoor p90 "
                    "%.3f m; %.1f s",
                    means.c_str(), inc ? "yes" : "no", dec ? "yes" : "no", best_near, p90_at_best, seconds)};
    }

    Outcome determinism(const ScenarioConfig &sweep_cfg, const std::string &sweep_first)
    {
        const std::string again = sweep_csv(run_satcount_sweep(sweep_cfg, 1));
        auto map_cfg = load("fig6.json");
        map_cfg.area_map.cells_x = 12;
        map_cfg.area_map.cells_y = 12;
        map_cfg.seeds = {1, 2};
        const std::string m1 = grid_csv(run_area_map(map_cfg, 1));
        const std::string m2 = grid_csv(run_area_map(map_cfg, std::max(2u, worker_count())));
        const bool ok = again == sweep_first && m1 == m2;
        return {ok, fmt("satcount CSV (%zu bytes) %s across thread counts; area-map CSV (%zu bytes) %s", again.size(),
                        again == sweep_first ? "identical" : "differs", m1.size(), m1 == m2 ? "identical" : "differs")};
    }
}

int main()
{
    report("fim_validity", fim_validity);
    report("gradient_correctness", gradient_correctness);
    report("chain_rule_identity", chain_rule);
    report("closed_form_oracle", closed_form);
    report("power_scaling", power_scaling);
    report("ml_sanity", ml_sanity);

    ScenarioConfig sweep_cfg;
    SweepResult sweep;
    std::string sweep_text;
    double sweep_seconds = 0.0;
    try
    {
        sweep_cfg = load("fig5.json");
        const auto t0 = std::chrono::steady_clock::now();
        sweep = run_satcount_sweep(sweep_cfg);
        sweep_seconds = elapsed(t0);
        sweep_text = sweep_csv(sweep);
    }
    catch (const std::exception &e)
    {
        std::printf("satcount sweep failed: %s\n", e.what());
    }
    report("monotonicity", [&] { return monotonicity(sweep_cfg, sweep); });
    report("satcount_trends", [&] { return satcount_trends(sweep_cfg, sweep, sweep_seconds); });

    report("areamap_trends", [&] {
        const auto c = load("fig6.json");
        const auto t0 = std::chrono::steady_clock::now();
        const auto r = run_area_map(c);
        return areamap_trends(c, r, elapsed(t0));
    });

    report("determinism", [&] { return determinism(sweep_cfg, sweep_text); });

    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
