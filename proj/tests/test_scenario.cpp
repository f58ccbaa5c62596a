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

#include <gtest/gtest.h>

#include <leoris/scenario.hpp>

#include <cmath>

using namespace leoris;

namespace
{
    ScenarioConfig expect_field_error(const std::string &text, const std::string &field)
    {
        try
        {
            parse_config(text);
            ADD_FAILURE() << "no error for " << text;
        }
        catch (const ValidationError &e)
        {
            EXPECT_EQ(e.field(), field) << e.what();
        }
        return {};
    }

    std::string small_sweep()
    {
        return R"({"experiment": "satcount_sweep", "seeds": [1, 2, 3],
                   "waveform": {"n_subcarriers": 300, "bandwidth_hz": 3e7},
                   "satcount_sweep": {"min_count": 1, "max_count": 6}})";
    }
}

TEST(Scenario, MinimalDocumentGetsDefaults)
{
    const auto c = parse_config("{}");
    EXPECT_EQ(c.experiment, Experiment::satcount_sweep);
    EXPECT_EQ(c.seeds.size(), 20u);
    EXPECT_EQ(c.waveform.n_subcarriers, 3000);
    EXPECT_EQ(c.waveform.n_transmissions, 5);
    EXPECT_DOUBLE_EQ(c.waveform.bandwidth, 300e6);
    EXPECT_DOUBLE_EQ(c.budget.tx_power_dbm, 55.0);
    EXPECT_EQ(c.ris_panels.size(), 1u);
    EXPECT_EQ(c.ris_panels[0].rows, 20);
    EXPECT_DOUBLE_EQ(c.ris_panels[0].epsilon, 0.5);
    EXPECT_EQ(c.ris_panels[0].mode, RisMode::active_star);
    EXPECT_EQ(c.satcount.labels.size(), 6u);
    EXPECT_EQ(c.satcount.max_count, 12);
    EXPECT_TRUE(c.satcount.nested);
    for (const auto &u : c.users)
        EXPECT_NEAR((u.position - c.ris_panels[0].position).norm(), 15.0, 1e-12);

    const auto m = parse_config(R"({"experiment": "area_map"})");
    EXPECT_EQ(m.area_map.cells_x, 50);
    EXPECT_EQ(m.area_map.satellites, 10);
    EXPECT_EQ(m.ris_panels.size(), 2u);
    EXPECT_EQ(m.area_map.epsilons, (std::vector<double>{0.25, 0.5, 0.75}));
}

TEST(Scenario, DefaultsEchoRoundTrip)
{
    const auto c = parse_config("{}");
    const auto again = config_from_json(to_json(c));
    EXPECT_EQ(to_json(again).dump(), to_json(c).dump());
}

TEST(Scenario, EpsilonOutOfRangeNamesField)
{
    expect_field_error(R"({"ris_panels": [{"position": [0, 0, 3], "normal": [0, -1, 0], "epsilon": 1.3}]})",
                       "ris_panels[0].epsilon");
}

TEST(Scenario, IndoorUserOutsideBuildingsRejected)
{
    expect_field_error(R"({"users": [{"name": "a", "position": [100, 100, 1], "indoor": true}],
                           "satcount_sweep": {"labels": [{"label": "x", "user": "a"}]}})",
                       "users[0].position");
}

TEST(Scenario, StarPanelMustSitOnFacade)
{
    expect_field_error(R"({"ris_panels": [{"position": [0, -5, 3], "normal": [0, -1, 0]}]})",
                       "ris_panels[0].position");
}

TEST(Scenario, UnknownKeysRejected)
{
    expect_field_error(R"({"waveform": {"bandwidth": 3e8}})", "waveform.bandwidth");
    expect_field_error(R"({"colour": 1})", "colour");
}

TEST(Scenario, SatelliteSignalModes)
{
    EXPECT_TRUE(parse_config("{}").separate_satellites);
    const auto c = parse_config(R"({"satellite_signals": "superposed"})");
    EXPECT_FALSE(c.separate_satellites);
    EXPECT_EQ(to_json(c)["satellite_signals"], "superposed");
    expect_field_error(R"({"satellite_signals": "mixed"})", "satellite_signals");
}

TEST(Scenario, MalformedJson)
{
    EXPECT_THROW(parse_config("{\"experiment\": "), ParseError);
}

TEST(Scenario, OverrideEqualsEditing)
{
    auto doc = json::parse(small_sweep());
    doc["ris_panels"] = json::parse(R"([{"position": [0, 0, 3], "normal": [0, -1, 0]}])");
    const auto a = parse_config(doc.dump(), {"waveform.bandwidth_hz=2e7", "ris_panels[0].epsilon=0.7"});
    doc["waveform"]["bandwidth_hz"] = 2e7;
    doc["ris_panels"][0]["epsilon"] = 0.7;
    const auto b = config_from_json(doc);
    EXPECT_DOUBLE_EQ(a.waveform.bandwidth, 2e7);
    EXPECT_DOUBLE_EQ(a.ris_panels[0].epsilon, 0.7);
    EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
    // Indices past the end of an array are rejected, not created.
    EXPECT_THROW(parse_config(small_sweep(), {"ris_panels[3].epsilon=0.7"}), ValidationError);
    EXPECT_THROW(parse_config(small_sweep(), {"no_equals"}), ValidationError);
}

TEST(Scenario, SweepShapeAndDeterminism)
{
    const auto c = parse_config(small_sweep());
    const auto a = run_satcount_sweep(c, 1);
    const auto b = run_satcount_sweep(c, 3);
    EXPECT_EQ(a.rows.size(), 6u * 6u * 3u);
    EXPECT_EQ(sweep_csv(a), sweep_csv(b));
    EXPECT_EQ(sweep_csv(a).substr(0, 22), "label,sweep,seed,peb_m");
    for (const auto &r : a.rows)
        EXPECT_TRUE(r.peb_m > 0.0);
}

// Passive panels only: an active panel scales its gain to the strongest
// satellite it sees, so a new, stronger satellite can weaken the relays of
// the others. The default active configuration is checked by the acceptance run.
TEST(Scenario, NestedSweepIsMonotoneWithPassivePanels)
{
    const auto c = parse_config(small_sweep(), {"ris_panels=[{\"position\": [0, 0, 3], \"normal\": [0, -1, 0], \"mode\": \"star\"}]"});
    ASSERT_EQ(c.ris_panels[0].mode, RisMode::star);
    const auto r = run_satcount_sweep(c, 1);
    // Rows are label-major, then count, then seed.
    const std::size_t seeds = c.seeds.size();
    for (std::size_t i = seeds; i < r.rows.size(); ++i)
    {
        const auto &cur = r.rows[i];
        const auto &before = r.rows[i - seeds];
        if (before.label == cur.label && before.sweep + 1 == cur.sweep)
        {
            EXPECT_LE(cur.peb_m, before.peb_m) << cur.label << " " << cur.sweep << " " << cur.seed;
        }
    }
}

TEST(Scenario, NoSatellitesMeansUnbounded)
{
    const auto c = parse_config(R"({"experiment": "area_map", "buildings": [], "ris_panels": [],
        "area_map": {"satellites": 0, "cells_x": 4, "cells_y": 3}})");
    const auto r = run_area_map(c, 1);
    EXPECT_EQ(r.rows.size(), 3u * 12u);
    for (const auto &g : r.rows)
    {
        EXPECT_TRUE(std::isinf(g.peb_m));
        EXPECT_FALSE(g.indoor);
    }
    EXPECT_NE(grid_csv(r).find(",inf\n"), std::string::npos);
}

TEST(Scenario, GridCsvFormat)
{
    const auto c = parse_config(R"({"experiment": "area_map", "waveform": {"n_subcarriers": 100, "bandwidth_hz": 1e7},
        "area_map": {"cells_x": 5, "cells_y": 5, "epsilons": [0.5]}})");
    const auto r = run_area_map(c, 2);
    const std::string csv = grid_csv(r);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "x_m,y_m,indoor,epsilon,peb_m");
    EXPECT_EQ(r.rows.front().x_m, -40.0);
    EXPECT_EQ(r.rows.front().y_m, -40.0);
    EXPECT_EQ(r.rows[1].x_m, -20.0);
    int indoor = 0;
    for (const auto &g : r.rows)
        indoor += g.indoor;
    EXPECT_GT(indoor, 0);
    EXPECT_EQ(csv, grid_csv(run_area_map(c, 1)));
}

TEST(Scenario, NumberFormatting)
{
    EXPECT_EQ(format_number(std::numeric_limits<double>::infinity()), "inf");
    EXPECT_EQ(format_number(0.1234567891234), "0.123456789");
    EXPECT_EQ(format_number(1234567891.5), "1.23456789e+09");
    EXPECT_EQ(format_number(2.0), "2");
}

TEST(Scenario, MedianRules)
{
    EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
    EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
    EXPECT_TRUE(std::isinf(median({1.0, INFINITY, INFINITY, 2.0})));
    EXPECT_EQ(median({1.0, 2.0, INFINITY}), 2.0);
}

TEST(Scenario, MediansUseWrittenValues)
{
    SweepResult r;
    r.rows = {{"a", 1, 1, 1.00000000049}, {"a", 1, 2, 3.0}};
    const auto m = sweep_medians(r);
    ASSERT_EQ(m.size(), 1u);
    EXPECT_EQ(m[0].median_m, (1.0 + 3.0) / 2.0);
}

TEST(Scenario, ParallelForCoversAllItemsAndPropagatesErrors)
{
    std::vector<int> hit(1000, 0);
    parallel_for(hit.size(), [&](std::size_t i) { hit[i] += 1; }, 4);
    for (int h : hit)
        EXPECT_EQ(h, 1);
    EXPECT_THROW(parallel_for(10, [](std::size_t i) {
                     if (i == 7)
                         throw Error("boom");
                 }, 3),
                 Error);
}
