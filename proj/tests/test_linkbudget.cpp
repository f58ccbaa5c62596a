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

#include <leoris/environment.hpp>
#include <leoris/linkbudget.hpp>

#include <array>
#include <cmath>
#include <limits>

using namespace leoris;

TEST(LinkBudget, FreeSpacePathLossValues)
{
    EXPECT_NEAR(free_space_path_loss(600e3, 28e9), 176.96, 0.01);
    EXPECT_NEAR(free_space_path_loss(10000e3, 1.575e9), 176.39, 0.01);
    EXPECT_NEAR(free_space_path_loss(2.0, 28e9) - free_space_path_loss(1.0, 28e9), 6.0206, 1e-4);
    EXPECT_NEAR(free_space_path_loss(1234.0, 3e9) + 6.020599913279624, free_space_path_loss(2468.0, 3e9), 1e-12);
    EXPECT_THROW(free_space_path_loss(0.0, 28e9), InvalidInput);
    EXPECT_THROW(free_space_path_loss(10.0, -1.0), InvalidInput);
}

TEST(LinkBudget, ReceivedPowerDecreasesWithDistance)
{
    double prev = std::numeric_limits<double>::infinity();
    for (double d = 1.0; d < 1e8; d *= 1.7)
    {
        const std::array<Leg, 1> legs{Leg{d, 28e9}};
        const std::array<double, 1> gains{0.0};
        const double a = path_amplitude(legs, gains, 0.0).rx_amplitude_linear;
        EXPECT_LT(a, prev);
        prev = a;
    }
}

TEST(LinkBudget, O2iLoss)
{
    BudgetConfig b;
    EXPECT_EQ(o2i_penetration_loss(false, std::nullopt, 28e9, b), 0.0);
    EXPECT_EQ(o2i_penetration_loss(true, BuildingClass::traditional, 28e9, b), 20.0);
    EXPECT_EQ(o2i_penetration_loss(true, BuildingClass::thermally_efficient, 28e9, b), 40.0);
    // No altitude or carrier enters the loss.
    EXPECT_EQ(o2i_penetration_loss(true, BuildingClass::traditional, 1.575e9, b),
              o2i_penetration_loss(true, BuildingClass::traditional, 28e9, b));
    EXPECT_THROW(o2i_penetration_loss(true, std::nullopt, 28e9, b), MissingBuildingClass);
    b.o2i_loss_db.erase(BuildingClass::thermally_efficient);
    EXPECT_THROW(o2i_penetration_loss(true, BuildingClass::thermally_efficient, 28e9, b), MissingBuildingClass);
}

TEST(LinkBudget, NoisePower)
{
    EXPECT_NEAR(noise_power_per_subcarrier(1.0, 0.0, 290.0), 4.004e-21, 0.001e-21);
    EXPECT_NEAR(10 * std::log10(noise_power_per_subcarrier(1.0, 0.0, 290.0)) + 30, -173.97, 0.01);
    const double base = noise_power_per_subcarrier(1e5, 0.0, 290.0);
    EXPECT_NEAR(noise_power_per_subcarrier(1e5, 3.0, 290.0) / base, 2.0, 0.01);
    EXPECT_NEAR(noise_power_per_subcarrier(3e5, 7.0, 290.0) / noise_power_per_subcarrier(1e5, 7.0, 290.0), 3.0, 1e-12);
    EXPECT_THROW(noise_power_per_subcarrier(0.0, 7.0, 290.0), InvalidInput);
}

TEST(LinkBudget, PathAmplitudeDefinition)
{
    const std::array<Leg, 1> one{Leg{600e3, 28e9}};
    const double fspl = free_space_path_loss(600e3, 28e9);
    const std::array<double, 1> zero{0.0};
    const auto pb = path_amplitude(one, zero, 0.0);
    EXPECT_NEAR(pb.rx_amplitude_linear / std::pow(10.0, -fspl / 20.0), 1.0, 1e-12);
    EXPECT_NEAR(pb.aggregate_gain_db, -fspl, 1e-9);

    const std::array<Leg, 2> two{Leg{600e3, 28e9}, Leg{600e3, 28e9}};
    EXPECT_NEAR(path_amplitude(two, zero, 0.0).rx_amplitude_linear / (pb.rx_amplitude_linear * pb.rx_amplitude_linear),
                1.0, 1e-12);

    const auto lossy = path_amplitude(one, zero, 20.0);
    EXPECT_NEAR(lossy.rx_amplitude_linear * 10.0 / pb.rx_amplitude_linear, 1.0, 1e-12);
    EXPECT_NEAR(lossy.aggregate_gain_db, -fspl - 20.0, 1e-9);

    EXPECT_EQ(path_amplitude(one, zero, std::numeric_limits<double>::infinity()).rx_amplitude_linear, 0.0);
    EXPECT_THROW(path_amplitude(std::span<const Leg>{}, zero, 0.0), InvalidInput);
    EXPECT_THROW(path_amplitude(one, zero, -1.0), InvalidInput);
}

TEST(LinkBudget, LeoBeatsMeoByTenDbWithStatedDeltas)
{
    // EIRP density 10 dB/MHz higher for MEO, path loss 20 dB lower for LEO at
    // equal frequency (slant ranges a factor 10 apart).
    BudgetConfig leo, meo;
    meo.tx_power_dbm = leo.tx_power_dbm + 10.0;
    const std::array<Leg, 1> l{Leg{1000e3, 28e9}}, m{Leg{10000e3, 28e9}};
    const std::array<double, 1> gl{leo.tx_power_dbm}, gm{meo.tx_power_dbm};
    const double delta = path_amplitude(l, gl, 0.0).aggregate_gain_db - path_amplitude(m, gm, 0.0).aggregate_gain_db;
    EXPECT_NEAR(delta, 10.0, 1.0);
}

TEST(LinkBudget, ReceiverApertureGain)
{
    BudgetConfig b;
    EXPECT_NEAR(receiver_gain_db(b, 28e9), 0.0, 1e-12);
    EXPECT_NEAR(receiver_gain_db(b, 1.575e9), 20 * std::log10(1.575 / 28.0), 1e-12);
    b.receiver_aperture_reference_hz.reset();
    EXPECT_EQ(receiver_gain_db(b, 1.575e9), 0.0);
}

TEST(LinkBudget, ConfigValidation)
{
    BudgetConfig b;
    EXPECT_NO_THROW(validate(b));
    b.o2i_loss_db[BuildingClass::traditional] = -1.0;
    EXPECT_THROW(validate(b), InvalidInput);
    b = {};
    b.noise_figure_db = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(validate(b), InvalidInput);
}

TEST(Environment, ContainmentAndCrossing)
{
    const Building b{-20, 0, 20, 30, 10, BuildingClass::traditional};
    EXPECT_TRUE(b.contains({0, 15, 1.5}));
    EXPECT_FALSE(b.contains({0, -1, 1.5}));
    EXPECT_FALSE(b.contains({0, 15, 11}));
    EXPECT_TRUE(b.crossed_by({0, -10, 1}, {0, 40, 1}));
    EXPECT_FALSE(b.crossed_by({-30, -10, 1}, {-30, 40, 1}));
    // Leg ending on the facade does not cross.
    EXPECT_FALSE(b.crossed_by({0, -1000, 500}, {0, 0, 3}));
    // Over the roof.
    EXPECT_FALSE(b.crossed_by({0, -10, 12}, {0, 40, 12}));
}

TEST(Environment, FacadeNormal)
{
    const Building b{-20, 0, 20, 30, 10, BuildingClass::traditional};
    const auto n = facade_normal(b, {0, 0, 3});
    ASSERT_TRUE(n);
    EXPECT_EQ(*n, Eigen::Vector3d(0, -1, 0));
    EXPECT_EQ(*facade_normal(b, {20.005, 10, 3}), Eigen::Vector3d(1, 0, 0));
    EXPECT_FALSE(facade_normal(b, {0, 0.5, 3}));
    EXPECT_FALSE(facade_normal(b, {50, 0, 3}));
}

TEST(Environment, LegPenetrationCountsEachBuildingOnce)
{
    BudgetConfig budget;
    const std::vector<Building> bs{{-20, 0, 20, 30, 10, BuildingClass::traditional},
                                   {30, 0, 40, 30, 10, BuildingClass::thermally_efficient}};
    EXPECT_EQ(leg_penetration_loss(bs, {0, -100, 1}, {0, -5, 1}, 28e9, budget), 0.0);
    EXPECT_EQ(leg_penetration_loss(bs, {0, -100, 1}, {0, 15, 1}, 28e9, budget), 20.0);
    EXPECT_EQ(leg_penetration_loss(bs, {-50, 15, 1}, {35, 15, 1}, 28e9, budget), 60.0);
    EXPECT_EQ(leg_penetration_loss(bs, {-50, 15, 1}, {35, 15, 1}, 28e9, budget, 0), 40.0);
    ASSERT_TRUE(building_containing(bs, {35, 15, 1}));
    EXPECT_EQ(*building_containing(bs, {35, 15, 1}), 1);
}
