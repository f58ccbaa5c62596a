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

#ifndef LEORIS_LINKBUDGET_HPP
#define LEORIS_LINKBUDGET_HPP

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "constants.hpp"
#include "error.hpp"

namespace leoris
{
    inline double db_to_power(double db) { return std::pow(10.0, db / 10.0); }
    inline double db_to_amplitude(double db) { return std::pow(10.0, db / 20.0); }
    inline double power_to_db(double p) { return 10.0 * std::log10(p); }
    inline double dbm_to_watts(double dbm) { return db_to_power(dbm - 30.0); }
    inline double watts_to_dbm(double w) { return power_to_db(w) + 30.0; }

    // Building-entry loss classes (TR 38.901 style low/high loss buildings).
    enum class BuildingClass
    {
        traditional,
        thermally_efficient
    };

    inline std::string_view to_string(BuildingClass c)
    {
        return c == BuildingClass::traditional ? "traditional" : "thermally_efficient";
    }

    inline std::optional<BuildingClass> building_class_from_string(std::string_view s)
    {
        if (s == "traditional")
            return BuildingClass::traditional;
        if (s == "thermally_efficient")
            return BuildingClass::thermally_efficient;
        return std::nullopt;
    }

    struct BudgetConfig
    {
        double tx_power_dbm = 55.0;          // per satellite, whole band
        double sat_antenna_gain_dbi = 0.0;   // extra dish gain on top of the array model
        double noise_figure_db = 7.0;
        double antenna_temperature_k = 290.0;
        std::map<BuildingClass, double> o2i_loss_db{{BuildingClass::traditional, 20.0},
                                                    {BuildingClass::thermally_efficient, 40.0}};
        double polarization_loss_db = 0.0;

        // When set, the user antenna keeps the effective aperture of an isotropic
        // antenna at this frequency; its gain at fc is 20 log10(fc / reference).
        // Unset means an isotropic user antenna at every carrier.
        std::optional<double> receiver_aperture_reference_hz = 28e9;
    };

    inline void validate(const BudgetConfig &b)
    {
        if (!std::isfinite(b.tx_power_dbm) || !std::isfinite(b.sat_antenna_gain_dbi) ||
            !std::isfinite(b.noise_figure_db) || !std::isfinite(b.polarization_loss_db))
            throw InvalidInput("budget entries must be finite");
        if (!(b.antenna_temperature_k > 0.0) || !std::isfinite(b.antenna_temperature_k))
            throw InvalidInput("antenna temperature must be positive");
        for (const auto &[cls, loss] : b.o2i_loss_db)
            if (!(loss >= 0.0))
                throw InvalidInput("O2I loss must be non-negative for class " + std::string(to_string(cls)));
        if (b.receiver_aperture_reference_hz && !(*b.receiver_aperture_reference_hz > 0.0))
            throw InvalidInput("aperture reference frequency must be positive");
    }

    inline double free_space_path_loss(double d, double fc)
    {
        if (!(d > 0.0) || !(fc > 0.0))
            throw InvalidInput("path loss needs positive distance and frequency");
        return 20.0 * std::log10(4.0 * kPi * d * fc / kSpeedOfLight);
    }

    // Constant per building class; does not depend on satellite altitude.
    inline double o2i_penetration_loss(bool user_indoor, std::optional<BuildingClass> building_class, double fc,
                                       const BudgetConfig &budget = {})
    {
        if (!(fc > 0.0))
            throw InvalidInput("carrier frequency must be positive");
        if (!user_indoor)
            return 0.0;
        if (!building_class)
            throw MissingBuildingClass("indoor user without a building class");
        const auto it = budget.o2i_loss_db.find(*building_class);
        if (it == budget.o2i_loss_db.end())
            throw MissingBuildingClass("no O2I loss configured for class " + std::string(to_string(*building_class)));
        return it->second;
    }

    inline double noise_power_per_subcarrier(double subcarrier_spacing, double noise_figure_db, double temperature_k)
    {
        if (!(subcarrier_spacing > 0.0) || !(temperature_k > 0.0) || !std::isfinite(noise_figure_db))
            throw InvalidInput("noise power needs positive spacing and temperature");
        return kBoltzmann * temperature_k * subcarrier_spacing * db_to_power(noise_figure_db);
    }

    inline double receiver_gain_db(const BudgetConfig &b, double fc)
    {
        if (!b.receiver_aperture_reference_hz)
            return 0.0;
        return 20.0 * std::log10(fc / *b.receiver_aperture_reference_hz);
    }

    struct Leg
    {
        double distance_m = 0.0;
        double fc_hz = 0.0;
    };

    struct PathBudget
    {
        double rx_amplitude_linear = 0.0; // field amplitude relative to 1 W
        double fspl_db = 0.0;             // summed over legs
        double o2i_db = 0.0;
        double aggregate_gain_db = 0.0;   // sum(gains) - fspl - o2i
    };

    // Cascaded legs multiply in amplitude, i.e. their losses add in dB. An
    // infinite O2I loss yields a zero amplitude (fully blocked path).
    inline PathBudget path_amplitude(std::span<const Leg> legs, std::span<const double> gains_db, double o2i_db)
    {
        if (legs.empty())
            throw InvalidInput("a path needs at least one leg");
        if (!(o2i_db >= 0.0))
            throw InvalidInput("O2I loss must be non-negative");
        PathBudget pb;
        for (const auto &leg : legs)
            pb.fspl_db += free_space_path_loss(leg.distance_m, leg.fc_hz);
        double gain = 0.0;
        for (double g : gains_db)
        {
            if (!std::isfinite(g))
                throw InvalidInput("gains must be finite");
            gain += g;
        }
        pb.o2i_db = o2i_db;
        pb.aggregate_gain_db = gain - pb.fspl_db - o2i_db;
        pb.rx_amplitude_linear = std::isinf(o2i_db) ? 0.0 : db_to_amplitude(pb.aggregate_gain_db);
        return pb;
    }
}

#endif
