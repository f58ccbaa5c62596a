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

#ifndef LEORIS_SCENARIO_HPP
#define LEORIS_SCENARIO_HPP

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "channel.hpp"
#include "constellation.hpp"
#include "environment.hpp"
#include "error.hpp"
#include "fim.hpp"
#include "linkbudget.hpp"

namespace leoris
{
    using json = nlohmann::json;

    enum class Experiment
    {
        satcount_sweep,
        area_map
    };

    struct ConstellationConfig
    {
        std::string name = "leo";
        double altitude_m = 600e3;
        double elevation_mask_deg = 10.0;
        int array_rows = 8;
        int array_cols = 8;
        double fc_hz = 28e9;
        double tx_power_dbm = 55.0;
    };

    struct PanelConfig
    {
        Point3 position = Point3::Zero();
        Eigen::Vector3d normal = Eigen::Vector3d::UnitX();
        int rows = 20;
        int cols = 20;
        RisMode mode = RisMode::active_star;
        double epsilon = 0.5;
        double supply_power_dbm = 0.0;
        std::optional<double> amplifier_noise_figure_db = 7.0;
    };

    struct UserConfig
    {
        std::string name;
        Point3 position = Point3::Zero();
        bool indoor = false;
    };

    struct SweepLabel
    {
        std::string label;
        std::string constellation;
        bool ris = false;
        std::string user;
    };

    struct SatcountConfig
    {
        int min_count = 1;
        int max_count = 12;
        bool nested = true;
        std::vector<SweepLabel> labels;
    };

    struct AreaMapConfig
    {
        std::string constellation = "leo";
        int satellites = 10;
        double x_min = -50.0, x_max = 50.0;
        double y_min = -50.0, y_max = 50.0;
        int cells_x = 50, cells_y = 50;
        double user_height_m = 1.5;
        std::vector<double> epsilons{0.25, 0.5, 0.75};
    };

    struct ScenarioConfig
    {
        std::string name = "scenario";
        Experiment experiment = Experiment::satcount_sweep;
        std::vector<std::uint64_t> seeds;
        bool clock_bias_unknown = false;
        bool separate_satellites = true;
        WaveformConfig waveform;
        BudgetConfig budget;
        std::vector<ConstellationConfig> constellations;
        std::vector<Building> buildings;
        std::vector<PanelConfig> ris_panels;
        std::vector<UserConfig> users;
        SatcountConfig satcount;
        AreaMapConfig area_map;

        const ConstellationConfig &constellation(const std::string &name) const
        {
            for (const auto &c : constellations)
                if (c.name == name)
                    return c;
            throw ScenarioInvalid("unknown constellation '" + name + "'");
        }

        const UserConfig &user(const std::string &name) const
        {
            for (const auto &u : users)
                if (u.name == name)
                    return u;
            throw ScenarioInvalid("unknown user '" + name + "'");
        }
    };

    // ---------- Defaults ----------

    namespace defaults
    {
        inline std::vector<ConstellationConfig> constellations()
        {
            ConstellationConfig leo;
            ConstellationConfig meo;
            meo.name = "meo";
            meo.altitude_m = 10000e3;
            meo.fc_hz = 1.575e9;
            meo.tx_power_dbm = 65.0;
            return {leo, meo};
        }

        inline std::vector<std::uint64_t> seeds(Experiment e)
        {
            if (e == Experiment::area_map)
                return {1};
            std::vector<std::uint64_t> s;
            for (std::uint64_t i = 1; i <= 20; ++i)
                s.push_back(i);
            return s;
        }

        // One building with an active STAR panel on its south facade; users
        // 15 m from the panel on either side.
        inline std::vector<Building> buildings(Experiment e)
        {
            if (e == Experiment::area_map)
                return {Building{-44.0, -30.0, -16.0, 30.0, 20.0, BuildingClass::traditional},
                        Building{16.0, -30.0, 44.0, 30.0, 20.0, BuildingClass::traditional}};
            return {Building{-20.0, 0.0, 20.0, 30.0, 10.0, BuildingClass::traditional}};
        }

        inline std::vector<PanelConfig> panels(Experiment e)
        {
            PanelConfig p;
            if (e == Experiment::area_map)
            {
                PanelConfig a = p, b = p;
                a.position = {-16.0, 0.0, 5.0};
                a.normal = {1.0, 0.0, 0.0};
                b.position = {16.0, 0.0, 5.0};
                b.normal = {-1.0, 0.0, 0.0};
                return {a, b};
            }
            p.position = {0.0, 0.0, 3.0};
            p.normal = {0.0, -1.0, 0.0};
            return {p};
        }

        inline std::vector<UserConfig> users(Experiment e)
        {
            if (e == Experiment::area_map)
                return {};
            // 15 m from the panel centre, 1.5 m below it.
            const double dy = std::sqrt(15.0 * 15.0 - 1.5 * 1.5);
            return {UserConfig{"indoor", {0.0, dy, 1.5}, true}, UserConfig{"outdoor", {0.0, -dy, 1.5}, false}};
        }

        inline std::vector<SweepLabel> labels()
        {
            return {{"leo_ris_indoor", "leo", true, "indoor"}, {"leo_ris_outdoor", "leo", true, "outdoor"},
                    {"leo_indoor", "leo", false, "indoor"},    {"leo_outdoor", "leo", false, "outdoor"},
                    {"meo_indoor", "meo", false, "indoor"},    {"meo_outdoor", "meo", false, "outdoor"}};
        }
    }

    // ---------- JSON reading ----------

    namespace detail
    {
        // Reads one JSON object, tracking consumed keys so unknown keys can be
        // rejected with their full path.
        class ObjectReader
        {
        public:
            ObjectReader(const json &j, std::string path) : j_(j), path_(std::move(path))
            {
                if (!j_.is_object())
                    throw ValidationError(path_.empty() ? "<root>" : path_, "expected an object");
            }

            std::string field(const std::string &key) const { return path_.empty() ? key : path_ + "." + key; }

            const json *find(const std::string &key)
            {
                seen_.insert(key);
                auto it = j_.find(key);
                return it == j_.end() || it->is_null() ? nullptr : &*it;
            }

            double number(const std::string &key, double fallback)
            {
                const json *v = find(key);
                return v ? to_number(*v, field(key)) : fallback;
            }

            std::optional<double> optional_number(const std::string &key, std::optional<double> fallback)
            {
                seen_.insert(key);
                auto it = j_.find(key);
                if (it == j_.end())
                    return fallback;
                if (it->is_null())
                    return std::nullopt;
                return to_number(*it, field(key));
            }

            int integer(const std::string &key, int fallback)
            {
                const json *v = find(key);
                if (!v)
                    return fallback;
                if (!v->is_number_integer())
                    throw ValidationError(field(key), "expected an integer");
                return v->get<int>();
            }

            bool boolean(const std::string &key, bool fallback)
            {
                const json *v = find(key);
                if (!v)
                    return fallback;
                if (!v->is_boolean())
                    throw ValidationError(field(key), "expected true or false");
                return v->get<bool>();
            }

            std::string string(const std::string &key, const std::string &fallback)
            {
                const json *v = find(key);
                if (!v)
                    return fallback;
                if (!v->is_string())
                    throw ValidationError(field(key), "expected a string");
                return v->get<std::string>();
            }

            Eigen::Vector3d vec3(const std::string &key, const Eigen::Vector3d &fallback)
            {
                const json *v = find(key);
                if (!v)
                    return fallback;
                if (!v->is_array() || v->size() != 3)
                    throw ValidationError(field(key), "expected [x, y, z]");
                Eigen::Vector3d out;
                for (int i = 0; i < 3; ++i)
                    out[i] = to_number((*v)[static_cast<std::size_t>(i)], field(key) + "[" + std::to_string(i) + "]");
                return out;
            }

            void finish() const
            {
                for (auto it = j_.begin(); it != j_.end(); ++it)
                    if (!seen_.count(it.key()))
                        throw ValidationError(field(it.key()), "unknown key");
            }

            static double to_number(const json &v, const std::string &where)
            {
                if (v.is_number())
                    return v.get<double>();
                if (v.is_string() && (v == "inf" || v == "Infinity"))
                    return std::numeric_limits<double>::infinity();
                throw ValidationError(where, "expected a number");
            }

        private:
            const json &j_;
            std::string path_;
            std::set<std::string> seen_;
        };

        inline std::string indexed(const std::string &path, std::size_t i)
        {
            return path + "[" + std::to_string(i) + "]";
        }

        inline const json &array_at(const json &j, const std::string &where)
        {
            if (!j.is_array())
                throw ValidationError(where, "expected an array");
            return j;
        }
    }

    inline std::string_view to_string(Experiment e)
    {
        return e == Experiment::area_map ? "area_map" : "satcount_sweep";
    }

    // Checks cross-field invariants; throws ValidationError with the field path.
    inline void validate(const ScenarioConfig &c)
    {
        const auto &w = c.waveform;
        if (!(w.fc > 0.0) || !std::isfinite(w.fc))
            throw ValidationError("waveform.fc_hz", "must be positive");
        if (!(w.bandwidth > 0.0) || !std::isfinite(w.bandwidth))
            throw ValidationError("waveform.bandwidth_hz", "must be positive");
        if (w.n_subcarriers < 1)
            throw ValidationError("waveform.n_subcarriers", "must be at least 1");
        if (w.n_transmissions < 1)
            throw ValidationError("waveform.n_transmissions", "must be at least 1");
        if (w.symbol_period && !(*w.symbol_period * w.spacing() >= 1.0 - 1e-12))
            throw ValidationError("waveform.symbol_period_s", "must be at least 1 / subcarrier spacing");
        try
        {
            validate(c.budget);
        }
        catch (const InvalidInput &e)
        {
            throw ValidationError("budget", e.what());
        }
        if (c.seeds.empty())
            throw ValidationError("seeds", "need at least one seed");

        std::set<std::string> names;
        for (std::size_t i = 0; i < c.constellations.size(); ++i)
        {
            const auto &k = c.constellations[i];
            const std::string p = detail::indexed("constellations", i);
            if (!names.insert(k.name).second)
                throw ValidationError(p + ".name", "duplicate constellation name");
            if (!(k.altitude_m > 0.0) || !std::isfinite(k.altitude_m))
                throw ValidationError(p + ".altitude_m", "must be positive");
            if (!(k.elevation_mask_deg >= 0.0 && k.elevation_mask_deg < 90.0))
                throw ValidationError(p + ".elevation_mask_deg", "must lie in [0, 90)");
            if (k.array_rows < 1 || k.array_cols < 1)
                throw ValidationError(p + ".array_rows", "array needs at least one element");
            if (!(k.fc_hz > 0.0) || !std::isfinite(k.fc_hz))
                throw ValidationError(p + ".fc_hz", "must be positive");
            if (!std::isfinite(k.tx_power_dbm))
                throw ValidationError(p + ".tx_power_dbm", "must be finite");
        }

        for (std::size_t i = 0; i < c.buildings.size(); ++i)
        {
            const auto &b = c.buildings[i];
            const std::string p = detail::indexed("buildings", i);
            if (!(b.x_max > b.x_min) || !(b.y_max > b.y_min))
                throw ValidationError(p, "footprint must have positive extent");
            if (!(b.height > 0.0))
                throw ValidationError(p + ".height_m", "must be positive");
            if (!c.budget.o2i_loss_db.count(b.building_class))
                throw ValidationError(p + ".class", "no O2I loss configured for this class");
        }

        for (std::size_t i = 0; i < c.ris_panels.size(); ++i)
        {
            const auto &r = c.ris_panels[i];
            const std::string p = detail::indexed("ris_panels", i);
            if (!(r.epsilon >= 0.0 && r.epsilon <= 1.0))
                throw ValidationError(p + ".epsilon", "must lie in [0, 1]");
            if (r.rows < 1 || r.cols < 1)
                throw ValidationError(p + ".rows", "panel needs at least one element");
            if (!(r.normal.norm() > 0.0))
                throw ValidationError(p + ".normal", "must be non-zero");
            if (!std::isfinite(r.supply_power_dbm))
                throw ValidationError(p + ".supply_power_dbm", "must be finite");
            if (has_refraction(r.mode))
            {
                bool on_facade = false;
                for (const auto &b : c.buildings)
                    if (auto n = facade_normal(b, r.position))
                        on_facade = on_facade || n->dot(r.normal.normalized()) > 1.0 - 1e-9;
                if (!on_facade)
                    throw ValidationError(p + ".position", "STAR panel must sit on a building facade, facing out");
            }
        }

        for (std::size_t i = 0; i < c.users.size(); ++i)
        {
            const auto &u = c.users[i];
            const std::string p = detail::indexed("users", i);
            const bool inside = building_containing(c.buildings, u.position).has_value();
            if (u.indoor && !inside)
                throw ValidationError(p + ".position", "indoor user lies outside every building");
            if (!u.indoor && inside)
                throw ValidationError(p + ".indoor", "user inside a building must be flagged indoor");
        }

        auto has_constellation = [&](const std::string &n) {
            return std::any_of(c.constellations.begin(), c.constellations.end(),
                               [&](const auto &k) { return k.name == n; });
        };
        if (c.experiment == Experiment::satcount_sweep)
        {
            const auto &s = c.satcount;
            if (s.min_count < 0 || s.max_count < s.min_count)
                throw ValidationError("satcount_sweep.max_count", "count range is empty");
            if (s.labels.empty())
                throw ValidationError("satcount_sweep.labels", "need at least one label");
            std::set<std::string> seen;
            for (std::size_t i = 0; i < s.labels.size(); ++i)
            {
                const auto &l = s.labels[i];
                const std::string p = detail::indexed("satcount_sweep.labels", i);
                if (l.label.empty() || l.label.find_first_of(",\"\n") != std::string::npos)
                    throw ValidationError(p + ".label", "must be non-empty without commas or quotes");
                if (!seen.insert(l.label).second)
                    throw ValidationError(p + ".label", "duplicate label");
                if (!has_constellation(l.constellation))
                    throw ValidationError(p + ".constellation", "unknown constellation");
                if (!std::any_of(c.users.begin(), c.users.end(), [&](const auto &u) { return u.name == l.user; }))
                    throw ValidationError(p + ".user", "unknown user");
            }
        }
        else
        {
            const auto &a = c.area_map;
            if (!has_constellation(a.constellation))
                throw ValidationError("area_map.constellation", "unknown constellation");
            if (a.satellites < 0)
                throw ValidationError("area_map.satellites", "must be non-negative");
            if (!(a.x_max > a.x_min) || !(a.y_max > a.y_min))
                throw ValidationError("area_map.x_max", "grid bounds must have positive extent");
            if (a.cells_x < 1 || a.cells_y < 1)
                throw ValidationError("area_map.cells_x", "need at least one cell");
            if (a.epsilons.empty())
                throw ValidationError("area_map.epsilons", "need at least one value");
            for (std::size_t i = 0; i < a.epsilons.size(); ++i)
                if (!(a.epsilons[i] >= 0.0 && a.epsilons[i] <= 1.0))
                    throw ValidationError(detail::indexed("area_map.epsilons", i), "must lie in [0, 1]");
        }
    }

    inline ScenarioConfig config_from_json(const json &root)
    {
        using detail::ObjectReader;
        ObjectReader r(root, "");
        ScenarioConfig c;
        c.name = r.string("name", c.name);
        const std::string exp = r.string("experiment", "satcount_sweep");
        if (exp == "satcount_sweep")
            c.experiment = Experiment::satcount_sweep;
        else if (exp == "area_map")
            c.experiment = Experiment::area_map;
        else
            throw ValidationError("experiment", "expected satcount_sweep or area_map");

        if (const json *s = r.find("seeds"))
        {
            detail::array_at(*s, "seeds");
            for (std::size_t i = 0; i < s->size(); ++i)
            {
                if (!(*s)[i].is_number_unsigned() && !((*s)[i].is_number_integer() && (*s)[i].get<long long>() >= 0))
                    throw ValidationError(detail::indexed("seeds", i), "expected a non-negative integer");
                c.seeds.push_back((*s)[i].get<std::uint64_t>());
            }
        }
        else
            c.seeds = defaults::seeds(c.experiment);

        const std::string bias = r.string("clock_bias_mode", "known");
        if (bias != "known" && bias != "unknown")
            throw ValidationError("clock_bias_mode", "expected known or unknown");
        c.clock_bias_unknown = bias == "unknown";

        const std::string signals = r.string("satellite_signals", "separated");
        if (signals != "separated" && signals != "superposed")
            throw ValidationError("satellite_signals", "expected separated or superposed");
        c.separate_satellites = signals == "separated";

        if (const json *w = r.find("waveform"))
        {
            ObjectReader o(*w, "waveform");
            c.waveform.fc = o.number("fc_hz", c.waveform.fc);
            c.waveform.bandwidth = o.number("bandwidth_hz", c.waveform.bandwidth);
            c.waveform.n_subcarriers = o.integer("n_subcarriers", c.waveform.n_subcarriers);
            c.waveform.n_transmissions = o.integer("n_transmissions", c.waveform.n_transmissions);
            c.waveform.symbol_period = o.optional_number("symbol_period_s", std::nullopt);
            o.finish();
        }

        if (const json *b = r.find("budget"))
        {
            ObjectReader o(*b, "budget");
            c.budget.tx_power_dbm = o.number("tx_power_dbm", c.budget.tx_power_dbm);
            c.budget.sat_antenna_gain_dbi = o.number("sat_antenna_gain_dbi", c.budget.sat_antenna_gain_dbi);
            c.budget.noise_figure_db = o.number("noise_figure_db", c.budget.noise_figure_db);
            c.budget.antenna_temperature_k = o.number("antenna_temperature_k", c.budget.antenna_temperature_k);
            c.budget.polarization_loss_db = o.number("polarization_loss_db", c.budget.polarization_loss_db);
            c.budget.receiver_aperture_reference_hz =
                o.optional_number("receiver_aperture_reference_hz", c.budget.receiver_aperture_reference_hz);
            if (const json *l = o.find("o2i_loss_db"))
            {
                ObjectReader lo(*l, "budget.o2i_loss_db");
                for (auto cls : {BuildingClass::traditional, BuildingClass::thermally_efficient})
                {
                    const std::string key(to_string(cls));
                    c.budget.o2i_loss_db[cls] = lo.number(key, c.budget.o2i_loss_db[cls]);
                }
                lo.finish();
            }
            o.finish();
        }

        if (const json *k = r.find("constellations"))
        {
            detail::array_at(*k, "constellations");
            for (std::size_t i = 0; i < k->size(); ++i)
            {
                ObjectReader o((*k)[i], detail::indexed("constellations", i));
                ConstellationConfig cc;
                cc.name = o.string("name", "");
                if (cc.name.empty())
                    throw ValidationError(o.field("name"), "required");
                cc.altitude_m = o.number("altitude_m", cc.altitude_m);
                cc.elevation_mask_deg = o.number("elevation_mask_deg", cc.elevation_mask_deg);
                cc.array_rows = o.integer("array_rows", cc.array_rows);
                cc.array_cols = o.integer("array_cols", cc.array_cols);
                cc.fc_hz = o.number("fc_hz", c.waveform.fc);
                cc.tx_power_dbm = o.number("tx_power_dbm", c.budget.tx_power_dbm);
                o.finish();
                c.constellations.push_back(cc);
            }
        }
        else
        {
            c.constellations = defaults::constellations();
            c.constellations[0].fc_hz = c.waveform.fc;
            c.constellations[0].tx_power_dbm = c.budget.tx_power_dbm;
        }

        if (const json *b = r.find("buildings"))
        {
            detail::array_at(*b, "buildings");
            for (std::size_t i = 0; i < b->size(); ++i)
            {
                ObjectReader o((*b)[i], detail::indexed("buildings", i));
                Building bd;
                bd.x_min = o.number("x_min", 0.0);
                bd.y_min = o.number("y_min", 0.0);
                bd.x_max = o.number("x_max", 0.0);
                bd.y_max = o.number("y_max", 0.0);
                bd.height = o.number("height_m", bd.height);
                const std::string cls = o.string("class", "traditional");
                const auto parsed = building_class_from_string(cls);
                if (!parsed)
                    throw ValidationError(o.field("class"), "expected traditional or thermally_efficient");
                bd.building_class = *parsed;
                o.finish();
                c.buildings.push_back(bd);
            }
        }
        else
            c.buildings = defaults::buildings(c.experiment);

        if (const json *p = r.find("ris_panels"))
        {
            detail::array_at(*p, "ris_panels");
            for (std::size_t i = 0; i < p->size(); ++i)
            {
                ObjectReader o((*p)[i], detail::indexed("ris_panels", i));
                PanelConfig pc;
                pc.position = o.vec3("position", pc.position);
                pc.normal = o.vec3("normal", pc.normal);
                pc.rows = o.integer("rows", pc.rows);
                pc.cols = o.integer("cols", pc.cols);
                const std::string mode = o.string("mode", std::string(to_string(pc.mode)));
                const auto m = ris_mode_from_string(mode);
                if (!m)
                    throw ValidationError(o.field("mode"), "expected reflect_only, active_reflect, star or active_star");
                pc.mode = *m;
                pc.epsilon = o.number("epsilon", pc.epsilon);
                pc.supply_power_dbm = o.number("supply_power_dbm", pc.supply_power_dbm);
                pc.amplifier_noise_figure_db =
                    o.optional_number("amplifier_noise_figure_db", pc.amplifier_noise_figure_db);
                o.finish();
                c.ris_panels.push_back(pc);
            }
        }
        else
            c.ris_panels = defaults::panels(c.experiment);

        if (const json *u = r.find("users"))
        {
            detail::array_at(*u, "users");
            for (std::size_t i = 0; i < u->size(); ++i)
            {
                ObjectReader o((*u)[i], detail::indexed("users", i));
                UserConfig uc;
                uc.name = o.string("name", "user" + std::to_string(i));
                uc.position = o.vec3("position", uc.position);
                uc.indoor = o.boolean("indoor", false);
                o.finish();
                c.users.push_back(uc);
            }
        }
        else
            c.users = defaults::users(c.experiment);

        if (const json *s = r.find("satcount_sweep"))
        {
            ObjectReader o(*s, "satcount_sweep");
            c.satcount.min_count = o.integer("min_count", c.satcount.min_count);
            c.satcount.max_count = o.integer("max_count", c.satcount.max_count);
            const std::string draw = o.string("draw_mode", "nested");
            if (draw != "nested" && draw != "independent")
                throw ValidationError(o.field("draw_mode"), "expected nested or independent");
            c.satcount.nested = draw == "nested";
            if (const json *l = o.find("labels"))
            {
                detail::array_at(*l, "satcount_sweep.labels");
                for (std::size_t i = 0; i < l->size(); ++i)
                {
                    ObjectReader lo((*l)[i], detail::indexed("satcount_sweep.labels", i));
                    SweepLabel sl;
                    sl.label = lo.string("label", "");
                    sl.constellation = lo.string("constellation", "leo");
                    sl.ris = lo.boolean("ris", false);
                    sl.user = lo.string("user", "");
                    lo.finish();
                    c.satcount.labels.push_back(sl);
                }
            }
            else
                c.satcount.labels = defaults::labels();
            o.finish();
        }
        else
            c.satcount.labels = defaults::labels();

        if (const json *a = r.find("area_map"))
        {
            ObjectReader o(*a, "area_map");
            auto &m = c.area_map;
            m.constellation = o.string("constellation", m.constellation);
            m.satellites = o.integer("satellites", m.satellites);
            m.x_min = o.number("x_min", m.x_min);
            m.x_max = o.number("x_max", m.x_max);
            m.y_min = o.number("y_min", m.y_min);
            m.y_max = o.number("y_max", m.y_max);
            m.cells_x = o.integer("cells_x", m.cells_x);
            m.cells_y = o.integer("cells_y", m.cells_y);
            m.user_height_m = o.number("user_height_m", m.user_height_m);
            if (const json *e = o.find("epsilons"))
            {
                detail::array_at(*e, "area_map.epsilons");
                m.epsilons.clear();
                for (std::size_t i = 0; i < e->size(); ++i)
                    m.epsilons.push_back(ObjectReader::to_number((*e)[i], detail::indexed("area_map.epsilons", i)));
            }
            o.finish();
        }
        r.finish();
        validate(c);
        return c;
    }

    inline json to_json(const ScenarioConfig &c)
    {
        auto num = [](double v) -> json {
            if (std::isinf(v))
                return v > 0 ? "inf" : "-inf";
            return v;
        };
        auto vec = [&](const Eigen::Vector3d &v) { return json::array({num(v.x()), num(v.y()), num(v.z())}); };
        json j;
        j["name"] = c.name;
        j["experiment"] = std::string(to_string(c.experiment));
        j["seeds"] = c.seeds;
        j["clock_bias_mode"] = c.clock_bias_unknown ? "unknown" : "known";
        j["satellite_signals"] = c.separate_satellites ? "separated" : "superposed";
        j["waveform"] = {{"fc_hz", c.waveform.fc},
                         {"bandwidth_hz", c.waveform.bandwidth},
                         {"n_subcarriers", c.waveform.n_subcarriers},
                         {"n_transmissions", c.waveform.n_transmissions},
                         {"symbol_period_s", c.waveform.symbol_period ? json(*c.waveform.symbol_period) : json()}};
        json o2i = json::object();
        for (const auto &[cls, loss] : c.budget.o2i_loss_db)
            o2i[std::string(to_string(cls))] = num(loss);
        j["budget"] = {{"tx_power_dbm", c.budget.tx_power_dbm},
                       {"sat_antenna_gain_dbi", c.budget.sat_antenna_gain_dbi},
                       {"noise_figure_db", c.budget.noise_figure_db},
                       {"antenna_temperature_k", c.budget.antenna_temperature_k},
                       {"polarization_loss_db", c.budget.polarization_loss_db},
                       {"receiver_aperture_reference_hz", c.budget.receiver_aperture_reference_hz
                                                              ? json(*c.budget.receiver_aperture_reference_hz)
                                                              : json()},
                       {"o2i_loss_db", o2i}};
        j["constellations"] = json::array();
        for (const auto &k : c.constellations)
            j["constellations"].push_back({{"name", k.name},
                                           {"altitude_m", k.altitude_m},
                                           {"elevation_mask_deg", k.elevation_mask_deg},
                                           {"array_rows", k.array_rows},
                                           {"array_cols", k.array_cols},
                                           {"fc_hz", k.fc_hz},
                                           {"tx_power_dbm", k.tx_power_dbm}});
        j["buildings"] = json::array();
        for (const auto &b : c.buildings)
            j["buildings"].push_back({{"x_min", b.x_min},
                                      {"y_min", b.y_min},
                                      {"x_max", b.x_max},
                                      {"y_max", b.y_max},
                                      {"height_m", b.height},
                                      {"class", std::string(to_string(b.building_class))}});
        j["ris_panels"] = json::array();
        for (const auto &p : c.ris_panels)
            j["ris_panels"].push_back(
                {{"position", vec(p.position)},
                 {"normal", vec(p.normal)},
                 {"rows", p.rows},
                 {"cols", p.cols},
                 {"mode", std::string(to_string(p.mode))},
                 {"epsilon", p.epsilon},
                 {"supply_power_dbm", p.supply_power_dbm},
                 {"amplifier_noise_figure_db", p.amplifier_noise_figure_db ? json(*p.amplifier_noise_figure_db) : json()}});
        j["users"] = json::array();
        for (const auto &u : c.users)
            j["users"].push_back({{"name", u.name}, {"position", vec(u.position)}, {"indoor", u.indoor}});
        json labels = json::array();
        for (const auto &l : c.satcount.labels)
            labels.push_back({{"label", l.label}, {"constellation", l.constellation}, {"ris", l.ris}, {"user", l.user}});
        j["satcount_sweep"] = {{"min_count", c.satcount.min_count},
                               {"max_count", c.satcount.max_count},
                               {"draw_mode", c.satcount.nested ? "nested" : "independent"},
                               {"labels", labels}};
        const auto &m = c.area_map;
        j["area_map"] = {{"constellation", m.constellation},
                         {"satellites", m.satellites},
                         {"x_min", m.x_min},
                         {"x_max", m.x_max},
                         {"y_min", m.y_min},
                         {"y_max", m.y_max},
                         {"cells_x", m.cells_x},
                         {"cells_y", m.cells_y},
                         {"user_height_m", m.user_height_m},
                         {"epsilons", m.epsilons}};
        return j;
    }

    // Applies `a.b[2].c=value` to a JSON document. The value is read as JSON
    // when it parses, otherwise as a string.
    inline void apply_override(json &doc, const std::string &assignment)
    {
        const auto eq = assignment.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ValidationError(assignment, "override must look like key=value");
        const std::string path = assignment.substr(0, eq);
        const std::string text = assignment.substr(eq + 1);
        json value = json::parse(text, nullptr, false);
        if (value.is_discarded())
            value = text;

        json *node = &doc;
        std::size_t pos = 0;
        while (pos < path.size())
        {
            std::size_t end = path.find_first_of(".[", pos);
            const std::string key = path.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
            if (!key.empty())
            {
                if (!node->is_object())
                    throw ValidationError(path, "cannot descend into a non-object");
                node = &(*node)[key];
            }
            if (end == std::string::npos)
                break;
            if (path[end] == '[')
            {
                const std::size_t close = path.find(']', end);
                if (close == std::string::npos)
                    throw ValidationError(path, "unbalanced index");
                std::size_t idx = 0;
                try
                {
                    idx = std::stoul(path.substr(end + 1, close - end - 1));
                }
                catch (const std::exception &)
                {
                    throw ValidationError(path, "bad array index");
                }
                if (!node->is_array() || idx >= node->size())
                    throw ValidationError(path, "array index out of range");
                node = &(*node)[idx];
                pos = close + 1;
                if (pos < path.size() && path[pos] == '.')
                    ++pos;
            }
            else
                pos = end + 1;
        }
        *node = value;
    }

    inline json parse_json_text(const std::string &text)
    {
        try
        {
            return json::parse(text);
        }
        catch (const json::parse_error &e)
        {
            throw ParseError(std::string("malformed JSON: ") + e.what());
        }
    }

    inline ScenarioConfig parse_config(const std::string &text, const std::vector<std::string> &overrides = {})
    {
        json doc = parse_json_text(text);
        for (const auto &o : overrides)
            apply_override(doc, o);
        return config_from_json(doc);
    }

    // ---------- Execution ----------

    // Worker count from LEORIS_THREADS; unset or 0 means all hardware threads.
    inline unsigned worker_count()
    {
        unsigned n = 0;
        if (const char *env = std::getenv("LEORIS_THREADS"))
            n = static_cast<unsigned>(std::strtoul(env, nullptr, 10));
        if (n == 0)
            n = std::max(1u, std::thread::hardware_concurrency());
        return n;
    }

    // Runs fn(i) for i in [0, n). Results must be written to slot i so the
    // outcome does not depend on scheduling.
    template <typename Fn>
    void parallel_for(std::size_t n, Fn &&fn, unsigned threads = worker_count())
    {
        threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), std::max<std::size_t>(n, 1)));
        if (threads <= 1)
        {
            for (std::size_t i = 0; i < n; ++i)
                fn(i);
            return;
        }
        std::atomic<std::size_t> next{0};
        std::exception_ptr error;
        std::mutex mu;
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < threads; ++w)
            pool.emplace_back([&] {
                for (;;)
                {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= n)
                        return;
                    try
                    {
                        fn(i);
                    }
                    catch (...)
                    {
                        std::lock_guard<std::mutex> lock(mu);
                        if (!error)
                            error = std::current_exception();
                        next = n;
                    }
                }
            });
        for (auto &t : pool)
            t.join();
        if (error)
            std::rethrow_exception(error);
    }

    inline ConstellationSpec constellation_spec(const ConstellationConfig &k, int count, std::uint64_t seed)
    {
        ConstellationSpec s;
        s.count = count;
        s.altitude_m = k.altitude_m;
        s.elevation_mask_rad = k.elevation_mask_deg * kPi / 180.0;
        s.rng_seed = seed;
        s.array_rows = k.array_rows;
        s.array_cols = k.array_cols;
        return s;
    }

    inline std::vector<RisPanel> make_panels(const std::vector<PanelConfig> &cfg)
    {
        std::vector<RisPanel> out;
        for (const auto &p : cfg)
        {
            RisPanel r;
            r.position = p.position;
            r.orientation = OrientationFrame::facing(p.normal.normalized());
            r.rows = p.rows;
            r.cols = p.cols;
            r.mode = p.mode;
            r.epsilon = p.epsilon;
            r.supply_power_dbm = p.supply_power_dbm;
            r.amplifier_noise_figure_db = p.amplifier_noise_figure_db;
            out.push_back(std::move(r));
        }
        return out;
    }

    // Scene for one constellation draw; the carrier and transmit power follow
    // the constellation.
    inline Scene scene_for(const ScenarioConfig &c, const ConstellationConfig &k, std::vector<SatelliteState> sats,
                           bool with_ris, std::uint64_t seed, std::optional<double> epsilon = std::nullopt)
    {
        WaveformConfig w = c.waveform;
        w.fc = k.fc_hz;
        BudgetConfig b = c.budget;
        b.tx_power_dbm = k.tx_power_dbm;
        std::vector<PanelConfig> pcfg;
        if (with_ris)
        {
            pcfg = c.ris_panels;
            if (epsilon)
                for (auto &p : pcfg)
                    p.epsilon = *epsilon;
        }
        Scene scene = make_scene(w, b, std::move(sats), make_panels(pcfg), c.buildings, c.clock_bias_unknown, seed);
        scene.separate_satellites = c.separate_satellites;
        return scene;
    }

    inline double user_peb(const Scene &scene, const Point3 &user)
    {
        if (scene.satellites.empty())
            return std::numeric_limits<double>::infinity();
        ObservationModel model(scene, user);
        return compute_peb(model).peb_m;
    }

    struct SweepRow
    {
        std::string label;
        int sweep = 0;
        std::uint64_t seed = 0;
        double peb_m = 0.0;
    };

    struct SweepResult
    {
        std::vector<SweepRow> rows;
    };

    // Satellites of a k-satellite draw. Nested draws share the first k - 1
    // satellites with the (k - 1)-draw; independent draws re-key the stream by k.
    inline std::vector<SatelliteState> draw_for_count(const ConstellationConfig &k, int count, std::uint64_t seed,
                                                      bool nested)
    {
        if (count == 0)
            return {};
        const std::uint64_t s = nested ? seed : Rng(seed, {stream::scenario, static_cast<std::uint64_t>(count)}).next();
        return draw_constellation(constellation_spec(k, count, s));
    }

    inline SweepResult run_satcount_sweep(const ScenarioConfig &c, unsigned threads = worker_count())
    {
        if (c.experiment != Experiment::satcount_sweep)
            throw ScenarioInvalid("configuration is not a satellite-count sweep");
        const auto &s = c.satcount;
        const int counts = s.max_count - s.min_count + 1;
        SweepResult res;
        for (const auto &l : s.labels)
            for (int k = s.min_count; k <= s.max_count; ++k)
                for (auto seed : c.seeds)
                    res.rows.push_back({l.label, k, seed, 0.0});
        const std::size_t per_label = static_cast<std::size_t>(counts) * c.seeds.size();
        parallel_for(
            res.rows.size(),
            [&](std::size_t i) {
                const auto &l = s.labels[i / per_label];
                auto &row = res.rows[i];
                const auto &k = c.constellation(l.constellation);
                const std::uint64_t beam_seed =
                    s.nested ? row.seed
                             : Rng(row.seed, {stream::scenario, static_cast<std::uint64_t>(row.sweep)}).next();
                Scene scene = scene_for(c, k, draw_for_count(k, row.sweep, row.seed, s.nested), l.ris, beam_seed);
                row.peb_m = user_peb(scene, c.user(l.user).position);
            },
            threads);
        return res;
    }

    struct GridRow
    {
        double x_m = 0.0;
        double y_m = 0.0;
        bool indoor = false;
        double epsilon = 0.0;
        double peb_m = 0.0;
    };

    struct GridResult
    {
        std::vector<GridRow> rows;
    };

    inline double median(std::vector<double> v)
    {
        if (v.empty())
            return std::numeric_limits<double>::quiet_NaN();
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        if (n % 2 == 1)
            return v[n / 2];
        const double a = v[n / 2 - 1], b = v[n / 2];
        if (std::isinf(a) || std::isinf(b))
            return std::isinf(a) ? a : b;
        return 0.5 * (a + b);
    }

    inline std::string format_number(double v)
    {
        if (std::isinf(v))
            return v > 0 ? "inf" : "-inf";
        if (std::isnan(v))
            return "nan";
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.9g", v);
        return buf;
    }

    // Value as it appears in the CSV, so summaries match the files.
    inline double as_written(double v) { return std::strtod(format_number(v).c_str(), nullptr); }

    // Cells are ordered by epsilon, then row (y), then column (x). Each seed
    // draws its own constellation shared by all cells; cells report the median
    // over seeds.
    inline GridResult run_area_map(const ScenarioConfig &c, unsigned threads = worker_count())
    {
        if (c.experiment != Experiment::area_map)
            throw ScenarioInvalid("configuration is not an area map");
        const auto &m = c.area_map;
        const auto &k = c.constellation(m.constellation);
        const double dx = (m.x_max - m.x_min) / m.cells_x;
        const double dy = (m.y_max - m.y_min) / m.cells_y;
        const std::size_t cells = static_cast<std::size_t>(m.cells_x) * static_cast<std::size_t>(m.cells_y);

        GridResult res;
        std::vector<Scene> scenes;
        for (double eps : m.epsilons)
            for (auto seed : c.seeds)
                scenes.push_back(scene_for(c, k, draw_for_count(k, m.satellites, seed, true), true, seed, eps));
        for (double eps : m.epsilons)
            for (int iy = 0; iy < m.cells_y; ++iy)
                for (int ix = 0; ix < m.cells_x; ++ix)
                {
                    GridRow g;
                    g.x_m = m.x_min + (ix + 0.5) * dx;
                    g.y_m = m.y_min + (iy + 0.5) * dy;
                    g.indoor = building_containing(c.buildings, Point3{g.x_m, g.y_m, m.user_height_m}).has_value();
                    g.epsilon = eps;
                    res.rows.push_back(g);
                }
        parallel_for(
            res.rows.size(),
            [&](std::size_t i) {
                auto &g = res.rows[i];
                const std::size_t e = i / cells;
                std::vector<double> v;
                for (std::size_t s = 0; s < c.seeds.size(); ++s)
                    v.push_back(as_written(
                        user_peb(scenes[e * c.seeds.size() + s], Point3{g.x_m, g.y_m, m.user_height_m})));
                g.peb_m = median(v);
            },
            threads);
        return res;
    }

    // ---------- Output ----------

    inline std::string sweep_csv(const SweepResult &r)
    {
        std::ostringstream os;
        os << "label,sweep,seed,peb_m\n";
        for (const auto &row : r.rows)
            os << row.label << ',' << row.sweep << ',' << row.seed << ',' << format_number(row.peb_m) << '\n';
        return os.str();
    }

    struct GroupMedian
    {
        std::string label;
        int sweep = 0;
        double median_m = 0.0;
    };

    // Median over seeds per (label, sweep point), from the written values.
    inline std::vector<GroupMedian> sweep_medians(const SweepResult &r)
    {
        std::vector<GroupMedian> out;
        std::map<std::pair<std::string, int>, std::vector<double>> groups;
        std::vector<std::pair<std::string, int>> order;
        for (const auto &row : r.rows)
        {
            auto key = std::make_pair(row.label, row.sweep);
            if (!groups.count(key))
                order.push_back(key);
            groups[key].push_back(as_written(row.peb_m));
        }
        for (const auto &key : order)
            out.push_back({key.first, key.second, median(groups[key])});
        return out;
    }

    inline std::string medians_csv(const std::vector<GroupMedian> &m)
    {
        std::ostringstream os;
        os << "label,sweep,median_peb_m\n";
        for (const auto &g : m)
            os << g.label << ',' << g.sweep << ',' << format_number(g.median_m) << '\n';
        return os.str();
    }

    inline std::string grid_csv(const GridResult &r)
    {
        std::ostringstream os;
        os << "x_m,y_m,indoor,epsilon,peb_m\n";
        for (const auto &g : r.rows)
            os << format_number(g.x_m) << ',' << format_number(g.y_m) << ',' << (g.indoor ? 1 : 0) << ','
               << format_number(g.epsilon) << ',' << format_number(g.peb_m) << '\n';
        return os.str();
    }

    // Building footprints and panel positions for plotting the map.
    inline json layout_json(const ScenarioConfig &c)
    {
        const json full = to_json(c);
        return {{"buildings", full["buildings"]}, {"ris_panels", full["ris_panels"]}, {"area_map", full["area_map"]}};
    }

    struct GridSummary
    {
        double epsilon = 0.0;
        double mean_indoor_m = 0.0;
        double mean_outdoor_m = 0.0;
        int indoor_cells = 0;
        int outdoor_cells = 0;
    };

    inline std::vector<GridSummary> grid_summaries(const GridResult &r)
    {
        std::vector<GridSummary> out;
        for (const auto &g : r.rows)
        {
            if (out.empty() || out.back().epsilon != g.epsilon)
                out.push_back({g.epsilon});
            auto &s = out.back();
            const double v = as_written(g.peb_m);
            if (g.indoor)
            {
                s.mean_indoor_m += v;
                ++s.indoor_cells;
            }
            else
            {
                s.mean_outdoor_m += v;
                ++s.outdoor_cells;
            }
        }
        for (auto &s : out)
        {
            s.mean_indoor_m = s.indoor_cells ? s.mean_indoor_m / s.indoor_cells : 0.0;
            s.mean_outdoor_m = s.outdoor_cells ? s.mean_outdoor_m / s.outdoor_cells : 0.0;
        }
        return out;
    }
}

#endif
