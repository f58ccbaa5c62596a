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

#ifndef LEORIS_CLI_HPP
#define LEORIS_CLI_HPP

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "scenario.hpp"

namespace leoris
{
    inline constexpr int kExitOk = 0;
    inline constexpr int kExitConfig = 2;
    inline constexpr int kExitRuntime = 3;

    // "1-20", "3,5,9-11".
    inline std::vector<std::uint64_t> parse_seed_list(const std::string &text)
    {
        std::vector<std::uint64_t> out;
        std::stringstream ss(text);
        std::string part;
        while (std::getline(ss, part, ','))
        {
            if (part.empty())
                throw ValidationError("--seeds", "empty entry");
            try
            {
                const auto dash = part.find('-');
                std::size_t used = 0;
                if (dash == std::string::npos)
                {
                    out.push_back(std::stoull(part, &used));
                    if (used != part.size())
                        throw std::invalid_argument(part);
                    continue;
                }
                const std::string lo_s = part.substr(0, dash), hi_s = part.substr(dash + 1);
                const auto lo = std::stoull(lo_s, &used);
                if (used != lo_s.size())
                    throw std::invalid_argument(part);
                const auto hi = std::stoull(hi_s, &used);
                if (used != hi_s.size() || hi < lo)
                    throw std::invalid_argument(part);
                for (auto s = lo; s <= hi; ++s)
                    out.push_back(s);
            }
            catch (const std::exception &)
            {
                throw ValidationError("--seeds", "cannot read '" + part + "'");
            }
        }
        if (out.empty())
            throw ValidationError("--seeds", "no seeds given");
        return out;
    }

    namespace detail
    {
        inline void write_file(const std::filesystem::path &p, const std::string &content)
        {
            std::ofstream f(p, std::ios::binary);
            if (!f)
                throw Error("cannot write " + p.string());
            f << content;
            if (!f)
                throw Error("failed writing " + p.string());
        }

        inline std::string read_file(const std::string &path)
        {
            std::ifstream f(path, std::ios::binary);
            if (!f)
                throw ValidationError("--config", "cannot open config file '" + path + "'");
            std::ostringstream ss;
            ss << f.rdbuf();
            return ss.str();
        }
    }

    inline int cli_main(int argc, const char *const *argv, std::ostream &out = std::cout, std::ostream &err = std::cerr)
    {
        CLI::App app{"Position error bounds for LEO satellite and RIS aided localization"};
        app.require_subcommand(1);
        std::string config_path, out_dir = ".", seeds_text;
        std::vector<std::string> overrides;

        auto add_common = [&](CLI::App *sub, bool needs_out) {
            sub->add_option("--config", config_path, "JSON scenario file")->required();
            auto *o = sub->add_option("--out", out_dir, "output directory");
            if (needs_out)
                o->required();
            sub->add_option("--seeds", seeds_text, "seed list, e.g. 1-20 or 1,4,7");
            sub->add_option("--override", overrides, "key=value applied to the JSON before parsing");
        };
        auto *satcount = app.add_subcommand("satcount", "PEB versus number of satellites");
        auto *areamap = app.add_subcommand("areamap", "PEB over a ground grid");
        auto *check = app.add_subcommand("validate", "parse the config and print it with defaults resolved");
        add_common(satcount, true);
        add_common(areamap, true);
        add_common(check, false);

        try
        {
            app.parse(argc, argv);
        }
        catch (const CLI::CallForHelp &e)
        {
            out << app.help();
            return kExitOk;
        }
        catch (const CLI::ParseError &e)
        {
            err << "leoris: " << e.what() << '\n';
            return kExitConfig;
        }

        ScenarioConfig cfg;
        try
        {
            json doc = parse_json_text(detail::read_file(config_path));
            for (const auto &o : overrides)
                apply_override(doc, o);
            if (!seeds_text.empty())
                doc["seeds"] = parse_seed_list(seeds_text);
            cfg = config_from_json(doc);
            if (satcount->parsed() && cfg.experiment != Experiment::satcount_sweep)
                throw ValidationError("experiment", "satcount needs experiment = satcount_sweep");
            if (areamap->parsed() && cfg.experiment != Experiment::area_map)
                throw ValidationError("experiment", "areamap needs experiment = area_map");
        }
        catch (const Error &e)
        {
            err << "leoris: config error: " << e.what() << '\n';
            return kExitConfig;
        }

        if (check->parsed())
        {
            out << to_json(cfg).dump(2) << '\n';
            return kExitOk;
        }

        try
        {
            const std::filesystem::path dir(out_dir);
            std::filesystem::create_directories(dir);
            const std::string stem = std::filesystem::path(config_path).stem().string();
            if (satcount->parsed())
            {
                const auto res = run_satcount_sweep(cfg);
                const auto med = sweep_medians(res);
                detail::write_file(dir / (stem + "_peb.csv"), sweep_csv(res));
                detail::write_file(dir / (stem + "_median.csv"), medians_csv(med));
                for (const auto &g : med)
                    out << g.label << " sweep=" << g.sweep << " median_peb_m=" << format_number(g.median_m) << '\n';
            }
            else
            {
                const auto res = run_area_map(cfg);
                detail::write_file(dir / (stem + "_map.csv"), grid_csv(res));
                detail::write_file(dir / (stem + "_layout.json"), layout_json(cfg).dump(2) + "\n");
                for (const auto &s : grid_summaries(res))
                    out << "epsilon=" << format_number(s.epsilon) << " mean_indoor_peb_m=" << format_number(s.mean_indoor_m)
                        << " mean_outdoor_peb_m=" << format_number(s.mean_outdoor_m) << '\n';
            }
        }
        catch (const std::exception &e)
        {
            err << "leoris: " << e.what() << '\n';
            return kExitRuntime;
        }
        return kExitOk;
    }
}

#endif
