// SPDX-License-Identifier: Apache-2.0
//
// cfura - joint message detection and channel estimation for cell-free uRA
// Copyright (C) 2026 cfura contributors
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

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cfura/config.hpp"
#include "cfura/harness.hpp"

namespace
{
    int env_threads()
    {
        if (const char *v = std::getenv("CFURA_THREADS"))
        {
            try
            {
                const int n = std::stoi(v);
                if (n >= 1)
                    return n;
            }
            catch (const std::exception &)
            {
            }
            std::cerr << "cfura: ignoring invalid CFURA_THREADS='" << v << "'\n";
        }
        return 1;
    }
}

int main(int argc, char **argv)
{
    CLI::App app{"cfura - joint detection and channel estimation for cell-free unsourced random access"};
    app.set_version_flag("--version", std::string(CFURA_VERSION));
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    std::optional<std::string> out;
    int threads = env_threads();
    bool verbose = false;
    bool no_cache = false;

    struct Sub
    {
        const char *name;
        const char *help;
        cfura::Stage stage;
    };
    const Sub subs[] = {
        {"se", "state evolution trace and fixed point", cfura::Stage::se},
        {"simulate", "full pipeline: AMP trials, detection, estimation, genie baseline, downlink rates",
         cfura::Stage::simulate},
        {"roc", "detection tradeoff sweep over the threshold grid", cfura::Stage::roc},
        {"rates", "downlink moment tables and rates (tables cached)", cfura::Stage::rates},
        {"genie", "genie-aided MMSE baseline only", cfura::Stage::genie},
    };
    std::optional<cfura::Stage> chosen;
    for (const Sub &s : subs)
    {
        CLI::App *sc = app.add_subcommand(s.name, s.help);
        sc->add_option("--config", config_path, "configuration file")->required()->check(CLI::ExistingFile);
        sc->add_option("--seed", seed, "master seed, overrides the config");
        sc->add_option("--trials", trials, "Monte Carlo trials, overrides the config")->check(CLI::PositiveNumber);
        sc->add_option("--out", out, "output directory, overrides the config");
        sc->add_option("--threads", threads, "worker threads (default CFURA_THREADS or 1)")
            ->check(CLI::PositiveNumber);
        sc->add_flag("--verbose", verbose, "progress on stderr");
        sc->add_flag("--no-cache", no_cache, "recompute state evolution and downlink tables");
        const cfura::Stage st = s.stage;
        sc->callback([&chosen, st] { chosen = st; });
    }

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::Success &e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError &e)
    {
        app.exit(e);
        return 2;
    }

    cfura::ExperimentConfig cfg;
    try
    {
        cfg = cfura::load_config(config_path);
        if (seed)
            cfg.system.seed = *seed;
        if (trials)
            cfg.trials = *trials;
        if (out)
            cfg.out = *out;
        cfg.validate();
    }
    catch (const std::invalid_argument &e)
    {
        std::cerr << "cfura: " << e.what() << "\n";
        return 2;
    }

    try
    {
        cfura::RunOptions opts;
        opts.threads = threads;
        opts.quiet = !verbose;
        if (!no_cache)
            opts.cache_dir = cfg.out + "/cache";
        const cfura::ExperimentResult res = cfura::run_experiment(cfg, *chosen, opts);
        for (const auto &[k, v] : res.manifest.summary)
            std::cout << k << " = " << v << "\n";
        std::cout << "output = " << cfg.out << "\n";
    }
    catch (const std::exception &e)
    {
        std::cerr << "cfura: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
