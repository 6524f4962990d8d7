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

#ifndef CFURA_HARNESS_HPP
#define CFURA_HARNESS_HPP

#include <string>
#include <vector>

#include "cfura/config.hpp"
#include "cfura/detection.hpp"
#include "cfura/downlink.hpp"
#include "cfura/estimation.hpp"
#include "cfura/state_evolution.hpp"

namespace cfura
{
    enum class Stage
    {
        se,       // state evolution only
        simulate, // full pipeline
        roc,      // AMP trials and the detection sweep
        rates,    // downlink tables and rates, no AMP trials
        genie     // genie baseline on sampled scenes
    };

    std::string to_string(Stage s);

    struct RunOptions
    {
        int threads = 1;
        std::string cache_dir; // SE and downlink tables, keyed by content hash; empty disables
        bool write_files = true;
        bool quiet = true;
    };

    struct RocPoint
    {
        int location = 0;
        double nu_log = 0.0;
        double p_md_theory = 0.0;
        double p_fa_theory = 0.0;
        double p_md_empirical = 0.0;
        double p_fa_empirical = 0.0;
    };

    struct RunManifest
    {
        int schema_version = 0;
        std::string software;
        std::string config_hash;
        std::string config_text;
        std::uint64_t master_seed = 0;
        std::vector<std::pair<std::string, std::uint64_t>> stream_seeds;
        std::string started_utc;
        double wall_seconds = 0.0;
        std::vector<std::string> files;
        std::vector<std::pair<std::string, std::string>> summary;
    };

    struct ExperimentResult
    {
        ExperimentConfig config;
        Stage stage = Stage::simulate;
        LsfcProfile geometry;
        std::vector<LocationPrior> priors;
        double sigma_w2 = 0.0;

        SeTrace se;
        RVec thresholds;                          // nu_log per location
        std::vector<ErrorProbabilities> theory;   // at the thresholds

        // per trial, t = 1..T followed by the final estimate
        std::vector<std::vector<double>> mse;

        // pooled over trials
        std::vector<long> active, missed, idle, false_alarms;
        ConditionalErrorReport estimation;
        std::vector<GenieLocationSummary> genie;
        std::vector<SampleStats> genie_mu;        // per RU
        std::vector<double> genie_mu_spread;      // per RU, mean over trials of std(mu)/mean(mu)
        std::vector<double> c_star;               // per RU, asymptotic genie fixed point

        std::vector<RocPoint> roc;

        ClusterMap clusters;
        RateReport rates;
        std::vector<RateCdfEntry> cdf_uatf;
        std::vector<RateCdfEntry> cdf_genie;

        RunManifest manifest;

        double se_relative_error(int t) const; // |mean_k mse_k(t) - pred(t)| / pred(t), t = 1..T+1
    };

    ExperimentResult run_experiment(const ExperimentConfig &config, Stage stage, const RunOptions &options = {});

    // Hash of the fields the state evolution depends on.
    std::string se_cache_key(const ExperimentConfig &config);

    void write_manifest(const std::string &path, const RunManifest &m);
}

#endif
