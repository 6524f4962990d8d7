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

#ifndef CFURA_CONFIG_HPP
#define CFURA_CONFIG_HPP

#include <string>

#include "cfura/amp.hpp"
#include "cfura/detection.hpp"
#include "cfura/downlink.hpp"
#include "cfura/model.hpp"
#include "cfura/types.hpp"

namespace cfura
{
    // Malformed or inconsistent configuration text.
    class ConfigError : public InvalidParameter
    {
    public:
        using InvalidParameter::InvalidParameter;
    };

    struct GeometryConfig
    {
        enum class Kind
        {
            wyner,
            hex
        };
        Kind kind = Kind::wyner;
        double crosstalk = 0.5;
        double side = 100.0;
        double d0 = 13.57;
        double gamma = 3.67;
        double snr_rx = 10.0; // linear
    };

    struct ExperimentConfig
    {
        SystemConfig system;
        GeometryConfig geometry;
        int trials = 1;
        ThresholdMode detection = ThresholdMode::equal_error();
        int Q = 1;
        std::string out = "out";
        OnsagerMode onsager = OnsagerMode::empirical;
        NoiseMode noise = NoiseMode::schedule;
        int moment_order = 2;
        int roc_points = 41;
        bool genie = true;
        GenieVariance genie_variance = GenieVariance::exact;

        void validate() const;
    };

    // INI text:
    //   [system]     L, M, T, seed, snr_db | snr, N | alpha, lambda, mc_se, mc_cond
    //   [geometry]   kind = wyner | hex, crosstalk, side, d0, gamma, snr_rx_db | snr_rx
    //   [experiment] trials, detection = equal_error | target_fa, target_fa, Q, out,
    //                onsager = empirical | se, noise = schedule | online, moment_order,
    //                roc_points, genie, genie_variance = exact | as_printed
    // List values are comma separated and repeat cyclically up to U entries.
    // For the hex layout snr is derived from snr_rx and the strongest LSFC.
    ExperimentConfig parse_config(const std::string &text);
    ExperimentConfig load_config(const std::string &path);

    LsfcProfile build_geometry(const GeometryConfig &g);

    // Canonical key = value echo of every resolved field except `out`.
    std::string resolved_config(const ExperimentConfig &cfg);
    std::string sha1_hex(const std::string &text);
    // sha1_hex(resolved_config(cfg))
    std::string config_hash(const ExperimentConfig &cfg);
}

#endif
