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

#ifndef CFURA_DETECTION_HPP
#define CFURA_DETECTION_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "cfura/prior.hpp"
#include "cfura/quadform.hpp"
#include "cfura/types.hpp"

namespace cfura
{
    // A row r is declared active iff ln Lambda(r) < nu_log, where
    // ln Lambda(r) = ln|Sigma + C| - ln|C| - r (C^{-1} - (Sigma + C)^{-1}) r^H.
    // Equivalently q = r D r^H > gamma with gamma = ln|Sigma + C| - ln|C| - nu_log.
    // Ties are declared inactive.
    struct DetectorSpec
    {
        double nu_log = 0.0;
        RVec d_h0; // spectrum of q under the idle hypothesis
        RVec d_h1; // spectrum of q under the active hypothesis
        double gamma = 0.0;
        double log_det_ratio = 0.0;
    };

    DetectorSpec build_detector(const PriorParams &prior, const EffectiveNoise &noise, double nu_log);

    struct ErrorProbabilities
    {
        double p_md = 0.0;
        double p_fa = 0.0;
    };

    ErrorProbabilities md_fa_probabilities(const DetectorSpec &spec);
    ErrorProbabilities md_fa_probabilities(const PriorParams &prior, const EffectiveNoise &noise, double nu_log);

    struct ThresholdMode
    {
        enum class Kind
        {
            equal_error,
            target_fa
        };
        Kind kind = Kind::equal_error;
        double target = 0.0;

        static ThresholdMode equal_error() { return {Kind::equal_error, 0.0}; }
        static ThresholdMode target_fa(double p) { return {Kind::target_fa, p}; }
    };

    std::string to_string(const ThresholdMode &mode);

    double calibrate_threshold(const PriorParams &prior, const EffectiveNoise &noise, const ThresholdMode &mode);

    // Quadratic-form form of the test; identical decisions to the ratio form.
    bool quadratic_test(const CRow &r, const CMat &quad, const DetectorSpec &spec);

    struct DetectionReport
    {
        std::vector<std::vector<std::uint8_t>> decisions;
        RVec p_md;       // theory
        RVec p_fa;       // theory
        RVec thresholds; // nu_log per location

        // Filled when ground truth is supplied.
        bool has_truth = false;
        std::vector<long> active;
        std::vector<long> missed;
        std::vector<long> idle;
        std::vector<long> false_alarms;

        double p_md_empirical(int u) const;
        double p_fa_empirical(int u) const;
    };

    DetectionReport detect(const std::vector<CMat> &r_final, const std::vector<LocationPrior> &priors,
                           const EffectiveNoise &noise, const RVec &thresholds,
                           const std::vector<std::vector<std::uint8_t>> *truth = nullptr);
}

#endif
