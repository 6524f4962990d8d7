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

#ifndef CFURA_ESTIMATION_HPP
#define CFURA_ESTIMATION_HPP

#include <functional>
#include <optional>
#include <vector>

#include "cfura/amp.hpp"
#include "cfura/detection.hpp"
#include "cfura/model.hpp"
#include "cfura/prior.hpp"
#include "cfura/rng.hpp"
#include "cfura/types.hpp"

namespace cfura
{
    inline constexpr double kMinAcceptanceRate = 1e-3;

    // Running sums of a scalar sample; mergeable across trials.
    struct SampleStats
    {
        long count = 0;
        double sum = 0.0;
        double sum_sq = 0.0;

        void add(double v)
        {
            ++count;
            sum += v;
            sum_sq += v * v;
        }
        void merge(const SampleStats &o)
        {
            count += o.count;
            sum += o.sum;
            sum_sq += o.sum_sq;
        }
        std::optional<double> mean() const;
        std::optional<double> std_error() const;
    };

    // Rejection sampling of the decoupled observation r = a h + z C^{1/2}
    // restricted to the detection events
    //   active draws (a = 1) kept when ln Lambda(r) <= nu_log,
    //   idle draws (a = 0) kept when ln Lambda(r) < nu_log.
    // mc_samples draws are made per stratum. The callbacks receive batches of
    // accepted rows: channels h (active only) and denoiser outputs eta(r).
    struct ConditionalSampling
    {
        long active_drawn = 0;
        long active_accepted = 0;
        long idle_drawn = 0;
        long idle_accepted = 0;

        double active_rate() const { return active_drawn ? double(active_accepted) / active_drawn : 0.0; }
        double idle_rate() const { return idle_drawn ? double(idle_accepted) / idle_drawn : 0.0; }
        bool active_sufficient() const { return active_drawn > 0 && active_rate() >= kMinAcceptanceRate; }
        bool idle_sufficient() const { return idle_drawn > 0 && idle_rate() >= kMinAcceptanceRate; }
    };

    using ActiveBatchFn = std::function<void(const CMat &h, const CMat &eta)>;
    using IdleBatchFn = std::function<void(const CMat &eta)>;

    // Either callback may be empty, which skips that stratum.
    ConditionalSampling sample_conditional(const PriorParams &prior, const EffectiveNoise &noise, double nu_log,
                                           int mc_samples, const RngStream &stream, const ActiveBatchFn &on_active,
                                           const IdleBatchFn &on_idle);

    // Moments whose acceptance rate falls below kMinAcceptanceRate are left
    // empty and flagged insufficient.
    struct ConditionalTheory
    {
        int p = 2;
        std::optional<double> detected_moment;    // E[|h - eta(h + z C^{1/2})|^p | D]
        double detected_std_error = 0.0;
        bool detected_insufficient = false;
        std::optional<double> false_alarm_moment; // E[|eta(z C^{1/2})|^p | F]
        double false_alarm_std_error = 0.0;
        bool false_alarm_insufficient = false;
        ConditionalSampling sampling;
    };

    ConditionalTheory conditional_error_theory(const PriorParams &prior, const EffectiveNoise &noise, double nu_log,
                                               int p, int mc_samples, const RngStream &stream);

    struct LocationErrorStats
    {
        SampleStats detected;     // |h - h_hat|^p over detected active rows
        SampleStats false_alarm;  // |h_hat|^p over false alarms
        ConditionalTheory theory;
    };

    struct ConditionalErrorReport
    {
        int p = 2;
        int dim = 0; // F, for per-antenna normalization
        std::vector<LocationErrorStats> locations;

        // p = 2 moments divided by F
        std::optional<double> detected_mse_per_antenna(int u) const;
        std::optional<double> detected_theory_per_antenna(int u) const;
    };

    // Empirical moments over the detected sets of one trial; theory side is
    // left empty unless mc_samples > 0.
    ConditionalErrorReport conditional_error_stats(const Scene &scene, const AmpTrace &trace,
                                                   const DetectionReport &report, int p,
                                                   const std::vector<LocationPrior> &priors = {},
                                                   const EffectiveNoise *noise = nullptr, int mc_samples = 0,
                                                   const RngStream &stream = RngStream(), int threads = 1);

    // Genie-aided linear MMSE with the true active set, solved per RU.
    struct GenieRu
    {
        std::vector<int> location;   // per active codeword k
        std::vector<int> index;      // row within the location's codebook
        RVec gain;                   // g_{u,b} of each codeword
        CMat estimate;               // K x M
        RVec mse_quadratic;          // g - g^2 s^H B^{-1} s, per coefficient
        RVec mse_sherman_morrison;   // g / (1 + g mu)
        RVec mu;
        RVec squared_error;          // |h - h_hat|^2 / M against the true channel
    };

    struct GenieResult
    {
        std::vector<GenieRu> rus;
        int K = 0;
        bool primal = false;
    };

    enum class GenieSolver
    {
        automatic,
        primal, // L x L factorization
        dual    // K x K factorization over the active codewords
    };

    GenieResult genie_mmse_estimate(const Scene &scene, const LsfcProfile &geometry, double sigma_w2, int antennas,
                                    GenieSolver solver = GenieSolver::automatic, int threads = 1);

    // Mean per-coefficient genie error of location u over its active rows and all RUs.
    struct GenieLocationSummary
    {
        SampleStats squared_error; // |h - h_hat|^2 / M
        SampleStats mse;           // g / (1 + g mu)
        SampleStats mu_ratio;      // mu c_b*, only filled when c_star is given
    };
    std::vector<GenieLocationSummary> summarize_genie(const GenieResult &genie, int U,
                                                      const std::vector<double> &c_star = {});

    // Root c of c = sigma_w2 + sum_u lambda_u alpha_u g_ub c / (g_ub + c).
    double genie_asymptotic_fixed_point(const LsfcProfile &geometry, const std::vector<double> &lambda,
                                        const std::vector<double> &alpha, double sigma_w2, int b, double tol = 1e-14);

    // Asymptotic genie MSE per coefficient for location u: mean over RUs of g / (1 + g / c_b).
    double genie_asymptotic_mse(const LsfcProfile &geometry, const std::vector<double> &c_star, int u);
}

#endif
