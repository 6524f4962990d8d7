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

#ifndef CFURA_STATE_EVOLUTION_HPP
#define CFURA_STATE_EVOLUTION_HPP

#include <vector>

#include "cfura/prior.hpp"
#include "cfura/rng.hpp"
#include "cfura/types.hpp"

namespace cfura
{
    inline constexpr int kMinMmseSamples = 1000;

    struct MmseEstimate
    {
        CMat value;      // F x F
        RMat std_error;  // entrywise
    };

    // E[(x - eta(x + z C^{1/2}))^H (x - eta(x + z C^{1/2}))] by Monte Carlo,
    // stratified on the activity. mc_samples draws are used per stratum and the
    // draws depend only on `stream`, so repeated calls share random numbers.
    MmseEstimate mmse_matrix(const PriorParams &prior, const EffectiveNoise &noise, int mc_samples,
                             const RngStream &stream);

    // Diagonal of the mmse matrix averaged over blocks of `antennas` entries.
    // Requires diagonal Sigma and C that are constant on each block; samples
    // only the block energies |r_b|^2 and integrates the rest analytically.
    struct BlockMmse
    {
        RVec per_block;  // per-antenna mmse of each block
        RVec std_error;
        RVec onsager;    // per-antenna diagonal of E[eta'], same layout
    };
    BlockMmse block_mmse(const PriorParams &prior, const EffectiveNoise &noise, int antennas, int mc_samples,
                         const RngStream &stream, bool with_onsager = false);

    // E[eta'(x + z C^{1/2})] for the general (dense) model.
    CMat expected_jacobian(const PriorParams &prior, const EffectiveNoise &noise, int mc_samples,
                           const RngStream &stream);

    struct SeOptions
    {
        int antennas = 1;          // block size of the per-RU structure
        bool project = true;       // keep C block diagonal with per-RU variances
        bool compute_onsager = false;
        double tol = 1e-4;         // relative change on the diagonal
        int threads = 1;
    };

    struct SeTrace
    {
        std::vector<EffectiveNoise> c_seq;          // C^(t,t), t = 1..T
        std::vector<std::vector<CMat>> mmse_seq;    // per t and location, mmse at C^(t,t)
        std::vector<std::vector<CMat>> onsager_seq; // per t and location, E[eta'_t]
        EffectiveNoise c_star;                      // C^(T+1,T+1)
        bool converged = false;
        int iterations_to_converge = -1;

        // tr(C^(t,t) - sigma_w2 I), the predicted total normalized MSE of X^(t)
        std::vector<double> predicted_mse;
    };

    SeTrace se_recursion(const std::vector<LocationPrior> &priors, double sigma_w2, int T, int mc_samples,
                         const RngStream &stream, const SeOptions &options = {});

    struct FixedPoint
    {
        EffectiveNoise c_star;
        bool converged = false;
        int iterations = 0;
        double last_change = 0.0;
        std::vector<RVec> diagonal_trace;
    };

    FixedPoint se_fixed_point(const std::vector<LocationPrior> &priors, double sigma_w2, int mc_samples, double tol,
                              int max_iter, const RngStream &stream, const SeOptions &options = {});

    // sigma_w2 I + sum_u alpha_u mmse_u(C), projected when options.project is set.
    EffectiveNoise se_update(const std::vector<LocationPrior> &priors, double sigma_w2, const EffectiveNoise &c,
                             int mc_samples, const RngStream &stream, const SeOptions &options,
                             std::vector<CMat> *mmse_out = nullptr, std::vector<CMat> *onsager_out = nullptr);

    struct MutualInformation
    {
        double value = 0.0; // nats
        double std_error = 0.0;
        std::vector<double> per_location;
    };

    // Replica-symmetric mutual information per observation symbol, in nats.
    MutualInformation rs_mutual_information(const std::vector<LocationPrior> &priors, const EffectiveNoise &c_star,
                                            double sigma_w2, int mc_samples, const RngStream &stream);

    // I(x; x + z C^{1/2}) for one Bernoulli-Gaussian prior.
    struct ScalarEstimate
    {
        double value = 0.0;
        double std_error = 0.0;
    };
    ScalarEstimate location_mutual_information(const PriorParams &prior, const EffectiveNoise &noise,
                                               int mc_samples, const RngStream &stream);

    CMat project_block_diagonal(const CMat &c, int antennas);
}

#endif
