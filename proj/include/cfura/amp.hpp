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

#ifndef CFURA_AMP_HPP
#define CFURA_AMP_HPP

#include <string>
#include <vector>

#include "cfura/model.hpp"
#include "cfura/prior.hpp"
#include "cfura/types.hpp"

namespace cfura
{
    enum class OnsagerMode
    {
        empirical, // row average of the denoiser Jacobian
        se         // expectation under the state evolution law, supplied by the caller
    };

    enum class NoiseMode
    {
        schedule, // C from the precomputed state evolution sequence
        online    // per-RU variances estimated from the residual
    };

    std::string to_string(OnsagerMode mode);
    OnsagerMode onsager_mode_from_string(const std::string &s);
    std::string to_string(NoiseMode mode);
    NoiseMode noise_mode_from_string(const std::string &s);

    // Iterate t of the recursion
    //   G_u = S_u X_u - alpha_u Z_prev Q_u,  Z = Y - sum_u G_u,
    //   R_u = S_u^H Z + X_u,                 X_u <- eta_u(R_u).
    // On entry x_hat = X^(t), z = Z^(t-1), q = Q^(t).
    struct AmpState
    {
        std::vector<CMat> x_hat;
        CMat z;
        CMat z_prev;
        std::vector<CMat> q;
        std::vector<CMat> r;
        int t = 1;
    };

    AmpState amp_init(const Scene &scene);

    // se_onsager holds Q^(t+1) per location when mode is OnsagerMode::se.
    AmpState amp_step(const AmpState &state, const Scene &scene, const std::vector<LocationPrior> &priors,
                      const EffectiveNoise &noise, OnsagerMode mode,
                      const std::vector<CMat> *se_onsager = nullptr);

    struct AmpOptions
    {
        OnsagerMode onsager = OnsagerMode::empirical;
        NoiseMode noise = NoiseMode::schedule;
        int antennas = 1; // block size for online noise estimation
        // Q^(t+1) per iteration and location, required for OnsagerMode::se.
        const std::vector<std::vector<CMat>> *se_onsager = nullptr;
        bool keep_q_history = true;
    };

    struct AmpTrace
    {
        // mse[t-1] = (1/L) sum_u |X_u - X_u^(t)|_F^2, t = 1..T
        std::vector<double> mse;
        // Same quantity for the returned estimates X^(T+1).
        double mse_final = 0.0;
        std::vector<CMat> r;     // R^(T)
        std::vector<CMat> x_hat; // X^(T+1)
        std::vector<std::vector<CMat>> q_history;
        std::vector<EffectiveNoise> noise_used;
        OnsagerMode onsager = OnsagerMode::empirical;
        NoiseMode noise = NoiseMode::schedule;
    };

    AmpTrace amp_run(const Scene &scene, const std::vector<LocationPrior> &priors, const SystemConfig &config,
                     const std::vector<EffectiveNoise> &schedule, const AmpOptions &options = {});

    // (1/N) (X - X_est)^H (X - X_est)
    CMat empirical_mse_matrix(const CMat &x_true, const CMat &x_est);

    double total_normalized_mse(const std::vector<CMat> &x_true, const std::vector<CMat> &x_est, int L);

    // Per-RU variances from (1/L) Z^H Z, block averaged.
    EffectiveNoise estimate_noise_from_residual(const CMat &z, int antennas);
}

#endif
