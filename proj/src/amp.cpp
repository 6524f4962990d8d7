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

#include "cfura/amp.hpp"

#include "cfura/denoiser.hpp"

namespace cfura
{
    std::string to_string(OnsagerMode mode)
    {
        return mode == OnsagerMode::se ? "se" : "empirical";
    }

    OnsagerMode onsager_mode_from_string(const std::string &s)
    {
        if (s == "empirical")
            return OnsagerMode::empirical;
        if (s == "se")
            return OnsagerMode::se;
        throw InvalidParameter("unknown onsager mode '" + s + "'");
    }

    std::string to_string(NoiseMode mode)
    {
        return mode == NoiseMode::online ? "online" : "schedule";
    }

    NoiseMode noise_mode_from_string(const std::string &s)
    {
        if (s == "schedule")
            return NoiseMode::schedule;
        if (s == "online")
            return NoiseMode::online;
        throw InvalidParameter("unknown noise mode '" + s + "'");
    }

    AmpState amp_init(const Scene &scene)
    {
        const int U = scene.U();
        const int L = scene.L();
        const int F = scene.F();
        AmpState s;
        s.x_hat.resize(U);
        s.q.resize(U);
        s.r.resize(U);
        for (int u = 0; u < U; ++u)
        {
            s.x_hat[u] = CMat::Zero(scene.codebooks[u].cols(), F);
            s.q[u] = CMat::Zero(F, F);
        }
        s.z = CMat::Zero(L, F);
        s.z_prev = CMat::Zero(L, F);
        s.t = 1;
        return s;
    }

    namespace
    {
        // Z^(t) = Y - sum_u (S_u X_u^(t) - alpha_u Z^(t-1) Q_u^(t))
        CMat residual(const AmpState &state, const Scene &scene)
        {
            const int U = scene.U();
            const int L = scene.L();
            const int F = scene.F();
            require_input(static_cast<int>(state.x_hat.size()) == U && static_cast<int>(state.q.size()) == U,
                          "amp_step: state does not match scene");
            require_input(state.z.rows() == L && state.z.cols() == F, "amp_step: residual has wrong shape");

            CMat z = scene.observation;
            for (int u = 0; u < U; ++u)
            {
                const CMat &S = scene.codebooks[u];
                require_input(state.x_hat[u].rows() == S.cols() && state.x_hat[u].cols() == F,
                              "amp_step: estimate has wrong shape");
                if (!state.x_hat[u].isZero(0.0))
                    z.noalias() -= S * state.x_hat[u];
                if (!state.q[u].isZero(0.0))
                {
                    const double alpha = static_cast<double>(S.cols()) / L;
                    z.noalias() += alpha * (state.z * state.q[u]);
                }
            }
            return z;
        }

        AmpState finish_step(const AmpState &state, const Scene &scene, CMat z,
                             const std::vector<LocationPrior> &priors, const EffectiveNoise &noise,
                             OnsagerMode mode, const std::vector<CMat> *se_onsager)
        {
            const int U = scene.U();
            const int F = scene.F();
            require_input(static_cast<int>(priors.size()) == U, "amp_step: one prior per location required");
            require_input(noise.dim() == F, "amp_step: noise dimension differs from F");
            if (mode == OnsagerMode::se)
                require_input(se_onsager && static_cast<int>(se_onsager->size()) == U,
                              "amp_step: se Onsager mode needs one matrix per location");

            AmpState next;
            next.t = state.t + 1;
            next.z_prev = state.z;
            next.z = std::move(z);
            next.x_hat.resize(U);
            next.q.resize(U);
            next.r.resize(U);
            for (int u = 0; u < U; ++u)
            {
                next.r[u] = state.x_hat[u];
                next.r[u].noalias() += scene.codebooks[u].adjoint() * next.z;

                const BgDenoiser eta(priors[u].prior, noise);
                if (mode == OnsagerMode::empirical)
                    next.x_hat[u] = eta.apply(next.r[u], &next.q[u]);
                else
                {
                    next.x_hat[u] = eta.apply(next.r[u]);
                    require_input((*se_onsager)[u].rows() == F && (*se_onsager)[u].cols() == F,
                                  "amp_step: se Onsager matrix has wrong shape");
                    next.q[u] = (*se_onsager)[u];
                }
            }
            return next;
        }
    }

    AmpState amp_step(const AmpState &state, const Scene &scene, const std::vector<LocationPrior> &priors,
                      const EffectiveNoise &noise, OnsagerMode mode, const std::vector<CMat> *se_onsager)
    {
        return finish_step(state, scene, residual(state, scene), priors, noise, mode, se_onsager);
    }

    CMat empirical_mse_matrix(const CMat &x_true, const CMat &x_est)
    {
        require_input(x_true.rows() == x_est.rows() && x_true.cols() == x_est.cols(),
                      "empirical_mse_matrix: shapes differ");
        const CMat e = x_true - x_est;
        CMat m = e.adjoint() * e;
        if (x_true.rows() > 0)
            m /= static_cast<double>(x_true.rows());
        return 0.5 * (m + m.adjoint());
    }

    double total_normalized_mse(const std::vector<CMat> &x_true, const std::vector<CMat> &x_est, int L)
    {
        require_input(x_true.size() == x_est.size(), "total_normalized_mse: location count differs");
        double acc = 0.0;
        for (std::size_t u = 0; u < x_true.size(); ++u)
            acc += (x_true[u] - x_est[u]).squaredNorm();
        return acc / L;
    }

    EffectiveNoise estimate_noise_from_residual(const CMat &z, int antennas)
    {
        require(antennas >= 1 && z.cols() % antennas == 0, "estimate_noise: F must be a multiple of antennas");
        const RVec col_power = z.colwise().squaredNorm().transpose() / static_cast<double>(z.rows());
        const int B = static_cast<int>(z.cols()) / antennas;
        RVec tau(B);
        for (int b = 0; b < B; ++b)
            tau(b) = col_power.segment(b * antennas, antennas).mean();
        return EffectiveNoise::per_ru(tau, antennas);
    }

    AmpTrace amp_run(const Scene &scene, const std::vector<LocationPrior> &priors, const SystemConfig &config,
                     const std::vector<EffectiveNoise> &schedule, const AmpOptions &options)
    {
        const int T = config.T;
        require_input(static_cast<int>(schedule.size()) == T, "amp_run: schedule length must equal T");
        require_input(scene.U() == config.U && scene.L() == config.L && scene.F() == config.F(),
                      "amp_run: scene does not match config");
        if (options.onsager == OnsagerMode::se)
            require_input(options.se_onsager && static_cast<int>(options.se_onsager->size()) >= T,
                          "amp_run: se Onsager mode needs T matrices per location");

        AmpTrace trace;
        trace.onsager = options.onsager;
        trace.noise = options.noise;
        trace.mse.reserve(T);

        AmpState state = amp_init(scene);
        for (int t = 1; t <= T; ++t)
        {
            trace.mse.push_back(total_normalized_mse(scene.channels, state.x_hat, config.L));

            const std::vector<CMat> *q_next = options.onsager == OnsagerMode::se ? &(*options.se_onsager)[t - 1] : nullptr;
            CMat z = residual(state, scene);
            if (options.noise == NoiseMode::online)
                trace.noise_used.push_back(estimate_noise_from_residual(z, options.antennas));
            else
                trace.noise_used.push_back(schedule[t - 1]);
            state = finish_step(state, scene, std::move(z), priors, trace.noise_used.back(), options.onsager, q_next);
            if (options.keep_q_history)
                trace.q_history.push_back(state.q);
        }

        trace.mse_final = total_normalized_mse(scene.channels, state.x_hat, config.L);
        trace.r = std::move(state.r);
        trace.x_hat = std::move(state.x_hat);
        return trace;
    }
}
