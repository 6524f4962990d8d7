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

#include "cfura/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cfura/denoiser.hpp"
#include "cfura/parallel.hpp"
#include "sampling.hpp"

namespace cfura
{
    namespace
    {
        double norm_power(double sq_norm, int p)
        {
            return p == 2 ? sq_norm : std::pow(sq_norm, 0.5 * p);
        }

        void check_order(int p)
        {
            require(p >= 2 && p % 2 == 0, "conditional moments: p must be a positive even integer");
        }
    }

    std::optional<double> SampleStats::mean() const
    {
        if (count == 0)
            return std::nullopt;
        return sum / static_cast<double>(count);
    }

    std::optional<double> SampleStats::std_error() const
    {
        if (count < 2)
            return std::nullopt;
        const double n = static_cast<double>(count);
        const double m = sum / n;
        const double var = std::max(0.0, (sum_sq - n * m * m) / (n - 1.0));
        return std::sqrt(var / n);
    }

    ConditionalSampling sample_conditional(const PriorParams &prior, const EffectiveNoise &noise, double nu_log,
                                           int mc_samples, const RngStream &stream, const ActiveBatchFn &on_active,
                                           const IdleBatchFn &on_idle)
    {
        require(mc_samples >= 1, "sample_conditional: mc_samples must be positive");
        require(noise.dim() == prior.dim(), "sample_conditional: prior and noise dimensions differ");
        const int F = prior.dim();
        const BgDenoiser eta(prior, noise);
        const CMat hf = detail::psd_row_factor(prior.sigma);
        const CMat zf = detail::noise_row_factor(noise);
        const bool want_active = static_cast<bool>(on_active) && prior.lambda > 0.0;
        const bool want_idle = static_cast<bool>(on_idle) && prior.lambda < 1.0;

        ConditionalSampling out;
        std::vector<Eigen::Index> keep;
        for (int k = 0; k < detail::batch_count(mc_samples); ++k)
        {
            const int nb = detail::batch_size(mc_samples, k);
            if (want_active)
            {
                Engine eng = stream.child("active", k).engine();
                const CMat h = complex_normal(nb, F, 1.0, eng) * hf;
                const CMat r = h + complex_normal(nb, F, 1.0, eng) * zf;
                const RVec llr = eta.log_likelihood_ratios(r, false);
                keep.clear();
                for (Eigen::Index i = 0; i < nb; ++i)
                    if (llr(i) <= nu_log)
                        keep.push_back(i);
                out.active_drawn += nb;
                out.active_accepted += static_cast<long>(keep.size());
                if (!keep.empty())
                {
                    const CMat hk = h(keep, Eigen::all);
                    on_active(hk, eta.apply(r(keep, Eigen::all)));
                }
            }
            if (want_idle)
            {
                Engine eng = stream.child("idle", k).engine();
                const CMat r = complex_normal(nb, F, 1.0, eng) * zf;
                const RVec llr = eta.log_likelihood_ratios(r, false);
                keep.clear();
                for (Eigen::Index i = 0; i < nb; ++i)
                    if (llr(i) < nu_log)
                        keep.push_back(i);
                out.idle_drawn += nb;
                out.idle_accepted += static_cast<long>(keep.size());
                if (!keep.empty())
                    on_idle(eta.apply(r(keep, Eigen::all)));
            }
        }
        return out;
    }

    ConditionalTheory conditional_error_theory(const PriorParams &prior, const EffectiveNoise &noise, double nu_log,
                                               int p, int mc_samples, const RngStream &stream)
    {
        check_order(p);
        SampleStats det, fa;
        ConditionalTheory out;
        out.p = p;
        out.sampling = sample_conditional(
            prior, noise, nu_log, mc_samples, stream,
            [&](const CMat &h, const CMat &e)
            {
                const RVec sq = (h - e).rowwise().squaredNorm();
                for (Eigen::Index i = 0; i < sq.size(); ++i)
                    det.add(norm_power(sq(i), p));
            },
            [&](const CMat &e)
            {
                const RVec sq = e.rowwise().squaredNorm();
                for (Eigen::Index i = 0; i < sq.size(); ++i)
                    fa.add(norm_power(sq(i), p));
            });

        if (out.sampling.active_sufficient())
        {
            out.detected_moment = det.mean();
            out.detected_std_error = det.std_error().value_or(0.0);
        }
        else
            out.detected_insufficient = true;
        if (out.sampling.idle_sufficient())
        {
            out.false_alarm_moment = fa.mean();
            out.false_alarm_std_error = fa.std_error().value_or(0.0);
        }
        else
            out.false_alarm_insufficient = true;
        return out;
    }

    std::optional<double> ConditionalErrorReport::detected_mse_per_antenna(int u) const
    {
        const auto m = locations.at(u).detected.mean();
        if (!m || p != 2)
            return std::nullopt;
        return *m / dim;
    }

    std::optional<double> ConditionalErrorReport::detected_theory_per_antenna(int u) const
    {
        const auto &m = locations.at(u).theory.detected_moment;
        if (!m || p != 2)
            return std::nullopt;
        return *m / dim;
    }

    ConditionalErrorReport conditional_error_stats(const Scene &scene, const AmpTrace &trace,
                                                   const DetectionReport &report, int p,
                                                   const std::vector<LocationPrior> &priors,
                                                   const EffectiveNoise *noise, int mc_samples,
                                                   const RngStream &stream, int threads)
    {
        check_order(p);
        const int U = scene.U();
        require_input(static_cast<int>(trace.x_hat.size()) == U && static_cast<int>(report.decisions.size()) == U,
                      "conditional_error_stats: trace and report do not match the scene");
        const bool theory = mc_samples > 0;
        if (theory)
            require(noise != nullptr && static_cast<int>(priors.size()) == U,
                    "conditional_error_stats: theory needs priors and the effective noise");

        ConditionalErrorReport out;
        out.p = p;
        out.dim = scene.F();
        out.locations.resize(U);
        for (int u = 0; u < U; ++u)
        {
            const auto &a = scene.activity[u];
            const auto &d = report.decisions[u];
            require_input(a.size() == d.size() && static_cast<Eigen::Index>(a.size()) == trace.x_hat[u].rows(),
                          "conditional_error_stats: row counts differ");
            auto &loc = out.locations[u];
            for (std::size_t n = 0; n < a.size(); ++n)
            {
                if (!d[n])
                    continue;
                const auto i = static_cast<Eigen::Index>(n);
                if (a[n])
                    loc.detected.add(
                        norm_power((scene.channels[u].row(i) - trace.x_hat[u].row(i)).squaredNorm(), p));
                else
                    loc.false_alarm.add(norm_power(trace.x_hat[u].row(i).squaredNorm(), p));
            }
        }

        if (theory)
            parallel_for(U, threads,
                         [&](int u)
                         {
                             out.locations[u].theory =
                                 conditional_error_theory(priors[u].prior, *noise, report.thresholds(u), p,
                                                          mc_samples, stream.child(streams::conditional, u));
                         });
        return out;
    }

    namespace
    {
        struct ActiveSet
        {
            std::vector<int> location;
            std::vector<int> index;
            CMat s; // L x K
        };

        ActiveSet active_set(const Scene &scene)
        {
            ActiveSet as;
            for (int u = 0; u < scene.U(); ++u)
                for (std::size_t n = 0; n < scene.activity[u].size(); ++n)
                    if (scene.activity[u][n])
                    {
                        as.location.push_back(u);
                        as.index.push_back(static_cast<int>(n));
                    }
            as.s.resize(scene.L(), static_cast<Eigen::Index>(as.location.size()));
            for (std::size_t k = 0; k < as.location.size(); ++k)
                as.s.col(static_cast<Eigen::Index>(k)) = scene.codebooks[as.location[k]].col(as.index[k]);
            return as;
        }

        void fill_errors(GenieRu &ru, const Scene &scene, int b, int M)
        {
            const Eigen::Index K = ru.estimate.rows();
            ru.squared_error.resize(K);
            for (Eigen::Index k = 0; k < K; ++k)
            {
                const CRow h = scene.channels[ru.location[k]].row(ru.index[k]).segment(b * M, M);
                ru.squared_error(k) = (h - ru.estimate.row(k)).squaredNorm() / M;
            }
        }
    }

    GenieResult genie_mmse_estimate(const Scene &scene, const LsfcProfile &geometry, double sigma_w2, int antennas,
                                    GenieSolver solver, int threads)
    {
        require(sigma_w2 > 0.0, "genie_mmse_estimate: noise variance must be positive");
        require(antennas >= 1 && scene.F() == geometry.B() * antennas,
                "genie_mmse_estimate: observation width must equal B * antennas");
        require(geometry.U() == scene.U(), "genie_mmse_estimate: geometry and scene disagree on U");

        const int B = geometry.B();
        const int M = antennas;
        const int L = scene.L();
        GenieResult out;
        const ActiveSet as = active_set(scene);
        const int K = static_cast<int>(as.location.size());
        out.K = K;
        if (K == 0)
            return out;
        out.primal = solver == GenieSolver::primal || (solver == GenieSolver::automatic && K >= L);
        out.rus.resize(B);

        // Shared across RUs: the Gram matrix P = S^H S and S^H Y.
        CMat gram, sy;
        if (!out.primal)
        {
            gram = as.s.adjoint() * as.s;
            sy = as.s.adjoint() * scene.observation;
        }

        parallel_for(B, threads,
                     [&](int b)
                     {
                         GenieRu &ru = out.rus[b];
                         ru.location = as.location;
                         ru.index = as.index;
                         ru.gain.resize(K);
                         for (int k = 0; k < K; ++k)
                             ru.gain(k) = geometry.g(as.location[k], b);
                         ru.mse_quadratic.resize(K);
                         ru.mse_sherman_morrison.resize(K);
                         ru.mu.resize(K);
                         const auto yb = scene.observation.middleCols(b * M, M);

                         if (out.primal)
                         {
                             // B = S G S^H + sigma^2 I, solved once; X = B^{-1} S.
                             CMat bmat = as.s * ru.gain.cast<cplx>().asDiagonal() * as.s.adjoint();
                             bmat.diagonal().array() += sigma_w2;
                             Eigen::LLT<CMat> llt(bmat);
                             if (llt.info() != Eigen::Success)
                                 throw NumericalError("genie_mmse_estimate: Gram operator is not positive definite");
                             const CMat x = llt.solve(as.s);
                             ru.estimate = ru.gain.cast<cplx>().asDiagonal() * (x.adjoint() * yb);
                             for (int k = 0; k < K; ++k)
                             {
                                 const double g = ru.gain(k);
                                 const double q = as.s.col(k).dot(x.col(k)).real();
                                 const double rest = 1.0 - g * q; // = sigma^2 beta_k
                                 ru.mse_quadratic(k) = g * rest;
                                 ru.mu(k) = q / rest;
                             }
                         }
                         else
                         {
                             // Dual form with W = G^{1/2}: B_d = W P W + sigma^2 I_K,
                             // H = W B_d^{-1} W S^H Y, beta_k = [B_d^{-1}]_kk.
                             const RVec w = ru.gain.cwiseMax(0.0).cwiseSqrt();
                             CMat bd = w.cast<cplx>().asDiagonal() * gram * w.cast<cplx>().asDiagonal();
                             bd.diagonal().array() += sigma_w2;
                             Eigen::LLT<CMat> llt(bd);
                             if (llt.info() != Eigen::Success)
                                 throw NumericalError("genie_mmse_estimate: Gram operator is not positive definite");
                             const CMat inv = llt.solve(CMat::Identity(K, K));
                             ru.estimate = w.cast<cplx>().asDiagonal() *
                                           (inv * (w.cast<cplx>().asDiagonal() * sy.middleCols(b * M, M)));
                             for (int k = 0; k < K; ++k)
                             {
                                 const double g = ru.gain(k);
                                 const double beta = inv(k, k).real();
                                 if (g > 0.0)
                                 {
                                     const double rest = sigma_w2 * beta;
                                     ru.mse_quadratic(k) = g * rest;
                                     ru.mu(k) = (1.0 - rest) / (g * rest);
                                 }
                                 else
                                 {
                                     // s^H B^{-1} s = (|s|^2 - v^H B_d^{-1} v) / sigma^2 with v = W P e_k.
                                     const CVec v = w.cast<cplx>().asDiagonal() * gram.col(k);
                                     const double q =
                                         (gram(k, k).real() - v.dot(inv * v).real()) / sigma_w2;
                                     ru.mse_quadratic(k) = 0.0;
                                     ru.mu(k) = q;
                                 }
                             }
                         }
                         for (int k = 0; k < K; ++k)
                             ru.mse_sherman_morrison(k) = ru.gain(k) / (1.0 + ru.gain(k) * ru.mu(k));
                         fill_errors(ru, scene, b, M);
                     });
        return out;
    }

    std::vector<GenieLocationSummary> summarize_genie(const GenieResult &genie, int U, const std::vector<double> &c_star)
    {
        std::vector<GenieLocationSummary> out(U);
        for (std::size_t b = 0; b < genie.rus.size(); ++b)
        {
            const GenieRu &ru = genie.rus[b];
            for (std::size_t k = 0; k < ru.location.size(); ++k)
            {
                auto &s = out.at(ru.location[k]);
                const auto i = static_cast<Eigen::Index>(k);
                s.squared_error.add(ru.squared_error(i));
                s.mse.add(ru.mse_sherman_morrison(i));
                if (!c_star.empty())
                    s.mu_ratio.add(ru.mu(i) * c_star.at(b));
            }
        }
        return out;
    }

    double genie_asymptotic_fixed_point(const LsfcProfile &geometry, const std::vector<double> &lambda,
                                        const std::vector<double> &alpha, double sigma_w2, int b, double tol)
    {
        require(tol > 0.0, "genie_asymptotic_fixed_point: tol must be positive");
        require(sigma_w2 >= 0.0, "genie_asymptotic_fixed_point: noise variance must be non-negative");
        require(b >= 0 && b < geometry.B(), "genie_asymptotic_fixed_point: RU index out of range");
        const int U = geometry.U();
        require(static_cast<int>(lambda.size()) == U && static_cast<int>(alpha.size()) == U,
                "genie_asymptotic_fixed_point: lambda and alpha must have one entry per location");

        auto map = [&](double c)
        {
            double acc = sigma_w2;
            for (int u = 0; u < U; ++u)
            {
                const double g = geometry.g(u, b);
                if (g > 0.0 && c > 0.0)
                    acc += lambda[u] * alpha[u] * g * c / (g + c);
            }
            return acc;
        };
        // Monotone increasing map started at its lower bracket end.
        double c = sigma_w2;
        for (int it = 0; it < 1000000; ++it)
        {
            const double next = map(c);
            if (std::abs(next - c) < tol * std::max(1.0, next))
                return next;
            if (next == c)
                return next;
            c = next;
        }
        throw NumericalError("genie_asymptotic_fixed_point: iteration did not converge");
    }

    double genie_asymptotic_mse(const LsfcProfile &geometry, const std::vector<double> &c_star, int u)
    {
        require(static_cast<int>(c_star.size()) == geometry.B(), "genie_asymptotic_mse: one c* per RU required");
        double acc = 0.0;
        for (int b = 0; b < geometry.B(); ++b)
        {
            const double g = geometry.g(u, b);
            acc += g * c_star[b] / (g + c_star[b]);
        }
        return acc / geometry.B();
    }
}
