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

#include "cfura/state_evolution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/random/gamma_distribution.hpp>

#include "cfura/denoiser.hpp"
#include "cfura/parallel.hpp"
#include "sampling.hpp"

namespace cfura
{
    namespace
    {
        using detail::batch_count;
        using detail::batch_size;
        using detail::noise_row_factor;
        using detail::prior_is_null;
        using detail::psd_row_factor;

        bool block_constant(const RVec &d, int antennas)
        {
            if (antennas < 1 || d.size() % antennas != 0)
                return false;
            for (Eigen::Index b = 0; b < d.size() / antennas; ++b)
                for (int m = 1; m < antennas; ++m)
                    if (d(b * antennas + m) != d(b * antennas))
                        return false;
            return true;
        }

        struct Moments
        {
            CMat sum;
            RMat sum_sq;
            long count = 0;
        };

        void accumulate(Moments &acc, const CMat &e)
        {
            acc.sum.noalias() += e.adjoint() * e;
            const RMat p = e.cwiseAbs2();
            acc.sum_sq.noalias() += p.transpose() * p;
            acc.count += e.rows();
        }
    }

    CMat project_block_diagonal(const CMat &c, int antennas)
    {
        require(antennas >= 1 && c.rows() % antennas == 0, "projection: dimension is not a multiple of antennas");
        const RVec d = c.diagonal().real();
        RVec out(d.size());
        for (Eigen::Index b = 0; b < d.size() / antennas; ++b)
            out.segment(b * antennas, antennas).setConstant(d.segment(b * antennas, antennas).mean());
        return out.cast<cplx>().asDiagonal();
    }

    MmseEstimate mmse_matrix(const PriorParams &prior, const EffectiveNoise &noise, int mc_samples,
                             const RngStream &stream)
    {
        require(mc_samples >= kMinMmseSamples, "mmse_matrix: at least 1000 samples are required");
        require(noise.dim() == prior.dim(), "mmse_matrix: prior and noise dimensions differ");
        const int F = prior.dim();
        MmseEstimate out{CMat::Zero(F, F), RMat::Zero(F, F)};
        if (prior_is_null(prior))
            return out;

        const BgDenoiser eta(prior, noise);
        const CMat hf = psd_row_factor(prior.sigma);
        const CMat zf = noise_row_factor(noise);
        const double lambda = prior.lambda;

        Moments act{CMat::Zero(F, F), RMat::Zero(F, F)};
        Moments idle{CMat::Zero(F, F), RMat::Zero(F, F)};
        for (int k = 0; k < batch_count(mc_samples); ++k)
        {
            const int nb = batch_size(mc_samples, k);
            Engine eng = stream.child(k).engine();
            const CMat h = complex_normal(nb, F, 1.0, eng) * hf;
            const CMat z1 = complex_normal(nb, F, 1.0, eng) * zf;
            const CMat z0 = complex_normal(nb, F, 1.0, eng) * zf;
            accumulate(act, h - eta.apply(h + z1));
            if (lambda < 1.0)
                accumulate(idle, -eta.apply(z0));
        }

        auto finish = [](const Moments &m, CMat &mean, RMat &var)
        {
            mean = m.sum / static_cast<double>(m.count);
            var = (m.sum_sq / static_cast<double>(m.count) - mean.cwiseAbs2()).cwiseMax(0.0) /
                  static_cast<double>(m.count);
        };
        CMat m1, m0;
        RMat v1, v0;
        finish(act, m1, v1);
        if (lambda < 1.0)
        {
            finish(idle, m0, v0);
            out.value = lambda * m1 + (1.0 - lambda) * m0;
            out.std_error = (lambda * lambda * v1 + (1.0 - lambda) * (1.0 - lambda) * v0).cwiseSqrt();
        }
        else
        {
            out.value = m1;
            out.std_error = v1.cwiseSqrt();
        }
        out.value = 0.5 * (out.value + out.value.adjoint()).eval();
        return out;
    }

    BlockMmse block_mmse(const PriorParams &prior, const EffectiveNoise &noise, int antennas, int mc_samples,
                         const RngStream &stream, bool with_onsager)
    {
        require(mc_samples >= kMinMmseSamples, "block_mmse: at least 1000 samples are required");
        require(noise.dim() == prior.dim(), "block_mmse: prior and noise dimensions differ");
        require(prior.is_diagonal() && noise.is_diagonal(), "block_mmse: diagonal prior and noise required");
        const RVec sd = prior.sigma.diagonal().real();
        const RVec cd = noise.diagonal_values();
        require(block_constant(sd, antennas) && block_constant(cd, antennas),
                "block_mmse: prior and noise must be constant on antenna blocks");

        const int F = prior.dim();
        const int B = F / antennas;
        const double Md = antennas;
        BlockMmse out{RVec::Zero(B), RVec::Zero(B), RVec::Zero(B)};
        if (prior_is_null(prior))
            return out;

        const double lambda = prior.lambda;
        const double log_odds = (lambda >= 1.0) ? -std::numeric_limits<double>::infinity()
                                                : std::log1p(-lambda) - std::log(lambda);
        RVec g(B), c(B), a(B), d(B);
        double log_det = 0.0;
        for (int b = 0; b < B; ++b)
        {
            g(b) = std::max(sd(b * antennas), 0.0);
            c(b) = cd(b * antennas);
            a(b) = g(b) / (g(b) + c(b));
            d(b) = g(b) / (c(b) * (g(b) + c(b)));
            log_det += Md * std::log1p(g(b) / c(b));
        }
        const double base = log_odds + log_det;

        // Per stratum: sums of block errors, their squares, the sigmoid and w * rho.
        RVec e1 = RVec::Zero(B), e1sq = RVec::Zero(B), e0 = RVec::Zero(B), e0sq = RVec::Zero(B);
        RVec wr1 = RVec::Zero(B), wr0 = RVec::Zero(B);
        double s1 = 0.0, s0 = 0.0;
        long n = 0;
        RVec rho(B);
        boost::random::gamma_distribution<double> gamma(Md, 1.0);
        for (int k = 0; k < batch_count(mc_samples); ++k)
        {
            const int nb = batch_size(mc_samples, k);
            Engine eng = stream.child(k).engine();
            for (int i = 0; i < nb; ++i)
            {
                // active: r_b = h_b + phi_b, |r_b|^2 ~ (g + c) Gamma(M)
                double q = 0.0;
                for (int b = 0; b < B; ++b)
                {
                    rho(b) = (g(b) + c(b)) * gamma(eng);
                    q += d(b) * rho(b);
                }
                double llr = base - q;
                double s = logistic_complement(llr);
                double w = logistic_slope(llr);
                s1 += s;
                for (int b = 0; b < B; ++b)
                {
                    const double err = Md * a(b) * c(b) + a(b) * a(b) * (1.0 - s) * (1.0 - s) * rho(b);
                    e1(b) += err;
                    e1sq(b) += err * err;
                    wr1(b) += w * rho(b);
                }

                // idle: r_b = phi_b, |r_b|^2 ~ c Gamma(M)
                q = 0.0;
                for (int b = 0; b < B; ++b)
                {
                    rho(b) = c(b) * gamma(eng);
                    q += d(b) * rho(b);
                }
                llr = base - q;
                s = logistic_complement(llr);
                w = logistic_slope(llr);
                s0 += s;
                for (int b = 0; b < B; ++b)
                {
                    const double err = a(b) * a(b) * s * s * rho(b);
                    e0(b) += err;
                    e0sq(b) += err * err;
                    wr0(b) += w * rho(b);
                }
            }
            n += nb;
        }

        const double nn = static_cast<double>(n);
        for (int b = 0; b < B; ++b)
        {
            const double m1 = e1(b) / nn, m0 = e0(b) / nn;
            const double v1 = std::max(e1sq(b) / nn - m1 * m1, 0.0) / nn;
            const double v0 = std::max(e0sq(b) / nn - m0 * m0, 0.0) / nn;
            out.per_block(b) = (lambda * m1 + (1.0 - lambda) * m0) / Md;
            out.std_error(b) = std::sqrt(lambda * lambda * v1 + (1.0 - lambda) * (1.0 - lambda) * v0) / Md;
            if (with_onsager)
            {
                const double es = lambda * s1 / nn + (1.0 - lambda) * s0 / nn;
                const double ewr = lambda * wr1(b) / nn + (1.0 - lambda) * wr0(b) / nn;
                out.onsager(b) = es * a(b) + a(b) * a(b) * ewr / (Md * c(b));
            }
        }
        return out;
    }

    CMat expected_jacobian(const PriorParams &prior, const EffectiveNoise &noise, int mc_samples,
                           const RngStream &stream)
    {
        require(mc_samples >= kMinMmseSamples, "expected_jacobian: at least 1000 samples are required");
        const int F = prior.dim();
        if (prior_is_null(prior))
            return CMat::Zero(F, F);

        const BgDenoiser eta(prior, noise);
        const CMat hf = psd_row_factor(prior.sigma);
        const CMat zf = noise_row_factor(noise);
        CMat j1 = CMat::Zero(F, F), j0 = CMat::Zero(F, F), jb;
        for (int k = 0; k < batch_count(mc_samples); ++k)
        {
            const int nb = batch_size(mc_samples, k);
            Engine eng = stream.child("jacobian", k).engine();
            const CMat h = complex_normal(nb, F, 1.0, eng) * hf;
            const CMat z1 = complex_normal(nb, F, 1.0, eng) * zf;
            const CMat z0 = complex_normal(nb, F, 1.0, eng) * zf;
            eta.apply(h + z1, &jb);
            j1 += jb * static_cast<double>(nb);
            eta.apply(z0, &jb);
            j0 += jb * static_cast<double>(nb);
        }
        const double lambda = prior.lambda;
        return (lambda * j1 + (1.0 - lambda) * j0) / static_cast<double>(mc_samples);
    }

    EffectiveNoise se_update(const std::vector<LocationPrior> &priors, double sigma_w2, const EffectiveNoise &c,
                             int mc_samples, const RngStream &stream, const SeOptions &options,
                             std::vector<CMat> *mmse_out, std::vector<CMat> *onsager_out)
    {
        require(sigma_w2 > 0.0, "se_update: sigma_w2 must be positive");
        require(!priors.empty(), "se_update: no locations");
        const int F = c.dim();
        const int U = static_cast<int>(priors.size());
        const bool want_onsager = onsager_out != nullptr;

        std::vector<CMat> mmse(U), onsager(want_onsager ? U : 0);
        parallel_for(U, options.threads, [&](int u)
        {
            const PriorParams &p = priors[u].prior;
            require(p.dim() == F, "se_update: prior dimension differs from C");
            const RngStream loc = stream.child("location", static_cast<std::uint64_t>(u));
            if (prior_is_null(p))
            {
                mmse[u] = CMat::Zero(F, F);
                if (want_onsager)
                    onsager[u] = CMat::Zero(F, F);
                return;
            }
            const bool fast = options.project && p.is_diagonal() && c.is_diagonal();
            if (fast)
            {
                const RVec sd = p.sigma.diagonal().real();
                const RVec cd = c.diagonal_values();
                const int blk = (block_constant(sd, options.antennas) && block_constant(cd, options.antennas))
                                    ? options.antennas
                                    : 1;
                const BlockMmse bm = block_mmse(p, c, blk, mc_samples, loc, want_onsager);
                RVec diag(F), jac(F);
                for (int b = 0; b < F / blk; ++b)
                {
                    diag.segment(b * blk, blk).setConstant(bm.per_block(b));
                    jac.segment(b * blk, blk).setConstant(bm.onsager(b));
                }
                mmse[u] = diag.cast<cplx>().asDiagonal();
                if (want_onsager)
                    onsager[u] = jac.cast<cplx>().asDiagonal();
            }
            else
            {
                mmse[u] = mmse_matrix(p, c, mc_samples, loc).value;
                if (want_onsager)
                    onsager[u] = expected_jacobian(p, c, mc_samples, loc);
            }
        });

        CMat next = sigma_w2 * CMat::Identity(F, F);
        for (int u = 0; u < U; ++u)
            next += priors[u].alpha * mmse[u];
        if (options.project)
            next = project_block_diagonal(next, options.antennas);
        else
            next = 0.5 * (next + next.adjoint()).eval();

        if (mmse_out)
            *mmse_out = std::move(mmse);
        if (onsager_out)
            *onsager_out = std::move(onsager);
        return EffectiveNoise(next);
    }

    namespace
    {
        EffectiveNoise initial_covariance(const std::vector<LocationPrior> &priors, double sigma_w2,
                                          const SeOptions &options)
        {
            require(!priors.empty(), "state evolution: no locations");
            const int F = priors.front().prior.dim();
            CMat c = sigma_w2 * CMat::Identity(F, F);
            for (const auto &lp : priors)
            {
                require(lp.prior.dim() == F, "state evolution: priors have different dimensions");
                require(lp.alpha > 0.0, "state evolution: alpha must be positive");
                require(lp.prior.lambda >= 0.0 && lp.prior.lambda <= 1.0, "state evolution: lambda outside [0, 1]");
                c += lp.alpha * lp.prior.lambda * lp.prior.sigma;
            }
            if (options.project)
                return EffectiveNoise(project_block_diagonal(c, options.antennas));
            return EffectiveNoise(0.5 * (c + c.adjoint()));
        }

        double relative_change(const EffectiveNoise &a, const EffectiveNoise &b)
        {
            const RVec da = a.diagonal_values();
            const RVec db = b.diagonal_values();
            return ((db - da).cwiseAbs().array() / da.array()).maxCoeff();
        }
    }

    SeTrace se_recursion(const std::vector<LocationPrior> &priors, double sigma_w2, int T, int mc_samples,
                         const RngStream &stream, const SeOptions &options)
    {
        require(T >= 1, "se_recursion: T must be positive");
        require(sigma_w2 > 0.0, "se_recursion: sigma_w2 must be positive");
        require(mc_samples >= kMinMmseSamples, "se_recursion: at least 1000 samples are required");

        SeTrace trace;
        EffectiveNoise c = initial_covariance(priors, sigma_w2, options);
        const int F = c.dim();
        for (int t = 1; t <= T; ++t)
        {
            trace.c_seq.push_back(c);
            trace.predicted_mse.push_back(c.matrix().trace().real() - F * sigma_w2);
            std::vector<CMat> mmse, onsager;
            EffectiveNoise next = se_update(priors, sigma_w2, c, mc_samples, stream, options, &mmse,
                                            options.compute_onsager ? &onsager : nullptr);
            trace.mmse_seq.push_back(std::move(mmse));
            if (options.compute_onsager)
                trace.onsager_seq.push_back(std::move(onsager));
            const double change = relative_change(c, next);
            if (change < options.tol && trace.iterations_to_converge < 0)
                trace.iterations_to_converge = t;
            trace.converged = change < options.tol;
            c = std::move(next);
        }
        trace.c_star = c;
        return trace;
    }

    FixedPoint se_fixed_point(const std::vector<LocationPrior> &priors, double sigma_w2, int mc_samples, double tol,
                              int max_iter, const RngStream &stream, const SeOptions &options)
    {
        require(tol > 0.0, "se_fixed_point: tol must be positive");
        require(max_iter >= 1, "se_fixed_point: max_iter must be positive");
        require(sigma_w2 > 0.0, "se_fixed_point: sigma_w2 must be positive");

        FixedPoint fp;
        EffectiveNoise c = initial_covariance(priors, sigma_w2, options);
        fp.diagonal_trace.push_back(c.diagonal_values());
        for (int it = 1; it <= max_iter; ++it)
        {
            EffectiveNoise next = se_update(priors, sigma_w2, c, mc_samples, stream, options);
            fp.last_change = relative_change(c, next);
            fp.iterations = it;
            c = std::move(next);
            fp.diagonal_trace.push_back(c.diagonal_values());
            if (fp.last_change < tol)
            {
                fp.converged = true;
                break;
            }
        }
        fp.c_star = c;
        return fp;
    }

    ScalarEstimate location_mutual_information(const PriorParams &prior, const EffectiveNoise &noise,
                                               int mc_samples, const RngStream &stream)
    {
        require(mc_samples >= kMinMmseSamples, "mutual information: at least 1000 samples are required");
        require(noise.dim() == prior.dim(), "mutual information: prior and noise dimensions differ");
        if (prior_is_null(prior))
            return {};

        const int F = prior.dim();
        const double lambda = prior.lambda;
        Eigen::LLT<CMat> llt0(noise.matrix());
        Eigen::LLT<CMat> llt1(prior.sigma + noise.matrix());
        if (llt0.info() != Eigen::Success || llt1.info() != Eigen::Success)
            throw NumericalError("mutual information: covariance is not positive definite");
        double logdet0 = 0.0, logdet1 = 0.0;
        for (int f = 0; f < F; ++f)
        {
            logdet0 += 2.0 * std::log(llt0.matrixLLT()(f, f).real());
            logdet1 += 2.0 * std::log(llt1.matrixLLT()(f, f).real());
        }
        const double log_pi = std::log(std::numbers::pi);
        const double log_w0 = lambda < 1.0 ? std::log1p(-lambda) : -std::numeric_limits<double>::infinity();
        const double log_w1 = std::log(lambda);

        // -ln p(r) for each row of R
        auto neg_log_density = [&](const CMat &R)
        {
            const CMat w0 = llt0.matrixL().solve(R.adjoint());
            const CMat w1 = llt1.matrixL().solve(R.adjoint());
            const RVec q0 = w0.colwise().squaredNorm().transpose();
            const RVec q1 = w1.colwise().squaredNorm().transpose();
            RVec out(R.rows());
            for (Eigen::Index i = 0; i < R.rows(); ++i)
            {
                const double l0 = log_w0 - F * log_pi - logdet0 - q0(i);
                const double l1 = log_w1 - F * log_pi - logdet1 - q1(i);
                const double hi = std::max(l0, l1);
                out(i) = -(hi + std::log(std::exp(l0 - hi) + std::exp(l1 - hi)));
            }
            return out;
        };

        // r has row covariance C (idle) or Sigma + C (active).
        const CMat f0 = noise_row_factor(noise);
        const CMat f1 = noise_row_factor(EffectiveNoise(prior.sigma + noise.matrix()));
        double sum1 = 0.0, sq1 = 0.0, sum0 = 0.0, sq0 = 0.0;
        for (int k = 0; k < batch_count(mc_samples); ++k)
        {
            const int nb = batch_size(mc_samples, k);
            Engine eng = stream.child("mi", k).engine();
            const CMat r1 = complex_normal(nb, F, 1.0, eng) * f1;
            const CMat r0 = complex_normal(nb, F, 1.0, eng) * f0;
            const RVec v1 = neg_log_density(r1);
            const RVec v0 = neg_log_density(r0);
            sum1 += v1.sum();
            sq1 += v1.squaredNorm();
            sum0 += v0.sum();
            sq0 += v0.squaredNorm();
        }
        const double n = mc_samples;
        const double m1 = sum1 / n, m0 = sum0 / n;
        const double var1 = std::max(sq1 / n - m1 * m1, 0.0) / n;
        const double var0 = std::max(sq0 / n - m0 * m0, 0.0) / n;
        const double entropy = lambda * m1 + (1.0 - lambda) * m0;
        ScalarEstimate out;
        out.value = entropy - F * (log_pi + 1.0) - logdet0;
        out.std_error = std::sqrt(lambda * lambda * var1 + (1.0 - lambda) * (1.0 - lambda) * var0);
        return out;
    }

    MutualInformation rs_mutual_information(const std::vector<LocationPrior> &priors, const EffectiveNoise &c_star,
                                            double sigma_w2, int mc_samples, const RngStream &stream)
    {
        require(sigma_w2 > 0.0, "rs_mutual_information: sigma_w2 must be positive");
        const int F = c_star.dim();
        Eigen::LLT<CMat> llt(c_star.matrix());
        if (llt.info() != Eigen::Success)
            throw NumericalError("rs_mutual_information: C* is not positive definite");

        MutualInformation out;
        double var = 0.0;
        for (std::size_t u = 0; u < priors.size(); ++u)
        {
            const ScalarEstimate e = location_mutual_information(
                priors[u].prior, c_star, mc_samples, stream.child("location", static_cast<std::uint64_t>(u)));
            out.per_location.push_back(e.value);
            out.value += priors[u].alpha * e.value;
            var += priors[u].alpha * priors[u].alpha * e.std_error * e.std_error;
        }
        double logdet = 0.0;
        for (int f = 0; f < F; ++f)
            logdet += 2.0 * std::log(llt.matrixLLT()(f, f).real());
        const CMat cinv = llt.solve(CMat::Identity(F, F));
        out.value += sigma_w2 * cinv.trace().real() + logdet - F * (1.0 + std::log(sigma_w2));
        out.std_error = std::sqrt(var);
        return out;
    }
}
