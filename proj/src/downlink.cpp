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

#include "cfura/downlink.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cfura/denoiser.hpp"
#include "cfura/detection.hpp"
#include "cfura/parallel.hpp"
#include "cfura/quadform.hpp"
#include "sampling.hpp"

namespace cfura
{
    bool ClusterMap::serves(int u, int b) const
    {
        const auto &c = clusters.at(u);
        return std::binary_search(c.begin(), c.end(), b);
    }

    ClusterMap form_clusters(const LsfcProfile &geometry, int Q)
    {
        const int U = geometry.U();
        const int B = geometry.B();
        require(Q >= 1 && Q <= B, "form_clusters: Q must lie in [1, B]");
        ClusterMap map;
        map.clusters.resize(U);
        map.coverage.resize(B);
        std::vector<int> order(B);
        for (int u = 0; u < U; ++u)
        {
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(),
                             [&](int a, int b) { return geometry.g(u, a) > geometry.g(u, b); });
            map.clusters[u].assign(order.begin(), order.begin() + Q);
            std::sort(map.clusters[u].begin(), map.clusters[u].end());
            for (int b : map.clusters[u])
                map.coverage[b].push_back(u);
        }
        return map;
    }

    namespace
    {
        struct TiltedFalseAlarm
        {
            RVec mean; // E[|eta_b|^2 | false alarm] per block
            RVec std_error;
            double probability = 0.0;
            double probability_std_error = 0.0;
        };

        // Idle rows drawn under an exponentially tilted law that puts the
        // false-alarm event q > gamma near its mean, reweighted by the
        // likelihood ratio. Used when the event is too rare for rejection.
        TiltedFalseAlarm tilted_false_alarm(const PriorParams &prior, const EffectiveNoise &noise, double nu_log,
                                            int antennas, int mc_samples, const RngStream &stream)
        {
            const int F = prior.dim();
            const int B = F / antennas;
            const BgDenoiser eta(prior, noise);
            const double gamma = eta.log_det_ratio() - nu_log;

            // q = z K z^H with z ~ CN(0, I) and r = z P, P^H P = C
            const CMat P = detail::noise_row_factor(noise);
            const CMat K = P * eta.quad_matrix() * P.adjoint();
            Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (K + K.adjoint()));
            const RVec lam = es.eigenvalues().cwiseMax(0.0);
            const CMat W = es.eigenvectors().adjoint() * P; // r = z' W
            const double theta =
                -chernoff_abscissa(std::span<const double>(lam.data(), static_cast<std::size_t>(F)), gamma);
            require(theta >= 0.0 && theta * lam.maxCoeff() < 1.0,
                    "dl_conditional_moments: false-alarm tilt outside the admissible range");
            const RVec keep = (1.0 - theta * lam.array()).matrix();
            const RVec scale = keep.cwiseInverse().cwiseSqrt();
            double log_norm = 0.0;
            for (int f = 0; f < F; ++f)
                log_norm -= std::log(keep(f));

            // weighted sums: w, w^2, w v_b, (w v_b)^2, w^2 v_b
            RVec sv = RVec::Zero(B), sv2 = RVec::Zero(B), swv = RVec::Zero(B);
            double sw = 0.0, sw2 = 0.0;
            for (int k = 0; k < detail::batch_count(mc_samples); ++k)
            {
                const int nb = detail::batch_size(mc_samples, k);
                Engine eng = stream.child("tilted", k).engine();
                const CMat zt = complex_normal(nb, F, 1.0, eng) * scale.cast<cplx>().asDiagonal();
                const CMat r = zt * W;
                const RVec q = zt.cwiseAbs2() * lam;
                const RVec llr = eta.log_likelihood_ratios(r, false);
                const CMat e = eta.apply(r);
                for (Eigen::Index i = 0; i < nb; ++i)
                {
                    if (!(llr(i) < nu_log))
                        continue;
                    const double w = std::exp(log_norm - theta * q(i));
                    sw += w;
                    sw2 += w * w;
                    for (int b = 0; b < B; ++b)
                    {
                        const double v = e.row(i).segment(b * antennas, antennas).squaredNorm();
                        sv(b) += w * v;
                        sv2(b) += w * w * v * v;
                        swv(b) += w * w * v;
                    }
                }
            }
            require(sw > 0.0, "dl_conditional_moments: no tilted draw reached the false-alarm event");
            const double n = static_cast<double>(mc_samples);
            TiltedFalseAlarm out;
            out.mean = sv / sw;
            out.std_error = RVec::Zero(B);
            // delta method for the ratio sum(w v) / sum(w)
            for (int b = 0; b < B; ++b)
            {
                const double m = out.mean(b);
                const double dev2 = sv2(b) - 2.0 * m * swv(b) + m * m * sw2;
                out.std_error(b) = std::sqrt(std::max(0.0, dev2)) / sw;
            }
            out.probability = sw / n;
            const double pm = sw / n;
            out.probability_std_error = n > 1.0 ? std::sqrt(std::max(0.0, (sw2 / n - pm * pm) / (n - 1.0))) : 0.0;
            return out;
        }
    }

    DlMoments dl_conditional_moments(const PriorParams &prior, const EffectiveNoise &noise, double nu_log,
                                     int antennas, int mc_samples, const RngStream &stream)
    {
        const int F = prior.dim();
        require(antennas >= 1 && F % antennas == 0, "dl_conditional_moments: F must be a multiple of antennas");
        const int B = F / antennas;
        const int M = antennas;
        DlMoments out;
        out.mean = CVec::Zero(B);
        out.var = RVec::Zero(B);
        out.z = RVec::Zero(B);
        out.z_detected = RVec::Zero(B);
        out.z_false_alarm = RVec::Zero(B);
        out.mean_std_error = RVec::Zero(B);
        out.var_std_error = RVec::Zero(B);
        out.z_std_error = RVec::Zero(B);
        if (detail::prior_is_null(prior))
            return out;

        const ErrorProbabilities pe = md_fa_probabilities(prior, noise, nu_log);
        out.p_md = pe.p_md;
        out.p_fa = pe.p_fa;

        const double w_fa = prior.lambda < 1.0 ? (1.0 / prior.lambda - 1.0) * out.p_fa : 0.0;
        // rejection would keep almost nothing; weight tilted draws instead
        const bool rare_fa = w_fa > 0.0 && out.p_fa < kMinAcceptanceRate;

        std::vector<std::vector<cplx>> xs(B);
        RVec sum_zd = RVec::Zero(B), sum_zd2 = RVec::Zero(B);
        RVec sum_zf = RVec::Zero(B), sum_zf2 = RVec::Zero(B);
        out.sampling = sample_conditional(
            prior, noise, nu_log, mc_samples, stream,
            [&](const CMat &h, const CMat &e)
            {
                for (int b = 0; b < B; ++b)
                {
                    const auto hb = h.middleCols(b * M, M);
                    const auto eb = e.middleCols(b * M, M);
                    // x_i = h_b eta_b^H
                    const CVec x = hb.cwiseProduct(eb.conjugate()).rowwise().sum();
                    const RVec en = eb.rowwise().squaredNorm();
                    xs[b].insert(xs[b].end(), x.data(), x.data() + x.size());
                    sum_zd(b) += en.sum();
                    sum_zd2(b) += en.squaredNorm();
                }
            },
            rare_fa ? IdleBatchFn{} : IdleBatchFn(
                [&](const CMat &e)
                {
                    for (int b = 0; b < B; ++b)
                    {
                        const RVec en = e.middleCols(b * M, M).rowwise().squaredNorm();
                        sum_zf(b) += en.sum();
                        sum_zf2(b) += en.squaredNorm();
                    }
                }));

        const ConditionalSampling &s = out.sampling;
        if (1.0 - out.p_md > 0.0 && !s.active_sufficient())
            throw InsufficientSamples("dl_conditional_moments: detection event accepted too rarely");
        if (w_fa > 0.0 && !rare_fa && !s.idle_sufficient())
            throw InsufficientSamples("dl_conditional_moments: false-alarm event accepted too rarely");

        auto se = [](double sum, double sum2, double n)
        {
            if (n < 2.0)
                return 0.0;
            const double m = sum / n;
            return std::sqrt(std::max(0.0, (sum2 / n - m * m) / (n - 1.0)));
        };
        const double na = static_cast<double>(s.active_accepted);
        const double ni = static_cast<double>(s.idle_accepted);
        for (int b = 0; b < B; ++b)
        {
            if (na > 0.0)
            {
                const auto &x = xs[b];
                cplx m(0.0, 0.0);
                for (cplx v : x)
                    m += v;
                m /= na;
                double d1 = 0.0, d2 = 0.0;
                for (cplx v : x)
                {
                    const double d = std::norm(v - m);
                    d1 += d;
                    d2 += d * d;
                }
                out.mean(b) = m;
                out.var(b) = d1 / na;
                out.z_detected(b) = sum_zd(b) / na;
                out.mean_std_error(b) = std::sqrt(out.var(b) / std::max(1.0, na - 1.0));
                out.var_std_error(b) = se(d1, d2, na);
            }
            const double ed = se(sum_zd(b), sum_zd2(b), na);
            if (rare_fa)
                continue;
            if (ni > 0.0)
                out.z_false_alarm(b) = sum_zf(b) / ni;
            out.z(b) = (1.0 - out.p_md) * out.z_detected(b) + w_fa * out.z_false_alarm(b);
            const double ef = se(sum_zf(b), sum_zf2(b), ni);
            out.z_std_error(b) = std::hypot((1.0 - out.p_md) * ed, w_fa * ef);
        }
        if (rare_fa)
        {
            const TiltedFalseAlarm t =
                tilted_false_alarm(prior, noise, nu_log, M, mc_samples, stream.child("false_alarm"));
            for (int b = 0; b < B; ++b)
            {
                out.z_false_alarm(b) = t.mean(b);
                out.z(b) = (1.0 - out.p_md) * out.z_detected(b) + w_fa * t.mean(b);
                const double ed = se(sum_zd(b), sum_zd2(b), na);
                out.z_std_error(b) = std::hypot((1.0 - out.p_md) * ed, w_fa * t.std_error(b));
            }
            out.p_fa_tilted = t.probability;
            out.p_fa_tilted_std_error = t.probability_std_error;
        }
        return out;
    }

    DlTables dl_tables(const std::vector<LocationPrior> &priors, const EffectiveNoise &noise, const RVec &nu_log,
                       int antennas, int mc_samples, const RngStream &stream, int threads)
    {
        const int U = static_cast<int>(priors.size());
        require(nu_log.size() == U, "dl_tables: one threshold per location required");
        require(antennas >= 1 && noise.dim() % antennas == 0, "dl_tables: F must be a multiple of antennas");
        const int B = noise.dim() / antennas;
        std::vector<DlMoments> rows(U);
        parallel_for(U, threads,
                     [&](int u)
                     {
                         rows[u] = dl_conditional_moments(priors[u].prior, noise, nu_log(u), antennas, mc_samples,
                                                          stream.child(streams::conditional, u));
                     });
        DlTables t{CMat::Zero(U, B), RMat::Zero(U, B), RMat::Zero(U, B),
                   RMat::Zero(U, B), RMat::Zero(U, B), RMat::Zero(U, B)};
        for (int u = 0; u < U; ++u)
        {
            t.mean.row(u) = rows[u].mean.transpose();
            t.var.row(u) = rows[u].var.transpose();
            t.z.row(u) = rows[u].z.transpose();
            t.mean_std_error.row(u) = rows[u].mean_std_error.transpose();
            t.var_std_error.row(u) = rows[u].var_std_error.transpose();
            t.z_std_error.row(u) = rows[u].z_std_error.transpose();
        }
        return t;
    }

    namespace
    {
        void check_load(const RMat &z, const std::vector<double> &lambda, const std::vector<double> &alpha,
                        const std::vector<std::vector<int>> &coverage)
        {
            require(static_cast<Eigen::Index>(lambda.size()) == z.rows() &&
                        static_cast<Eigen::Index>(alpha.size()) == z.rows(),
                    "downlink: lambda and alpha must have one entry per location");
            require(static_cast<Eigen::Index>(coverage.size()) == z.cols(),
                    "downlink: coverage must have one entry per RU");
        }
    }

    double dl_power_normalization(const RMat &z, const std::vector<double> &lambda, const std::vector<double> &alpha,
                                  const std::vector<std::vector<int>> &coverage, int L)
    {
        check_load(z, lambda, alpha, coverage);
        require(L >= 1, "dl_power_normalization: L must be positive");
        double num = 0.0;
        for (std::size_t u = 0; u < lambda.size(); ++u)
            num += lambda[u] * alpha[u];
        double den = 0.0;
        for (std::size_t b = 0; b < coverage.size(); ++b)
            for (int u : coverage[b])
                den += lambda[u] * alpha[u] * z(u, static_cast<Eigen::Index>(b));
        require(den > 0.0, "dl_power_normalization: no detectable users contribute power");
        return num / (static_cast<double>(L) * den);
    }

    RVec dl_transmit_power(const RMat &z, const std::vector<double> &lambda, const std::vector<double> &alpha,
                           const std::vector<std::vector<int>> &coverage, int L, double rho_dl)
    {
        check_load(z, lambda, alpha, coverage);
        RVec p = RVec::Zero(static_cast<Eigen::Index>(coverage.size()));
        for (std::size_t b = 0; b < coverage.size(); ++b)
            for (int u : coverage[b])
                p(static_cast<Eigen::Index>(b)) +=
                    lambda[u] * alpha[u] * static_cast<double>(L) * z(u, static_cast<Eigen::Index>(b));
        return rho_dl * p;
    }

    namespace
    {
        double bits(double sinr)
        {
            return std::log1p(std::max(0.0, sinr)) / std::log(2.0);
        }

        void check_inputs(const LsfcProfile &geometry, const ClusterMap &clusters, const RateInputs &in)
        {
            const auto U = static_cast<std::size_t>(geometry.U());
            require(in.lambda.size() == U && in.alpha.size() == U,
                    "uatf_rates: lambda and alpha must have one entry per location");
            require(clusters.clusters.size() == U, "uatf_rates: cluster map does not match the geometry");
            require(in.L >= 1 && in.antennas >= 1, "uatf_rates: L and antennas must be positive");
        }
    }

    double genie_rate(const LsfcProfile &geometry, const ClusterMap &clusters, int u, double rho_dl,
                      const RateInputs &in)
    {
        check_inputs(geometry, clusters, in);
        require(rho_dl > 0.0, "genie_rate: rho_dl must be positive");
        const double M = in.antennas;
        double sum_g = 0.0, var = 0.0;
        for (int b : clusters.clusters.at(u))
        {
            const double g = geometry.g(u, b);
            sum_g += g;
            var += in.genie_variance == GenieVariance::exact ? g * g : g;
        }
        double interf = 0.0;
        for (int v = 0; v < geometry.U(); ++v)
            for (int b : clusters.clusters[v])
                interf += in.lambda[v] * in.alpha[v] * geometry.g(u, b) * geometry.g(v, b);
        const double den = in.sigma_w2 / rho_dl + M * var + in.L * M * interf;
        return bits(M * M * sum_g * sum_g / den);
    }

    RateReport uatf_rates(const LsfcProfile &geometry, const ClusterMap &clusters, const DlTables &tables,
                          double rho_dl, const RateInputs &in)
    {
        check_inputs(geometry, clusters, in);
        require(rho_dl > 0.0, "uatf_rates: rho_dl must be positive");
        const int U = geometry.U();
        const int B = geometry.B();
        require(tables.mean.rows() == U && tables.mean.cols() == B && tables.var.rows() == U &&
                    tables.var.cols() == B && tables.z.rows() == U && tables.z.cols() == B,
                "uatf_rates: moment tables must be U x B");

        RateReport rep;
        rep.rho_dl = rho_dl;
        rep.tables = tables;
        auto same_shape = [&](const RMat &m) { return m.rows() == U && m.cols() == B; };
        const bool with_errors =
            same_shape(tables.mean_std_error) && same_shape(tables.var_std_error) && same_shape(tables.z_std_error);
        rep.uatf.resize(U);
        rep.genie.resize(U);
        if (with_errors)
            rep.uatf_std_error.resize(U);
        for (int u = 0; u < U; ++u)
        {
            cplx mean(0.0, 0.0);
            double var = 0.0, mean_e2 = 0.0, den_e2 = 0.0;
            for (int b : clusters.clusters[u])
            {
                mean += tables.mean(u, b);
                var += tables.var(u, b);
                if (with_errors)
                {
                    mean_e2 += std::pow(tables.mean_std_error(u, b), 2);
                    den_e2 += std::pow(tables.var_std_error(u, b), 2);
                }
            }
            double interf = 0.0;
            for (int v = 0; v < U; ++v)
                for (int b : clusters.clusters[v])
                {
                    const double k = in.lambda[v] * in.alpha[v] * geometry.g(u, b);
                    interf += k * tables.z(v, b);
                    if (with_errors)
                        den_e2 += std::pow(in.L * k * tables.z_std_error(v, b), 2);
                }
            const double num = std::norm(mean);
            const double den = in.sigma_w2 / rho_dl + var + in.L * interf;
            const double sinr = num / den;
            rep.uatf(u) = bits(sinr);
            rep.genie(u) = genie_rate(geometry, clusters, u, rho_dl, in);
            if (with_errors)
            {
                // |d|m|^2| <= 2 |m| |dm|; the table errors are taken as independent
                const double rel2 = (num > 0.0 ? 4.0 * mean_e2 / num : 0.0) + den_e2 / (den * den);
                rep.uatf_std_error(u) = sinr / ((1.0 + sinr) * std::log(2.0)) * std::sqrt(rel2);
            }
        }
        return rep;
    }

    std::vector<RateCdfEntry> rate_cdf(const RVec &rates, const std::vector<double> &lambda,
                                       const std::vector<double> &alpha)
    {
        const auto U = static_cast<std::size_t>(rates.size());
        require(lambda.size() == U && alpha.size() == U, "rate_cdf: lambda and alpha must match the rates");
        double total = 0.0;
        for (std::size_t u = 0; u < U; ++u)
            total += lambda[u] * alpha[u];
        require(total > 0.0, "rate_cdf: no active-user population");

        std::vector<RateCdfEntry> out(U);
        for (std::size_t u = 0; u < U; ++u)
            out[u] = {static_cast<int>(u), rates(static_cast<Eigen::Index>(u)), lambda[u] * alpha[u] / total, 0.0};
        std::stable_sort(out.begin(), out.end(),
                         [](const RateCdfEntry &a, const RateCdfEntry &b) { return a.rate < b.rate; });
        double acc = 0.0;
        for (auto &e : out)
        {
            acc += e.weight;
            e.cumulative = acc;
        }
        if (!out.empty())
            out.back().cumulative = 1.0;
        return out;
    }

    double cdf_median(const std::vector<RateCdfEntry> &cdf)
    {
        require(!cdf.empty(), "cdf_median: empty distribution");
        for (const auto &e : cdf)
            if (e.cumulative >= 0.5)
                return e.rate;
        return cdf.back().rate;
    }
}
