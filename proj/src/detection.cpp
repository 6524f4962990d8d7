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

#include "cfura/detection.hpp"

#include <cmath>
#include <limits>
#include <span>

#include "cfura/denoiser.hpp"
#include "cfura/format.hpp"

namespace cfura
{
    namespace
    {
        std::span<const double> as_span(const RVec &v)
        {
            return {v.data(), static_cast<std::size_t>(v.size())};
        }

        // Eigenvalues of D K for Hermitian PSD D and positive definite K.
        RVec spectrum(const CMat &D, const CMat &K)
        {
            Eigen::LLT<CMat> llt(K);
            if (llt.info() != Eigen::Success)
                throw NumericalError("detector: covariance is not positive definite");
            const CMat Lk = llt.matrixL();
            const CMat H = Lk.adjoint() * D * Lk;
            Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (H + H.adjoint()), Eigen::EigenvaluesOnly);
            return es.eigenvalues().cwiseMax(0.0);
        }

        // Root of a monotone function on [lo, hi] by bisection until the bracket
        // is below rel_tol or `done` holds at the midpoint.
        template <class Fn, class Done>
        double bisect(Fn &&f, double lo, double hi, Done &&done)
        {
            double flo = f(lo);
            for (int it = 0; it < 200; ++it)
            {
                const double mid = 0.5 * (lo + hi);
                const double fm = f(mid);
                if (done(mid, fm))
                    return mid;
                if ((fm < 0.0) == (flo < 0.0))
                {
                    lo = mid;
                    flo = fm;
                }
                else
                    hi = mid;
                if (hi - lo <= 1e-15 * hi)
                    break;
            }
            return 0.5 * (lo + hi);
        }
    }

    DetectorSpec build_detector(const PriorParams &prior, const EffectiveNoise &noise, double nu_log)
    {
        const BgDenoiser eta(prior, noise);
        DetectorSpec spec;
        spec.nu_log = nu_log;
        spec.log_det_ratio = eta.log_det_ratio();
        spec.gamma = spec.log_det_ratio - nu_log;
        if (eta.diagonal())
        {
            const RVec s = prior.sigma.diagonal().real().cwiseMax(0.0);
            const RVec c = noise.diagonal_values();
            spec.d_h0 = s.array() / (s.array() + c.array());
            spec.d_h1 = s.array() / c.array();
        }
        else
        {
            const CMat D = eta.quad_matrix();
            spec.d_h0 = spectrum(D, noise.matrix());
            spec.d_h1 = spectrum(D, prior.sigma + noise.matrix());
        }
        return spec;
    }

    ErrorProbabilities md_fa_probabilities(const DetectorSpec &spec)
    {
        ErrorProbabilities p;
        if (spec.gamma == std::numeric_limits<double>::infinity())
            return {1.0, 0.0};
        if (spec.gamma == -std::numeric_limits<double>::infinity())
            return {0.0, 1.0};
        p.p_md = quadratic_form_cdf(as_span(spec.d_h1), spec.gamma);
        p.p_fa = quadratic_form_sf(as_span(spec.d_h0), spec.gamma);
        return p;
    }

    ErrorProbabilities md_fa_probabilities(const PriorParams &prior, const EffectiveNoise &noise, double nu_log)
    {
        return md_fa_probabilities(build_detector(prior, noise, nu_log));
    }

    std::string to_string(const ThresholdMode &mode)
    {
        if (mode.kind == ThresholdMode::Kind::equal_error)
            return "equal_error";
        return "target_fa(" + format_double(mode.target) + ")";
    }

    double calibrate_threshold(const PriorParams &prior, const EffectiveNoise &noise, const ThresholdMode &mode)
    {
        const DetectorSpec base = build_detector(prior, noise, 0.0);
        require(base.d_h1.maxCoeff() > 0.0, "calibrate_threshold: prior carries no signal");
        const RVec &d0 = base.d_h0;
        const RVec &d1 = base.d_h1;

        // Work on gamma; nu_log = log_det_ratio - gamma.
        double hi = std::max(d1.sum(), d0.sum());
        if (mode.kind == ThresholdMode::Kind::equal_error)
        {
            // relative gap, so that small equal-error levels are resolved as well as large ones
            auto f = [&](double g)
            {
                const double md = quadratic_form_cdf(as_span(d1), g), fa = quadratic_form_sf(as_span(d0), g);
                return md + fa > 0.0 ? (md - fa) / (md + fa) : -1.0;
            };
            while (f(hi) <= 0.0)
                hi *= 2.0;
            const double g = bisect(f, 0.0, hi, [](double, double fm) { return std::abs(fm) < 1e-10; });
            return base.log_det_ratio - g;
        }

        const double target = mode.target;
        require(target > 0.0 && target < 1.0, "calibrate_threshold: target false-alarm rate must lie in (0, 1)");
        auto f = [&](double g) { return quadratic_form_sf(as_span(d0), g) - target; };
        while (f(hi) >= 0.0)
            hi *= 2.0;
        const double g = bisect(f, 0.0, hi, [&](double, double fm) { return std::abs(fm) < 1e-10 * target; });
        return base.log_det_ratio - g;
    }

    bool quadratic_test(const CRow &r, const CMat &quad, const DetectorSpec &spec)
    {
        const double q = (r * quad * r.adjoint())(0, 0).real();
        return q > spec.gamma;
    }

    double DetectionReport::p_md_empirical(int u) const
    {
        return active.at(u) > 0 ? static_cast<double>(missed.at(u)) / active.at(u)
                                : std::numeric_limits<double>::quiet_NaN();
    }

    double DetectionReport::p_fa_empirical(int u) const
    {
        return idle.at(u) > 0 ? static_cast<double>(false_alarms.at(u)) / idle.at(u)
                              : std::numeric_limits<double>::quiet_NaN();
    }

    DetectionReport detect(const std::vector<CMat> &r_final, const std::vector<LocationPrior> &priors,
                           const EffectiveNoise &noise, const RVec &thresholds,
                           const std::vector<std::vector<std::uint8_t>> *truth)
    {
        const int U = static_cast<int>(r_final.size());
        require_input(static_cast<int>(priors.size()) == U && thresholds.size() == U,
                      "detect: priors and thresholds must match the number of locations");
        if (truth)
            require_input(static_cast<int>(truth->size()) == U, "detect: truth must match the number of locations");

        DetectionReport rep;
        rep.decisions.resize(U);
        rep.p_md.resize(U);
        rep.p_fa.resize(U);
        rep.thresholds = thresholds;
        rep.has_truth = truth != nullptr;
        if (truth)
        {
            rep.active.assign(U, 0);
            rep.missed.assign(U, 0);
            rep.idle.assign(U, 0);
            rep.false_alarms.assign(U, 0);
        }

        for (int u = 0; u < U; ++u)
        {
            const BgDenoiser eta(priors[u].prior, noise);
            const RVec llr = eta.log_likelihood_ratios(r_final[u], false);
            auto &dec = rep.decisions[u];
            dec.resize(llr.size());
            for (Eigen::Index n = 0; n < llr.size(); ++n)
                dec[n] = llr(n) < thresholds(u) ? 1 : 0;

            const ErrorProbabilities p = md_fa_probabilities(priors[u].prior, noise, thresholds(u));
            rep.p_md(u) = p.p_md;
            rep.p_fa(u) = p.p_fa;

            if (truth)
            {
                const auto &a = (*truth)[u];
                require_input(a.size() == dec.size(), "detect: truth length differs from the number of rows");
                for (std::size_t n = 0; n < dec.size(); ++n)
                {
                    if (a[n])
                    {
                        ++rep.active[u];
                        rep.missed[u] += dec[n] ? 0 : 1;
                    }
                    else
                    {
                        ++rep.idle[u];
                        rep.false_alarms[u] += dec[n] ? 1 : 0;
                    }
                }
            }
        }
        return rep;
    }
}
