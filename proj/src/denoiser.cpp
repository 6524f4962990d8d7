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

#include "cfura/denoiser.hpp"

#include <cmath>
#include <limits>

namespace cfura
{
    double logistic_complement(double x)
    {
        if (x >= 0.0)
        {
            const double e = std::exp(-x);
            return e / (1.0 + e);
        }
        return 1.0 / (1.0 + std::exp(x));
    }

    double logistic_slope(double x)
    {
        const double e = std::exp(-std::abs(x));
        const double d = 1.0 + e;
        return e / (d * d);
    }

    BgDenoiser::BgDenoiser(const PriorParams &prior, const EffectiveNoise &noise)
    {
        prior.validate();
        require(noise.dim() == prior.dim(), "denoiser: prior and noise dimensions differ");
        dim_ = prior.dim();
        lambda_ = prior.lambda;
        log_prior_odds_ = (lambda_ >= 1.0) ? -std::numeric_limits<double>::infinity()
                                           : std::log1p(-lambda_) - std::log(lambda_);
        diagonal_ = noise.is_diagonal() && prior.is_diagonal();

        if (diagonal_)
        {
            const RVec s = prior.sigma.diagonal().real();
            const RVec c = noise.diagonal_values();
            a_diag_.resize(dim_);
            d_diag_.resize(dim_);
            cinv_diag_.resize(dim_);
            log_det_ratio_ = 0.0;
            for (int f = 0; f < dim_; ++f)
            {
                if (!(c(f) > 0.0))
                    throw NumericalError("denoiser: effective noise is singular");
                const double sf = std::max(s(f), 0.0);
                a_diag_(f) = sf / (sf + c(f));
                d_diag_(f) = sf / (c(f) * (sf + c(f)));
                cinv_diag_(f) = 1.0 / c(f);
                log_det_ratio_ += std::log1p(sf / c(f));
            }
            return;
        }

        const CMat &C = noise.matrix();
        Eigen::LLT<CMat> llt_c(C);
        if (llt_c.info() != Eigen::Success)
            throw NumericalError("denoiser: effective noise is not positive definite");
        const CMat SC = prior.sigma + C;
        Eigen::LLT<CMat> llt_sc(SC);
        if (llt_sc.info() != Eigen::Success)
            throw NumericalError("denoiser: Sigma + C is not positive definite");

        const CMat I = CMat::Identity(dim_, dim_);
        cinv_ = llt_c.solve(I);
        cinv_ = 0.5 * (cinv_ + cinv_.adjoint()).eval();
        a_ = llt_sc.solve(prior.sigma);
        // C^{-1} - (Sigma + C)^{-1} = C^{-1} Sigma (Sigma + C)^{-1} = C^{-1} A^H
        d_ = cinv_ * a_.adjoint();
        d_ = 0.5 * (d_ + d_.adjoint()).eval();

        const CMat &lc = llt_c.matrixLLT();
        const CMat &lsc = llt_sc.matrixLLT();
        log_det_ratio_ = 0.0;
        for (int f = 0; f < dim_; ++f)
            log_det_ratio_ += 2.0 * (std::log(lsc(f, f).real()) - std::log(lc(f, f).real()));
    }

    CMat BgDenoiser::gain() const
    {
        return diagonal_ ? CMat(a_diag_.cast<cplx>().asDiagonal()) : a_;
    }

    CMat BgDenoiser::quad_matrix() const
    {
        return diagonal_ ? CMat(d_diag_.cast<cplx>().asDiagonal()) : d_;
    }

    CMat BgDenoiser::noise_inverse() const
    {
        return diagonal_ ? CMat(cinv_diag_.cast<cplx>().asDiagonal()) : cinv_;
    }

    double BgDenoiser::quadratic_form(const CRow &r) const
    {
        require_input(r.size() == dim_, "denoiser: row has wrong length");
        if (diagonal_)
            return (r.cwiseAbs2().transpose().array() * d_diag_.array()).sum();
        return (r * d_ * r.adjoint())(0, 0).real();
    }

    double BgDenoiser::log_likelihood_ratio(const CRow &r, bool include_prior_odds) const
    {
        const double base = log_det_ratio_ - quadratic_form(r);
        return include_prior_odds ? log_prior_odds_ + base : base;
    }

    CRow BgDenoiser::conditional_mean(const CRow &r) const
    {
        require_input(r.size() == dim_, "denoiser: row has wrong length");
        if (diagonal_)
            return r.cwiseProduct(a_diag_.transpose().cast<cplx>());
        return r * a_;
    }

    CRow BgDenoiser::posterior_mean(const CRow &r) const
    {
        return conditional_mean(r) * logistic_complement(log_likelihood_ratio(r));
    }

    CMat BgDenoiser::jacobian(const CRow &r) const
    {
        const double llr = log_likelihood_ratio(r);
        const double s = logistic_complement(llr);
        const double w = logistic_slope(llr);
        const CRow m = conditional_mean(r);
        CMat outer = m.adjoint() * m;
        if (diagonal_)
            outer = cinv_diag_.cast<cplx>().asDiagonal() * outer;
        else
            outer = cinv_ * outer;
        return gain() * s + w * outer;
    }

    RVec BgDenoiser::quadratic_forms(const CMat &R) const
    {
        require_input(R.cols() == dim_, "denoiser: matrix has wrong number of columns");
        if (diagonal_)
            return R.cwiseAbs2() * d_diag_;
        return (R * d_).cwiseProduct(R.conjugate()).rowwise().sum().real();
    }

    RVec BgDenoiser::log_likelihood_ratios(const CMat &R, bool include_prior_odds) const
    {
        const double base = include_prior_odds ? log_prior_odds_ + log_det_ratio_ : log_det_ratio_;
        return (base - quadratic_forms(R).array()).matrix();
    }

    CMat BgDenoiser::apply(const CMat &R) const
    {
        return apply(R, nullptr);
    }

    CMat BgDenoiser::mean_jacobian(const CMat &R) const
    {
        CMat j;
        apply(R, &j);
        return j;
    }

    CMat BgDenoiser::apply(const CMat &R, CMat *mean_jac) const
    {
        require_input(R.cols() == dim_, "denoiser: matrix has wrong number of columns");
        const Eigen::Index n = R.rows();
        CMat m = diagonal_ ? CMat(R * a_diag_.cast<cplx>().asDiagonal()) : CMat(R * a_);
        const RVec llr = log_likelihood_ratios(R, true);

        RVec s(n), w(n);
        for (Eigen::Index i = 0; i < n; ++i)
        {
            s(i) = logistic_complement(llr(i));
            w(i) = logistic_slope(llr(i));
        }

        if (mean_jac)
        {
            const double inv_n = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
            CMat outer = m.adjoint() * w.cast<cplx>().asDiagonal() * m;
            if (diagonal_)
                outer = cinv_diag_.cast<cplx>().asDiagonal() * outer;
            else
                outer = cinv_ * outer;
            *mean_jac = (gain() * s.sum() + outer) * inv_n;
        }

        m.array().colwise() *= s.cast<cplx>().array();
        return m;
    }

    double log_likelihood_ratio(const CRow &r, const PriorParams &prior, const EffectiveNoise &noise)
    {
        return BgDenoiser(prior, noise).log_likelihood_ratio(r);
    }

    CRow posterior_mean(const CRow &r, const PriorParams &prior, const EffectiveNoise &noise)
    {
        return BgDenoiser(prior, noise).posterior_mean(r);
    }

    CMat jacobian(const CRow &r, const PriorParams &prior, const EffectiveNoise &noise)
    {
        return BgDenoiser(prior, noise).jacobian(r);
    }
}
