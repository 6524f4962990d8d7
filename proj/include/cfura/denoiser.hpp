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

#ifndef CFURA_DENOISER_HPP
#define CFURA_DENOISER_HPP

#include "cfura/prior.hpp"
#include "cfura/types.hpp"

namespace cfura
{
    // Posterior-mean estimator of a Bernoulli-Gaussian row x observed as
    // r = x + z C^{1/2}. All quantities that depend only on (prior, noise)
    // are factored once at construction.
    //
    //   gain A     = (Sigma + C)^{-1} Sigma
    //   quad D     = C^{-1} - (Sigma + C)^{-1}
    //   ln Lambda  = ln((1 - lambda) / lambda) + ln|Sigma + C| - ln|C| - r D r^H
    //   eta(r)     = r A / (1 + Lambda)
    //
    // Rows are 1 x F; Jacobians follow [J]_ij = d eta_j / d r_i with the
    // Wirtinger derivative d/dr = (d/dx - i d/dy) / 2.
    class BgDenoiser
    {
    public:
        BgDenoiser(const PriorParams &prior, const EffectiveNoise &noise);

        int dim() const { return dim_; }
        bool diagonal() const { return diagonal_; }
        double lambda() const { return lambda_; }
        double log_prior_odds() const { return log_prior_odds_; }
        // ln|Sigma + C| - ln|C|
        double log_det_ratio() const { return log_det_ratio_; }

        CMat gain() const;
        CMat quad_matrix() const;
        CMat noise_inverse() const;

        double quadratic_form(const CRow &r) const;
        // With include_prior_odds = false this is the prior-free ratio used for detection.
        double log_likelihood_ratio(const CRow &r, bool include_prior_odds = true) const;
        CRow conditional_mean(const CRow &r) const;
        CRow posterior_mean(const CRow &r) const;
        CMat jacobian(const CRow &r) const;

        // Row-wise versions over an N x F matrix.
        RVec quadratic_forms(const CMat &R) const;
        RVec log_likelihood_ratios(const CMat &R, bool include_prior_odds = true) const;
        CMat apply(const CMat &R) const;
        // (1/N) sum_n eta'(r_n)
        CMat mean_jacobian(const CMat &R) const;
        // apply() and mean_jacobian() sharing one pass.
        CMat apply(const CMat &R, CMat *mean_jac) const;

    private:
        int dim_ = 0;
        bool diagonal_ = false;
        double lambda_ = 1.0;
        double log_prior_odds_ = 0.0;
        double log_det_ratio_ = 0.0;

        // diagonal path
        RVec a_diag_;
        RVec d_diag_;
        RVec cinv_diag_;

        // dense path
        CMat a_;
        CMat d_;
        CMat cinv_;
    };

    // 1 / (1 + exp(x)), stable for either sign of x.
    double logistic_complement(double x);
    // exp(x) / (1 + exp(x))^2
    double logistic_slope(double x);

    double log_likelihood_ratio(const CRow &r, const PriorParams &prior, const EffectiveNoise &noise);
    CRow posterior_mean(const CRow &r, const PriorParams &prior, const EffectiveNoise &noise);
    CMat jacobian(const CRow &r, const PriorParams &prior, const EffectiveNoise &noise);
}

#endif
