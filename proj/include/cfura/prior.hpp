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

#ifndef CFURA_PRIOR_HPP
#define CFURA_PRIOR_HPP

#include <vector>

#include "cfura/types.hpp"

namespace cfura
{
    // Bernoulli-Gaussian row prior: x = a h, a ~ Bern(lambda), h ~ CN(0, sigma).
    struct PriorParams
    {
        double lambda = 1.0;
        CMat sigma;

        int dim() const { return static_cast<int>(sigma.rows()); }
        bool is_diagonal() const;
        void validate() const;

        static PriorParams diagonal(double lambda, const RVec &variances);
    };

    // Effective noise covariance C seen by the denoiser.
    class EffectiveNoise
    {
    public:
        EffectiveNoise() = default;
        explicit EffectiveNoise(CMat c);

        static EffectiveNoise diagonal(const RVec &variances);
        static EffectiveNoise scaled_identity(int dim, double variance);
        // tau_b repeated M times.
        static EffectiveNoise per_ru(const RVec &tau, int antennas);

        const CMat &matrix() const { return c_; }
        int dim() const { return static_cast<int>(c_.rows()); }
        bool is_diagonal() const { return diagonal_; }
        RVec diagonal_values() const { return c_.diagonal().real(); }
        // Block means of the diagonal, one per RU.
        RVec per_ru_values(int antennas) const;

    private:
        CMat c_;
        bool diagonal_ = false;
    };

    // A location's prior together with its load alpha_u = N_u / L.
    struct LocationPrior
    {
        double alpha = 0.0;
        PriorParams prior;
    };

    bool is_diagonal_matrix(const CMat &m);
}

#endif
