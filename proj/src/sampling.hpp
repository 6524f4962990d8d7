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

#ifndef CFURA_SRC_SAMPLING_HPP
#define CFURA_SRC_SAMPLING_HPP

#include <algorithm>

#include "cfura/prior.hpp"
#include "cfura/types.hpp"

// Internal helpers shared by the Monte Carlo estimators.
namespace cfura::detail
{
    inline constexpr int kBatch = 4096;

    inline int batch_count(int n)
    {
        return (n + kBatch - 1) / kBatch;
    }

    inline int batch_size(int n, int k)
    {
        return std::min(kBatch, n - k * kBatch);
    }

    inline bool prior_is_null(const PriorParams &prior)
    {
        return prior.lambda <= 0.0 || prior.sigma.isZero(0.0);
    }

    // Row factor P with P^H P = Sigma for a PSD (possibly singular) Sigma.
    inline CMat psd_row_factor(const CMat &sigma)
    {
        if (is_diagonal_matrix(sigma))
            return sigma.diagonal().real().cwiseMax(0.0).cwiseSqrt().cast<cplx>().asDiagonal();
        Eigen::SelfAdjointEigenSolver<CMat> es(sigma);
        const RVec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        return es.eigenvectors() * ev.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
    }

    inline CMat noise_row_factor(const EffectiveNoise &noise)
    {
        if (noise.is_diagonal())
            return noise.diagonal_values().cwiseSqrt().cast<cplx>().asDiagonal();
        Eigen::LLT<CMat> llt(noise.matrix());
        if (llt.info() != Eigen::Success)
            throw NumericalError("effective noise is not positive definite");
        return llt.matrixL().adjoint();
    }
}

#endif
