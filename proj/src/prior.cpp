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

#include "cfura/prior.hpp"

#include <cmath>

namespace cfura
{
    bool is_diagonal_matrix(const CMat &m)
    {
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            for (Eigen::Index i = 0; i < m.rows(); ++i)
                if (i != j && m(i, j) != cplx(0.0, 0.0))
                    return false;
        return true;
    }

    bool PriorParams::is_diagonal() const
    {
        return is_diagonal_matrix(sigma);
    }

    void PriorParams::validate() const
    {
        require(lambda > 0.0 && lambda <= 1.0, "prior: lambda must lie in (0, 1]");
        require(sigma.rows() == sigma.cols() && sigma.rows() > 0, "prior: sigma must be square and non-empty");
        const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
        require((sigma - sigma.adjoint()).cwiseAbs().maxCoeff() <= 1e-12 * scale, "prior: sigma must be Hermitian");
        Eigen::SelfAdjointEigenSolver<CMat> es(sigma, Eigen::EigenvaluesOnly);
        require(es.eigenvalues().minCoeff() >= -1e-12 * scale, "prior: sigma must be positive semidefinite");
    }

    PriorParams PriorParams::diagonal(double lambda, const RVec &variances)
    {
        PriorParams p;
        p.lambda = lambda;
        p.sigma = variances.cast<cplx>().asDiagonal();
        return p;
    }

    EffectiveNoise::EffectiveNoise(CMat c) : c_(std::move(c))
    {
        require(c_.rows() == c_.cols() && c_.rows() > 0, "effective noise: matrix must be square and non-empty");
        const double scale = std::max(1e-300, c_.cwiseAbs().maxCoeff());
        require((c_ - c_.adjoint()).cwiseAbs().maxCoeff() <= 1e-12 * scale, "effective noise: matrix must be Hermitian");
        diagonal_ = is_diagonal_matrix(c_);
        if (diagonal_)
        {
            for (Eigen::Index i = 0; i < c_.rows(); ++i)
                if (!(c_(i, i).real() > 0.0) || !std::isfinite(c_(i, i).real()))
                    throw NumericalError("effective noise: diagonal entries must be positive and finite");
        }
        else
        {
            Eigen::LLT<CMat> llt(c_);
            if (llt.info() != Eigen::Success)
                throw NumericalError("effective noise: matrix is not positive definite");
        }
    }

    EffectiveNoise EffectiveNoise::diagonal(const RVec &variances)
    {
        return EffectiveNoise(CMat(variances.cast<cplx>().asDiagonal()));
    }

    EffectiveNoise EffectiveNoise::scaled_identity(int dim, double variance)
    {
        return diagonal(RVec::Constant(dim, variance));
    }

    EffectiveNoise EffectiveNoise::per_ru(const RVec &tau, int antennas)
    {
        require(antennas >= 1, "effective noise: antennas must be positive");
        RVec d(tau.size() * antennas);
        for (Eigen::Index b = 0; b < tau.size(); ++b)
            d.segment(b * antennas, antennas).setConstant(tau(b));
        return diagonal(d);
    }

    RVec EffectiveNoise::per_ru_values(int antennas) const
    {
        require(antennas >= 1 && dim() % antennas == 0, "effective noise: dimension is not a multiple of antennas");
        const RVec d = diagonal_values();
        RVec out(dim() / antennas);
        for (Eigen::Index b = 0; b < out.size(); ++b)
            out(b) = d.segment(b * antennas, antennas).mean();
        return out;
    }
}
