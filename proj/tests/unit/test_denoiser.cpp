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

#include <catch_amalgamated.hpp>

#include <cmath>

#include "cfura/denoiser.hpp"
#include "cfura/rng.hpp"
#include "oracles.hpp"

using namespace cfura;
using Catch::Approx;

namespace
{
    PriorParams scalar_prior(double lambda, double sigma)
    {
        return PriorParams::diagonal(lambda, RVec::Constant(1, sigma));
    }

    CRow scalar_row(cplx v)
    {
        CRow r(1);
        r(0) = v;
        return r;
    }

    // Random Hermitian positive definite matrix with eigenvalues in [lo, hi].
    CMat random_pd(int F, double lo, double hi, Engine &eng)
    {
        const CMat a = complex_normal(F, F, 1.0, eng);
        Eigen::HouseholderQR<CMat> qr(a);
        const CMat q = qr.householderQ();
        RVec ev(F);
        for (int i = 0; i < F; ++i)
            ev(i) = lo + (hi - lo) * uniform01(eng);
        return q * ev.asDiagonal() * q.adjoint();
    }

    // ln Lambda_map from its definition as a ratio of Gaussian densities.
    double direct_log_ratio(const CRow &r, double lambda, const CMat &sigma, const CMat &c)
    {
        const CMat s1 = sigma + c;
        const double q0 = (r * c.inverse() * r.adjoint())(0, 0).real();
        const double q1 = (r * s1.inverse() * r.adjoint())(0, 0).real();
        const double p0 = (1 - lambda) * std::exp(-q0) / c.determinant().real();
        const double p1 = lambda * std::exp(-q1) / s1.determinant().real();
        return std::log(p0 / p1);
    }
}

TEST_CASE("scalar likelihood ratio and posterior mean", "[denoiser]")
{
    const PriorParams p = scalar_prior(0.1, 1.0);
    const EffectiveNoise c = EffectiveNoise::scaled_identity(1, 0.5);
    const CRow r = scalar_row(1.0);
    const double expect = std::log(9.0) + std::log(3.0) - (2.0 - 2.0 / 3.0);
    CHECK(log_likelihood_ratio(r, p, c) == Approx(expect).epsilon(1e-14));
    CHECK(log_likelihood_ratio(r, p, c) == Approx(1.962504).margin(1e-6));

    const cplx eta = posterior_mean(r, p, c)(0);
    CHECK(eta.real() == Approx(2.0 / 3.0 / (1.0 + std::exp(expect))).epsilon(1e-14));
    CHECK(eta.real() == Approx(0.08214).margin(1e-5));
    CHECK(eta.imag() == 0.0);
    CHECK(std::abs(eta - oracle::scalar_posterior_mean(1.0, 0.1, 1.0, 0.5)) < 1e-15);
}

TEST_CASE("zero signal covariance", "[denoiser]")
{
    const PriorParams p = PriorParams::diagonal(0.3, RVec::Zero(3));
    const EffectiveNoise c = EffectiveNoise::diagonal(RVec::Constant(3, 0.2));
    Engine eng(1);
    const CRow r = complex_normal(1, 3, 1.0, eng);
    CHECK(log_likelihood_ratio(r, p, c) == Approx(std::log(0.7 / 0.3)).epsilon(1e-14));
    CHECK(posterior_mean(r, p, c).norm() == 0.0);
    CHECK(jacobian(r, p, c).norm() == 0.0);
}

TEST_CASE("zero observation", "[denoiser]")
{
    const PriorParams p = PriorParams::diagonal(0.2, RVec::LinSpaced(4, 0.5, 2.0));
    const EffectiveNoise c = EffectiveNoise::diagonal(RVec::Constant(4, 0.1));
    const BgDenoiser d(p, c);
    const CRow r = CRow::Zero(4);
    CHECK(d.log_likelihood_ratio(r) == Approx(std::log(4.0) + d.log_det_ratio()).epsilon(1e-14));
    CHECK(d.log_det_ratio() > 0.0);
}

TEST_CASE("full activity is the linear MMSE estimator", "[denoiser]")
{
    Engine eng(4);
    const int F = 3;
    PriorParams p;
    p.lambda = 1.0;
    p.sigma = random_pd(F, 0.5, 2.0, eng);
    const EffectiveNoise c(random_pd(F, 0.1, 0.4, eng));
    const CMat gain = (p.sigma + c.matrix()).inverse() * p.sigma;
    for (int k = 0; k < 5; ++k)
    {
        const CRow r = complex_normal(1, F, 2.0, eng);
        CHECK((posterior_mean(r, p, c) - r * gain).norm() < 1e-12);
        CHECK((jacobian(r, p, c) - gain).norm() < 1e-12);
    }
}

TEST_CASE("zero activity probability is rejected", "[denoiser]")
{
    CHECK_THROWS_AS(BgDenoiser(scalar_prior(0.0, 1.0), EffectiveNoise::scaled_identity(1, 1.0)), InvalidParameter);
}

TEST_CASE("log ratio agrees with the density ratio", "[denoiser]")
{
    Engine eng(6);
    for (int F : {1, 2, 4})
        for (int k = 0; k < 20; ++k)
        {
            PriorParams p;
            p.lambda = 0.05 + 0.9 * uniform01(eng);
            p.sigma = random_pd(F, 0.2, 1.5, eng);
            const EffectiveNoise c(random_pd(F, 0.3, 1.0, eng));
            const CRow r = complex_normal(1, F, 1.0, eng);
            const double direct = direct_log_ratio(r, p.lambda, p.sigma, c.matrix());
            CHECK(std::exp(log_likelihood_ratio(r, p, c)) == Approx(std::exp(direct)).epsilon(1e-10));
        }
}

TEST_CASE("Jacobian matches Wirtinger finite differences", "[denoiser]")
{
    Engine eng(10);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k)
    {
        const int F = 1 + k % 4;
        RVec sig(F), tau(F);
        for (int f = 0; f < F; ++f)
        {
            sig(f) = 0.2 + 1.8 * uniform01(eng);
            tau(f) = 0.05 + 0.5 * uniform01(eng);
        }
        const PriorParams p = PriorParams::diagonal(0.2, sig);
        const EffectiveNoise c = EffectiveNoise::diagonal(tau);
        const BgDenoiser d(p, c);
        const CRow r = complex_normal(1, F, 1.0, eng);
        const CMat fd = oracle::wirtinger_jacobian([&](const CRow &x) { return d.posterior_mean(x); }, r);
        const CMat an = d.jacobian(r);
        worst = std::max(worst, (an - fd).norm() / std::max(fd.norm(), 1e-300));
    }
    INFO("worst relative error " << worst);
    CHECK(worst < 1e-5);
}

TEST_CASE("dense Jacobian matches finite differences", "[denoiser]")
{
    Engine eng(12);
    for (int k = 0; k < 50; ++k)
    {
        const int F = 2 + k % 3;
        PriorParams p;
        p.lambda = 0.3;
        p.sigma = random_pd(F, 0.3, 1.5, eng);
        const EffectiveNoise c(random_pd(F, 0.2, 0.6, eng));
        const BgDenoiser d(p, c);
        const CRow r = complex_normal(1, F, 1.0, eng);
        const CMat fd = oracle::wirtinger_jacobian([&](const CRow &x) { return d.posterior_mean(x); }, r);
        CHECK((d.jacobian(r) - fd).norm() / fd.norm() < 1e-5);
    }
}

TEST_CASE("row-wise and batched paths agree", "[denoiser]")
{
    Engine eng(14);
    const PriorParams p = PriorParams::diagonal(0.1, RVec::LinSpaced(4, 0.3, 1.0));
    const EffectiveNoise c = EffectiveNoise::diagonal(RVec::Constant(4, 0.2));
    const BgDenoiser d(p, c);
    const CMat R = complex_normal(64, 4, 0.8, eng);
    CMat mean_jac;
    const CMat out = d.apply(R, &mean_jac);
    CMat acc = CMat::Zero(4, 4);
    const RVec llr = d.log_likelihood_ratios(R);
    for (int n = 0; n < 64; ++n)
    {
        CHECK((out.row(n) - d.posterior_mean(R.row(n))).norm() < 1e-13);
        CHECK(llr(n) == Approx(d.log_likelihood_ratio(R.row(n))).epsilon(1e-13));
        acc += d.jacobian(R.row(n));
    }
    CHECK((mean_jac - acc / 64.0).norm() < 1e-13);
    CHECK((d.mean_jacobian(R) - mean_jac).norm() < 1e-13);
}

TEST_CASE("large inputs stay finite", "[denoiser]")
{
    const PriorParams p = PriorParams::diagonal(0.01, RVec::Constant(2, 1.0));
    const EffectiveNoise c = EffectiveNoise::diagonal(RVec::Constant(2, 1e-4));
    const BgDenoiser d(p, c);
    CRow r(2);
    r << cplx(1e3, -1e3), cplx(5e2, 0);
    CHECK(std::isfinite(d.log_likelihood_ratio(r)));
    CHECK(d.posterior_mean(r).allFinite());
    CHECK(d.jacobian(r).allFinite());
}

TEST_CASE("logistic helpers", "[denoiser]")
{
    for (double x : {-800.0, -30.0, -1.0, 0.0, 2.0, 40.0, 900.0})
    {
        const double ref = 1.0 / (1.0 + std::exp(x));
        CHECK(logistic_complement(x) == Approx(ref).margin(1e-300).epsilon(1e-14));
        CHECK(std::isfinite(logistic_slope(x)));
    }
    CHECK(logistic_slope(0.0) == Approx(0.25));
}
