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

// Reference computations used by the tests. Nothing here calls into the
// library's numerical kernels; each oracle is an independent route to the
// same quantity.

#ifndef CFURA_TEST_ORACLES_HPP
#define CFURA_TEST_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace oracle
{
    using cplx = std::complex<double>;
    using CMat = Eigen::MatrixXcd;
    using CRow = Eigen::Matrix<cplx, 1, Eigen::Dynamic>;
    using RVec = Eigen::VectorXd;

    // Erlang-k CDF with unit scale.
    inline double erlang_cdf(int k, double x)
    {
        double term = 1.0, sum = 1.0;
        for (int j = 1; j < k; ++j)
        {
            term *= x / j;
            sum += term;
        }
        if (x < 1.0)
        {
            // lower tail by its own series, e^{-x} sum_{j >= k} x^j / j!, free of cancellation
            double t = std::exp(-x), tail = 0.0;
            for (int j = 1; j <= k; ++j)
                t *= x / j;
            for (int j = k; j < k + 60; ++j)
            {
                tail += t;
                t *= x / (j + 1);
            }
            return tail;
        }
        return 1.0 - std::exp(-x) * sum;
    }

    // P(sum d_i E_i <= x) for distinct d_i, partial fractions of the Laplace transform.
    inline double hypoexponential_cdf(const std::vector<double> &d, double x)
    {
        double sf = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i)
        {
            double w = 1.0;
            for (std::size_t j = 0; j < d.size(); ++j)
                if (j != i)
                    w *= d[i] / (d[i] - d[j]);
            sf += w * std::exp(-x / d[i]);
        }
        return 1.0 - sf;
    }

    // P(a G1 + b G2 <= x) with G1, G2 ~ Gamma(2, 1): residues at the two
    // double poles s = -1/a and s = -1/b of F(s) = 1 / (s (1 + a s)^2 (1 + b s)^2).
    inline double double_pair_cdf(double a, double b, double x)
    {
        // (1 + a s)^2 = a^2 (s + 1/a)^2. Residue at a double pole p of
        // e^{sx} / (s a^2 (s - p)^2 (1 + b s)^2) is d/ds [e^{sx} / (a^2 s (1 + b s)^2)] at s = p.
        auto residue = [x](double a, double b)
        {
            const double p = -1.0 / a;
            const double h = 1.0 / (a * a * p * (1.0 + b * p) * (1.0 + b * p));
            // d/ds ln of e^{sx} / (s (1 + bs)^2) = x - 1/s - 2b / (1 + bs)
            const double dlog = x - 1.0 / p - 2.0 * b / (1.0 + b * p);
            return std::exp(p * x) * h * dlog;
        };
        return 1.0 + residue(a, b) + residue(b, a);
    }

    // Same quantity by numerical convolution of the two Gamma(2) laws.
    inline double double_pair_cdf_integral(double a, double b, double x)
    {
        auto f = [a, b, x](double s)
        {
            const double fa = s * std::exp(-s / a) / (a * a);
            const double y = (x - s) / b;
            return fa * (1.0 - std::exp(-y) * (1.0 + y));
        };
        return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, x, 15, 1e-15);
    }

    // Gauss-Hermite nodes and weights for the weight e^{-x^2} by Golub-Welsch.
    inline std::pair<RVec, RVec> gauss_hermite(int n)
    {
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
        for (int i = 1; i < n; ++i)
            J(i, i - 1) = J(i - 1, i) = std::sqrt(i / 2.0);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
        RVec w = es.eigenvectors().row(0).transpose().array().square() * std::sqrt(std::numbers::pi);
        return {es.eigenvalues(), w};
    }

    // Scalar Bernoulli-Gaussian posterior mean written out from Bayes' rule.
    inline cplx scalar_posterior_mean(cplx r, double lambda, double sigma, double tau)
    {
        const double p1 = lambda * std::exp(-std::norm(r) / (sigma + tau)) / (sigma + tau);
        const double p0 = (1.0 - lambda) * std::exp(-std::norm(r) / tau) / tau;
        return p1 / (p0 + p1) * sigma / (sigma + tau) * r;
    }

    // E|x - eta(x + n)|^2 for the scalar model by 2-D Gauss-Hermite over the
    // real and imaginary parts of r under each hypothesis.
    inline double scalar_mmse_gauss_hermite(double lambda, double sigma, double tau, int n = 120)
    {
        const auto [x, w] = gauss_hermite(n);
        // r ~ CN(0, v): Re, Im ~ N(0, v/2); substitute Re = sqrt(v) x.
        auto expect = [&](double v, const std::function<double(cplx)> &f)
        {
            double acc = 0.0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    acc += w(i) * w(j) * f(cplx(std::sqrt(v) * x(i), std::sqrt(v) * x(j)));
            return acc / std::numbers::pi;
        };
        // Active: E|h - eta|^2 = E|h|^2 - 2 Re E[h conj(eta)] + E|eta|^2. Given r,
        // E[h | r, a=1] = sigma/(sigma+tau) r, so E[h conj(eta)] = E[sigma/(sigma+tau) r conj(eta(r))].
        const double k = sigma / (sigma + tau);
        const double active = sigma + expect(sigma + tau, [&](cplx r)
                                             {
                                                 const cplx e = scalar_posterior_mean(r, lambda, sigma, tau);
                                                 return std::norm(e) - 2.0 * std::real(k * r * std::conj(e));
                                             });
        const double idle = expect(tau, [&](cplx r) { return std::norm(scalar_posterior_mean(r, lambda, sigma, tau)); });
        return lambda * active + (1.0 - lambda) * idle;
    }

    // Wirtinger Jacobian [J]_ij = d f_j / d r_i by central differences,
    // d/dr = (d/dx - i d/dy) / 2.
    inline CMat wirtinger_jacobian(const std::function<CRow(const CRow &)> &f, const CRow &r, double h = 1e-5)
    {
        const int F = static_cast<int>(r.size());
        CMat J(F, F);
        for (int i = 0; i < F; ++i)
        {
            CRow rp = r, rm = r;
            rp(i) += h;
            rm(i) -= h;
            const CRow dx = (f(rp) - f(rm)) / (2.0 * h);
            rp = r;
            rm = r;
            rp(i) += cplx(0.0, h);
            rm(i) -= cplx(0.0, h);
            const CRow dy = (f(rp) - f(rm)) / (2.0 * h);
            J.row(i) = 0.5 * (dx - cplx(0.0, 1.0) * dy);
        }
        return J;
    }

    // Positive root of c = s2 + la g c / (g + c), one interference term.
    inline double single_term_fixed_point(double la, double g, double s2)
    {
        // c^2 + (g - s2 - la g) c - s2 g = 0
        const double b = g - s2 - la * g;
        return 0.5 * (-b + std::sqrt(b * b + 4.0 * s2 * g));
    }

    // Minimum Euclidean distance over the 3 x 3 periodic images.
    inline double brute_torus_distance(double ax, double ay, double bx, double by, double px, double py)
    {
        double best = INFINITY;
        for (int i = -1; i <= 1; ++i)
            for (int j = -1; j <= 1; ++j)
                best = std::min(best, std::hypot(ax - bx + i * px, ay - by + j * py));
        return best;
    }

    // Monte Carlo CDF of sum d_f |z_f|^2 with its standard error.
    inline std::pair<double, double> quadratic_form_mc(const std::vector<double> &d, double gamma, long n,
                                                       std::uint64_t seed)
    {
        std::mt19937_64 eng(seed);
        std::exponential_distribution<double> ex(1.0);
        long hits = 0;
        for (long k = 0; k < n; ++k)
        {
            double q = 0.0;
            for (double df : d)
                q += df * ex(eng);
            hits += q <= gamma;
        }
        const double p = double(hits) / n;
        return {p, std::sqrt(p * (1.0 - p) / n)};
    }
}

#endif
