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
#include <random>
#include <vector>

#include "cfura/quadform.hpp"
#include "oracles.hpp"

using namespace cfura;
using Catch::Approx;

TEST_CASE("exponential and Erlang closed forms", "[quadform]")
{
    const std::vector<double> one{1.0};
    CHECK(quadratic_form_cdf(one, std::log(2.0)) == Approx(0.5).margin(1e-8));
    const std::vector<double> two{1.0, 1.0};
    CHECK(quadratic_form_cdf(two, 1.0) == Approx(1.0 - 2.0 / std::exp(1.0)).margin(1e-8));
    for (int k : {1, 2, 4, 8})
        for (double x : {0.05, 0.5, 2.0, 7.0, 20.0})
        {
            const std::vector<double> d(k, 1.0);
            const double ref = oracle::erlang_cdf(k, x);
            const double cdf = quadratic_form_cdf(d, x);
            const double sf = quadratic_form_sf(d, x);
            INFO("k = " << k << " x = " << x);
            CHECK(std::abs(cdf - ref) < 1e-8);
            CHECK(std::abs(sf - (1.0 - ref)) < 1e-8);
        }
}

TEST_CASE("distinct scales against the hypoexponential form", "[quadform]")
{
    const std::vector<std::vector<double>> specs{{0.3, 1.2}, {0.1, 0.5, 2.0}, {0.2, 0.3, 0.7, 1.1, 1.9}};
    for (const auto &d : specs)
        for (double x : {0.01, 0.3, 1.0, 3.0, 10.0})
        {
            const double ref = oracle::hypoexponential_cdf(d, x);
            CHECK(std::abs(quadratic_form_cdf(d, x) - ref) < 1e-8);
        }
}

TEST_CASE("double pole pair", "[quadform]")
{
    const std::vector<double> d{0.3, 0.3, 1.2, 1.2};
    const double residue = oracle::double_pair_cdf(0.3, 1.2, 2.0);
    const double integral = oracle::double_pair_cdf_integral(0.3, 1.2, 2.0);
    REQUIRE(residue == Approx(integral).epsilon(1e-12));
    CHECK(residue == Approx(0.32698112887972336).epsilon(1e-13));
    CHECK(std::abs(quadratic_form_cdf(d, 2.0) - residue) < 1e-8);

    const auto [p, se] = oracle::quadratic_form_mc(d, 2.0, 10'000'000, 20260501);
    INFO("mc " << p << " +- " << se);
    CHECK(std::abs(quadratic_form_cdf(d, 2.0) - p) < 3 * se);
}

TEST_CASE("small tails are accurate in relative terms", "[quadform]")
{
    const std::vector<double> d(4, 1.0);
    // far lower tail
    const double lo = oracle::erlang_cdf(4, 0.01);
    CHECK(quadratic_form_cdf(d, 0.01) == Approx(lo).epsilon(1e-7));
    // far upper tail: 1 - cdf underflows in the oracle, use the series directly
    const double x = 40.0;
    const double sf_ref = std::exp(-x) * (1 + x + x * x / 2 + x * x * x / 6);
    CHECK(quadratic_form_sf(d, x) == Approx(sf_ref).epsilon(1e-7));
}

TEST_CASE("quadrature is stable under node refinement", "[quadform]")
{
    std::mt19937_64 eng(4);
    std::uniform_real_distribution<double> u(0.05, 2.0);
    for (int k = 0; k < 30; ++k)
    {
        std::vector<double> d(1 + k % 6);
        for (auto &v : d)
            v = u(eng);
        double mean = 0.0;
        for (double v : d)
            mean += v;
        const double gamma = mean * (0.3 + 1.4 * (k % 5) / 4.0);
        const double a = quadratic_form_cdf_fixed(d, gamma, 1024);
        const double b = quadratic_form_cdf_fixed(d, gamma, 4096);
        CHECK(std::abs(a - b) < 1e-8);
    }
}

TEST_CASE("Chernoff abscissa and bound", "[quadform]")
{
    const std::vector<double> d{1.0};
    CHECK(chernoff_abscissa(d, 0.1) == Approx(9.0).epsilon(1e-6));
    CHECK(chernoff_bound(d, 0.1) == Approx(std::exp(0.9) / 10.0).epsilon(1e-8));
    CHECK(chernoff_bound(d, 0.1) == Approx(0.2460).margin(1e-4));
    CHECK(quadratic_form_cdf(d, 0.1) == Approx(1.0 - std::exp(-0.1)).margin(1e-10));
    // at or beyond the mean the bound is vacuous
    CHECK(chernoff_bound(d, 1.0) == 1.0);
    CHECK(chernoff_bound(d, 3.0) == 1.0);
}

TEST_CASE("Chernoff bound dominates the CDF", "[quadform]")
{
    std::mt19937_64 eng(5);
    std::uniform_real_distribution<double> u(0.01, 3.0);
    for (int k = 0; k < 200; ++k)
    {
        std::vector<double> d(1 + k % 8);
        double mean = 0.0;
        for (auto &v : d)
        {
            v = u(eng);
            mean += v;
        }
        const double gamma = mean * (0.01 + 1.5 * u(eng) / 3.0);
        CHECK(chernoff_bound(d, gamma) >= quadratic_form_cdf(d, gamma));
    }
}

TEST_CASE("argument checks", "[quadform]")
{
    const std::vector<double> empty;
    // no positive weight: point mass at zero
    CHECK(quadratic_form_cdf(empty, 1.0) == 1.0);
    CHECK(quadratic_form_cdf(std::vector<double>{0.0, 0.0}, 1.0) == 1.0);
    const std::vector<double> neg{-1.0};
    CHECK_THROWS(quadratic_form_cdf(neg, 1.0));
    const std::vector<double> d{1.0};
    CHECK(quadratic_form_cdf(d, 0.0) == 0.0);
    CHECK(quadratic_form_cdf(d, -1.0) == 0.0);
}
