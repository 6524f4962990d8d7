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

#ifndef CFURA_QUADFORM_HPP
#define CFURA_QUADFORM_HPP

#include <span>

namespace cfura
{
    // Distribution of q = sum_f d_f |z_f|^2 with z ~ CN(0, I), obtained by
    // inverting its Laplace transform prod_f 1 / (1 + d_f s) with Gauss-Chebyshev
    // nodes tau_n = tan((2n - 1) pi / (2v)), n = 1..v/2, on a contour that leaves
    // the real axis vertically at s = c and bends left as a parabola.
    // The abscissa c minimizes the Chernoff exponent c*gamma - sum ln(1 + d_f c).
    // When that minimizer is negative the same sum taken left of the origin
    // gives the upper tail directly, so the smaller tail never suffers
    // cancellation.

    inline constexpr int kDefaultQuadratureNodes = 2048;
    inline constexpr int kMaxQuadratureNodes = 1 << 18;

    struct QuadratureResult
    {
        double cdf = 0.0;
        double sf = 0.0;
        double abscissa = 0.0;
        int nodes = 0;
        double last_change = 0.0; // between the final two node counts
        bool converged = true;
    };

    // Doubles the node count from `nodes` until two successive values of the
    // smaller tail agree to 1e-10 relative (or kMaxQuadratureNodes is reached).
    QuadratureResult quadratic_form_distribution(std::span<const double> d, double gamma,
                                                 int nodes = kDefaultQuadratureNodes);

    double quadratic_form_cdf(std::span<const double> d, double gamma, int nodes = kDefaultQuadratureNodes);
    double quadratic_form_sf(std::span<const double> d, double gamma, int nodes = kDefaultQuadratureNodes);

    // Single evaluation with exactly `nodes` nodes, no refinement.
    double quadratic_form_cdf_fixed(std::span<const double> d, double gamma, int nodes);

    // Minimizer of c*gamma - sum ln(1 + d_f c) over c > -1/max(d).
    double chernoff_abscissa(std::span<const double> d, double gamma);

    // min over c >= 0 of exp(c gamma) prod (1 + d_f c)^{-1}, clamped to 1.
    double chernoff_bound(std::span<const double> d, double gamma);
}

#endif
