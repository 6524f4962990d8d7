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

#include "cfura/quadform.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "cfura/types.hpp"

namespace cfura
{
    namespace
    {
        std::vector<double> positive_weights(std::span<const double> d)
        {
            std::vector<double> out;
            out.reserve(d.size());
            for (double v : d)
            {
                if (!(v >= 0.0) || !std::isfinite(v))
                    throw InvalidInput("quadratic form: weights must be finite and non-negative");
                if (v > 0.0)
                    out.push_back(v);
            }
            return out;
        }

        double exponent(const std::vector<double> &d, double gamma, double c)
        {
            double acc = c * gamma;
            for (double v : d)
                acc -= std::log1p(v * c);
            return acc;
        }

        template <class Fn>
        double golden_section(Fn &&f, double lo, double hi)
        {
            const double r = (std::sqrt(5.0) - 1.0) / 2.0;
            double x1 = hi - r * (hi - lo);
            double x2 = lo + r * (hi - lo);
            double f1 = f(x1), f2 = f(x2);
            for (int it = 0; it < 200 && (hi - lo) > 1e-13 * std::max(1.0, std::abs(lo) + std::abs(hi)); ++it)
            {
                if (f1 < f2)
                {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - r * (hi - lo);
                    f1 = f(x1);
                }
                else
                {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + r * (hi - lo);
                    f2 = f(x2);
                }
            }
            return 0.5 * (lo + hi);
        }

        double optimal_abscissa(const std::vector<double> &d, double gamma)
        {
            double sum = 0.0, dmax = 0.0;
            for (double v : d)
            {
                sum += v;
                dmax = std::max(dmax, v);
            }
            auto f = [&](double c) { return exponent(d, gamma, c); };
            double c;
            if (gamma < sum)
                c = golden_section(f, 0.0, static_cast<double>(d.size()) / gamma);
            else if (gamma > sum)
                c = golden_section(f, -(1.0 - 1e-9) / dmax, 0.0);
            else
                c = 0.0;
            // Near the origin the line passes too close to the pole at s = 0.
            if (std::abs(c) * dmax < 1e-2)
                c = (gamma > sum ? -0.5 : 0.5) / dmax;
            return c;
        }

        // Inversion of Phi(s) = e^{s gamma} prod 1/(1 + d s) / s along
        //   s(tau) = c + |c| (j tau - kBend tau^2),
        // with the Chebyshev nodes tau_n = tan((2n - 1) pi / (2v)) and weights
        // (1 + tau_n^2) / v. With kBend = 0 this is the vertical line Re s = c and
        // each term reduces to Re Phi + tau_n Im Phi. Bending the line to the left
        // adds a factor e^{-|c| gamma kBend tau^2}, so the oscillating tail of
        // e^{j c gamma tau} stops limiting the rule to algebraic convergence. All
        // poles lie on the real axis, which the contour meets only at c.
        // Returns P(q <= gamma) for c > 0 and -P(q > gamma) for -1/max(d) < c < 0.
        constexpr double kBend = 0.5;

        double gauss_chebyshev(const std::vector<double> &d, double gamma, double c, int v)
        {
            const double ac = std::abs(c);
            double acc = 0.0;
            for (int n = 1; n <= v / 2; ++n)
            {
                const double tau = std::tan((2.0 * n - 1.0) * std::numbers::pi / (2.0 * v));
                const std::complex<double> s(c - ac * kBend * tau * tau, ac * tau);
                std::complex<double> log_phi = s * gamma - std::log(s);
                for (double w : d)
                    log_phi -= std::log(1.0 + w * s);
                const std::complex<double> ds(ac, 2.0 * ac * kBend * tau); // s'(tau) / j
                acc += (std::exp(log_phi) * ds).real() * (1.0 + tau * tau);
            }
            return acc / v;
        }

        void check_nodes(int nodes)
        {
            if (nodes < 32 || nodes % 2 != 0)
                throw InvalidInput("quadratic form: nodes must be even and at least 32");
        }
    }

    double chernoff_abscissa(std::span<const double> d, double gamma)
    {
        const std::vector<double> w = positive_weights(d);
        require_input(!w.empty(), "chernoff_abscissa: no positive weights");
        require_input(gamma > 0.0, "chernoff_abscissa: gamma must be positive");
        return optimal_abscissa(w, gamma);
    }

    QuadratureResult quadratic_form_distribution(std::span<const double> d, double gamma, int nodes)
    {
        check_nodes(nodes);
        const std::vector<double> w = positive_weights(d);
        QuadratureResult out;
        out.nodes = nodes;
        if (w.empty())
        {
            out.cdf = gamma >= 0.0 ? 1.0 : 0.0;
            out.sf = 1.0 - out.cdf;
            return out;
        }
        if (gamma <= 0.0)
        {
            out.cdf = 0.0;
            out.sf = 1.0;
            return out;
        }

        const double c = optimal_abscissa(w, gamma);
        out.abscissa = c;
        int v = nodes;
        double tail = gauss_chebyshev(w, gamma, c, v);
        out.converged = false;
        while (v < kMaxQuadratureNodes)
        {
            v *= 2;
            const double next = gauss_chebyshev(w, gamma, c, v);
            out.last_change = std::abs(next - tail);
            tail = next;
            if (out.last_change <= 1e-10 * std::abs(tail) + 1e-15)
            {
                out.converged = true;
                break;
            }
        }
        out.nodes = v;
        if (c > 0.0)
        {
            out.cdf = std::clamp(tail, 0.0, 1.0);
            out.sf = 1.0 - out.cdf;
        }
        else
        {
            out.sf = std::clamp(-tail, 0.0, 1.0);
            out.cdf = 1.0 - out.sf;
        }
        return out;
    }

    double quadratic_form_cdf(std::span<const double> d, double gamma, int nodes)
    {
        return quadratic_form_distribution(d, gamma, nodes).cdf;
    }

    double quadratic_form_sf(std::span<const double> d, double gamma, int nodes)
    {
        return quadratic_form_distribution(d, gamma, nodes).sf;
    }

    double quadratic_form_cdf_fixed(std::span<const double> d, double gamma, int nodes)
    {
        check_nodes(nodes);
        const std::vector<double> w = positive_weights(d);
        if (w.empty())
            return gamma >= 0.0 ? 1.0 : 0.0;
        if (gamma <= 0.0)
            return 0.0;
        const double c = optimal_abscissa(w, gamma);
        const double tail = gauss_chebyshev(w, gamma, c, nodes);
        return c > 0.0 ? std::clamp(tail, 0.0, 1.0) : 1.0 - std::clamp(-tail, 0.0, 1.0);
    }

    double chernoff_bound(std::span<const double> d, double gamma)
    {
        const std::vector<double> w = positive_weights(d);
        if (w.empty())
            return gamma >= 0.0 ? 1.0 : 0.0;
        if (gamma <= 0.0)
            return 0.0;
        double sum = 0.0;
        for (double v : w)
            sum += v;
        if (gamma >= sum)
            return 1.0;
        auto f = [&](double c) { return exponent(w, gamma, c); };
        const double c = golden_section(f, 0.0, static_cast<double>(w.size()) / gamma);
        return std::min(1.0, std::exp(f(c)));
    }
}
