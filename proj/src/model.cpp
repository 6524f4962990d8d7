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

#include "cfura/model.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include <boost/random/bernoulli_distribution.hpp>

#include "cfura/format.hpp"

namespace cfura
{
    int SystemConfig::codebook_size(int u) const
    {
        return static_cast<int>(std::lround(alpha.at(u) * L));
    }

    double SystemConfig::load(int u) const
    {
        return static_cast<double>(codebook_size(u)) / L;
    }

    double SystemConfig::noise_variance() const
    {
        return 1.0 / (L * snr);
    }

    void SystemConfig::validate() const
    {
        require(L >= 1, "config: L must be positive");
        require(U >= 1, "config: U must be positive");
        require(B >= 1, "config: B must be positive");
        require(M >= 1, "config: M must be positive");
        require(static_cast<int>(alpha.size()) == U, "config: alpha must have U entries");
        require(static_cast<int>(lambda.size()) == U, "config: lambda must have U entries");
        for (int u = 0; u < U; ++u)
        {
            require(alpha[u] > 0.0 && std::isfinite(alpha[u]), "config: alpha entries must be positive");
            require(codebook_size(u) >= 1, "config: round(alpha * L) must be at least 1");
            require(lambda[u] >= 0.0 && lambda[u] <= 1.0, "config: lambda entries must lie in [0, 1]");
        }
        require(snr > 0.0 && std::isfinite(snr), "config: snr must be positive");
        require(T >= 1, "config: T must be positive");
        require(mc_se >= 1, "config: mc_se must be positive");
        require(mc_cond >= 1, "config: mc_cond must be positive");
    }

    RVec LsfcProfile::covariance_diagonal(int u, int antennas) const
    {
        require(u >= 0 && u < U(), "geometry: location index out of range");
        RVec d(B() * antennas);
        for (int b = 0; b < B(); ++b)
            d.segment(b * antennas, antennas).setConstant(g(u, b));
        return d;
    }

    CMat LsfcProfile::covariance(int u, int antennas) const
    {
        return covariance_diagonal(u, antennas).cast<cplx>().asDiagonal();
    }

    void LsfcProfile::validate() const
    {
        require(g.rows() >= 1 && g.cols() >= 1, "geometry: empty gain matrix");
        require(g.allFinite() && g.minCoeff() >= 0.0, "geometry: gains must be finite and non-negative");
        for (Eigen::Index u = 0; u < g.rows(); ++u)
            require(g.row(u).maxCoeff() > 0.0, "geometry: every location needs a positive gain");
    }

    LsfcProfile build_wyner_geometry(double crosstalk)
    {
        require(crosstalk >= 0.0 && crosstalk <= 1.0, "wyner: crosstalk must lie in [0, 1]");
        LsfcProfile p;
        p.g.resize(2, 2);
        p.g << 1.0, crosstalk, crosstalk, 1.0;
        return p;
    }

    double pathloss(double distance, double d0, double gamma)
    {
        require(d0 > 0.0, "pathloss: d0 must be positive");
        require(gamma > 0.0, "pathloss: gamma must be positive");
        require(distance >= 0.0, "pathloss: distance must be non-negative");
        return 1.0 / (1.0 + std::pow(distance / d0, gamma));
    }

    double torus_distance(const Point &a, const Point &b, double period_x, double period_y)
    {
        double best = std::numeric_limits<double>::infinity();
        for (int i = -1; i <= 1; ++i)
            for (int j = -1; j <= 1; ++j)
            {
                const double dx = b.x - a.x + i * period_x;
                const double dy = b.y - a.y + j * period_y;
                best = std::min(best, std::hypot(dx, dy));
            }
        return best;
    }

    namespace
    {
        // Triangular lattice vertex (a, j) sits at (a*side + j*side/2, j*h).
        // The torus is 3 sides wide and 4 rows high, with (a, j) ~ (a+3, j) ~ (a-2, j+4).
        constexpr int kCols = 3;
        constexpr int kRows = 4;

        int floor_div(int a, int b)
        {
            return (a >= 0) ? a / b : -((-a + b - 1) / b);
        }

        int vertex_slot(int a, int j)
        {
            const int k = floor_div(j, kRows);
            const int jj = j - k * kRows;
            int aa = (a + 2 * k) % kCols;
            if (aa < 0)
                aa += kCols;
            return jj * kCols + aa;
        }

        int mod3(int v)
        {
            return ((v % 3) + 3) % 3;
        }
    }

    LsfcProfile build_hex_geometry(double side, double d0, double gamma)
    {
        require(side > 0.0, "hex: side must be positive");
        const double h = side * std::sqrt(3.0) / 2.0;
        const double wx = kCols * side;
        const double wy = kRows * h;

        auto wrap = [&](Point p)
        {
            p.x = std::fmod(p.x, wx);
            if (p.x < 0.0)
                p.x += wx;
            p.y = std::fmod(p.y, wy);
            if (p.y < 0.0)
                p.y += wy;
            return p;
        };
        auto raw = [&](int a, int j) { return Point{a * side + j * side / 2.0, j * h}; };

        std::vector<Point> slot_pos(kCols * kRows);
        for (int j = 0; j < kRows; ++j)
            for (int a = 0; a < kCols; ++a)
                slot_pos[vertex_slot(a, j)] = wrap(raw(a, j));

        // Up triangles with (a + 2j) % 3 == 0 and down triangles with (a + 2j + 2) % 3 == 0
        // are holes; the remaining 16 tiles use each vertex as a corner exactly 4 times.
        struct Tile
        {
            Point centroid;
            std::array<int, 3> slots;
        };
        std::vector<Tile> tiles;
        for (int j = 0; j < kRows; ++j)
            for (int a = 0; a < kCols; ++a)
            {
                if (mod3(a + 2 * j) != 0)
                {
                    const Point p0 = raw(a, j), p1 = raw(a + 1, j), p2 = raw(a, j + 1);
                    tiles.push_back({wrap({(p0.x + p1.x + p2.x) / 3.0, (p0.y + p1.y + p2.y) / 3.0}),
                                     {vertex_slot(a, j), vertex_slot(a + 1, j), vertex_slot(a, j + 1)}});
                }
                if (mod3(a + 2 * j + 2) != 0)
                {
                    const Point p0 = raw(a + 1, j), p1 = raw(a, j + 1), p2 = raw(a + 1, j + 1);
                    tiles.push_back({wrap({(p0.x + p1.x + p2.x) / 3.0, (p0.y + p1.y + p2.y) / 3.0}),
                                     {vertex_slot(a + 1, j), vertex_slot(a, j + 1), vertex_slot(a + 1, j + 1)}});
                }
            }

        auto raster_less = [](const Point &p, const Point &q)
        {
            constexpr double eps = 1e-9;
            if (std::abs(p.y - q.y) > eps)
                return p.y < q.y;
            return p.x < q.x - eps;
        };

        std::vector<int> ru_order(slot_pos.size());
        std::iota(ru_order.begin(), ru_order.end(), 0);
        std::sort(ru_order.begin(), ru_order.end(),
                  [&](int p, int q) { return raster_less(slot_pos[p], slot_pos[q]); });
        std::vector<int> slot_to_ru(slot_pos.size());
        for (std::size_t i = 0; i < ru_order.size(); ++i)
            slot_to_ru[ru_order[i]] = static_cast<int>(i);

        std::sort(tiles.begin(), tiles.end(),
                  [&](const Tile &p, const Tile &q) { return raster_less(p.centroid, q.centroid); });

        LsfcProfile out;
        out.period_x = wx;
        out.period_y = wy;
        for (int slot : ru_order)
            out.rus.push_back(slot_pos[slot]);
        for (const Tile &t : tiles)
        {
            out.locations.push_back(t.centroid);
            std::array<int, 3> c = {slot_to_ru[t.slots[0]], slot_to_ru[t.slots[1]], slot_to_ru[t.slots[2]]};
            std::sort(c.begin(), c.end());
            out.corners.push_back(c);
        }

        out.g.resize(static_cast<Eigen::Index>(out.locations.size()), static_cast<Eigen::Index>(out.rus.size()));
        for (std::size_t u = 0; u < out.locations.size(); ++u)
            for (std::size_t b = 0; b < out.rus.size(); ++b)
                out.g(u, b) = pathloss(torus_distance(out.locations[u], out.rus[b], wx, wy), d0, gamma);
        return out;
    }

    double calibrate_snr(double snr_rx, const LsfcProfile &geometry)
    {
        require(snr_rx > 0.0, "calibrate_snr: snr_rx must be positive");
        require(geometry.g.size() > 0, "calibrate_snr: empty geometry");
        const double gmax = geometry.g.maxCoeff();
        require(gmax > 0.0, "calibrate_snr: geometry has no positive gain");
        return snr_rx / gmax;
    }

    std::vector<LocationPrior> location_priors(const SystemConfig &config, const LsfcProfile &geometry)
    {
        require(config.U == geometry.U() && config.B == geometry.B(), "priors: config and geometry disagree on U or B");
        std::vector<LocationPrior> out(config.U);
        for (int u = 0; u < config.U; ++u)
        {
            out[u].alpha = config.load(u);
            out[u].prior.lambda = config.lambda[u];
            out[u].prior.sigma = geometry.covariance(u, config.M);
        }
        return out;
    }

    int Scene::active_count(int u) const
    {
        return static_cast<int>(std::count(activity.at(u).begin(), activity.at(u).end(), std::uint8_t{1}));
    }

    Scene sample_scene(const SystemConfig &config, const LsfcProfile &geometry, const RngStream &stream)
    {
        config.validate();
        geometry.validate();
        require(config.U == geometry.U() && config.B == geometry.B(), "sample_scene: config and geometry disagree on U or B");

        const int L = config.L;
        const int F = config.F();
        Scene s;
        s.codebooks.resize(config.U);
        s.activity.resize(config.U);
        s.channels.resize(config.U);
        s.noise.resize(L, F);
        s.observation.resize(L, F);

        for (int u = 0; u < config.U; ++u)
        {
            const int N = config.codebook_size(u);

            Engine ce = stream.child(streams::codebook, u).engine();
            s.codebooks[u] = complex_normal(L, N, 1.0 / L, ce);

            Engine ae = stream.child(streams::activity, u).engine();
            boost::random::bernoulli_distribution<double> bern(config.lambda[u]);
            s.activity[u].resize(N);
            for (int n = 0; n < N; ++n)
                s.activity[u][n] = bern(ae) ? 1 : 0;

            Engine he = stream.child(streams::channel, u).engine();
            const RVec sd = geometry.covariance_diagonal(u, config.M).cwiseSqrt();
            s.channels[u] = CMat::Zero(N, F);
            CMat row(1, F);
            for (int n = 0; n < N; ++n)
            {
                if (!s.activity[u][n])
                    continue;
                fill_complex_normal(row, 1.0, he);
                s.channels[u].row(n) = row.cwiseProduct(sd.transpose().cast<cplx>());
            }
        }

        Engine we = stream.child(streams::noise).engine();
        fill_complex_normal(s.noise, config.noise_variance(), we);

        s.observation = s.noise;
        for (int u = 0; u < config.U; ++u)
            for (int n = 0; n < static_cast<int>(s.activity[u].size()); ++n)
                if (s.activity[u][n])
                    s.observation.noalias() += s.codebooks[u].col(n) * s.channels[u].row(n);
        return s;
    }

    void write_geometry(std::ostream &os, const LsfcProfile &geometry)
    {
        os << geometry.U() << ' ' << geometry.B() << '\n';
        for (int u = 0; u < geometry.U(); ++u)
        {
            for (int b = 0; b < geometry.B(); ++b)
                os << (b ? " " : "") << format_double(geometry.g(u, b));
            os << '\n';
        }
        if (geometry.has_coordinates())
        {
            os << "# torus " << format_double(geometry.period_x) << ' ' << format_double(geometry.period_y) << '\n';
            for (std::size_t u = 0; u < geometry.locations.size(); ++u)
                os << "# location " << u << ' ' << format_double(geometry.locations[u].x) << ' '
                   << format_double(geometry.locations[u].y) << '\n';
            for (std::size_t b = 0; b < geometry.rus.size(); ++b)
                os << "# ru " << b << ' ' << format_double(geometry.rus[b].x) << ' '
                   << format_double(geometry.rus[b].y) << '\n';
        }
    }

    LsfcProfile read_geometry(std::istream &is)
    {
        std::string line;
        auto next_data_line = [&]() -> bool
        {
            while (std::getline(is, line))
                if (!line.empty() && line[0] != '#')
                    return true;
            return false;
        };

        require_input(next_data_line(), "geometry: missing header");
        int U = 0, B = 0;
        {
            std::istringstream hs(line);
            hs >> U >> B;
            require_input(hs && U >= 1 && B >= 1, "geometry: malformed header");
        }
        LsfcProfile p;
        p.g.resize(U, B);
        for (int u = 0; u < U; ++u)
        {
            require_input(next_data_line(), "geometry: missing row " + std::to_string(u));
            std::istringstream rs(line);
            std::string tok;
            for (int b = 0; b < B; ++b)
            {
                double v = 0.0;
                require_input(static_cast<bool>(rs >> tok) && parse_double(tok, v),
                              "geometry: malformed entry in row " + std::to_string(u));
                p.g(u, b) = v;
            }
        }
        p.validate();
        return p;
    }
}
