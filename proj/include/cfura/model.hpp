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

#ifndef CFURA_MODEL_HPP
#define CFURA_MODEL_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "cfura/prior.hpp"
#include "cfura/rng.hpp"
#include "cfura/types.hpp"

namespace cfura
{
    struct SystemConfig
    {
        int L = 1024;              // block length
        int U = 1;                 // locations
        int B = 1;                 // radio units
        int M = 1;                 // antennas per RU
        std::vector<double> alpha; // N_u / L
        std::vector<double> lambda;
        double snr = 1.0; // linear
        int T = 10;       // AMP iterations
        std::uint64_t seed = 0;
        int mc_se = 100000;
        int mc_cond = 100000;

        int F() const { return B * M; }
        int codebook_size(int u) const;
        // N_u / L after rounding N_u to an integer.
        double load(int u) const;
        double noise_variance() const;
        void validate() const;
    };

    struct Point
    {
        double x = 0.0;
        double y = 0.0;
    };

    // Nominal large-scale fading coefficients g(u, b), U x B.
    struct LsfcProfile
    {
        RMat g;
        std::vector<Point> locations;
        std::vector<Point> rus;
        double period_x = 0.0; // torus periods, 0 when the layout is not planar
        double period_y = 0.0;
        std::vector<std::array<int, 3>> corners; // hex tiles only

        int U() const { return static_cast<int>(g.rows()); }
        int B() const { return static_cast<int>(g.cols()); }
        bool has_coordinates() const { return !locations.empty(); }

        RVec covariance_diagonal(int u, int antennas) const;
        CMat covariance(int u, int antennas) const;

        void validate() const;
    };

    LsfcProfile build_wyner_geometry(double crosstalk);

    double pathloss(double distance, double d0, double gamma);

    double torus_distance(const Point &a, const Point &b, double period_x, double period_y);

    // 16 triangular tiles with 12 RUs at their corners, wrapped on a torus.
    LsfcProfile build_hex_geometry(double side, double d0, double gamma);

    // Transmit SNR giving snr_rx at the strongest location-RU link.
    double calibrate_snr(double snr_rx, const LsfcProfile &geometry);

    std::vector<LocationPrior> location_priors(const SystemConfig &config, const LsfcProfile &geometry);

    struct Scene
    {
        std::vector<CMat> codebooks;                  // L x N_u, columns CN(0, 1/L)
        std::vector<std::vector<std::uint8_t>> activity;
        std::vector<CMat> channels;                   // N_u x F, zero rows where inactive
        CMat noise;                                   // L x F
        CMat observation;                             // L x F

        int U() const { return static_cast<int>(codebooks.size()); }
        int L() const { return static_cast<int>(observation.rows()); }
        int F() const { return static_cast<int>(observation.cols()); }
        int active_count(int u) const;
    };

    Scene sample_scene(const SystemConfig &config, const LsfcProfile &geometry, const RngStream &stream);

    // Plain text: header line "U B", then one row of g per location.
    void write_geometry(std::ostream &os, const LsfcProfile &geometry);
    LsfcProfile read_geometry(std::istream &is);
}

#endif
