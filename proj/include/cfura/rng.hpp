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

#ifndef CFURA_RNG_HPP
#define CFURA_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>

#include "cfura/types.hpp"

namespace cfura
{
    using Engine = std::mt19937_64;

    // A node in the tree of named random streams. Children are derived by
    // name and index, so each component draws from its own reproducible
    // sequence no matter how the others are scheduled.
    class RngStream
    {
    public:
        RngStream() = default;
        explicit RngStream(std::uint64_t seed) : seed_(seed) {}

        std::uint64_t seed() const { return seed_; }

        RngStream child(std::string_view name) const;
        RngStream child(std::string_view name, std::uint64_t index) const;
        RngStream child(std::uint64_t index) const;

        Engine engine() const;

        bool operator==(const RngStream &) const = default;

    private:
        std::uint64_t seed_ = 0;
    };

    // Standard stream names.
    namespace streams
    {
        inline constexpr std::string_view codebook = "codebook";
        inline constexpr std::string_view activity = "activity";
        inline constexpr std::string_view channel = "channel";
        inline constexpr std::string_view noise = "noise";
        inline constexpr std::string_view state_evolution = "se";
        inline constexpr std::string_view conditional = "conditional-mc";
        inline constexpr std::string_view trial = "trial";
    }

    // CN(0, variance) entries: real and imaginary parts are N(0, variance/2).
    void fill_complex_normal(Eigen::Ref<CMat> out, double variance, Engine &eng);
    CMat complex_normal(Eigen::Index rows, Eigen::Index cols, double variance, Engine &eng);

    void fill_standard_normal(Eigen::Ref<RMat> out, Engine &eng);

    double uniform01(Engine &eng);
}

#endif
