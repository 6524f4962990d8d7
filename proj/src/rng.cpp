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

#include "cfura/rng.hpp"

#include <array>
#include <cmath>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

namespace cfura
{
    namespace
    {
        // FNV-1a, 64 bit. std::hash is not stable across library versions.
        std::uint64_t name_hash(std::string_view name)
        {
            std::uint64_t h = 0xcbf29ce484222325ULL;
            for (unsigned char c : name)
            {
                h ^= c;
                h *= 0x100000001b3ULL;
            }
            return h;
        }

        std::uint64_t mix(std::uint64_t seed, std::uint64_t tag, std::uint64_t index)
        {
            std::array<std::uint32_t, 6> words = {
                static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32),
                static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
            std::seed_seq seq(words.begin(), words.end());
            std::array<std::uint32_t, 2> out{};
            seq.generate(out.begin(), out.end());
            return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
        }
    }

    RngStream RngStream::child(std::string_view name) const
    {
        return RngStream(mix(seed_, name_hash(name), 0));
    }

    RngStream RngStream::child(std::string_view name, std::uint64_t index) const
    {
        return RngStream(mix(seed_, name_hash(name), index + 1));
    }

    RngStream RngStream::child(std::uint64_t index) const
    {
        return RngStream(mix(seed_, 0, index + 1));
    }

    Engine RngStream::engine() const
    {
        std::array<std::uint32_t, 2> words = {static_cast<std::uint32_t>(seed_),
                                              static_cast<std::uint32_t>(seed_ >> 32)};
        std::seed_seq seq(words.begin(), words.end());
        return Engine(seq);
    }

    void fill_complex_normal(Eigen::Ref<CMat> out, double variance, Engine &eng)
    {
        boost::random::normal_distribution<double> nd(0.0, std::sqrt(0.5 * variance));
        double *p = reinterpret_cast<double *>(out.data());
        if (out.outerStride() == out.rows())
        {
            const Eigen::Index n = 2 * out.size();
            for (Eigen::Index i = 0; i < n; ++i)
                p[i] = nd(eng);
            return;
        }
        for (Eigen::Index j = 0; j < out.cols(); ++j)
            for (Eigen::Index i = 0; i < out.rows(); ++i)
            {
                const double re = nd(eng);
                const double im = nd(eng);
                out(i, j) = cplx(re, im);
            }
    }

    CMat complex_normal(Eigen::Index rows, Eigen::Index cols, double variance, Engine &eng)
    {
        CMat out(rows, cols);
        fill_complex_normal(out, variance, eng);
        return out;
    }

    void fill_standard_normal(Eigen::Ref<RMat> out, Engine &eng)
    {
        boost::random::normal_distribution<double> nd;
        for (Eigen::Index j = 0; j < out.cols(); ++j)
            for (Eigen::Index i = 0; i < out.rows(); ++i)
                out(i, j) = nd(eng);
    }

    double uniform01(Engine &eng)
    {
        boost::random::uniform_01<double> u;
        return u(eng);
    }
}
