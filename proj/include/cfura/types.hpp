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

#ifndef CFURA_TYPES_HPP
#define CFURA_TYPES_HPP

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace cfura
{
    using cplx = std::complex<double>;

    using CMat = Eigen::MatrixXcd;
    using CRow = Eigen::Matrix<cplx, 1, Eigen::Dynamic>;
    using CVec = Eigen::Matrix<cplx, Eigen::Dynamic, 1>;
    using RMat = Eigen::MatrixXd;
    using RVec = Eigen::VectorXd;

    // Bad arguments: out-of-range parameters, mismatched dimensions, malformed configs.
    class InvalidParameter : public std::invalid_argument
    {
    public:
        using std::invalid_argument::invalid_argument;
    };

    class InvalidInput : public std::invalid_argument
    {
    public:
        using std::invalid_argument::invalid_argument;
    };

    // Singular or indefinite matrices where a positive definite one is required.
    class NumericalError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    // Rejection sampling accepted too few draws to produce a usable estimate.
    class InsufficientSamples : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    inline void require(bool ok, const std::string &msg)
    {
        if (!ok)
            throw InvalidParameter(msg);
    }

    inline void require_input(bool ok, const std::string &msg)
    {
        if (!ok)
            throw InvalidInput(msg);
    }
}

#endif
