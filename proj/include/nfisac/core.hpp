// SPDX-License-Identifier: Apache-2.0
//
// nfisac - secure near-field ISAC transmit design library
// Copyright (C) 2026 The nfisac Authors
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

#ifndef NFISAC_CORE_HPP
#define NFISAC_CORE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace nfisac
{
    using cplx = std::complex<double>;
    using CVec = Eigen::VectorXcd;
    using CMat = Eigen::MatrixXcd;
    using RVec = Eigen::VectorXd;
    using RMat = Eigen::MatrixXd;

    inline constexpr double speed_of_light = 2.99792458e8; // m/s
    inline constexpr double pi = std::numbers::pi;
    inline constexpr double ln2 = std::numbers::ln2;
    inline constexpr cplx j_unit{0.0, 1.0};

    // Offset between the weighted-MSE minimum and the log2 rate: 1/ln2 + log2(ln2).
    inline const double wmmse_tau = 1.0 / ln2 + std::log2(ln2);

    // Non-positive range, non-physical geometry, and similar input-domain violations.
    class DomainError : public std::domain_error
    {
    public:
        using std::domain_error::domain_error;
    };

    // Caller broke a dimensional or sign precondition.
    class ContractError : public std::invalid_argument
    {
    public:
        using std::invalid_argument::invalid_argument;
    };

    // A Fisher/Schur matrix too ill-conditioned to invert.
    class SingularGeometryError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    // The Cauchy-Schwarz gap in the closed-form CRB denominator closed.
    class DegenerateBeamError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
    inline double watts_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }

    inline void require(bool cond, const std::string &msg)
    {
        if (!cond)
            throw ContractError(msg);
    }
} // namespace nfisac

#endif
