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

#ifndef NFISAC_CRB_HPP
#define NFISAC_CRB_HPP

#include "geometry.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <limits>

namespace nfisac
{
    // Tr(A P P^H B^H) evaluated as the Frobenius inner product <B P, A P>; never forms P P^H.
    // A plain loop: GCC 11 at -O3 has emitted a non-terminating vectorized reduction for the
    // equivalent Eigen expression in some translation units.
    inline cplx trace_form(const CMat &AP, const CMat &BP)
    {
        require(AP.rows() == BP.rows() && AP.cols() == BP.cols(), "trace_form: shape mismatch");
        const cplx *a = AP.data(), *b = BP.data();
        double re = 0.0, im = 0.0;
        for (Eigen::Index i = 0; i < AP.size(); ++i)
        {
            re += b[i].real() * a[i].real() + b[i].imag() * a[i].imag();
            im += b[i].real() * a[i].imag() - b[i].imag() * a[i].real();
        }
        return {re, im};
    }

    // Parameter order: (theta_e, r_e, Re gain, Im gain).
    struct FisherMatrix
    {
        Eigen::Matrix4d j = Eigen::Matrix4d::Zero(); // unscaled blocks [J11 J12; J12^T J22]
        double scale = 0.0;                          // 2T / sigma_e^2
        bool singular = false;

        Eigen::Matrix4d full() const { return scale * j; }
        Eigen::Matrix2d j11() const { return j.topLeftCorner<2, 2>(); }
        Eigen::Matrix2d j12() const { return j.topRightCorner<2, 2>(); }
        Eigen::Matrix2d j22() const { return j.bottomRightCorner<2, 2>(); }
    };

    // The four sensing trace quantities every CRB expression is built from.
    struct SensingTraces
    {
        double gg = 0.0;        // Tr(G~ R G~^H)
        double tt = 0.0;        // Tr(Gt R Gt^H)
        double rr = 0.0;        // Tr(Gr R Gr^H)
        cplx rt = 0.0;          // Tr(Gr R Gt^H)
        cplx kappa_theta = 0.0; // Tr(G~ R Gt^H)
        cplx kappa_range = 0.0; // Tr(G~ R Gr^H)
    };

    inline SensingTraces sensing_traces(const CMat &P, const SensingModel &s)
    {
        require(P.rows() == s.g_tilde.cols(), "sensing_traces: P rows must equal n_tx");
        const CMat GP = s.g_tilde * P;
        const CMat TP = s.g_dtheta * P;
        const CMat RP = s.g_drange * P;
        SensingTraces t;
        t.gg = trace_form(GP, GP).real();
        t.tt = trace_form(TP, TP).real();
        t.rr = trace_form(RP, RP).real();
        t.rt = trace_form(RP, TP);
        t.kappa_theta = trace_form(GP, TP);
        t.kappa_range = trace_form(GP, RP);
        return t;
    }

    inline FisherMatrix fim(const CMat &P, const SensingModel &s, double noise_eve, int slots)
    {
        require(noise_eve > 0.0 && slots >= 1, "fim: noise and slot count must be positive");
        const SensingTraces t = sensing_traces(P, s);
        const double g2 = std::norm(s.gain);
        FisherMatrix f;
        f.scale = 2.0 * slots / noise_eve;
        f.j(0, 0) = g2 * t.tt;
        f.j(0, 1) = g2 * t.rt.real();
        f.j(1, 0) = g2 * std::conj(t.rt).real();
        f.j(1, 1) = g2 * t.rr;
        const cplx bt = std::conj(s.gain) * t.kappa_theta;
        const cplx br = std::conj(s.gain) * t.kappa_range;
        // Re([b*k] [1, j]) = [Re(b*k), -Im(b*k)]
        f.j(0, 2) = bt.real();
        f.j(0, 3) = -bt.imag();
        f.j(1, 2) = br.real();
        f.j(1, 3) = -br.imag();
        f.j.bottomLeftCorner<2, 2>() = f.j.topRightCorner<2, 2>().transpose();
        f.j(2, 2) = f.j(3, 3) = t.gg;
        f.singular = !(t.gg > 0.0);
        return f;
    }

    enum class CrbInverse
    {
        Strict, // true inverse with a condition-number guard
        Pseudo  // Moore-Penrose, for parameters with a zeroed derivative
    };

    inline constexpr double crb_condition_limit = 1e12;

    // 2x2 CRB matrix for (theta, r): (sigma^2/2T) (J11 - J12 J22^-1 J12^T)^-1.
    inline Eigen::Matrix2d crb_joint(const FisherMatrix &f, CrbInverse mode = CrbInverse::Strict)
    {
        const double j22 = f.j(2, 2);
        if (f.singular || !(j22 > 0.0))
            throw SingularGeometryError("crb_joint: zero sensing illumination, FIM is singular");
        const Eigen::Matrix2d schur = f.j11() - f.j12() * f.j12().transpose() / j22;
        Eigen::JacobiSVD<Eigen::Matrix2d> svd(schur, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const auto sv = svd.singularValues();
        Eigen::Matrix2d inv;
        if (mode == CrbInverse::Strict)
        {
            if (!(sv(1) > 0.0) || sv(0) / sv(1) > crb_condition_limit)
                throw SingularGeometryError("crb_joint: Schur complement is ill-conditioned");
            inv = schur.inverse();
        }
        else
        {
            const double tol = std::max(sv(0), 0.0) * 1e-12;
            Eigen::Vector2d sinv;
            for (int i = 0; i < 2; ++i)
                sinv(i) = sv(i) > tol ? 1.0 / sv(i) : 0.0;
            inv = svd.matrixV() * sinv.asDiagonal() * svd.matrixU().transpose();
        }
        return inv / f.scale;
    }

    enum class CrbParameter
    {
        Angle,
        Range
    };

    // Closed-form CRB with the other location parameter treated as known.
    inline double crb_closed_form(const SensingTraces &t, cplx gain, double noise_eve, int slots, CrbParameter which)
    {
        const double own = which == CrbParameter::Angle ? t.tt : t.rr;
        const cplx kappa = which == CrbParameter::Angle ? t.kappa_theta : t.kappa_range;
        const double gap = own * t.gg - std::norm(kappa);
        if (!(gap > 0.0) || !(t.gg > 0.0))
            throw DegenerateBeamError("crb_closed_form: Cauchy-Schwarz gap is not positive");
        return noise_eve * t.gg / (2.0 * slots * std::norm(gain) * gap);
    }

    inline double crb_closed_form(const CMat &P, const SensingModel &s, double noise_eve, int slots, CrbParameter which)
    {
        return crb_closed_form(sensing_traces(P, s), s.gain, noise_eve, slots, which);
    }

    // Same value, but +inf instead of throwing when the beam does not illuminate the target.
    inline double crb_or_infinity(const CMat &P, const SensingModel &s, double noise_eve, int slots, CrbParameter which)
    {
        try
        {
            return crb_closed_form(P, s, noise_eve, slots, which);
        }
        catch (const DegenerateBeamError &)
        {
            return std::numeric_limits<double>::infinity();
        }
    }

    // Difference-of-PSD split of the Hermitian part of A.
    struct HermitianSplit
    {
        CMat m_plus;
        CMat m_minus;
        CMat plus_factor;  // m_plus = plus_factor plus_factor^H, one column per positive eigenvalue
        CMat minus_factor; // likewise for m_minus
    };

    inline HermitianSplit hermitian_split(const CMat &A)
    {
        require(A.rows() == A.cols(), "hermitian_split: matrix must be square");
        const CMat S = 0.5 * (A + A.adjoint());
        Eigen::SelfAdjointEigenSolver<CMat> es(S);
        const RVec &d = es.eigenvalues();
        const CMat &U = es.eigenvectors();
        const double dmax = d.cwiseAbs().maxCoeff();
        const double tol = dmax * 1e-13;

        HermitianSplit out;
        const Eigen::Index n = A.rows();
        RVec dp = d.cwiseMax(0.0), dm = (-d).cwiseMax(0.0);
        out.m_plus = U * dp.asDiagonal() * U.adjoint();
        out.m_minus = U * dm.asDiagonal() * U.adjoint();

        std::vector<Eigen::Index> pos, neg;
        for (Eigen::Index i = 0; i < n; ++i)
        {
            if (d(i) > tol)
                pos.push_back(i);
            else if (d(i) < -tol)
                neg.push_back(i);
        }
        out.plus_factor.resize(n, static_cast<Eigen::Index>(pos.size()));
        out.minus_factor.resize(n, static_cast<Eigen::Index>(neg.size()));
        for (size_t c = 0; c < pos.size(); ++c)
            out.plus_factor.col(c) = U.col(pos[c]) * std::sqrt(d(pos[c]));
        for (size_t c = 0; c < neg.size(); ++c)
            out.minus_factor.col(c) = U.col(neg[c]) * std::sqrt(-d(neg[c]));
        return out;
    }
} // namespace nfisac

#endif
