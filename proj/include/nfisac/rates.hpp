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

#ifndef NFISAC_RATES_HPP
#define NFISAC_RATES_HPP

#include "crb.hpp"

#include <algorithm>
#include <limits>
#include <vector>

namespace nfisac
{
    // Column 0 of every beam matrix carries the common stream, columns 1..K the private streams.
    struct BeamState
    {
        CMat digital_full; // P, N x (K+1)
        CMat analog;       // F, N x L, unit modulus
        CMat digital;      // W, L x (K+1)
        RVec common_alloc; // R^s_{k,c}, bits/s/Hz

        CMat hybrid() const { return analog * digital; }
    };

    struct PowerDecomposition
    {
        RVec s_kc, s_kp, i_kp, i_kc; // per user
        double s_ec = 0.0, i_ec = 0.0;
        RVec s_ek, i_ek; // per user

        RVec t_kc() const { return s_kc + i_kc; }
        double t_ec() const { return s_ec + i_ec; }
    };

    struct RateReport
    {
        RVec r_kc, r_kp, r_ek;
        double r_common = 0.0;
        double r_ec = 0.0;
        double secrecy_common = 0.0;     // [r_common - r_ec]^+
        double secrecy_common_raw = 0.0; // unclamped
        RVec secrecy_private;            // clamped
        RVec secrecy_private_raw;        // unclamped
        RVec secrecy_total;              // alloc + clamped private
        double max_min() const { return secrecy_total.size() ? secrecy_total.minCoeff() : 0.0; }
    };

    inline PowerDecomposition received_powers(const CMat &P, const ChannelSet &ch, const std::vector<double> &noise_user,
                                              double noise_eve)
    {
        const int K = static_cast<int>(ch.user_channels.size());
        require(K >= 1, "received_powers: no users");
        require(P.cols() == K + 1, "received_powers: P must have K+1 columns");
        require(static_cast<int>(noise_user.size()) == K, "received_powers: one noise power per user");
        require(ch.eve_channel.size() == P.rows(), "received_powers: eavesdropper channel length mismatch");

        PowerDecomposition pd;
        pd.s_kc.resize(K), pd.s_kp.resize(K), pd.i_kp.resize(K), pd.i_kc.resize(K);
        pd.s_ek.resize(K), pd.i_ek.resize(K);
        for (int k = 0; k < K; ++k)
        {
            require(ch.user_channels[k].size() == P.rows(), "received_powers: user channel length mismatch");
            const RVec gains = (ch.user_channels[k].adjoint() * P).cwiseAbs2().transpose();
            pd.s_kc(k) = gains(0);
            pd.s_kp(k) = gains(k + 1);
            pd.i_kp(k) = gains.tail(K).sum() - gains(k + 1) + noise_user[k];
            pd.i_kc(k) = pd.s_kp(k) + pd.i_kp(k);
        }
        const RVec eg = (ch.eve_channel.adjoint() * P).cwiseAbs2().transpose();
        pd.s_ec = eg(0);
        pd.i_ec = eg.tail(K).sum() + noise_eve;
        for (int k = 0; k < K; ++k)
        {
            pd.s_ek(k) = eg(k + 1);
            pd.i_ek(k) = pd.i_ec - eg(k + 1);
        }
        return pd;
    }

    inline RateReport compute_rates(const PowerDecomposition &pd, const RVec &alloc)
    {
        const Eigen::Index K = pd.s_kc.size();
        require(alloc.size() == K, "compute_rates: one allocation entry per user");
        auto nonneg = [](const RVec &v) { return v.size() == 0 || v.minCoeff() >= 0.0; };
        require(nonneg(pd.s_kc) && nonneg(pd.s_kp) && nonneg(pd.i_kp) && nonneg(pd.s_ek) && nonneg(pd.i_ek) &&
                    pd.s_ec >= 0.0 && pd.i_ec >= 0.0,
                "compute_rates: negative power");

        RateReport r;
        r.r_kc.resize(K), r.r_kp.resize(K), r.r_ek.resize(K);
        for (Eigen::Index k = 0; k < K; ++k)
        {
            r.r_kc(k) = std::log2(1.0 + pd.s_kc(k) / pd.i_kc(k));
            r.r_kp(k) = std::log2(1.0 + pd.s_kp(k) / pd.i_kp(k));
            // The common stream's power at the eavesdropper jams private-stream eavesdropping.
            r.r_ek(k) = std::log2(1.0 + pd.s_ek(k) / (pd.i_ek(k) + pd.s_ec));
        }
        r.r_common = r.r_kc.minCoeff();
        r.r_ec = std::log2(1.0 + pd.s_ec / pd.i_ec);
        r.secrecy_common_raw = r.r_common - r.r_ec;
        r.secrecy_common = std::max(r.secrecy_common_raw, 0.0);
        r.secrecy_private_raw = r.r_kp - r.r_ek;
        r.secrecy_private = r.secrecy_private_raw.cwiseMax(0.0);
        r.secrecy_total = alloc + r.secrecy_private;
        return r;
    }

    inline RateReport evaluate_rates(const CMat &P, const ChannelSet &ch, const Scenario &sc, const RVec &alloc)
    {
        return compute_rates(received_powers(P, ch, sc.noise_user, sc.noise_eve), alloc);
    }

    // Splits a common budget across users to maximize min_k (alloc_k + base_k); water-filling on the
    // lowest entries. A non-positive budget yields the all-zero allocation.
    inline RVec water_fill_allocation(const RVec &base, double budget)
    {
        const Eigen::Index K = base.size();
        RVec alloc = RVec::Zero(K);
        if (!(budget > 0.0) || K == 0)
            return alloc;
        std::vector<double> sorted(base.data(), base.data() + K);
        std::sort(sorted.begin(), sorted.end());
        double level = sorted.back() + budget / static_cast<double>(K);
        double prefix = 0.0;
        for (Eigen::Index i = 0; i < K; ++i)
        {
            prefix += sorted[i];
            const double candidate = (budget + prefix) / static_cast<double>(i + 1);
            if (i + 1 == K || candidate <= sorted[i + 1])
            {
                level = candidate;
                break;
            }
        }
        for (Eigen::Index k = 0; k < K; ++k)
            alloc(k) = std::max(level - base(k), 0.0);
        // Remove rounding excess so that sum(alloc) <= budget holds exactly.
        const double excess = alloc.sum() - budget;
        if (excess > 0.0)
            alloc *= budget / alloc.sum();
        return alloc;
    }

    // Max-min secrecy of the penalized reformulation: unclamped private secrecy, common secrecy
    // split optimally. Returns -inf when the common-secrecy budget is negative (infeasible point).
    inline double reformulated_secrecy(const RateReport &r)
    {
        if (r.secrecy_common_raw < 0.0)
            return -std::numeric_limits<double>::infinity();
        const RVec alloc = water_fill_allocation(r.secrecy_private_raw, r.secrecy_common_raw);
        return (alloc + r.secrecy_private_raw).minCoeff();
    }

    struct FeasibilityTolerances
    {
        double power_rel = 1e-9;
        double unit_modulus = 1e-12;
        double crb_rel = 1e-2;
        double rate = 1e-9;
        double penalty = std::numeric_limits<double>::infinity(); // absolute, on ||P - FW||_F^2
    };

    struct FeasibilityReport
    {
        double power_excess = 0.0;        // max(||beam||^2 - P_th, 0) [W]
        double unit_modulus_error = 0.0;  // max | |F_nl| - 1 |
        double crb_angle_excess = 0.0;    // max(CRB/Gamma - 1, 0), inf for a blind beam
        double crb_range_excess = 0.0;    // same for range
        double allocation_excess = 0.0;   // max(sum alloc - R^s_c, 0)
        double artificial_noise_gap = 0.0; // max(r_ec - min_k r_kc, 0)
        double negative_allocation = 0.0; // max(-alloc_k, 0)
        double penalty_residual = 0.0;    // ||P - FW||_F^2
        double crb_angle = 0.0, crb_range = 0.0;

        bool ok(const FeasibilityTolerances &tol, double power_budget) const
        {
            return power_excess <= tol.power_rel * power_budget && unit_modulus_error <= tol.unit_modulus &&
                   crb_angle_excess <= tol.crb_rel && crb_range_excess <= tol.crb_rel &&
                   allocation_excess <= tol.rate && artificial_noise_gap <= tol.rate && negative_allocation <= tol.rate &&
                   penalty_residual <= tol.penalty;
        }
    };

    enum class BeamSource
    {
        Digital, // the auxiliary fully digital P
        Hybrid   // the realizable product F W
    };

    inline FeasibilityReport check_feasibility(const BeamState &state, const Scenario &sc, const ChannelSet &ch,
                                               const SensingModel &sensing, BeamSource source = BeamSource::Digital)
    {
        const CMat beam = source == BeamSource::Digital ? state.digital_full : state.hybrid();
        FeasibilityReport f;
        f.power_excess = std::max(beam.squaredNorm() - sc.power_budget, 0.0);
        if (state.analog.size() > 0)
            f.unit_modulus_error = (state.analog.cwiseAbs().array() - 1.0).abs().maxCoeff();
        if (state.analog.size() > 0 && state.digital.size() > 0 && state.digital_full.size() > 0)
            f.penalty_residual = (state.digital_full - state.hybrid()).squaredNorm();

        f.crb_angle = crb_or_infinity(beam, sensing, sc.noise_eve, sc.slots, CrbParameter::Angle);
        f.crb_range = crb_or_infinity(beam, sensing, sc.noise_eve, sc.slots, CrbParameter::Range);
        auto excess = [](double crb, double limit) {
            if (std::isinf(limit))
                return 0.0;
            return std::max(crb / limit - 1.0, 0.0);
        };
        f.crb_angle_excess = excess(f.crb_angle, sc.crb_angle_max);
        f.crb_range_excess = excess(f.crb_range, sc.crb_range_max);

        const RVec alloc = state.common_alloc.size() ? state.common_alloc : RVec::Zero(sc.n_users());
        const RateReport r = evaluate_rates(beam, ch, sc, alloc);
        f.allocation_excess = std::max(alloc.sum() - r.secrecy_common, 0.0);
        f.artificial_noise_gap = std::max(r.r_ec - r.r_common, 0.0);
        f.negative_allocation = std::max(-alloc.minCoeff(), 0.0);
        return f;
    }
} // namespace nfisac

#endif
