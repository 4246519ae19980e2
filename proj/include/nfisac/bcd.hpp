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

#ifndef NFISAC_BCD_HPP
#define NFISAC_BCD_HPP

#include "inner.hpp"

#include <Eigen/QR>

#include <chrono>

namespace nfisac
{
    struct PenaltySchedule
    {
        double rho0 = 100.0;
        double shrink = 0.5;
        double eps_penalty_rel = 1e-4; // eps_2 = eps_penalty_rel * P_th
        int max_outer = 30;
        int max_inner = 20;
        double eps_inner = 1e-4;       // eps_1, also the BCD-round stagnation threshold
        int max_inner_iterations = 50; // per inner-ascent call

        void validate() const
        {
            if (!(rho0 > 0.0))
                throw DomainError("PenaltySchedule: rho0 must be positive");
            if (!(shrink > 0.0 && shrink < 1.0))
                throw DomainError("PenaltySchedule: shrink must lie in (0, 1)");
            if (!(eps_penalty_rel > 0.0) || !(eps_inner > 0.0))
                throw DomainError("PenaltySchedule: thresholds must be positive");
            if (max_outer < 1 || max_inner < 1 || max_inner_iterations < 1)
                throw DomainError("PenaltySchedule: iteration caps must be >= 1");
        }
        double eps_penalty(double power_budget) const { return eps_penalty_rel * power_budget; }
    };

    enum class SolveStatus
    {
        Converged,
        NotConverged, // penalty residual above eps_2 at max_outer
        Infeasible,
        Failed
    };

    inline const char *to_string(SolveStatus s)
    {
        switch (s)
        {
        case SolveStatus::Converged: return "converged";
        case SolveStatus::NotConverged: return "not_converged";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::Failed: return "failed";
        }
        return "?";
    }

    struct StageTimes
    {
        double inner = 0.0, analog = 0.0, digital = 0.0;
    };

    struct SolveReport
    {
        BeamState state;
        SolveStatus status = SolveStatus::Failed;
        double max_min_secrecy = 0.0;
        double crb_angle = std::numeric_limits<double>::infinity();
        double crb_range = std::numeric_limits<double>::infinity();
        double penalty_residual = 0.0;
        RateReport rates;
        FeasibilityReport feasibility;
        std::vector<std::vector<double>> inner_traces; // one per inner-ascent call
        std::vector<double> round_objective;           // penalized objective after each BCD round
        std::vector<double> round_residual;            // ||P - FW||^2 after each BCD round
        std::vector<double> outer_residual;            // ||P - FW||^2 at the end of each penalty level
        std::vector<double> outer_secrecy_digital;     // reformulated secrecy of P per penalty level
        std::vector<double> outer_secrecy_hybrid;      // same for FW
        int conic_solves = 0;
        int outer_iterations = 0;
        int restorations = 0;                          // sensing phase-one runs
        double crb_relax_final = 1.0;
        StageTimes times;
        double seconds = 0.0;
    };

    // One Gauss-Seidel sweep over the analog entries (row-major). Each entry takes the phase
    // minimizing ||P - F W||_F^2 with the rest of F fixed.
    inline CMat analog_update(const CMat &F_prev, const CMat &P, const CMat &W)
    {
        require(F_prev.cols() == W.rows() && F_prev.rows() == P.rows() && W.cols() == P.cols(),
                "analog_update: dimension mismatch");
        const CMat Y = W * W.adjoint();
        const CMat Z = P * W.adjoint();
        CMat F = F_prev;
        const Eigen::Index L = F.cols();
        for (Eigen::Index n = 0; n < F.rows(); ++n)
            for (Eigen::Index m = 0; m < L; ++m)
            {
                const cplx fy = (F.row(n) * Y.col(m)).value(); // (F Y)_{n,m}
                const cplx chi = Z(n, m) - fy + F(n, m) * Y(m, m);
                const double a = std::abs(chi);
                if (a > 0.0)
                    F(n, m) = chi / a;
            }
        return F;
    }

    // Least-squares digital beamformer, minimum-norm when F is rank deficient.
    inline CMat digital_update(const CMat &F, const CMat &P)
    {
        require(F.rows() == P.rows(), "digital_update: dimension mismatch");
        Eigen::CompleteOrthogonalDecomposition<CMat> cod(F);
        return cod.solve(P);
    }

    // Further analog/digital sweeps for a fixed P until ||P - F W||^2 stops falling by more than
    // rel_tol per sweep. Returns the number of sweeps taken.
    inline int refine_hybrid(BeamState &st, const CMat &P, int max_sweeps = 200, double rel_tol = 1e-3)
    {
        double res = (P - st.hybrid()).squaredNorm();
        int sweeps = 0;
        while (sweeps < max_sweeps && res > 0.0)
        {
            const CMat F = analog_update(st.analog, P, st.digital);
            const CMat W = digital_update(F, P);
            const double next = (P - F * W).squaredNorm();
            if (!(next < res))
                break;
            st.analog = F;
            st.digital = W;
            ++sweeps;
            const bool stalled = res - next < rel_tol * res;
            res = next;
            if (stalled)
                break;
        }
        return sweeps;
    }

    struct InitOptions
    {
        bool common_stream = true;
    };

    // Matched-filter start: analog columns steer toward the target and users in turn, P_0 uses
    // p_k along h_k and a common beam along the users with the eavesdropper direction removed.
    inline BeamState initialize(const SystemGeometry &geom, const Scenario &sc, const ChannelSet &ch,
                                const InitOptions &opt = {})
    {
        geom.validate();
        const int K = sc.n_users();
        const int N = geom.n_tx, L = geom.n_rf;
        BeamState st;
        st.analog.resize(N, L);
        for (int l = 0; l < L; ++l)
        {
            const int idx = l % (K + 1);
            const PolarPoint &pt = idx == 0 ? sc.target : sc.users[idx - 1];
            st.analog.col(l) = tx_array_response(geom, pt);
        }

        CMat P0 = CMat::Zero(N, K + 1);
        for (int k = 0; k < K; ++k)
            P0.col(k + 1) = ch.user_channels[k].normalized();
        if (opt.common_stream)
        {
            CVec sum = CVec::Zero(N);
            for (int k = 0; k < K; ++k)
                sum += ch.user_channels[k].normalized();
            CVec c = sum;
            const double g2 = ch.eve_channel.squaredNorm();
            if (g2 > 0.0)
                c -= ch.eve_channel * (ch.eve_channel.dot(sum) / g2);
            P0.col(0) = c.norm() > 1e-6 * sum.norm() ? c.normalized() : sum.normalized();
        }
        const int active = K + (opt.common_stream ? 1 : 0);
        P0 *= std::sqrt(sc.power_budget / active);
        st.digital_full = P0;
        st.digital = digital_update(st.analog, P0);
        const double hyb = st.hybrid().squaredNorm();
        if (hyb > 0.0)
            st.digital *= std::sqrt(sc.power_budget / hyb);
        st.common_alloc = RVec::Zero(K);
        return st;
    }

    struct DriverOptions
    {
        bool common_stream = true;
        double max_crb_relax = 1e6;
        bool refine = true; // extra analog/digital sweeps on the final P
        double hybrid_crb_rel = 5e-3; // CRB slack allowed on F W before a penalty level counts as converged
    };

    namespace detail
    {
        // Scales W into the power budget, fixes the allocation on F W and fills the report.
        inline void finalize_report(SolveReport &rep, const Scenario &sc, const ChannelSet &ch, const SensingModel &sensing)
        {
            BeamState &st = rep.state;
            CMat FW = st.hybrid();
            const double pw = FW.squaredNorm();
            if (pw > sc.power_budget)
            {
                st.digital *= std::sqrt(sc.power_budget / pw);
                FW = st.hybrid();
            }
            const RateReport base = evaluate_rates(FW, ch, sc, RVec::Zero(sc.n_users()));
            st.common_alloc = water_fill_allocation(base.secrecy_private, base.secrecy_common);
            rep.rates = evaluate_rates(FW, ch, sc, st.common_alloc);
            rep.max_min_secrecy = rep.rates.max_min();
            rep.crb_angle = crb_or_infinity(FW, sensing, sc.noise_eve, sc.slots, CrbParameter::Angle);
            rep.crb_range = crb_or_infinity(FW, sensing, sc.noise_eve, sc.slots, CrbParameter::Range);
            rep.penalty_residual = (st.digital_full - FW).squaredNorm();
            rep.feasibility = check_feasibility(st, sc, ch, sensing, BeamSource::Hybrid);
        }

        // CRB limits evaluated on the realizable beam F W.
        inline bool hybrid_meets_crb(const BeamState &st, const Scenario &sc, const SensingModel &sensing, double rel_tol)
        {
            const CMat FW = st.hybrid();
            auto ok = [&](CrbParameter which, double limit) {
                return std::isinf(limit) ||
                       crb_or_infinity(FW, sensing, sc.noise_eve, sc.slots, which) <= (1.0 + rel_tol) * limit;
            };
            return ok(CrbParameter::Angle, sc.crb_angle_max) && ok(CrbParameter::Range, sc.crb_range_max);
        }

        inline double seconds_since(std::chrono::steady_clock::time_point t0)
        {
            return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
    } // namespace detail

    // Penalty-based BCD over (P, F, W). `design` holds the channels used for optimization;
    // `truth` those used for the final report (they differ only for mismatch studies).
    inline SolveReport penalty_bcd(const SystemGeometry &geom, const Scenario &sc, const ChannelSet &design,
                                   const SensingModel &sensing, const PenaltySchedule &schedule, const DriverOptions &opt = {},
                                   const ChannelSet *truth = nullptr, const ConicSolver &solver = BarrierConicSolver{})
    {
        schedule.validate();
        sc.validate();
        const auto t_start = std::chrono::steady_clock::now();
        SolveReport rep;
        rep.state = initialize(geom, sc, design, InitOptions{opt.common_stream});
        BeamState &st = rep.state;
        CMat P = st.digital_full;
        const double eps2 = schedule.eps_penalty(sc.power_budget);
        double rho = schedule.rho0;
        double relax = 1.0;
        bool converged = false;
        bool infeasible = false;
        bool failed = false;

        for (int outer = 0; outer < schedule.max_outer && !converged && !infeasible && !failed; ++outer)
        {
            ++rep.outer_iterations;
            double prev_round = -std::numeric_limits<double>::infinity();
            double residual = (P - st.hybrid()).squaredNorm();
            bool hybrid_ok = false;
            for (int inner = 0; inner < schedule.max_inner; ++inner)
            {
                InnerSettings is;
                is.common_stream = opt.common_stream;
                is.penalty_weight = 1.0 / rho;
                is.fw_target = st.hybrid();
                is.eps = schedule.eps_inner;
                is.max_iterations = schedule.max_inner_iterations;
                auto t0 = std::chrono::steady_clock::now();
                InnerResult r;
                while (true)
                {
                    is.crb_relax = relax;
                    if (sensing_margin(P, sc, sensing, relax) < 1.0 - 1e-6)
                    {
                        RestorationSettings rs;
                        rs.common_stream = opt.common_stream;
                        rs.crb_relax = relax;
                        const RestorationResult rr = restore_sensing(P, sc, design, sensing, rs, solver);
                        rep.conic_solves += rr.iterations;
                        ++rep.restorations;
                        if (rr.feasible)
                            P = rr.P;
                    }
                    r = inner_ascent(P, sc, design, sensing, is, solver);
                    rep.conic_solves += r.iterations;
                    if (r.status != InnerStatus::Infeasible || relax >= opt.max_crb_relax)
                        break;
                    relax *= 10.0; // feasibility restoration
                }
                rep.times.inner += detail::seconds_since(t0);
                if (r.status == InnerStatus::Infeasible || r.status == InnerStatus::SolverFailure)
                {
                    infeasible = r.status == InnerStatus::Infeasible;
                    failed = !infeasible;
                    break;
                }
                rep.inner_traces.push_back(r.trace);
                P = r.P;
                st.digital_full = P;

                t0 = std::chrono::steady_clock::now();
                st.analog = analog_update(st.analog, P, st.digital);
                rep.times.analog += detail::seconds_since(t0);
                t0 = std::chrono::steady_clock::now();
                st.digital = digital_update(st.analog, P);
                rep.times.digital += detail::seconds_since(t0);

                residual = (P - st.hybrid()).squaredNorm();
                is.fw_target = st.hybrid();
                const double round_obj = inner_objective(P, sc, design, is);
                rep.round_objective.push_back(round_obj);
                rep.round_residual.push_back(residual);
                hybrid_ok = residual <= eps2 && detail::hybrid_meets_crb(st, sc, sensing, opt.hybrid_crb_rel);
                if (hybrid_ok || std::abs(round_obj - prev_round) < schedule.eps_inner)
                    break;
                prev_round = round_obj;
            }
            if (infeasible || failed)
                break;
            rep.outer_residual.push_back(residual);
            const InnerSettings plain;
            rep.outer_secrecy_digital.push_back(inner_objective(P, sc, design, plain));
            rep.outer_secrecy_hybrid.push_back(inner_objective(st.hybrid(), sc, design, plain));
            if (hybrid_ok && relax <= 1.0)
                converged = true;
            rho *= schedule.shrink;
            relax = std::max(1.0, relax / 10.0);
        }

        rep.crb_relax_final = relax;
        if (opt.refine && !infeasible && !failed)
        {
            const auto t0 = std::chrono::steady_clock::now();
            refine_hybrid(st, P);
            rep.times.analog += detail::seconds_since(t0);
        }
        if (infeasible)
        {
            rep.status = SolveStatus::Infeasible;
            detail::finalize_report(rep, sc, truth ? *truth : design, sensing);
            rep.max_min_secrecy = 0.0;
        }
        else
        {
            rep.status = failed ? SolveStatus::Failed : converged ? SolveStatus::Converged : SolveStatus::NotConverged;
            detail::finalize_report(rep, sc, truth ? *truth : design, sensing);
        }
        rep.seconds = detail::seconds_since(t_start);
        return rep;
    }
} // namespace nfisac

#endif
