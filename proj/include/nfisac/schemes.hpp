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

// Transmit designs compared on identical channel draws.

#ifndef NFISAC_SCHEMES_HPP
#define NFISAC_SCHEMES_HPP

#include "bcd.hpp"

#include <array>
#include <optional>
#include <string_view>

namespace nfisac
{
    enum class SchemeId
    {
        RsmaHb,  // rate splitting, hybrid beamfocusing
        RsmaFd,  // rate splitting, fully digital
        RsmaSc,  // rate splitting, hybrid, no sensing constraints
        SdmaHb,  // private streams only, hybrid
        RsmaFar  // rate splitting, hybrid, designed on plane-wave channels
    };

    inline constexpr std::array<SchemeId, 5> all_schemes{SchemeId::RsmaHb, SchemeId::RsmaFd, SchemeId::RsmaSc,
                                                         SchemeId::SdmaHb, SchemeId::RsmaFar};

    inline const char *to_string(SchemeId id)
    {
        switch (id)
        {
        case SchemeId::RsmaHb: return "RSMA_HB";
        case SchemeId::RsmaFd: return "RSMA_FD";
        case SchemeId::RsmaSc: return "RSMA_SC";
        case SchemeId::SdmaHb: return "SDMA_HB";
        case SchemeId::RsmaFar: return "RSMA_FAR";
        }
        return "?";
    }

    inline std::optional<SchemeId> parse_scheme(std::string_view name)
    {
        for (SchemeId id : all_schemes)
            if (name == to_string(id))
                return id;
        return std::nullopt;
    }

    // Unit-modulus N x N DFT matrix; F^H F = N I.
    inline CMat dft_analog(int n)
    {
        CMat F(n, n);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c)
                F(r, c) = std::polar(1.0, -2.0 * pi * static_cast<double>((r * c) % n) / n);
        return F;
    }

    // One RF chain per antenna: a single inner-ascent pass without the penalty term. The beam is
    // written as F W with a DFT analog stage so that the report has the common shape.
    inline SolveReport fully_digital(const SystemGeometry &geom, const Scenario &sc, const ChannelSet &ch,
                                     const SensingModel &sensing, const PenaltySchedule &schedule,
                                     const ConicSolver &solver = BarrierConicSolver{})
    {
        schedule.validate();
        sc.validate();
        const auto t_start = std::chrono::steady_clock::now();
        SolveReport rep;
        rep.state = initialize(geom, sc, ch);
        InnerSettings is;
        is.eps = schedule.eps_inner;
        is.max_iterations = schedule.max_inner_iterations;
        const auto t0 = std::chrono::steady_clock::now();
        const InnerResult r = inner_ascent(rep.state.digital_full, sc, ch, sensing, is, solver);
        rep.times.inner = detail::seconds_since(t0);
        rep.conic_solves = r.iterations;
        rep.outer_iterations = 1;
        rep.inner_traces.push_back(r.trace);

        BeamState &st = rep.state;
        st.digital_full = r.P;
        st.analog = dft_analog(geom.n_tx);
        st.digital = st.analog.adjoint() * r.P / static_cast<double>(geom.n_tx);
        if (r.status == InnerStatus::Infeasible)
            rep.status = SolveStatus::Infeasible;
        else if (r.status == InnerStatus::SolverFailure)
            rep.status = SolveStatus::Failed;
        else
            rep.status = r.status == InnerStatus::Converged ? SolveStatus::Converged : SolveStatus::NotConverged;
        detail::finalize_report(rep, sc, ch, sensing);
        if (rep.status == SolveStatus::Infeasible)
            rep.max_min_secrecy = 0.0;
        rep.seconds = detail::seconds_since(t_start);
        return rep;
    }

    // Runs one scheme. `channels` are the true (spherical-wave) channels; every report is scored on them.
    inline SolveReport run_scheme(SchemeId id, const SystemGeometry &geom, const Scenario &sc, const ChannelSet &channels,
                                  const SensingModel &sensing, const PenaltySchedule &schedule,
                                  const ConicSolver &solver = BarrierConicSolver{})
    {
        switch (id)
        {
        case SchemeId::RsmaHb:
            return penalty_bcd(geom, sc, channels, sensing, schedule, {}, nullptr, solver);
        case SchemeId::RsmaFd:
            return fully_digital(geom, sc, channels, sensing, schedule, solver);
        case SchemeId::RsmaSc:
        {
            Scenario free = sc;
            free.crb_angle_max = std::numeric_limits<double>::infinity();
            free.crb_range_max = std::numeric_limits<double>::infinity();
            return penalty_bcd(geom, free, channels, sensing, schedule, {}, nullptr, solver);
        }
        case SchemeId::SdmaHb:
        {
            DriverOptions opt;
            opt.common_stream = false;
            return penalty_bcd(geom, sc, channels, sensing, schedule, opt, nullptr, solver);
        }
        case SchemeId::RsmaFar:
        {
            const ChannelSet far = build_far_field_channels(geom, sc);
            return penalty_bcd(geom, sc, far, sensing, schedule, {}, &channels, solver);
        }
        }
        throw ContractError("run_scheme: unknown scheme");
    }
} // namespace nfisac

#endif
