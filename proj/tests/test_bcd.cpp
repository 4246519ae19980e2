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

#include "catch_amalgamated.hpp"

#include <nfisac/bcd.hpp>

#include <random>

using namespace nfisac;
using Catch::Approx;

namespace
{
    CMat random_cmat(std::mt19937_64 &rng, Eigen::Index r, Eigen::Index c, double scale = 1.0)
    {
        std::normal_distribution<double> n(0.0, scale * std::sqrt(0.5));
        CMat M(r, c);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < c; ++j)
                M(i, j) = cplx(n(rng), n(rng));
        return M;
    }

    CMat random_phases(std::mt19937_64 &rng, Eigen::Index r, Eigen::Index c)
    {
        std::uniform_real_distribution<double> u(-pi, pi);
        CMat F(r, c);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < c; ++j)
                F(i, j) = std::polar(1.0, u(rng));
        return F;
    }

    struct Desk
    {
        SystemGeometry geom;
        Scenario sc;
        ChannelSet ch;
        SensingModel sensing;
    };

    Desk desk()
    {
        Desk d;
        d.geom.n_tx = 16, d.geom.n_rx = 8, d.geom.n_rf = 4;
        d.sc.users = {{12.0, 0.3}, {18.0, 1.0}};
        d.sc.target = {15.0, 0.55};
        d.sc.noise_user.assign(2, dbm_to_watts(-84.0));
        d.sc.noise_eve = dbm_to_watts(-84.0);
        d.sc.power_budget = dbm_to_watts(20.0);
        d.sc.slots = 64;
        d.ch = build_channels(d.geom, d.sc);
        d.sensing = build_sensing_model(d.geom, d.sc);
        const CMat P0 = initialize(d.geom, d.sc, d.ch).hybrid();
        d.sc.crb_angle_max = 10.0 * crb_closed_form(P0, d.sensing, d.sc.noise_eve, d.sc.slots, CrbParameter::Angle);
        d.sc.crb_range_max = 10.0 * crb_closed_form(P0, d.sensing, d.sc.noise_eve, d.sc.slots, CrbParameter::Range);
        return d;
    }

    double residual(const CMat &P, const CMat &F, const CMat &W) { return (P - F * W).squaredNorm(); }
} // namespace

TEST_CASE("bcd: single RF chain analog update cancels the phase exactly")
{
    std::mt19937_64 rng(1);
    const CMat P = random_cmat(rng, 8, 3);
    const CMat W = random_cmat(rng, 1, 3);
    const CMat F = analog_update(random_phases(rng, 8, 1), P, W);
    // With L = 1 each entry decouples: the optimum phase is that of (P W^H)_n.
    const CMat Z = P * W.adjoint();
    for (int n = 0; n < 8; ++n)
        CHECK(std::abs(F(n, 0) - Z(n, 0) / std::abs(Z(n, 0))) <= 1e-12);
}

TEST_CASE("bcd: analog update never increases the residual and keeps unit modulus")
{
    std::mt19937_64 rng(2);
    for (int t = 0; t < 100; ++t)
    {
        const CMat P = random_cmat(rng, 10, 3);
        const CMat W = random_cmat(rng, 4, 3);
        const CMat F0 = random_phases(rng, 10, 4);
        const CMat F1 = analog_update(F0, P, W);
        CHECK(residual(P, F1, W) <= residual(P, F0, W) * (1.0 + 1e-12));
        CHECK((F1.cwiseAbs().array() - 1.0).abs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("bcd: realizable beam is a fixed point of both updates")
{
    std::mt19937_64 rng(3);
    const CMat F = random_phases(rng, 12, 4);
    const CMat W = random_cmat(rng, 4, 3);
    const CMat P = F * W;
    CHECK((analog_update(F, P, W) - F).norm() <= 1e-10);
    CHECK((digital_update(F, P) - W).norm() <= 1e-10 * W.norm());
}

TEST_CASE("bcd: digital update is the least-squares solution")
{
    std::mt19937_64 rng(4);
    for (int t = 0; t < 20; ++t)
    {
        const CMat F = random_phases(rng, 12, 4);
        const CMat P = random_cmat(rng, 12, 3);
        const CMat W = digital_update(F, P);
        // Normal equations: F^H (P - F W) = 0.
        CHECK((F.adjoint() * (P - F * W)).norm() <= 1e-10 * F.norm() * P.norm());
        // Per-column oracle via the normal equations.
        for (int c = 0; c < 3; ++c)
        {
            const CVec w = (F.adjoint() * F).ldlt().solve(F.adjoint() * P.col(c));
            CHECK((W.col(c) - w).norm() <= 1e-9 * w.norm());
        }
    }
}

TEST_CASE("bcd: refinement sweeps only lower the residual")
{
    std::mt19937_64 rng(5);
    BeamState st;
    st.analog = random_phases(rng, 16, 4);
    const CMat P = random_cmat(rng, 16, 3);
    st.digital = digital_update(st.analog, P);
    const double before = residual(P, st.analog, st.digital);
    const int sweeps = refine_hybrid(st, P, 50, 0.0);
    CHECK(sweeps >= 1);
    CHECK(residual(P, st.analog, st.digital) <= before);
    CHECK((st.analog.cwiseAbs().array() - 1.0).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("bcd: initial beam has unit-modulus analog part and fills the budget")
{
    const Desk d = desk();
    const BeamState st = initialize(d.geom, d.sc, d.ch);
    CHECK((st.analog.cwiseAbs().array() - 1.0).abs().maxCoeff() <= 1e-12);
    CHECK(st.hybrid().squaredNorm() == Approx(d.sc.power_budget).epsilon(1e-12));
    CHECK(st.digital_full.squaredNorm() == Approx(d.sc.power_budget).epsilon(1e-12));
    CHECK(std::abs(d.ch.eve_channel.dot(st.digital_full.col(0))) <= 1e-12 * d.ch.eve_channel.norm() * st.digital_full.col(0).norm());
    CHECK(st.common_alloc.size() == 2);

    const BeamState sd = initialize(d.geom, d.sc, d.ch, InitOptions{false});
    CHECK(sd.digital_full.col(0).norm() == 0.0);
}

TEST_CASE("bcd: huge penalty tolerance stops after one outer iteration")
{
    const Desk d = desk();
    PenaltySchedule s;
    s.eps_penalty_rel = 1e6;
    DriverOptions opt;
    opt.hybrid_crb_rel = 1e6;
    const SolveReport r = penalty_bcd(d.geom, d.sc, d.ch, d.sensing, s, opt);
    CHECK(r.outer_iterations == 1);
    CHECK(r.status == SolveStatus::Converged);
}

TEST_CASE("bcd: desk solve is feasible and its residual shrinks across penalty levels")
{
    const Desk d = desk();
    const SolveReport r = penalty_bcd(d.geom, d.sc, d.ch, d.sensing, PenaltySchedule{});
    REQUIRE(r.status == SolveStatus::Converged);
    CHECK(r.penalty_residual <= 1e-4 * d.sc.power_budget);
    CHECK(r.feasibility.unit_modulus_error <= 1e-12);
    CHECK(r.feasibility.power_excess <= 1e-12 * d.sc.power_budget);
    CHECK(r.crb_angle <= 1.01 * d.sc.crb_angle_max);
    CHECK(r.crb_range <= 1.01 * d.sc.crb_range_max);
    CHECK(r.feasibility.allocation_excess <= 1e-9);
    CHECK(r.max_min_secrecy > 0.0);
    for (const auto &tr : r.inner_traces)
        for (std::size_t i = 1; i < tr.size(); ++i)
            CHECK(tr[i] >= tr[i - 1] - 1e-7);
    for (std::size_t i = 1; i < r.outer_residual.size(); ++i)
        CHECK(r.outer_residual[i] <= r.outer_residual[i - 1] * (1.0 + 1e-6));
    CHECK(r.conic_solves >= r.outer_iterations);
}

TEST_CASE("bcd: limits tighter than the initial beam are restored, not relaxed")
{
    Desk d = desk();
    d.sc.crb_angle_max *= 0.05; // half the initial CRBs
    d.sc.crb_range_max *= 0.05;
    const SolveReport r = penalty_bcd(d.geom, d.sc, d.ch, d.sensing, PenaltySchedule{});
    REQUIRE(r.status == SolveStatus::Converged);
    CHECK(r.restorations >= 1);
    CHECK(r.crb_relax_final == 1.0);
    CHECK(r.crb_angle <= (1.0 + DriverOptions{}.hybrid_crb_rel) * d.sc.crb_angle_max);
    CHECK(r.crb_range <= (1.0 + DriverOptions{}.hybrid_crb_rel) * d.sc.crb_range_max);
    CHECK(r.max_min_secrecy > 0.0);
}

TEST_CASE("bcd: schedule validation")
{
    PenaltySchedule s;
    s.shrink = 1.0;
    CHECK_THROWS_AS(s.validate(), DomainError);
    s = {};
    s.rho0 = 0.0;
    CHECK_THROWS_AS(s.validate(), DomainError);
    s = {};
    s.max_outer = 0;
    CHECK_THROWS_AS(s.validate(), DomainError);
}
