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

#include <nfisac/rates.hpp>

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

    ChannelSet random_channels(std::mt19937_64 &rng, int n, int k)
    {
        ChannelSet ch;
        for (int i = 0; i < k; ++i)
            ch.user_channels.push_back(random_cmat(rng, n, 1).col(0));
        ch.eve_channel = random_cmat(rng, n, 1).col(0);
        ch.eve_gain = 1.0;
        return ch;
    }

    struct Fused
    {
        std::vector<double> rkc, rkp, rek;
        double rec = 0.0, sc = 0.0;
        std::vector<double> sp;
    };

    // Everything from scratch with scalar loops.
    Fused fused(const CMat &P, const ChannelSet &ch, const std::vector<double> &nu, double ne)
    {
        const int K = static_cast<int>(ch.user_channels.size());
        auto pw = [&](const CVec &h, int i) {
            cplx acc = 0.0;
            for (Eigen::Index n = 0; n < P.rows(); ++n)
                acc += std::conj(h(n)) * P(n, i);
            return std::norm(acc);
        };
        Fused f;
        double rc = std::numeric_limits<double>::infinity();
        for (int k = 0; k < K; ++k)
        {
            double priv_int = nu[k];
            for (int i = 1; i <= K; ++i)
                if (i != k + 1)
                    priv_int += pw(ch.user_channels[k], i);
            const double sp = pw(ch.user_channels[k], k + 1);
            f.rkc.push_back(std::log2(1.0 + pw(ch.user_channels[k], 0) / (sp + priv_int)));
            f.rkp.push_back(std::log2(1.0 + sp / priv_int));
            rc = std::min(rc, f.rkc.back());
        }
        double eve_int = ne;
        for (int i = 1; i <= K; ++i)
            eve_int += pw(ch.eve_channel, i);
        const double sec = pw(ch.eve_channel, 0);
        f.rec = std::log2(1.0 + sec / eve_int);
        f.sc = std::max(rc - f.rec, 0.0);
        for (int k = 0; k < K; ++k)
        {
            const double sek = pw(ch.eve_channel, k + 1);
            f.rek.push_back(std::log2(1.0 + sek / (eve_int - sek + sec)));
            f.sp.push_back(std::max(f.rkp[k] - f.rek[k], 0.0));
        }
        return f;
    }

    double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }
} // namespace

TEST_CASE("rates: zero beam leaves only noise")
{
    std::mt19937_64 rng(1);
    const ChannelSet ch = random_channels(rng, 6, 3);
    const PowerDecomposition pd = received_powers(CMat::Zero(6, 4), ch, {0.1, 0.2, 0.3}, 0.4);
    CHECK(pd.s_kc.norm() == 0.0);
    CHECK(pd.s_kp.norm() == 0.0);
    CHECK(pd.s_ec == 0.0);
    CHECK(pd.s_ek.norm() == 0.0);
    CHECK(pd.i_kp(0) == 0.1);
    CHECK(pd.i_kc(2) == 0.3);
    CHECK(pd.i_ec == 0.4);
    CHECK(pd.i_ek(1) == 0.4);
}

TEST_CASE("rates: common beam orthogonal to the channel delivers nothing")
{
    ChannelSet ch;
    ch.user_channels = {CVec::Unit(4, 0)};
    ch.eve_channel = CVec::Unit(4, 1);
    CMat P = CMat::Zero(4, 2);
    P(2, 0) = 3.0;
    P(0, 1) = 1.0;
    const PowerDecomposition pd = received_powers(P, ch, {1.0}, 1.0);
    CHECK(pd.s_kc(0) == 0.0);
    CHECK(pd.s_kp(0) == 1.0);
}

TEST_CASE("rates: received powers match a double loop and telescope")
{
    std::mt19937_64 rng(2);
    const ChannelSet ch = random_channels(rng, 8, 2);
    const CMat P = random_cmat(rng, 8, 3);
    const PowerDecomposition pd = received_powers(P, ch, {0.5, 0.7}, 0.9);
    for (int k = 0; k < 2; ++k)
    {
        double g[3];
        for (int i = 0; i < 3; ++i)
        {
            cplx acc = 0.0;
            for (int n = 0; n < 8; ++n)
                acc += std::conj(ch.user_channels[k](n)) * P(n, i);
            g[i] = std::norm(acc);
        }
        CHECK(pd.s_kc(k) == Approx(g[0]).epsilon(1e-12));
        CHECK(pd.s_kp(k) == Approx(g[k + 1]).epsilon(1e-12));
        CHECK(pd.i_kp(k) == Approx(g[2 - k] + (k ? 0.7 : 0.5)).epsilon(1e-12));
        CHECK(pd.i_kc(k) == Approx(pd.s_kp(k) + pd.i_kp(k)).epsilon(1e-15));
        CHECK(pd.t_kc()(k) == Approx(g[0] + g[1] + g[2] + (k ? 0.7 : 0.5)).epsilon(1e-12));
    }
}

TEST_CASE("rates: dimension mismatches are contract errors")
{
    std::mt19937_64 rng(3);
    const ChannelSet ch = random_channels(rng, 4, 2);
    CHECK_THROWS_AS(received_powers(CMat::Zero(4, 2), ch, {1.0, 1.0}, 1.0), ContractError);
    CHECK_THROWS_AS(received_powers(CMat::Zero(5, 3), ch, {1.0, 1.0}, 1.0), ContractError);
    CHECK_THROWS_AS(received_powers(CMat::Zero(4, 3), ch, {1.0}, 1.0), ContractError);
    PowerDecomposition pd = received_powers(CMat::Zero(4, 3), ch, {1.0, 1.0}, 1.0);
    pd.s_kc(0) = -1.0;
    CHECK_THROWS_AS(compute_rates(pd, RVec::Zero(2)), ContractError);
}

TEST_CASE("rates: unit SINR gives one bit")
{
    PowerDecomposition pd;
    pd.s_kc = RVec::Constant(1, 2.0);
    pd.s_kp = RVec::Constant(1, 1.0);
    pd.i_kp = RVec::Constant(1, 1.0);
    pd.i_kc = RVec::Constant(1, 2.0);
    pd.s_ek = RVec::Zero(1);
    pd.i_ek = RVec::Constant(1, 1.0);
    pd.s_ec = 0.0;
    pd.i_ec = 1.0;
    const RateReport r = compute_rates(pd, RVec::Zero(1));
    CHECK(r.r_kc(0) == 1.0);
    CHECK(r.r_kp(0) == 1.0);
    CHECK(r.r_ec == 0.0);
    CHECK(r.secrecy_common == 1.0);
}

TEST_CASE("rates: eavesdropper as strong as the user leaves no secrecy")
{
    ChannelSet ch;
    ch.user_channels = {CVec::Unit(3, 0)};
    ch.eve_channel = CVec::Unit(3, 0);
    CMat P = CMat::Zero(3, 2);
    P(0, 0) = 1.0;
    // Private stream lives on the common stream's direction too, so both see identical SINRs.
    const RateReport r = compute_rates(received_powers(P, ch, {0.5}, 0.5), RVec::Zero(1));
    CHECK(r.secrecy_common == 0.0);
    CHECK(r.secrecy_private(0) == 0.0);
    CHECK(r.secrecy_total(0) == 0.0);
}

TEST_CASE("rates: fused brute-force evaluator agrees on 1000 instances")
{
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> ku(1, 3), nu(2, 6);
    std::uniform_real_distribution<double> noise(0.05, 2.0);
    for (int t = 0; t < 1000; ++t)
    {
        const int K = ku(rng), N = nu(rng);
        const ChannelSet ch = random_channels(rng, N, K);
        const CMat P = random_cmat(rng, N, K + 1);
        std::vector<double> sn;
        for (int k = 0; k < K; ++k)
            sn.push_back(noise(rng));
        const double se = noise(rng);
        const RateReport r = compute_rates(received_powers(P, ch, sn, se), RVec::Zero(K));
        const Fused f = fused(P, ch, sn, se);
        for (int k = 0; k < K; ++k)
        {
            CHECK(rel(r.r_kc(k), f.rkc[k]) <= 1e-12);
            CHECK(rel(r.r_kp(k), f.rkp[k]) <= 1e-12);
            CHECK(rel(r.r_ek(k), f.rek[k]) <= 1e-12);
            CHECK(std::abs(r.secrecy_private(k) - f.sp[k]) <= 1e-12 * std::max(1.0, f.rkp[k]));
        }
        CHECK(rel(r.r_ec, f.rec) <= 1e-12);
        CHECK(std::abs(r.secrecy_common - f.sc) <= 1e-12 * std::max(1.0, f.rec));
        CHECK(r.secrecy_common >= 0.0);
        CHECK(r.secrecy_private.minCoeff() >= 0.0);
        CHECK(r.secrecy_common_raw == Approx(r.r_common - r.r_ec));
    }
}

TEST_CASE("rates: total secrecy adds the allocation to the private part")
{
    std::mt19937_64 rng(5);
    const ChannelSet ch = random_channels(rng, 5, 3);
    const CMat P = random_cmat(rng, 5, 4);
    const RVec alloc = (RVec(3) << 0.1, 0.0, 0.4).finished();
    const RateReport r = compute_rates(received_powers(P, ch, {1.0, 1.0, 1.0}, 1.0), alloc);
    CHECK((r.secrecy_total - (alloc + r.secrecy_private)).norm() <= 1e-15);
    CHECK(r.r_common == r.r_kc.minCoeff());
}

TEST_CASE("rates: scaled beams recompute consistently")
{
    std::mt19937_64 rng(6);
    const ChannelSet ch = random_channels(rng, 6, 2);
    const CMat P = random_cmat(rng, 6, 3);
    const double c = 3.7;
    const PowerDecomposition a = received_powers(std::sqrt(c) * P, ch, {0.3, 0.3}, 0.3);
    const PowerDecomposition b = received_powers(P, ch, {0.3 / c, 0.3 / c}, 0.3 / c);
    for (int k = 0; k < 2; ++k)
    {
        CHECK(a.s_kc(k) / a.i_kc(k) == Approx(b.s_kc(k) / b.i_kc(k)).epsilon(1e-12));
        CHECK(a.s_kp(k) / a.i_kp(k) == Approx(b.s_kp(k) / b.i_kp(k)).epsilon(1e-12));
    }
}

TEST_CASE("rates: more eavesdropper noise never lowers secrecy")
{
    std::mt19937_64 rng(7);
    for (int t = 0; t < 200; ++t)
    {
        const ChannelSet ch = random_channels(rng, 4, 2);
        const CMat P = random_cmat(rng, 4, 3);
        const RateReport lo = compute_rates(received_powers(P, ch, {0.2, 0.2}, 0.1), RVec::Zero(2));
        const RateReport hi = compute_rates(received_powers(P, ch, {0.2, 0.2}, 0.5), RVec::Zero(2));
        CHECK(hi.secrecy_common >= lo.secrecy_common);
        for (int k = 0; k < 2; ++k)
            CHECK(hi.secrecy_private(k) >= lo.secrecy_private(k));
    }
}

TEST_CASE("rates: water filling maximizes the minimum within the budget")
{
    const RVec base = (RVec(3) << 1.0, 3.0, 1.5).finished();
    const RVec a = water_fill_allocation(base, 1.0);
    CHECK(a.sum() <= 1.0);
    CHECK((a + base).minCoeff() == Approx(1.75));
    CHECK(a(1) == 0.0);
    CHECK(water_fill_allocation(base, 0.0).norm() == 0.0);
    CHECK(water_fill_allocation(base, -1.0).norm() == 0.0);
    const RVec big = water_fill_allocation(base, 10.0);
    CHECK((big + base).minCoeff() == Approx((10.0 + 5.5) / 3.0));

    // Brute-force oracle on a grid for two users.
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1.0, 2.0), b(0.0, 2.0);
    for (int t = 0; t < 100; ++t)
    {
        const RVec v = (RVec(2) << u(rng), u(rng)).finished();
        const double budget = b(rng);
        double best = -1e9;
        for (int i = 0; i <= 2000; ++i)
        {
            const double x = budget * i / 2000.0;
            best = std::max(best, std::min(v(0) + x, v(1) + budget - x));
        }
        const RVec w = water_fill_allocation(v, budget);
        CHECK(w.minCoeff() >= 0.0);
        CHECK(w.sum() <= budget * (1 + 1e-15));
        CHECK((w + v).minCoeff() >= best - 1e-12);
        CHECK((w + v).minCoeff() <= best + budget / 1000.0);
    }
}

TEST_CASE("rates: reformulated secrecy is -inf for a negative common budget")
{
    RateReport r;
    r.secrecy_common_raw = -0.1;
    r.secrecy_private_raw = RVec::Ones(2);
    CHECK(std::isinf(reformulated_secrecy(r)));
    r.secrecy_common_raw = 1.0;
    r.secrecy_private_raw = (RVec(2) << 0.5, -0.5).finished();
    CHECK(reformulated_secrecy(r) == Approx(0.5));
}

TEST_CASE("rates: feasibility report on constructed states")
{
    SystemGeometry g;
    g.n_tx = 8, g.n_rx = 4, g.n_rf = 2;
    Scenario sc;
    sc.users = {{8.0, 0.3}, {12.0, 1.0}};
    sc.target = {10.0, 0.6};
    sc.noise_user = {1e-12, 1e-12};
    sc.noise_eve = 1e-12;
    sc.power_budget = 1.0;
    sc.crb_angle_max = sc.crb_range_max = 1e-3;
    const ChannelSet ch = build_channels(g, sc);
    const SensingModel s = build_sensing_model(g, sc);

    BeamState zero;
    zero.digital_full = CMat::Zero(8, 3);
    zero.common_alloc = RVec::Zero(2);
    const FeasibilityReport fz = check_feasibility(zero, sc, ch, s);
    CHECK(fz.power_excess == 0.0);
    CHECK(std::isinf(fz.crb_angle_excess));
    CHECK(std::isinf(fz.crb_range_excess));

    std::mt19937_64 rng(9);
    BeamState st;
    st.digital_full = random_cmat(rng, 8, 3);
    st.digital_full *= 0.5 / st.digital_full.norm();
    st.common_alloc = RVec::Zero(2);
    const RateReport r = evaluate_rates(st.digital_full, ch, sc, st.common_alloc);
    st.common_alloc(0) = r.secrecy_common + 0.1;
    const FeasibilityReport f = check_feasibility(st, sc, ch, s);
    CHECK(f.allocation_excess == Approx(0.1).epsilon(1e-12));
    CHECK(f.power_excess == 0.0);
    st.common_alloc(1) = -0.2;
    CHECK(check_feasibility(st, sc, ch, s).negative_allocation == Approx(0.2));
    st.digital_full *= 4.0;
    CHECK(check_feasibility(st, sc, ch, s).power_excess == Approx(3.0).epsilon(1e-12));
}
