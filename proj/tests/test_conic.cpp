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

#include <nfisac/conic.hpp>

using namespace nfisac;
using Catch::Approx;

namespace
{
    AffineExpr var(Eigen::Index n, Eigen::Index i, double w = 1.0, double c = 0.0)
    {
        AffineExpr e(n, c);
        e.add(i, w);
        return e;
    }
} // namespace

TEST_CASE("conic: small LP matches vertex enumeration")
{
    // minimize -x - 2y  s.t. x + y <= 4, x <= 3, y <= 2.5, x, y >= 0
    ConicProblem p(2);
    p.c << -1.0, -2.0;
    AffineExpr s1(2, 4.0);
    s1.add(0, -1).add(1, -1);
    p.add(ConeKind::NonNegative, {s1, var(2, 0, -1, 3), var(2, 1, -1, 2.5), var(2, 0), var(2, 1)}, "lp");
    const auto sol = solve_conic(p, 1e-9);
    REQUIRE(sol.status == ConicStatus::Optimal);
    // Vertex oracle: (1.5, 2.5) gives -6.5.
    CHECK(sol.objective == Approx(-6.5).margin(1e-7));
    CHECK(sol.x(0) == Approx(1.5).margin(1e-6));
    CHECK(sol.gap <= 1e-8);
}

TEST_CASE("conic: SOC projection matches the closed form")
{
    // minimize t s.t. ||x - p|| <= t, ||x|| <= 1 with p outside the unit ball: answer ||p|| - 1.
    const Eigen::Index n = 4; // x0..x2, t
    ConicProblem p(n);
    p.c(3) = 1.0;
    const Eigen::Vector3d q(2.0, -1.0, 0.5);
    std::vector<AffineExpr> soc1{var(n, 3)}, soc2{AffineExpr(n, 1.0)};
    for (int i = 0; i < 3; ++i)
    {
        soc1.push_back(var(n, i, 1.0, -q(i)));
        soc2.push_back(var(n, i));
    }
    p.add(ConeKind::SecondOrder, soc1, "dist");
    p.add(ConeKind::SecondOrder, soc2, "ball");
    const auto sol = solve_conic(p, 1e-10);
    REQUIRE(sol.status == ConicStatus::Optimal);
    CHECK(sol.objective == Approx(q.norm() - 1.0).margin(1e-7));
    CHECK((sol.x.head(3) - q / q.norm()).norm() < 1e-4);
}

TEST_CASE("conic: rotated SOC and exponential cone")
{
    SECTION("rotated cone: minimize u + v subject to 2uv >= 1")
    {
        ConicProblem p(2);
        p.c << 1.0, 1.0;
        p.add(ConeKind::RotatedSecondOrder, {var(2, 0), var(2, 1), AffineExpr(2, 1.0)}, "r");
        const auto sol = solve_conic(p, 1e-10);
        REQUIRE(sol.status == ConicStatus::Optimal);
        CHECK(sol.objective == Approx(2.0 / std::sqrt(2.0)).margin(1e-7));
    }
    SECTION("exponential cone: minimize z subject to exp(x) <= z, x >= 1")
    {
        ConicProblem p(2);
        p.c << 0.0, 1.0;
        p.add(ConeKind::Exponential, {var(2, 0), AffineExpr(2, 1.0), var(2, 1)}, "exp");
        p.add(ConeKind::NonNegative, {var(2, 0, 1.0, -1.0)}, "lb");
        const auto sol = solve_conic(p, 1e-10);
        REQUIRE(sol.status == ConicStatus::Optimal);
        CHECK(sol.objective == Approx(std::exp(1.0)).margin(1e-7));
    }
    SECTION("exponential cone: maximize log(y) subject to y <= 3")
    {
        ConicProblem p(2); // (w, y): w <= log y
        p.c << -1.0, 0.0;
        p.add(ConeKind::Exponential, {var(2, 0), AffineExpr(2, 1.0), var(2, 1)}, "log");
        p.add(ConeKind::NonNegative, {var(2, 1, -1.0, 3.0)}, "ub");
        const auto sol = solve_conic(p, 1e-10);
        REQUIRE(sol.status == ConicStatus::Optimal);
        CHECK(-sol.objective == Approx(std::log(3.0)).margin(1e-7));
    }
}

TEST_CASE("conic: infeasible and unbounded problems are reported")
{
    SECTION("x >= 2 and x <= 1")
    {
        ConicProblem p(1);
        p.c << 1.0;
        p.add(ConeKind::NonNegative, {var(1, 0, 1.0, -2.0), var(1, 0, -1.0, 1.0)}, "box");
        CHECK(solve_conic(p).status == ConicStatus::Infeasible);
    }
    SECTION("unit ball disjoint from the halfspace x0 >= 3")
    {
        ConicProblem p(2);
        p.c << 1.0, 0.0;
        p.add(ConeKind::SecondOrder, {AffineExpr(2, 1.0), var(2, 0), var(2, 1)}, "ball");
        p.add(ConeKind::NonNegative, {var(2, 0, 1.0, -3.0)}, "half");
        CHECK(solve_conic(p).status == ConicStatus::Infeasible);
    }
    SECTION("minimize x with only x <= 1")
    {
        ConicProblem p(1);
        p.c << 1.0;
        p.add(ConeKind::NonNegative, {var(1, 0, -1.0, 1.0)}, "ub");
        CHECK(solve_conic(p).status == ConicStatus::Unbounded);
    }
}

TEST_CASE("conic: duals satisfy stationarity and complementarity")
{
    ConicProblem p(3);
    p.c << 1.0, -0.5, 0.25;
    p.add(ConeKind::SecondOrder, {AffineExpr(3, 2.0), var(3, 0), var(3, 1), var(3, 2)}, "ball");
    const auto sol = solve_conic(p, 1e-10);
    REQUIRE(sol.status == ConicStatus::Optimal);
    // Oracle: minimizer of c^T x over ||x|| <= 2 is -2 c / ||c||.
    CHECK(sol.objective == Approx(-2.0 * p.c.norm()).margin(1e-7));
    CHECK(sol.dual_residual < 1e-5 * p.c.norm());
    const RVec z = p.blocks[0].value(sol.x);
    CHECK(std::abs(sol.duals[0].dot(z)) <= 2.0 * sol.gap + 1e-12);
    const RVec &l = sol.duals[0];
    CHECK(l(0) >= l.tail(3).norm() - 1e-12); // dual cone membership
}
