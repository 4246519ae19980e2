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

// Small dense conic programs:
//
//     minimize    c^T x
//     subject to  A_i x + b_i in K_i,
//
// with K_i the nonnegative orthant, the second-order cone {z0 >= ||z_1:||}, the rotated
// second-order cone {2 z0 z1 >= ||z_2:||^2, z0, z1 >= 0} or the exponential cone
// {z1 > 0, z1 exp(z0 / z1) <= z2}. The default solver is a log-barrier path-following
// interior-point method with a phase-I feasibility search; dual multipliers are recovered
// from the barrier gradient, so the reported gap is a certified duality gap.

#ifndef NFISAC_CONIC_HPP
#define NFISAC_CONIC_HPP

#include "core.hpp"

#include <Eigen/Cholesky>

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace nfisac
{
    enum class ConeKind
    {
        NonNegative,
        SecondOrder,
        RotatedSecondOrder,
        Exponential
    };

    inline const char *to_string(ConeKind k)
    {
        switch (k)
        {
        case ConeKind::NonNegative: return "nonnegative";
        case ConeKind::SecondOrder: return "soc";
        case ConeKind::RotatedSecondOrder: return "rsoc";
        case ConeKind::Exponential: return "exp";
        }
        return "?";
    }

    struct ConeBlock
    {
        ConeKind kind = ConeKind::NonNegative;
        RMat A; // rows = cone dimension, cols = variable count
        RVec b;
        std::string tag;

        Eigen::Index dim() const { return A.rows(); }
        RVec value(const RVec &x) const { return A * x + b; }

        // Barrier parameter contributed by this block.
        double barrier_degree() const
        {
            switch (kind)
            {
            case ConeKind::NonNegative: return static_cast<double>(dim());
            case ConeKind::SecondOrder:
            case ConeKind::RotatedSecondOrder: return 2.0;
            case ConeKind::Exponential: return 3.0;
            }
            return 0.0;
        }
    };

    // One affine scalar expression a^T x + a0 over the problem variables.
    struct AffineExpr
    {
        RVec coef;
        double constant = 0.0;

        explicit AffineExpr(Eigen::Index n = 0, double c = 0.0) : coef(RVec::Zero(n)), constant(c) {}
        AffineExpr &add(Eigen::Index var, double w)
        {
            coef(var) += w;
            return *this;
        }
        AffineExpr &operator+=(const AffineExpr &o)
        {
            coef += o.coef;
            constant += o.constant;
            return *this;
        }
        AffineExpr &operator*=(double s)
        {
            coef *= s;
            constant *= s;
            return *this;
        }
    };

    struct ConicProblem
    {
        RVec c;
        std::vector<ConeBlock> blocks;
        std::vector<std::string> names;
        RVec start; // optional starting hint, empty when absent

        explicit ConicProblem(Eigen::Index n = 0) : c(RVec::Zero(n)), names(static_cast<size_t>(n)) {}

        Eigen::Index n() const { return c.size(); }

        // Adds a block whose rows are the given affine expressions.
        ConeBlock &add(ConeKind kind, const std::vector<AffineExpr> &rows, std::string tag)
        {
            ConeBlock blk;
            blk.kind = kind;
            blk.tag = std::move(tag);
            blk.A.resize(static_cast<Eigen::Index>(rows.size()), n());
            blk.b.resize(static_cast<Eigen::Index>(rows.size()));
            for (size_t i = 0; i < rows.size(); ++i)
            {
                require(rows[i].coef.size() == n(), "ConicProblem::add: expression has wrong variable count");
                blk.A.row(static_cast<Eigen::Index>(i)) = rows[i].coef.transpose();
                blk.b(static_cast<Eigen::Index>(i)) = rows[i].constant;
            }
            blocks.push_back(std::move(blk));
            return blocks.back();
        }

        // Appends a block given directly as (A, b).
        ConeBlock &add(ConeKind kind, RMat A, RVec b, std::string tag)
        {
            require(A.cols() == n() && A.rows() == b.size(), "ConicProblem::add: block dimension mismatch");
            blocks.push_back(ConeBlock{kind, std::move(A), std::move(b), std::move(tag)});
            return blocks.back();
        }

        void validate() const
        {
            for (const auto &blk : blocks)
            {
                require(blk.A.cols() == n() && blk.A.rows() == blk.b.size(), "conic block '" + blk.tag + "': inconsistent dims");
                switch (blk.kind)
                {
                case ConeKind::NonNegative: require(blk.dim() >= 1, "orthant block needs >= 1 row"); break;
                case ConeKind::SecondOrder: require(blk.dim() >= 1, "SOC block needs >= 1 row"); break;
                case ConeKind::RotatedSecondOrder: require(blk.dim() >= 2, "rotated SOC block needs >= 2 rows"); break;
                case ConeKind::Exponential: require(blk.dim() == 3, "exponential cone block needs exactly 3 rows"); break;
                }
            }
            require(start.size() == 0 || start.size() == n(), "ConicProblem: start hint has wrong size");
        }

        double barrier_degree() const
        {
            double nu = 0.0;
            for (const auto &blk : blocks)
                nu += blk.barrier_degree();
            return nu;
        }
    };

    enum class ConicStatus
    {
        Optimal,
        Infeasible,
        Unbounded,
        MaxIterations,
        NumericalFailure
    };

    inline const char *to_string(ConicStatus s)
    {
        switch (s)
        {
        case ConicStatus::Optimal: return "optimal";
        case ConicStatus::Infeasible: return "infeasible";
        case ConicStatus::Unbounded: return "unbounded";
        case ConicStatus::MaxIterations: return "max_iterations";
        case ConicStatus::NumericalFailure: return "numerical_failure";
        }
        return "?";
    }

    struct ConicSettings
    {
        double tol = 1e-7;       // relative duality gap
        double barrier_growth = 20.0;
        int max_newton = 3000;   // over both phases
        double centering_tol = 1e-10;
    };

    struct ConicSolution
    {
        ConicStatus status = ConicStatus::NumericalFailure;
        RVec x;                  // best iterate (strictly feasible unless status says otherwise)
        double objective = std::numeric_limits<double>::quiet_NaN();
        double gap = std::numeric_limits<double>::infinity();         // certified duality gap bound
        double dual_residual = std::numeric_limits<double>::infinity();
        double primal_residual = std::numeric_limits<double>::infinity(); // max distance outside the cones, 0 when interior
        int newton_steps = 0;
        std::vector<RVec> duals; // one multiplier per block
    };

    class ConicSolver
    {
    public:
        virtual ~ConicSolver() = default;
        virtual ConicSolution solve(const ConicProblem &problem, const ConicSettings &settings) const = 0;
    };

    namespace detail
    {
        inline bool cone_interior(ConeKind kind, const RVec &z)
        {
            switch (kind)
            {
            case ConeKind::NonNegative: return z.minCoeff() > 0.0;
            case ConeKind::SecondOrder: return z(0) > 0.0 && z(0) * z(0) - z.tail(z.size() - 1).squaredNorm() > 0.0;
            case ConeKind::RotatedSecondOrder:
                return z(0) > 0.0 && z(1) > 0.0 && 2.0 * z(0) * z(1) - z.tail(z.size() - 2).squaredNorm() > 0.0;
            case ConeKind::Exponential:
                return z(1) > 0.0 && z(2) > 0.0 && z(1) * std::log(z(2) / z(1)) - z(0) > 0.0;
            }
            return false;
        }

        // Interior direction used by phase I.
        inline RVec cone_unit(ConeKind kind, Eigen::Index dim)
        {
            RVec e = RVec::Zero(dim);
            switch (kind)
            {
            case ConeKind::NonNegative: e.setOnes(); break;
            case ConeKind::SecondOrder: e(0) = 1.0; break;
            case ConeKind::RotatedSecondOrder: e(0) = e(1) = 1.0; break;
            case ConeKind::Exponential: e << -1.0, 1.0, 1.0; break;
            }
            return e;
        }

        // Smallest shift s with z + s e strictly interior (up to bisection accuracy for the exp cone).
        inline double interior_shift(ConeKind kind, const RVec &z)
        {
            switch (kind)
            {
            case ConeKind::NonNegative: return -z.minCoeff();
            case ConeKind::SecondOrder: return z.tail(z.size() - 1).norm() - z(0);
            case ConeKind::RotatedSecondOrder:
            {
                const double u = z(0), v = z(1), w2 = z.tail(z.size() - 2).squaredNorm();
                return 0.5 * (-(u + v) + std::sqrt((u - v) * (u - v) + 2.0 * w2));
            }
            case ConeKind::Exponential:
            {
                const RVec e = cone_unit(kind, 3);
                if (cone_interior(kind, z))
                {
                    double lo = -1.0;
                    while (cone_interior(kind, z + lo * e) && lo > -1e12)
                        lo *= 2.0;
                    double hi = 0.0;
                    for (int it = 0; it < 200; ++it)
                    {
                        const double mid = 0.5 * (lo + hi);
                        (cone_interior(kind, z + mid * e) ? hi : lo) = mid;
                    }
                    return hi;
                }
                double hi = 1.0;
                while (!cone_interior(kind, z + hi * e))
                    hi *= 2.0;
                double lo = 0.0;
                for (int it = 0; it < 200; ++it)
                {
                    const double mid = 0.5 * (lo + hi);
                    (cone_interior(kind, z + mid * e) ? hi : lo) = mid;
                }
                return hi;
            }
            }
            return 0.0;
        }

        // Barrier bookkeeping for one block. Quadratic-form cones (SOC and rotated SOC) use
        // F(z) = -log(z^T Q z), whose x-space Hessian is a constant matrix A^T Q A plus a rank-1 term.
        struct BlockBarrier
        {
            const ConeBlock *block = nullptr;
            RMat AtQA; // quadratic-form cones only
            RVec qdiag_sign;

            explicit BlockBarrier(const ConeBlock &blk) : block(&blk)
            {
                if (blk.kind == ConeKind::SecondOrder || blk.kind == ConeKind::RotatedSecondOrder)
                {
                    const RMat QA = apply_q(blk.A);
                    AtQA = blk.A.transpose() * QA;
                }
            }

            RMat apply_q(const RMat &M) const
            {
                RMat out = -M;
                if (block->kind == ConeKind::SecondOrder)
                    out.row(0) = M.row(0);
                else
                {
                    out.row(0) = M.row(1);
                    out.row(1) = M.row(0);
                }
                return out;
            }

            RVec apply_q(const RVec &z) const
            {
                RVec out = -z;
                if (block->kind == ConeKind::SecondOrder)
                    out(0) = z(0);
                else
                {
                    out(0) = z(1);
                    out(1) = z(0);
                }
                return out;
            }

            // Value, z-space gradient; adds x-space gradient and Hessian.
            double accumulate(const RVec &z, RVec &grad_x, RMat &hess_x, RVec *grad_z_out) const
            {
                const RMat &A = block->A;
                switch (block->kind)
                {
                case ConeKind::NonNegative:
                {
                    const RVec inv = z.cwiseInverse();
                    grad_x.noalias() -= A.transpose() * inv;
                    hess_x.noalias() += A.transpose() * inv.cwiseAbs2().asDiagonal() * A;
                    if (grad_z_out)
                        *grad_z_out = -inv;
                    return -z.array().log().sum();
                }
                case ConeKind::SecondOrder:
                case ConeKind::RotatedSecondOrder:
                {
                    const RVec Qz = apply_q(z);
                    const double q = z.dot(Qz);
                    const RVec v = A.transpose() * Qz;
                    grad_x.noalias() -= (2.0 / q) * v;
                    hess_x.noalias() += (-2.0 / q) * AtQA;
                    hess_x.noalias() += (4.0 / (q * q)) * v * v.transpose();
                    if (grad_z_out)
                        *grad_z_out = (-2.0 / q) * Qz;
                    return -std::log(q);
                }
                case ConeKind::Exponential:
                {
                    const double x = z(0), y = z(1), w = z(2);
                    const double lg = std::log(w / y);
                    const double psi = y * lg - x;
                    Eigen::Vector3d dpsi(-1.0, lg - 1.0, y / w);
                    Eigen::Matrix3d d2psi = Eigen::Matrix3d::Zero();
                    d2psi(1, 1) = -1.0 / y;
                    d2psi(1, 2) = d2psi(2, 1) = 1.0 / w;
                    d2psi(2, 2) = -y / (w * w);
                    Eigen::Vector3d gz = -dpsi / psi;
                    gz(1) -= 1.0 / y;
                    gz(2) -= 1.0 / w;
                    Eigen::Matrix3d hz = dpsi * dpsi.transpose() / (psi * psi) - d2psi / psi;
                    hz(1, 1) += 1.0 / (y * y);
                    hz(2, 2) += 1.0 / (w * w);
                    grad_x.noalias() += A.transpose() * gz;
                    const RMat HA = hz * A;
                    hess_x.noalias() += A.transpose() * HA;
                    if (grad_z_out)
                        *grad_z_out = gz;
                    return -std::log(psi) - std::log(y) - std::log(w);
                }
                }
                return 0.0;
            }

            double value(const RVec &z) const
            {
                switch (block->kind)
                {
                case ConeKind::NonNegative: return -z.array().log().sum();
                case ConeKind::SecondOrder:
                case ConeKind::RotatedSecondOrder: return -std::log(z.dot(apply_q(z)));
                case ConeKind::Exponential:
                    return -std::log(z(1) * std::log(z(2) / z(1)) - z(0)) - std::log(z(1)) - std::log(z(2));
                }
                return 0.0;
            }
        };

        struct CenteringResult
        {
            bool ok = true;
            bool centered = false;
            bool stalled = false;
            bool stopped_early = false;
            int steps = 0;
        };

        // Damped Newton centering of t c^T x + sum F_i(A_i x + b_i).
        // `early_stop` is checked after each accepted step.
        template <typename EarlyStop>
        CenteringResult center(const ConicProblem &prob, const std::vector<BlockBarrier> &barriers, double t, RVec &x,
                               const ConicSettings &settings, int step_budget, EarlyStop &&early_stop, bool strict = false)
        {
            CenteringResult res;
            const Eigen::Index n = prob.n();
            auto all_interior = [&](const RVec &xx) {
                for (const auto &bb : barriers)
                    if (!cone_interior(bb.block->kind, bb.block->value(xx)))
                        return false;
                return true;
            };
            auto phi = [&](const RVec &xx) {
                double v = t * prob.c.dot(xx);
                for (const auto &bb : barriers)
                    v += bb.value(bb.block->value(xx));
                return v;
            };

            for (int it = 0; it < 100 && res.steps < step_budget; ++it)
            {
                RVec grad = t * prob.c;
                RMat hess = RMat::Zero(n, n);
                double phi0 = t * prob.c.dot(x);
                for (const auto &bb : barriers)
                    phi0 += bb.accumulate(bb.block->value(x), grad, hess, nullptr);

                RVec dx;
                double reg = 0.0;
                const double diag_scale = std::max(hess.diagonal().cwiseAbs().maxCoeff(), 1e-300);
                for (int attempt = 0; attempt < 8; ++attempt)
                {
                    RMat H = hess;
                    if (reg > 0.0)
                        H.diagonal().array() += reg;
                    Eigen::LLT<RMat> llt(H);
                    if (llt.info() == Eigen::Success)
                    {
                        dx = -llt.solve(grad);
                        if (dx.allFinite())
                            break;
                    }
                    reg = reg == 0.0 ? diag_scale * 1e-14 : reg * 100.0;
                    dx.resize(0);
                }
                if (dx.size() == 0)
                {
                    res.ok = false;
                    return res;
                }
                const double decrement2 = -grad.dot(dx);
                // Objective error after centering is about decrement2 / t; the floor keeps rounding
                // noise in phi (which grows with t) from stalling the loop.
                const double floor =
                    strict ? settings.centering_tol
                           : std::max(settings.centering_tol, 1e-3 * settings.tol * t * std::max(1.0, std::abs(prob.c.dot(x))));
                if (!(decrement2 >= 0.0) || decrement2 * 0.5 <= floor)
                {
                    res.centered = true;
                    return res;
                }

                double step = 1.0;
                bool accepted = false;
                for (int ls = 0; ls < 60; ++ls)
                {
                    const RVec trial = x + step * dx;
                    if (all_interior(trial))
                    {
                        const double f1 = phi(trial);
                        // Near the optimum phi differences drown in rounding; accept full steps inside the quadratic region.
                        const bool quadratic_region = step == 1.0 && decrement2 < 1e-6;
                        if (std::isfinite(f1) &&
                            (f1 <= phi0 - 0.25 * step * decrement2 || (quadratic_region && f1 <= phi0 + 1e-10 * std::abs(phi0))))
                        {
                            x = trial;
                            accepted = true;
                            break;
                        }
                    }
                    step *= 0.5;
                }
                ++res.steps;
                if (!accepted)
                {
                    // Stalled: fine when already nearly centered.
                    res.centered = decrement2 < 1e-6;
                    res.stalled = !res.centered;
                    return res;
                }
                if (early_stop(x))
                {
                    res.stopped_early = true;
                    return res;
                }
            }
            return res;
        }
    } // namespace detail

    class BarrierConicSolver final : public ConicSolver
    {
    public:
        ConicSolution solve(const ConicProblem &prob, const ConicSettings &settings) const override
        {
            prob.validate();
            ConicSolution sol;
            const Eigen::Index n = prob.n();
            RVec x = prob.start.size() == n ? prob.start : RVec::Zero(n);

            // Phase I: minimize s over z_i + s e_i in K_i, stop once s < 0.
            double s0 = -std::numeric_limits<double>::infinity();
            for (const auto &blk : prob.blocks)
                s0 = std::max(s0, detail::interior_shift(blk.kind, blk.value(x)));
            if (!(s0 < 0.0) || !all_interior(prob, x))
            {
                auto phase1 = run_phase_one(prob, x, s0, settings, sol.newton_steps);
                if (!phase1)
                {
                    sol.status = ConicStatus::Infeasible;
                    sol.x = x;
                    sol.primal_residual = std::max(s0, 0.0);
                    return sol;
                }
                x = *phase1;
            }

            std::vector<detail::BlockBarrier> barriers;
            barriers.reserve(prob.blocks.size());
            for (const auto &blk : prob.blocks)
                barriers.emplace_back(blk);

            const double nu = prob.barrier_degree();
            double t = std::max(1.0, nu / std::max(1.0, std::abs(prob.c.dot(x))));
            auto never = [](const RVec &) { return false; };
            while (true)
            {
                const int budget = settings.max_newton - sol.newton_steps;
                if (budget <= 0)
                {
                    sol.status = ConicStatus::MaxIterations;
                    break;
                }
                const auto cr = detail::center(prob, barriers, t, x, settings, budget, never);
                sol.newton_steps += cr.steps;
                if (!cr.ok || cr.stalled)
                {
                    sol.status = ConicStatus::NumericalFailure;
                    break;
                }
                if (!x.allFinite() || x.norm() > 1e12)
                {
                    sol.status = ConicStatus::Unbounded;
                    break;
                }
                if (!cr.centered)
                    continue; // the gap bound needs a centered point
                const double obj = prob.c.dot(x);
                sol.gap = nu / t;
                if (sol.gap <= settings.tol * std::max(1.0, std::abs(obj)))
                {
                    // A few strict steps sharpen the multipliers recovered below.
                    sol.newton_steps += detail::center(prob, barriers, t, x, settings, 5, never, true).steps;
                    sol.status = ConicStatus::Optimal;
                    break;
                }
                t *= settings.barrier_growth;
            }

            sol.x = x;
            sol.objective = prob.c.dot(x);
            sol.primal_residual = all_interior(prob, x) ? 0.0 : std::numeric_limits<double>::infinity();
            RVec stationarity = prob.c;
            for (const auto &bb : barriers)
            {
                RVec gz;
                RVec gx = RVec::Zero(n);
                RMat hx = RMat::Zero(n, n);
                bb.accumulate(bb.block->value(x), gx, hx, &gz);
                sol.duals.push_back(-gz / t);
                stationarity -= bb.block->A.transpose() * sol.duals.back();
            }
            sol.dual_residual = stationarity.norm();
            return sol;
        }

    private:
        static bool all_interior(const ConicProblem &prob, const RVec &x)
        {
            for (const auto &blk : prob.blocks)
                if (!detail::cone_interior(blk.kind, blk.value(x)))
                    return false;
            return true;
        }

        static std::optional<RVec> run_phase_one(const ConicProblem &prob, const RVec &x0, double s0,
                                                 const ConicSettings &settings, int &steps)
        {
            const Eigen::Index n = prob.n();
            ConicProblem aux(n + 1);
            aux.c(n) = 1.0;
            for (const auto &blk : prob.blocks)
            {
                RMat A(blk.dim(), n + 1);
                A.leftCols(n) = blk.A;
                A.col(n) = detail::cone_unit(blk.kind, blk.dim());
                aux.add(blk.kind, std::move(A), blk.b, blk.tag);
            }
            const double s_start = s0 + std::max(1.0, std::abs(s0)) * 0.5 + 1e-3;
            // Keeps phase I bounded below.
            RMat floor_row = RMat::Zero(1, n + 1);
            floor_row(0, n) = 1.0;
            aux.add(ConeKind::NonNegative, floor_row, RVec::Constant(1, std::max(1.0, s_start)), "phase1-floor");
            // A wide ball around the start keeps the phase-I barrier bounded below on unbounded sets.
            const double radius = 1e4 * (1.0 + x0.cwiseAbs().maxCoeff());
            RMat ball = RMat::Zero(n + 1, n + 1);
            ball.bottomLeftCorner(n, n).setIdentity();
            RVec ball_b(n + 1);
            ball_b(0) = radius;
            ball_b.tail(n) = -x0;
            aux.add(ConeKind::SecondOrder, std::move(ball), std::move(ball_b), "phase1-ball");

            std::vector<detail::BlockBarrier> barriers;
            for (const auto &blk : aux.blocks)
                barriers.emplace_back(blk);

            RVec y(n + 1);
            y.head(n) = x0;
            y(n) = s_start;
            const double nu = aux.barrier_degree();
            double t = 1.0 / std::max(1.0, std::abs(s_start));
            auto feasible = [n](const RVec &v) { return v(n) < 0.0; };
            for (int outer = 0; outer < 60; ++outer)
            {
                const int budget = settings.max_newton - steps;
                if (budget <= 0)
                    return std::nullopt;
                const auto cr = detail::center(aux, barriers, t, y, settings, budget, feasible);
                steps += cr.steps;
                if (!cr.ok)
                    return std::nullopt;
                if (feasible(y))
                {
                    RVec x = y.head(n);
                    if (all_interior(prob, x))
                        return x;
                }
                if (cr.stalled)
                    return std::nullopt;
                if (!cr.centered)
                    continue;
                // Certified infeasible when even the lower bound on min s is positive.
                if (y(n) - nu / t > 0.0)
                    return std::nullopt;
                if (nu / t < 1e-13 * std::max(1.0, std::abs(s_start)))
                    return std::nullopt;
                t *= settings.barrier_growth;
            }
            return std::nullopt;
        }
    };

    inline ConicSolution solve_conic(const ConicProblem &problem, double tol = 1e-7)
    {
        ConicSettings settings;
        settings.tol = tol;
        return BarrierConicSolver{}.solve(problem, settings);
    }
} // namespace nfisac

#endif
