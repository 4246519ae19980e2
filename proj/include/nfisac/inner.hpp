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

// Fully digital subproblem for fixed (F, W): closed-form auxiliary updates, conservative
// CRB surrogates, the convex conic program built from them, and the iteration that
// alternates between the two.

#ifndef NFISAC_INNER_HPP
#define NFISAC_INNER_HPP

#include "conic.hpp"
#include "rates.hpp"

#include <array>
#include <chrono>

namespace nfisac
{
    // ---------------------------------------------------------------------------------------
    // Auxiliary variables
    // ---------------------------------------------------------------------------------------

    struct AuxiliarySet
    {
        std::vector<cplx> equalizer_c, equalizer_p; // omega_{k,c}, omega_{k,p}
        RVec weight_c, weight_p;                     // eta_{k,c}, eta_{k,p}
        CVec x_ec;                                   // length K+1
        std::vector<CVec> x_ek;                      // per user, length K+1
        std::vector<CVec> x_kc, x_kp;                // per user, length K+2 (last entry: noise)
        bool eve_present = true;
    };

    // MMSE equalizers and the rate-matching weights at P.
    inline void update_wmmse(AuxiliarySet &aux, const CMat &P, const ChannelSet &ch, const std::vector<double> &noise_user)
    {
        const int K = static_cast<int>(ch.user_channels.size());
        const PowerDecomposition pd = received_powers(P, ch, noise_user, 1.0);
        aux.equalizer_c.assign(K, 0.0);
        aux.equalizer_p.assign(K, 0.0);
        aux.weight_c.resize(K);
        aux.weight_p.resize(K);
        for (int k = 0; k < K; ++k)
        {
            const CVec &h = ch.user_channels[k];
            const double t_c = pd.s_kc(k) + pd.i_kc(k);
            const double t_p = pd.i_kc(k);
            aux.equalizer_c[k] = P.col(0).dot(h) / t_c; // p_0^H h_k / T_{k,c}
            aux.equalizer_p[k] = P.col(k + 1).dot(h) / t_p;
            aux.weight_c(k) = 1.0 / ((pd.i_kc(k) / t_c) * ln2);
            aux.weight_p(k) = 1.0 / ((pd.i_kp(k) / t_p) * ln2);
        }
    }

    // MSE of one stream at an arbitrary equalizer.
    inline double stream_mse(cplx omega, const CMat &P, const ChannelSet &ch, const std::vector<double> &noise_user, int k,
                             bool common)
    {
        const CVec &h = ch.user_channels[k];
        const RVec gains = (h.adjoint() * P).cwiseAbs2().transpose();
        const double total = (common ? gains.sum() : gains.tail(gains.size() - 1).sum()) + noise_user[k];
        const cplx desired = h.dot(P.col(common ? 0 : k + 1)); // h^H p
        return std::norm(omega) * total - 2.0 * (omega * desired).real() + 1.0;
    }

    // Augmented weighted MSE: eta * delta - log2(eta).
    inline double augmented_wmse(const AuxiliarySet &aux, const CMat &P, const ChannelSet &ch,
                                 const std::vector<double> &noise_user, int k, bool common)
    {
        const double eta = common ? aux.weight_c(k) : aux.weight_p(k);
        const cplx omega = common ? aux.equalizer_c[k] : aux.equalizer_p[k];
        return eta * stream_mse(omega, P, ch, noise_user, k, common) - std::log2(eta);
    }

    // T_j: P with column j (0 = common) replaced by the eavesdropper channel scaled so that
    // |g_e^H col|^2 = sigma_e^2.
    inline CMat eve_transform_matrix(const CMat &P, const ChannelSet &ch, double noise_eve, int column)
    {
        const double g2 = ch.eve_channel.squaredNorm();
        require(g2 > 0.0, "eve_transform_matrix: eavesdropper channel is zero");
        CMat T = P;
        T.col(column) = (std::sqrt(noise_eve) / g2) * ch.eve_channel;
        return T;
    }

    inline void update_quadratic_aux(AuxiliarySet &aux, const CMat &P, const ChannelSet &ch, double noise_eve)
    {
        const int K = static_cast<int>(ch.user_channels.size());
        aux.x_ek.assign(K, CVec::Zero(K + 1));
        aux.eve_present = ch.eve_channel.squaredNorm() > 0.0;
        if (!aux.eve_present)
        {
            aux.x_ec = CVec::Zero(K + 1);
            return;
        }
        const double t_ec = (ch.eve_channel.adjoint() * P).squaredNorm() + noise_eve;
        aux.x_ec = eve_transform_matrix(P, ch, noise_eve, 0).adjoint() * ch.eve_channel / t_ec;
        for (int k = 0; k < K; ++k)
            aux.x_ek[k] = eve_transform_matrix(P, ch, noise_eve, k + 1).adjoint() * ch.eve_channel / t_ec;
    }

    // log2(2 Re(x^H T_j^H g_e) - ||x||^2 T_{e,c}); equals -R_{e,c} (j = 0) or -R_{e,k} (j = k) at the optimal x.
    inline double quadratic_transform_value(const CVec &x, const CMat &P, const ChannelSet &ch, double noise_eve, int column)
    {
        const CMat T = eve_transform_matrix(P, ch, noise_eve, column);
        const double t_ec = (ch.eve_channel.adjoint() * P).squaredNorm() + noise_eve;
        const double arg = 2.0 * x.dot(T.adjoint() * ch.eve_channel).real() - x.squaredNorm() * t_ec;
        return std::log2(arg);
    }

    // Fractional auxiliaries for the legitimate rates: x = a / I with a_i = p_i^H h_k over the
    // streams entering T_{k,c} (or T_{k,p}) and a_{K+1} = sigma_k.
    inline void update_fractional_aux(AuxiliarySet &aux, const CMat &P, const ChannelSet &ch,
                                      const std::vector<double> &noise_user)
    {
        const int K = static_cast<int>(ch.user_channels.size());
        aux.x_kc.assign(K, CVec::Zero(K + 2));
        aux.x_kp.assign(K, CVec::Zero(K + 2));
        for (int k = 0; k < K; ++k)
        {
            const CVec a_all = P.adjoint() * ch.user_channels[k];
            const RVec pw = a_all.cwiseAbs2();
            for (int stream = 0; stream < 2; ++stream)
            {
                const int first = stream == 0 ? 0 : 1;
                CVec a = CVec::Zero(K + 2);
                a.segment(first, K + 1 - first) = a_all.segment(first, K + 1 - first);
                a(K + 1) = std::sqrt(noise_user[k]);
                const double interference =
                    (stream == 0 ? pw.tail(K).sum() : pw.tail(K).sum() - pw(k + 1)) + noise_user[k];
                (stream == 0 ? aux.x_kc : aux.x_kp)[k] = a / interference;
            }
        }
    }

    // (1/ln2) ln(2 Re(x^H a) - ||x||^2 I); a lower bound on R_{k,c} or R_{k,p}, tight at x = a / I.
    inline double fractional_rate_bound(const CVec &x, const CMat &P, const ChannelSet &ch,
                                        const std::vector<double> &noise_user, int k, bool common)
    {
        const int K = static_cast<int>(ch.user_channels.size());
        const CVec a_all = P.adjoint() * ch.user_channels[k];
        const RVec pw = a_all.cwiseAbs2();
        const int first = common ? 0 : 1;
        CVec a = CVec::Zero(K + 2);
        a.segment(first, K + 1 - first) = a_all.segment(first, K + 1 - first);
        a(K + 1) = std::sqrt(noise_user[k]);
        const double interference = (common ? pw.tail(K).sum() : pw.tail(K).sum() - pw(k + 1)) + noise_user[k];
        return std::log2(2.0 * x.dot(a).real() - x.squaredNorm() * interference);
    }

    inline AuxiliarySet compute_auxiliaries(const CMat &P, const ChannelSet &ch, const std::vector<double> &noise_user,
                                            double noise_eve)
    {
        AuxiliarySet aux;
        update_wmmse(aux, P, ch, noise_user);
        update_fractional_aux(aux, P, ch, noise_user);
        update_quadratic_aux(aux, P, ch, noise_eve);
        return aux;
    }

    // ---------------------------------------------------------------------------------------
    // CRB surrogates
    // ---------------------------------------------------------------------------------------

    // sigma_e^2 / (2 T |gain|^2 Gamma); zero when the threshold is disabled.
    inline double crb_gamma_tilde(double threshold, double noise_eve, int slots, cplx gain)
    {
        if (std::isinf(threshold))
            return 0.0;
        return noise_eve / (2.0 * slots * std::norm(gain) * threshold);
    }

    // Surrogates for one location parameter s. Each part x in {1, 2} stands for
    // g_x(P) = Re Tr(A_x P P^H) = q_+(P) - q_-(P), with A_1 = Gs^H G~ and A_2 = -j Gs^H G~.
    struct CrbSurrogate
    {
        CrbParameter which = CrbParameter::Angle;
        bool enabled = true;
        std::array<HermitianSplit, 2> split;
        CMat g_bar;   // G~^H G~
        CMat g_ddot;  // Gs^H Gs
        CMat a1;      // Gs^H G~
        double gamma_tilde = 0.0;

        static double quad(const CMat &M, const CMat &P) { return trace_form(M * P, P).real(); }
        static double tangent(const CMat &M, const CMat &P, const CMat &Pt)
        {
            const CMat MPt = M * Pt;
            return 2.0 * trace_form(P, MPt).real() - trace_form(MPt, Pt).real();
        }

        double exact(int x, const CMat &P) const
        {
            const cplx kappa = trace_form(a1 * P, P); // Tr(A_1 P P^H)
            return x == 0 ? kappa.real() : kappa.imag();
        }
        // q_+ minus the tangent of q_- at Pt; never below exact().
        double upper(int x, const CMat &P, const CMat &Pt) const
        {
            return quad(split[x].m_plus, P) - tangent(split[x].m_minus, P, Pt);
        }
        // Tangent of q_+ minus q_-; never above exact().
        double lower(int x, const CMat &P, const CMat &Pt) const
        {
            return tangent(split[x].m_plus, P, Pt) - quad(split[x].m_minus, P);
        }
        double lin_b(const CMat &P, const CMat &Pt) const { return tangent(g_bar, P, Pt); }
        double lin_c(const CMat &P, const CMat &Pt) const { return tangent(g_ddot, P, Pt); }
    };

    struct SurrogateModel
    {
        CMat expansion; // Pt
        std::array<CrbSurrogate, 2> parts;
    };

    inline SurrogateModel build_crb_surrogates(const CMat &Pt, const SensingModel &s, double gamma_tilde_theta,
                                               double gamma_tilde_range, bool theta_enabled = true, bool range_enabled = true)
    {
        SurrogateModel m;
        m.expansion = Pt;
        const CMat gbar = s.g_tilde.adjoint() * s.g_tilde;
        for (int idx = 0; idx < 2; ++idx)
        {
            CrbSurrogate &c = m.parts[idx];
            c.which = idx == 0 ? CrbParameter::Angle : CrbParameter::Range;
            c.enabled = idx == 0 ? theta_enabled : range_enabled;
            const CMat &gd = idx == 0 ? s.g_dtheta : s.g_drange;
            c.a1 = gd.adjoint() * s.g_tilde;
            c.split[0] = hermitian_split(c.a1);
            c.split[1] = hermitian_split(cplx(0.0, -1.0) * c.a1);
            c.g_bar = gbar;
            c.g_ddot = gd.adjoint() * gd;
            c.gamma_tilde = idx == 0 ? gamma_tilde_theta : gamma_tilde_range;
        }
        return m;
    }

    // ---------------------------------------------------------------------------------------
    // Conic assembly
    // ---------------------------------------------------------------------------------------

    // Minorant used for the legitimate rates inside the conic program.
    enum class RateBound
    {
        Wmmse,     // fixed-weight WMSE bound
        Fractional // log of the quadratic transform of the SINR, as for the eavesdropper
    };

    struct InnerSettings
    {
        bool common_stream = true;
        RateBound rate_bound = RateBound::Fractional;
        double penalty_weight = 0.0; // 1/rho on ||P - FW||^2 / P_th; 0 drops the penalty term
        CMat fw_target;              // F W, used when penalty_weight > 0
        double crb_relax = 1.0;      // thresholds are multiplied by this factor
        double eps = 1e-4;           // objective increment stopping threshold
        int max_iterations = 50;
        double solver_tol = 1e-7;
        bool extrapolate = true;     // try P_prev + s (P_new - P_prev), s = 2, 4, ... after each solve
        int max_extrapolation = 12;
    };

    // Normalized copy of an instance: P = sqrt(P_th) X, unit noise everywhere, sensing matrices
    // scaled to unit Frobenius norm. Rates and CRB constraints are invariant under this change.
    struct NormalizedInstance
    {
        int n_tx = 0, n_users = 0;
        double power_budget = 0.0;
        double amplitude = 0.0; // sqrt(P_th)
        ChannelSet channels;
        std::vector<double> unit_noise;
        SensingModel sensing;
        std::array<double, 2> gamma_tilde{0.0, 0.0};
        std::array<bool, 2> crb_enabled{false, false};

        NormalizedInstance(const Scenario &sc, const ChannelSet &ch, const SensingModel &s, double crb_relax)
        {
            n_users = sc.n_users();
            n_tx = static_cast<int>(ch.eve_channel.size());
            power_budget = sc.power_budget;
            amplitude = std::sqrt(sc.power_budget);
            for (int k = 0; k < n_users; ++k)
                channels.user_channels.push_back(ch.user_channels[k] * (amplitude / std::sqrt(sc.noise_user[k])));
            channels.eve_channel = ch.eve_channel * (amplitude / std::sqrt(sc.noise_eve));
            channels.eve_gain = ch.eve_gain;
            unit_noise.assign(n_users, 1.0);

            const double cg = 1.0 / s.g_tilde.norm();
            const double ct = 1.0 / s.g_dtheta.norm();
            const double cr = 1.0 / s.g_drange.norm();
            sensing.g_tilde = cg * s.g_tilde;
            sensing.g_dtheta = ct * s.g_dtheta;
            sensing.g_drange = cr * s.g_drange;
            sensing.gain = s.gain;
            const std::array<double, 2> limits{sc.crb_angle_max, sc.crb_range_max};
            const std::array<double, 2> scales{ct, cr};
            for (int i = 0; i < 2; ++i)
            {
                crb_enabled[i] = !std::isinf(limits[i]);
                if (crb_enabled[i])
                    gamma_tilde[i] = crb_gamma_tilde(limits[i] * crb_relax, sc.noise_eve, sc.slots, s.gain) * scales[i] *
                                     scales[i] / sc.power_budget;
            }
        }

        CMat to_normalized(const CMat &P) const { return P / amplitude; }
        CMat to_physical(const CMat &X) const { return X * amplitude; }
    };

    // Index map of the real decision vector.
    struct VariableLayout
    {
        int n_tx = 0, n_users = 0;
        bool common = true;
        bool penalty = false;
        bool fractional = false;
        std::array<bool, 2> crb{false, false};

        Eigen::Index rs = -1, rkc = -1, rkp = -1, yc = -1, zc = -1, yk = -1, zk = -1, e = -1;
        Eigen::Index ykc = -1, zkc = -1, ykp = -1, zkp = -1; // fractional rate bounds
        std::array<Eigen::Index, 2> mu{-1, -1}, alpha{-1, -1}, v{-1, -1}; // v[s] .. v[s]+1
        Eigen::Index total = 0;

        VariableLayout() = default;
        VariableLayout(int n, int k, bool has_common, bool has_penalty, std::array<bool, 2> crb_on,
                       bool fractional_rates = false)
            : n_tx(n), n_users(k), common(has_common), penalty(has_penalty), fractional(fractional_rates), crb(crb_on)
        {
            Eigen::Index next = 2 * static_cast<Eigen::Index>(n) * n_streams();
            auto take = [&next](Eigen::Index count) {
                const Eigen::Index at = next;
                next += count;
                return at;
            };
            rs = take(1);
            if (common)
                rkc = take(k);
            rkp = take(k);
            if (common)
            {
                yc = take(1);
                zc = take(1);
            }
            yk = take(k);
            zk = take(k);
            if (fractional)
            {
                if (common)
                {
                    ykc = take(k);
                    zkc = take(k);
                }
                ykp = take(k);
                zkp = take(k);
            }
            for (int s = 0; s < 2; ++s)
                if (crb[s])
                {
                    mu[s] = take(1);
                    alpha[s] = take(1);
                    v[s] = take(2);
                }
            if (penalty)
                e = take(1);
            total = next;
        }

        int first_stream() const { return common ? 0 : 1; }
        int n_streams() const { return n_users + (common ? 1 : 0); }
        bool has_stream(int i) const { return i >= first_stream() && i <= n_users; }
        Eigen::Index p_offset() const { return 0; }
        Eigen::Index p_count() const { return 2 * static_cast<Eigen::Index>(n_tx) * n_streams(); }
        Eigen::Index p_re(int n, int i) const { return 2 * static_cast<Eigen::Index>(n_tx) * (i - first_stream()) + n; }
        Eigen::Index p_im(int n, int i) const { return p_re(n, i) + n_tx; }

        RVec pack(const CMat &X) const
        {
            RVec x = RVec::Zero(p_count());
            for (int i = first_stream(); i <= n_users; ++i)
                for (int n = 0; n < n_tx; ++n)
                {
                    x(p_re(n, i)) = X(n, i).real();
                    x(p_im(n, i)) = X(n, i).imag();
                }
            return x;
        }
        CMat unpack(const RVec &x) const
        {
            CMat X = CMat::Zero(n_tx, n_users + 1);
            for (int i = first_stream(); i <= n_users; ++i)
                for (int n = 0; n < n_tx; ++n)
                    X(n, i) = cplx(x(p_re(n, i)), x(p_im(n, i)));
            return X;
        }
    };

    namespace detail
    {
        // expr += w Re(c^H p_i)
        inline void add_re_inner(AffineExpr &expr, const VariableLayout &lay, int i, const CVec &c, double w)
        {
            if (!lay.has_stream(i))
                return;
            for (int n = 0; n < lay.n_tx; ++n)
            {
                expr.coef(lay.p_re(n, i)) += w * c(n).real();
                expr.coef(lay.p_im(n, i)) += w * c(n).imag();
            }
        }
        // expr += w Im(c^H p_i)
        inline void add_im_inner(AffineExpr &expr, const VariableLayout &lay, int i, const CVec &c, double w)
        {
            if (!lay.has_stream(i))
                return;
            for (int n = 0; n < lay.n_tx; ++n)
            {
                expr.coef(lay.p_re(n, i)) -= w * c(n).imag();
                expr.coef(lay.p_im(n, i)) += w * c(n).real();
            }
        }
        // Rows (Re, Im)(sqrt(w) c^H p_i) for each present stream i in [from, to].
        inline void push_modulus_rows(std::vector<AffineExpr> &rows, const VariableLayout &lay, const CVec &c, double w,
                                      int from, int to)
        {
            const double r = std::sqrt(w);
            for (int i = std::max(from, lay.first_stream()); i <= to; ++i)
            {
                AffineExpr re(lay.total), im(lay.total);
                add_re_inner(re, lay, i, c, r);
                add_im_inner(im, lay, i, c, r);
                rows.push_back(std::move(re));
                rows.push_back(std::move(im));
            }
        }
        inline AffineExpr scalar(const VariableLayout &lay, Eigen::Index var, double w = 1.0, double c = 0.0)
        {
            AffineExpr e(lay.total, c);
            if (var >= 0)
                e.add(var, w);
            return e;
        }
        // 2 Re(tr(Pt^H M P)) - tr(Pt^H M Pt) as an affine expression.
        inline AffineExpr tangent_expr(const VariableLayout &lay, const CMat &M, const CMat &Xt)
        {
            AffineExpr e(lay.total);
            for (int i = lay.first_stream(); i <= lay.n_users; ++i)
            {
                const CVec mx = M * Xt.col(i);
                add_re_inner(e, lay, i, mx, 2.0);
                e.constant -= Xt.col(i).dot(mx).real();
            }
            return e;
        }
    } // namespace detail

    namespace detail
    {
        // CRB surrogate blocks. With scale_var >= 0 each threshold becomes Gamma / x(scale_var).
        inline void add_sensing_blocks(ConicProblem &prob, const VariableLayout &lay, const SurrogateModel &sur,
                                       const NormalizedInstance &inst, Eigen::Index scale_var = -1)
        {
            const CMat &Xt = sur.expansion;
            for (int s = 0; s < 2; ++s)
            {
                if (!lay.crb[s])
                    continue;
                const CrbSurrogate &part = sur.parts[s];
                const std::string name = s == 0 ? "theta" : "range";
                for (int x = 0; x < 2; ++x)
                {
                    // v >= q_a - tangent(q_b) for (a, b) = (+, -) and (-, +).
                    for (int sign = 0; sign < 2; ++sign)
                    {
                        const HermitianSplit &sp = part.split[x];
                        const CMat &quad_factor = sign == 0 ? sp.plus_factor : sp.minus_factor;
                        const CMat &lin_m = sign == 0 ? sp.m_minus : sp.m_plus;
                        AffineExpr rhs = detail::tangent_expr(lay, lin_m, Xt);
                        rhs.add(lay.v[s] + x, 1.0);
                        const std::string tag = "crb-" + name + "-g" + std::to_string(x + 1) + (sign == 0 ? "+" : "-");
                        if (quad_factor.cols() == 0)
                            prob.add(ConeKind::NonNegative, {rhs}, tag);
                        else
                        {
                            std::vector<AffineExpr> rows{AffineExpr(lay.total, 0.5), rhs};
                            for (Eigen::Index col = 0; col < quad_factor.cols(); ++col)
                                detail::push_modulus_rows(rows, lay, quad_factor.col(col), 1.0, 0, lay.n_users);
                            prob.add(ConeKind::RotatedSecondOrder, rows, tag);
                        }
                    }
                }
                prob.add(ConeKind::SecondOrder,
                         {scalar(lay, lay.mu[s]), scalar(lay, lay.v[s]), scalar(lay, lay.v[s] + 1)}, "crb-" + name + "-mu");
                AffineExpr lb = detail::tangent_expr(lay, part.g_bar, Xt);
                lb.add(lay.alpha[s], -1.0);
                prob.add(ConeKind::NonNegative, {lb}, "crb-" + name + "-alpha");
                AffineExpr lc = detail::tangent_expr(lay, part.g_ddot, Xt);
                if (scale_var >= 0)
                    lc.add(scale_var, -inst.gamma_tilde[s]);
                else
                    lc.constant -= inst.gamma_tilde[s];
                prob.add(ConeKind::RotatedSecondOrder, {scalar(lay, lay.alpha[s], 0.5), lc, scalar(lay, lay.mu[s])},
                         "crb-" + name + "-schur");
            }
        }
    } // namespace detail

    // Builds the convex program for fixed auxiliaries, expanded at sur.expansion (normalized units).
    inline ConicProblem assemble_inner_problem(const AuxiliarySet &aux, const SurrogateModel &sur, const NormalizedInstance &inst,
                                               const InnerSettings &settings, const VariableLayout &lay)
    {
        using detail::scalar;
        const int K = inst.n_users;
        const int N = inst.n_tx;
        ConicProblem prob(lay.total);
        prob.c(lay.rs) = -1.0;
        if (lay.penalty)
            prob.c(lay.e) = settings.penalty_weight;

        // Power ball ||X||_F <= 1.
        {
            RMat A = RMat::Zero(lay.p_count() + 1, lay.total);
            A.block(1, 0, lay.p_count(), lay.p_count()).setIdentity();
            RVec b = RVec::Zero(lay.p_count() + 1);
            b(0) = 1.0;
            prob.add(ConeKind::SecondOrder, std::move(A), std::move(b), "power");
        }
        // Penalty epigraph e >= ||X - X_FW||^2.
        if (lay.penalty)
        {
            const RVec target = lay.pack(inst.to_normalized(settings.fw_target));
            RMat A = RMat::Zero(lay.p_count() + 2, lay.total);
            RVec b = RVec::Zero(lay.p_count() + 2);
            A(0, lay.e) = 1.0;
            b(1) = 0.5;
            A.block(2, 0, lay.p_count(), lay.p_count()).setIdentity();
            b.tail(lay.p_count()) = -target;
            prob.add(ConeKind::RotatedSecondOrder, std::move(A), std::move(b), "penalty");
        }

        // Max-min epigraph and allocation sign.
        {
            std::vector<AffineExpr> rows;
            for (int k = 0; k < K; ++k)
            {
                AffineExpr r = scalar(lay, lay.rkp + k);
                if (lay.common)
                    r.add(lay.rkc + k, 1.0);
                r.add(lay.rs, -1.0);
                rows.push_back(std::move(r));
            }
            if (lay.common)
                for (int k = 0; k < K; ++k)
                    rows.push_back(scalar(lay, lay.rkc + k));
            prob.add(ConeKind::NonNegative, rows, "epigraph");
        }

        const CVec &g = inst.channels.eve_channel;
        const double g2 = g.squaredNorm();

        // Eavesdropper terms y <= ln(z), z <= 2 Re(x^H T^H g) - ||x||^2 T_ec(X).
        auto add_eve_block = [&](const CVec &xe, int column, Eigen::Index yv, Eigen::Index zv, const std::string &tag) {
            prob.add(ConeKind::Exponential, {scalar(lay, yv), AffineExpr(lay.total, 1.0), scalar(lay, zv)}, "exp-" + tag);
            AffineExpr lin(lay.total);
            for (int i = 0; i <= K; ++i)
            {
                if (i == column)
                    lin.constant += 2.0 * std::conj(xe(i)).real() * (g.squaredNorm() / g2); // scaled column: g^H col = 1
                else
                    detail::add_re_inner(lin, lay, i, std::conj(xe(i)) * g, 2.0);
            }
            const double xn2 = xe.squaredNorm();
            lin.constant -= xn2;
            lin.add(zv, -1.0);
            std::vector<AffineExpr> rows{AffineExpr(lay.total, 0.5), lin};
            detail::push_modulus_rows(rows, lay, g, xn2, 0, K);
            prob.add(ConeKind::RotatedSecondOrder, rows, "eve-" + tag);
        };
        if (lay.common)
            add_eve_block(aux.x_ec, 0, lay.yc, lay.zc, "c");
        for (int k = 0; k < K; ++k)
            add_eve_block(aux.x_ek[k], k + 1, lay.yk + k, lay.zk + k, "p" + std::to_string(k));

        // Legitimate rates through y <= ln(z), z <= 2 Re(x^H a(X)) - ||x||^2 I(X).
        if (lay.fractional)
        {
            for (int k = 0; k < K; ++k)
            {
                const CVec &h = inst.channels.user_channels[k];
                for (int stream = 0; stream < 2; ++stream)
                {
                    const bool common = stream == 0;
                    if (common && !lay.common)
                        continue;
                    const CVec &xr = common ? aux.x_kc[k] : aux.x_kp[k];
                    const Eigen::Index yv = (common ? lay.ykc : lay.ykp) + k;
                    const Eigen::Index zv = (common ? lay.zkc : lay.zkp) + k;
                    const std::string tag = (common ? "c" : "p") + std::to_string(k);
                    prob.add(ConeKind::Exponential, {scalar(lay, yv), AffineExpr(lay.total, 1.0), scalar(lay, zv)},
                             "exp-r" + tag);
                    const double xn2 = xr.squaredNorm();
                    AffineExpr lin(lay.total, 2.0 * xr(K + 1).real() - xn2);
                    for (int i = common ? 0 : 1; i <= K; ++i)
                        detail::add_re_inner(lin, lay, i, std::conj(xr(i)) * h, 2.0);
                    lin.add(zv, -1.0);
                    std::vector<AffineExpr> rows{AffineExpr(lay.total, 0.5), lin};
                    for (int i = 1; i <= K; ++i)
                        if (common || i != k + 1)
                            detail::push_modulus_rows(rows, lay, h, xn2, i, i);
                    prob.add(ConeKind::RotatedSecondOrder, rows, "frac-" + tag);

                    // Rate budget: allocation (or private rate) <= (y_rate + y_eve) / ln 2.
                    AffineExpr budget = scalar(lay, yv, 1.0 / ln2);
                    budget.add(common ? lay.yc : lay.yk + k, 1.0 / ln2);
                    if (common)
                        for (int j = 0; j < K; ++j)
                            budget.add(lay.rkc + j, -1.0);
                    else
                        budget.add(lay.rkp + k, -1.0);
                    prob.add(ConeKind::NonNegative, {budget}, (common ? "rate-c" : "rate-p") + std::to_string(k));
                }
            }
        }
        // Legitimate rates through the fixed-weight WMSE bound.
        for (int k = 0; k < K && !lay.fractional; ++k)
        {
            const CVec &h = inst.channels.user_channels[k];
            for (int stream = 0; stream < 2; ++stream)
            {
                const bool common = stream == 0;
                if (common && !lay.common)
                    continue;
                const double eta = common ? aux.weight_c(k) : aux.weight_p(k);
                const cplx omega = common ? aux.equalizer_c[k] : aux.equalizer_p[k];
                const double w2 = std::norm(omega);
                AffineExpr rhs(lay.total, wmmse_tau + std::log2(eta) - eta * (1.0 + w2));
                detail::add_re_inner(rhs, lay, common ? 0 : k + 1, std::conj(omega) * h, 2.0 * eta);
                if (common)
                {
                    rhs.add(lay.yc, 1.0 / ln2);
                    for (int j = 0; j < K; ++j)
                        rhs.add(lay.rkc + j, -1.0);
                }
                else
                {
                    rhs.add(lay.yk + k, 1.0 / ln2);
                    rhs.add(lay.rkp + k, -1.0);
                }
                std::vector<AffineExpr> rows{AffineExpr(lay.total, 0.5), rhs};
                detail::push_modulus_rows(rows, lay, h, eta * w2, common ? 0 : 1, K);
                prob.add(ConeKind::RotatedSecondOrder, rows, (common ? "rate-c" : "rate-p") + std::to_string(k));
            }
        }

        detail::add_sensing_blocks(prob, lay, sur, inst);
        (void)N;
        return prob;
    }

    namespace detail
    {
        // Sensing slacks (v, mu, alpha) inside their cones for the beam and scale already in x.
        inline void sensing_start(RVec &x, const ConicProblem &prob, const VariableLayout &lay)
        {
            auto block_value = [&](const std::string &tag) -> RVec {
                for (const auto &b : prob.blocks)
                    if (b.tag == tag)
                        return b.value(x);
                return RVec();
            };
            for (int s = 0; s < 2; ++s)
            {
                if (!lay.crb[s])
                    continue;
                const std::string name = s == 0 ? "theta" : "range";
                double vnorm2 = 0.0;
                for (int xi = 0; xi < 2; ++xi)
                {
                    double need = 0.0;
                    for (int sign = 0; sign < 2; ++sign)
                    {
                        const std::string tag = "crb-" + name + "-g" + std::to_string(xi + 1) + (sign == 0 ? "+" : "-");
                        const RVec z = block_value(tag); // with v = 0
                        const double deficit = z.size() == 1 ? -z(0) : z.tail(z.size() - 2).squaredNorm() - z(1);
                        need = std::max(need, deficit);
                    }
                    x(lay.v[s] + xi) = need + 1e-9 + 1e-6 * std::abs(need);
                    vnorm2 += x(lay.v[s] + xi) * x(lay.v[s] + xi);
                }
                x(lay.mu[s]) = std::sqrt(vnorm2) * (1.0 + 1e-6) + 1e-9;
                const RVec zb = block_value("crb-" + name + "-alpha"); // lin_b with alpha = 0
                const RVec zc = block_value("crb-" + name + "-schur"); // (0, lin_c - Gamma, mu)
                const double lin_b = zb(0), room_c = zc(1);
                double alpha = 0.5 * lin_b;
                if (room_c > 0.0 && lin_b > 0.0)
                {
                    const double lo = x(lay.mu[s]) * x(lay.mu[s]) / room_c;
                    if (lo < lin_b)
                        alpha = std::sqrt(lo * lin_b);
                }
                x(lay.alpha[s]) = alpha;
            }
        }

        // A point close to the interior of the assembled program, built from the current iterate.
        inline RVec inner_start_point(const ConicProblem &prob, const VariableLayout &lay, const CMat &Xt,
                                      const NormalizedInstance &inst, const InnerSettings &settings)
        {
            RVec x = RVec::Zero(lay.total);
            CMat X = Xt;
            const double nrm = X.norm();
            if (nrm > 1.0 - 1e-6)
                X *= (1.0 - 1e-6) / nrm;
            x.head(lay.p_count()) = lay.pack(X);
            if (lay.penalty)
                x(lay.e) = (X - inst.to_normalized(settings.fw_target)).squaredNorm() * 1.01 + 1e-6;

            auto block_value = [&](const std::string &tag) -> RVec {
                for (const auto &b : prob.blocks)
                    if (b.tag == tag)
                        return b.value(x);
                return RVec();
            };
            // Eavesdropper slacks: z halfway to its bound, y below ln z.
            auto set_eve = [&](Eigen::Index yv, Eigen::Index zv, const std::string &tag) {
                const RVec z = block_value(tag); // evaluated with z = 0
                const double room = 2.0 * z(0) * z(1) - z.tail(z.size() - 2).squaredNorm();
                const double zval = room > 0.0 ? room * (1.0 - 1e-4) : 1e-6;
                x(zv) = zval;
                x(yv) = std::log(zval) - 1e-6;
            };
            if (lay.common)
                set_eve(lay.yc, lay.zc, "eve-c");
            for (int k = 0; k < lay.n_users; ++k)
                set_eve(lay.yk + k, lay.zk + k, "eve-p" + std::to_string(k));

            if (lay.fractional)
                for (int k = 0; k < lay.n_users; ++k)
                {
                    if (lay.common)
                        set_eve(lay.ykc + k, lay.zkc + k, "frac-c" + std::to_string(k));
                    set_eve(lay.ykp + k, lay.zkp + k, "frac-p" + std::to_string(k));
                }
            auto rate_room = [&](const std::string &tag) {
                const RVec z = block_value(tag);
                if (z.size() == 1)
                    return z(0);
                return (2.0 * z(0) * z(1) - z.tail(z.size() - 2).squaredNorm()) / (2.0 * z(0));
            };
            const int K = lay.n_users;
            if (lay.common)
            {
                double budget = std::numeric_limits<double>::infinity();
                for (int k = 0; k < K; ++k)
                    budget = std::min(budget, rate_room("rate-c" + std::to_string(k)));
                const double each = budget > 0.0 ? 0.5 * budget / K : 1e-6;
                for (int k = 0; k < K; ++k)
                    x(lay.rkc + k) = each;
            }
            double rs = std::numeric_limits<double>::infinity();
            for (int k = 0; k < K; ++k)
            {
                const double room = rate_room("rate-p" + std::to_string(k));
                x(lay.rkp + k) = room - 1e-3 * std::max(1.0, std::abs(room));
                rs = std::min(rs, x(lay.rkp + k) + (lay.common ? x(lay.rkc + k) : 0.0));
            }
            x(lay.rs) = rs - 1e-3 * std::max(1.0, std::abs(rs));

            sensing_start(x, prob, lay);
            return x;
        }
    } // namespace detail

    // ---------------------------------------------------------------------------------------
    // Iteration
    // ---------------------------------------------------------------------------------------

    enum class InnerStatus
    {
        Converged,
        IterationCap,
        Infeasible,
        SolverFailure
    };

    inline const char *to_string(InnerStatus s)
    {
        switch (s)
        {
        case InnerStatus::Converged: return "converged";
        case InnerStatus::IterationCap: return "iteration_cap";
        case InnerStatus::Infeasible: return "infeasible";
        case InnerStatus::SolverFailure: return "solver_failure";
        }
        return "?";
    }

    struct InnerResult
    {
        CMat P;
        RVec common_alloc;
        double secrecy_bound = 0.0; // R^s reported by the last conic solve
        std::vector<double> trace;  // true objective, entry 0 at the input point
        int iterations = 0;
        int newton_steps = 0;
        InnerStatus status = InnerStatus::Converged;
    };

    // Penalized max-min secrecy of P evaluated exactly: optimal allocation of the common secrecy,
    // minus the penalty term. Minus infinity when P is outside the reformulated feasible set.
    inline double inner_objective(const CMat &P, const Scenario &sc, const ChannelSet &ch, const InnerSettings &settings)
    {
        const RateReport r = evaluate_rates(P, ch, sc, RVec::Zero(sc.n_users()));
        double obj = reformulated_secrecy(r);
        if (settings.penalty_weight > 0.0)
            obj -= settings.penalty_weight * (P - settings.fw_target).squaredNorm() / sc.power_budget;
        return obj;
    }

    namespace detail
    {
        // Exact CRB constraints with the thresholds scaled by `relax`, with a tiny interior margin.
        inline bool sensing_admissible(const CMat &P, const Scenario &sc, const SensingModel &s, double relax)
        {
            const std::array<double, 2> limits{sc.crb_angle_max, sc.crb_range_max};
            for (int i = 0; i < 2; ++i)
            {
                if (std::isinf(limits[i]))
                    continue;
                const double crb = crb_or_infinity(P, s, sc.noise_eve, sc.slots, i == 0 ? CrbParameter::Angle : CrbParameter::Range);
                if (!(crb <= limits[i] * relax * (1.0 - 1e-9)))
                    return false;
            }
            return true;
        }
    } // namespace detail

    // The convex program of the first iteration started at P, with its start point set.
    inline ConicProblem inner_problem_at(const CMat &P, const Scenario &sc, const ChannelSet &ch, const SensingModel &sensing,
                                         const InnerSettings &settings)
    {
        const NormalizedInstance inst(sc, ch, sensing, settings.crb_relax);
        const VariableLayout lay(inst.n_tx, sc.n_users(), settings.common_stream, settings.penalty_weight > 0.0,
                                 inst.crb_enabled, settings.rate_bound == RateBound::Fractional);
        CMat Xt = inst.to_normalized(P);
        if (!settings.common_stream)
            Xt.col(0).setZero();
        const AuxiliarySet aux = compute_auxiliaries(Xt, inst.channels, inst.unit_noise, 1.0);
        const SurrogateModel sur = build_crb_surrogates(Xt, inst.sensing, inst.gamma_tilde[0], inst.gamma_tilde[1],
                                                        inst.crb_enabled[0], inst.crb_enabled[1]);
        ConicProblem prob = assemble_inner_problem(aux, sur, inst, settings, lay);
        prob.start = detail::inner_start_point(prob, lay, Xt, inst, settings);
        return prob;
    }

    inline InnerResult inner_ascent(const CMat &P_init, const Scenario &sc, const ChannelSet &ch, const SensingModel &sensing,
                                  const InnerSettings &settings, const ConicSolver &solver = BarrierConicSolver{})
    {
        const int K = sc.n_users();
        InnerResult res;
        res.P = P_init;
        res.common_alloc = RVec::Zero(K);
        if (!(sc.power_budget > 0.0))
        {
            res.P = CMat::Zero(P_init.rows(), K + 1);
            res.trace.push_back(0.0);
            return res;
        }
        const NormalizedInstance inst(sc, ch, sensing, settings.crb_relax);
        const VariableLayout lay(inst.n_tx, K, settings.common_stream, settings.penalty_weight > 0.0, inst.crb_enabled,
                                 settings.rate_bound == RateBound::Fractional);
        ConicSettings cs;
        cs.tol = settings.solver_tol;

        if (!settings.common_stream)
            res.P.col(0).setZero();
        double current = inner_objective(res.P, sc, ch, settings);
        res.trace.push_back(current);
        res.status = InnerStatus::IterationCap;
        for (int it = 0; it < settings.max_iterations; ++it)
        {
            const CMat Xt = inst.to_normalized(res.P);
            const AuxiliarySet aux = compute_auxiliaries(Xt, inst.channels, inst.unit_noise, 1.0);
            const SurrogateModel sur = build_crb_surrogates(Xt, inst.sensing, inst.gamma_tilde[0], inst.gamma_tilde[1],
                                                            inst.crb_enabled[0], inst.crb_enabled[1]);
            ConicProblem prob = assemble_inner_problem(aux, sur, inst, settings, lay);
            prob.start = detail::inner_start_point(prob, lay, Xt, inst, settings);
            const ConicSolution sol = solver.solve(prob, cs);
            res.newton_steps += sol.newton_steps;
            ++res.iterations;
            const bool usable = sol.status == ConicStatus::Optimal ||
                                (sol.status == ConicStatus::MaxIterations && sol.primal_residual == 0.0);
            if (!usable)
            {
                if (it == 0)
                    res.status = sol.status == ConicStatus::Infeasible ? InnerStatus::Infeasible : InnerStatus::SolverFailure;
                else
                    res.status = InnerStatus::Converged;
                break;
            }
            const CMat P_new = inst.to_physical(lay.unpack(sol.x.head(lay.p_count())));
            double value = inner_objective(P_new, sc, ch, settings);
            // Keep the iterate only when the exact objective does not fall; the surrogate
            // bound guarantees this up to solver accuracy.
            if (!(value >= current - 1e-9 * std::max(1.0, std::abs(current))))
            {
                res.status = InnerStatus::Converged;
                break;
            }
            const CMat P_prev = res.P;
            res.P = P_new;
            double best = value;
            if (settings.extrapolate)
            {
                const CMat D = P_new - P_prev;
                double s = 1.0;
                for (int e = 0; e < settings.max_extrapolation; ++e)
                {
                    s *= 2.0;
                    CMat P_try = P_prev + s * D;
                    const double pw = P_try.squaredNorm();
                    if (pw > sc.power_budget)
                        P_try *= std::sqrt(sc.power_budget / pw);
                    if (!detail::sensing_admissible(P_try, sc, sensing, settings.crb_relax))
                        break;
                    const double v = inner_objective(P_try, sc, ch, settings);
                    if (!(v > best))
                        break;
                    best = v;
                    res.P = P_try;
                }
            }
            const double gain = best - current;
            value = best;
            res.secrecy_bound = -sol.objective;
            if (lay.common)
                res.common_alloc = sol.x.segment(lay.rkc, K).cwiseMax(0.0);
            res.trace.push_back(value);
            current = value;
            if (gain < settings.eps)
            {
                res.status = InnerStatus::Converged;
                break;
            }
        }
        return res;
    }

    // ---------------------------------------------------------------------------------------
    // Sensing feasibility restoration
    // ---------------------------------------------------------------------------------------

    // Largest s with every enabled CRB at most limit * relax / s; +inf when no limit is set.
    inline double sensing_margin(const CMat &P, const Scenario &sc, const SensingModel &s, double relax = 1.0)
    {
        const std::array<double, 2> limits{sc.crb_angle_max, sc.crb_range_max};
        double m = std::numeric_limits<double>::infinity();
        for (int i = 0; i < 2; ++i)
        {
            if (std::isinf(limits[i]))
                continue;
            const double crb = crb_or_infinity(P, s, sc.noise_eve, sc.slots, i == 0 ? CrbParameter::Angle : CrbParameter::Range);
            m = std::min(m, std::isinf(crb) ? 0.0 : limits[i] * relax / crb);
        }
        return m;
    }

    struct RestorationSettings
    {
        bool common_stream = true;
        double crb_relax = 1.0;
        double target = 1.05;        // margin sought, capped inside each program
        double proximity = 1e-2;     // weight of ||X - X~||^2 against the margin
        int max_iterations = 30;
        double solver_tol = 1e-7;
    };

    struct RestorationResult
    {
        CMat P;
        double margin = 0.0;
        int iterations = 0;
        bool feasible = false;
    };

    // Phase-one sequence for the sensing constraints: each convex restriction maximizes a
    // common threshold scale s <= target near the current beam. The exact margin never falls.
    inline RestorationResult restore_sensing(const CMat &P_init, const Scenario &sc, const ChannelSet &ch,
                                             const SensingModel &sensing, const RestorationSettings &settings,
                                             const ConicSolver &solver = BarrierConicSolver{})
    {
        const int K = sc.n_users();
        RestorationResult res;
        res.P = P_init;
        if (!settings.common_stream)
            res.P.col(0).setZero();
        res.margin = sensing_margin(res.P, sc, sensing, settings.crb_relax);
        res.feasible = res.margin >= 1.0;
        if (res.feasible || !(sc.power_budget > 0.0))
            return res;

        const NormalizedInstance inst(sc, ch, sensing, settings.crb_relax);
        VariableLayout lay;
        lay.n_tx = inst.n_tx;
        lay.n_users = K;
        lay.common = settings.common_stream;
        lay.penalty = true;
        lay.crb = inst.crb_enabled;
        Eigen::Index next = lay.p_count();
        lay.rs = next++;
        for (int s = 0; s < 2; ++s)
            if (lay.crb[s])
            {
                lay.mu[s] = next++;
                lay.alpha[s] = next++;
                lay.v[s] = next;
                next += 2;
            }
        lay.e = next++;
        lay.total = next;

        ConicSettings cs;
        cs.tol = settings.solver_tol;
        for (int it = 0; it < settings.max_iterations && !res.feasible; ++it)
        {
            const CMat Xt = inst.to_normalized(res.P);
            const SurrogateModel sur = build_crb_surrogates(Xt, inst.sensing, inst.gamma_tilde[0], inst.gamma_tilde[1],
                                                            inst.crb_enabled[0], inst.crb_enabled[1]);
            ConicProblem prob(lay.total);
            prob.c(lay.rs) = -1.0;
            prob.c(lay.e) = settings.proximity;
            {
                RMat A = RMat::Zero(lay.p_count() + 1, lay.total);
                A.block(1, 0, lay.p_count(), lay.p_count()).setIdentity();
                RVec b = RVec::Zero(lay.p_count() + 1);
                b(0) = 1.0;
                prob.add(ConeKind::SecondOrder, std::move(A), std::move(b), "power");
            }
            const RVec anchor = lay.pack(Xt);
            {
                RMat A = RMat::Zero(lay.p_count() + 2, lay.total);
                RVec b = RVec::Zero(lay.p_count() + 2);
                A(0, lay.e) = 1.0;
                b(1) = 0.5;
                A.block(2, 0, lay.p_count(), lay.p_count()).setIdentity();
                b.tail(lay.p_count()) = -anchor;
                prob.add(ConeKind::RotatedSecondOrder, std::move(A), std::move(b), "proximity");
            }
            prob.add(ConeKind::NonNegative, {detail::scalar(lay, lay.rs, -1.0, settings.target)}, "scale-cap");
            detail::add_sensing_blocks(prob, lay, sur, inst, lay.rs);

            RVec x0 = RVec::Zero(lay.total);
            const double nrm = Xt.norm();
            x0.head(lay.p_count()) = nrm > 1.0 - 1e-6 ? RVec(anchor * ((1.0 - 1e-6) / nrm)) : anchor;
            x0(lay.rs) = res.margin > 0.0 ? 0.5 * std::min(res.margin, settings.target) : -1.0;
            x0(lay.e) = (x0.head(lay.p_count()) - anchor).squaredNorm() * 1.01 + 1e-6;
            detail::sensing_start(x0, prob, lay);
            prob.start = x0;

            const ConicSolution sol = solver.solve(prob, cs);
            ++res.iterations;
            if (!(sol.status == ConicStatus::Optimal ||
                  (sol.status == ConicStatus::MaxIterations && sol.primal_residual == 0.0)))
                break;
            const CMat P_new = inst.to_physical(lay.unpack(sol.x.head(lay.p_count())));
            const double m = sensing_margin(P_new, sc, sensing, settings.crb_relax);
            if (!(m > res.margin * (1.0 + 1e-6)))
                break;
            res.P = P_new;
            res.margin = m;
            res.feasible = m >= 1.0;
        }
        return res;
    }
} // namespace nfisac

#endif
