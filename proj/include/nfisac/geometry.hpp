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

#ifndef NFISAC_GEOMETRY_HPP
#define NFISAC_GEOMETRY_HPP

#include "core.hpp"

#include <optional>
#include <vector>

namespace nfisac
{
    // Uniform linear arrays along the y-axis. Transmit element n (1..N) sits at (0, n d),
    // receive element m (1..M) at (0, -m d).
    struct SystemGeometry
    {
        int n_tx = 16;                 // N
        int n_rx = 8;                  // M
        int n_rf = 4;                  // L
        double carrier_hz = 30e9;      // f
        double spacing = 0.0;          // d [m], 0 selects half a wavelength
        double wavelength() const { return speed_of_light / carrier_hz; }
        double element_spacing() const { return spacing > 0.0 ? spacing : 0.5 * wavelength(); }
        double wavenumber() const { return 2.0 * pi / wavelength(); }
        double aperture() const { return n_tx * element_spacing(); }                            // D = N d
        double rayleigh_distance() const { return 2.0 * aperture() * aperture() / wavelength(); } // 2 D^2 / lambda

        void validate() const
        {
            if (n_tx < 1 || n_rx < 1 || n_rf < 1)
                throw DomainError("SystemGeometry: antenna and RF chain counts must be >= 1");
            if (n_rf > n_tx)
                throw DomainError("SystemGeometry: n_rf must not exceed n_tx");
            if (!(carrier_hz > 0.0) || spacing < 0.0)
                throw DomainError("SystemGeometry: carrier and spacing must be positive");
        }
    };

    struct PolarPoint
    {
        double range_m = 10.0;
        double angle_rad = 0.0;
    };

    struct Scenario
    {
        std::vector<PolarPoint> users;
        PolarPoint target;
        std::vector<double> noise_user;      // sigma_k^2 [W]
        double noise_eve = 0.0;              // sigma_e^2 [W], shared by sensing and eavesdropping
        double power_budget = 0.0;           // P_th [W]
        double crb_angle_max = 0.0;          // Gamma_theta [rad^2]; +inf disables
        double crb_range_max = 0.0;          // Gamma_r [m^2]; +inf disables
        int slots = 64;                      // T
        std::optional<cplx> sensing_gain;    // round-trip gain override

        int n_users() const { return static_cast<int>(users.size()); }

        void validate() const
        {
            if (users.empty())
                throw DomainError("Scenario: need at least one user");
            if (noise_user.size() != users.size())
                throw DomainError("Scenario: one noise power per user required");
            for (double s : noise_user)
                if (!(s > 0.0))
                    throw DomainError("Scenario: noise powers must be positive");
            if (!(noise_eve > 0.0) || !(power_budget > 0.0))
                throw DomainError("Scenario: noise_eve and power_budget must be positive");
            if (!(crb_angle_max > 0.0) || !(crb_range_max > 0.0))
                throw DomainError("Scenario: CRB thresholds must be positive");
            if (slots < 1)
                throw DomainError("Scenario: slots must be >= 1");
            for (const auto &u : users)
                if (!(u.range_m > 0.0))
                    throw DomainError("Scenario: user range must be positive");
            if (!(target.range_m > 0.0))
                throw DomainError("Scenario: target range must be positive");
        }
    };

    struct ChannelSet
    {
        std::vector<CVec> user_channels; // h_k
        CVec eve_channel;                // g_e
        cplx eve_gain;                   // beta_e
    };

    struct SensingModel
    {
        CMat g_tilde;  // b a^T
        CMat g_dtheta; // d(b a^T)/d theta
        CMat g_drange; // d(b a^T)/d r
        cplx gain;     // round-trip gain
    };

    namespace detail
    {
        inline void check_range(double r)
        {
            if (!(r > 0.0))
                throw DomainError("range must be positive");
        }

        // Phase exponent of element `pos_index` for an element at y = sign * index * d.
        // Returns the phase phi such that the element equals exp(-j phi), plus its
        // partial derivatives in theta and r.
        struct PhaseTerm
        {
            double phase;
            double dtheta;
            double drange;
        };

        inline PhaseTerm element_phase(double k, double y, double r, double theta)
        {
            const double s = std::sin(theta), c = std::cos(theta);
            PhaseTerm t;
            t.phase = k * (-y * s + y * y * c * c / (2.0 * r));
            t.dtheta = k * (-y * c - y * y * c * s / r);
            t.drange = -k * y * y * c * c / (2.0 * r * r);
            return t;
        }

        struct ResponseWithDerivatives
        {
            CVec value, dtheta, drange;
        };

        inline ResponseWithDerivatives response(const SystemGeometry &geom, int count, double sign, const PolarPoint &p)
        {
            check_range(p.range_m);
            const double k = geom.wavenumber();
            const double d = geom.element_spacing();
            ResponseWithDerivatives out{CVec(count), CVec(count), CVec(count)};
            for (int i = 0; i < count; ++i)
            {
                const double y = sign * (i + 1) * d;
                const PhaseTerm t = element_phase(k, y, p.range_m, p.angle_rad);
                const cplx v = std::polar(1.0, -t.phase);
                out.value(i) = v;
                out.dtheta(i) = -j_unit * t.dtheta * v;
                out.drange(i) = -j_unit * t.drange * v;
            }
            return out;
        }
    } // namespace detail

    // Near-field transmit steering vector with the second-order (Fresnel) phase expansion.
    inline CVec tx_array_response(const SystemGeometry &geom, const PolarPoint &p)
    {
        return detail::response(geom, geom.n_tx, +1.0, p).value;
    }

    // Receive steering vector; elements sit on the negative y-axis so the linear phase term flips sign.
    inline CVec rx_array_response(const SystemGeometry &geom, const PolarPoint &p)
    {
        return detail::response(geom, geom.n_rx, -1.0, p).value;
    }

    inline cplx complex_gain(const SystemGeometry &geom, double r)
    {
        detail::check_range(r);
        const double amp = speed_of_light / (4.0 * pi * geom.carrier_hz * r);
        return std::polar(amp, -2.0 * pi * r / geom.wavelength());
    }

    // Two-way path loss and phase; used when the scenario does not override the round-trip gain.
    inline cplx default_round_trip_gain(const SystemGeometry &geom, double r)
    {
        detail::check_range(r);
        const double amp = speed_of_light / (4.0 * pi * geom.carrier_hz * r);
        return std::polar(amp * amp, -4.0 * pi * r / geom.wavelength());
    }

    // Plane-wave response used by the far-field benchmark.
    inline CVec far_field_response(const SystemGeometry &geom, double theta)
    {
        CVec a(geom.n_tx);
        const double k = geom.wavenumber(), d = geom.element_spacing();
        for (int n = 0; n < geom.n_tx; ++n)
            a(n) = std::polar(1.0, k * (n + 1) * d * std::sin(theta));
        return a;
    }

    inline ChannelSet build_channels(const SystemGeometry &geom, const Scenario &sc)
    {
        ChannelSet ch;
        ch.user_channels.reserve(sc.users.size());
        for (const auto &u : sc.users)
            ch.user_channels.push_back(complex_gain(geom, u.range_m) * tx_array_response(geom, u));
        ch.eve_gain = complex_gain(geom, sc.target.range_m);
        ch.eve_channel = ch.eve_gain * tx_array_response(geom, sc.target);
        return ch;
    }

    // Same path gains, plane-wave responses: what a far-field designer believes the channels are.
    inline ChannelSet build_far_field_channels(const SystemGeometry &geom, const Scenario &sc)
    {
        ChannelSet ch;
        for (const auto &u : sc.users)
            ch.user_channels.push_back(complex_gain(geom, u.range_m) * far_field_response(geom, u.angle_rad));
        ch.eve_gain = complex_gain(geom, sc.target.range_m);
        ch.eve_channel = ch.eve_gain * far_field_response(geom, sc.target.angle_rad);
        return ch;
    }

    inline SensingModel build_sensing_model(const SystemGeometry &geom, const Scenario &sc)
    {
        const auto a = detail::response(geom, geom.n_tx, +1.0, sc.target);
        const auto b = detail::response(geom, geom.n_rx, -1.0, sc.target);
        SensingModel s;
        s.g_tilde = b.value * a.value.transpose();
        s.g_dtheta = b.dtheta * a.value.transpose() + b.value * a.dtheta.transpose();
        s.g_drange = b.drange * a.value.transpose() + b.value * a.drange.transpose();
        s.gain = sc.sensing_gain.value_or(default_round_trip_gain(geom, sc.target.range_m));
        return s;
    }
} // namespace nfisac

#endif
