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

// Experiment configuration, scenario sampling, sweeps and CSV output.

#ifndef NFISAC_HARNESS_HPP
#define NFISAC_HARNESS_HPP

#include "schemes.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

namespace nfisac
{
    // ---------------------------------------------------------------------------------------
    // Counter-based random numbers
    // ---------------------------------------------------------------------------------------

    inline std::uint64_t splitmix64(std::uint64_t x)
    {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    // Stateless stream: value i of (seed, stream) depends on nothing else.
    struct CounterRng
    {
        std::uint64_t seed = 0;
        std::uint64_t stream = 0;

        std::uint64_t bits(std::uint64_t counter) const
        {
            return splitmix64(splitmix64(splitmix64(seed) ^ stream) + counter);
        }
        // Uniform on [0, 1) with 53 random bits.
        double uniform(std::uint64_t counter) const
        {
            return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
        }
        double uniform(std::uint64_t counter, double lo, double hi) const { return lo + (hi - lo) * uniform(counter); }
    };

    inline constexpr std::uint64_t target_stream = 0x7A72'6765'7400ULL; // users take streams 0..K-1

    // ---------------------------------------------------------------------------------------
    // Configuration
    // ---------------------------------------------------------------------------------------

    enum class SweepAxis
    {
        Power,      // P_th [dBm]
        Users,      // K
        TxAntennas, // N
        CrbRange,   // root-CRB bound on range [m]
        CrbAngle    // root-CRB bound on angle [rad]
    };

    inline const char *to_string(SweepAxis a)
    {
        switch (a)
        {
        case SweepAxis::Power: return "power";
        case SweepAxis::Users: return "users";
        case SweepAxis::TxAntennas: return "tx_antennas";
        case SweepAxis::CrbRange: return "crb_range";
        case SweepAxis::CrbAngle: return "crb_angle";
        }
        return "?";
    }

    inline SweepAxis parse_axis(const std::string &name)
    {
        for (SweepAxis a : {SweepAxis::Power, SweepAxis::Users, SweepAxis::TxAntennas, SweepAxis::CrbRange, SweepAxis::CrbAngle})
            if (name == to_string(a))
                return a;
        throw DomainError("unknown sweep axis '" + name + "'");
    }

    struct ExperimentConfig
    {
        SystemGeometry geometry;

        int users = 4;
        double range_min = 10.0, range_max = 20.0; // [m]
        double angle_min = 0.0, angle_max = 0.5 * pi;
        int slots = 1000;
        double power_w = dbm_to_watts(20.0);
        double noise_w = dbm_to_watts(-84.0);
        // Sensing thresholds; NaN selects crb_factor times the CRBs of the initial hybrid beam.
        double crb_angle = std::numeric_limits<double>::quiet_NaN(); // [rad^2]
        double crb_range = std::numeric_limits<double>::quiet_NaN(); // [m^2]
        double crb_factor = 10.0;

        SweepAxis axis = SweepAxis::Power;
        std::vector<double> grid; // empty: the base value only

        std::vector<SchemeId> schemes{SchemeId::RsmaHb};
        std::vector<std::uint64_t> seeds;
        PenaltySchedule schedule;
        std::string output;
        unsigned threads = 0; // 0: hardware concurrency

        std::vector<double> axis_values() const
        {
            if (!grid.empty())
                return grid;
            switch (axis)
            {
            case SweepAxis::Power: return {watts_to_dbm(power_w)};
            case SweepAxis::Users: return {static_cast<double>(users)};
            case SweepAxis::TxAntennas: return {static_cast<double>(geometry.n_tx)};
            case SweepAxis::CrbRange: return {std::sqrt(crb_range)};
            case SweepAxis::CrbAngle: return {std::sqrt(crb_angle)};
            }
            return {};
        }

        void validate() const
        {
            geometry.validate();
            if (users < 1)
                throw DomainError("config: users must be >= 1");
            if (!(range_min > 0.0 && range_max >= range_min) || !(angle_max >= angle_min))
                throw DomainError("config: bad position ranges");
            if (slots < 1 || !(power_w > 0.0) || !(noise_w > 0.0))
                throw DomainError("config: slots, power and noise must be positive");
            if (!(crb_factor > 0.0))
                throw DomainError("config: crb_factor must be positive");
            if (schemes.empty())
                throw DomainError("config: no schemes");
            if (seeds.empty())
                throw DomainError("config: no seeds");
            std::vector<std::uint64_t> sorted = seeds;
            std::sort(sorted.begin(), sorted.end());
            if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
                throw DomainError("config: seeds must be distinct");
            const std::vector<double> values = axis_values();
            if (values.empty())
                throw DomainError("config: empty sweep grid");
            for (double v : values)
                if (!std::isfinite(v) || ((axis == SweepAxis::Users || axis == SweepAxis::TxAntennas) && (v < 1 || v != std::floor(v))))
                    throw DomainError("config: invalid sweep value");
            schedule.validate();
        }
    };

    namespace detail
    {
        inline std::vector<std::string> split_list(const std::string &s)
        {
            std::vector<std::string> parts;
            boost::split(parts, s, boost::is_any_of(", \t"), boost::token_compress_on);
            std::erase_if(parts, [](const std::string &p) { return p.empty(); });
            return parts;
        }

        inline double parse_double(const std::string &s, const std::string &key)
        {
            try
            {
                std::size_t used = 0;
                const double v = std::stod(s, &used);
                if (used == s.size())
                    return v;
            }
            catch (const std::exception &)
            {
            }
            throw DomainError("config: '" + key + "' is not a number: '" + s + "'");
        }

        // "0-19", "3", "1, 4, 9" and combinations.
        inline std::vector<std::uint64_t> parse_seeds(const std::string &s)
        {
            std::vector<std::uint64_t> out;
            for (const std::string &tok : split_list(s))
            {
                const auto dash = tok.find('-');
                if (dash == std::string::npos)
                    out.push_back(std::stoull(tok));
                else
                {
                    const std::uint64_t a = std::stoull(tok.substr(0, dash)), b = std::stoull(tok.substr(dash + 1));
                    if (b < a)
                        throw DomainError("config: descending seed range '" + tok + "'");
                    for (std::uint64_t i = a; i <= b; ++i)
                        out.push_back(i);
                }
            }
            return out;
        }
    } // namespace detail

    // INI text with sections [geometry], [scenario], [sweep], [run], [schedule]; all keys optional.
    inline ExperimentConfig parse_config(std::istream &in)
    {
        namespace pt = boost::property_tree;
        pt::ptree tree;
        try
        {
            pt::read_ini(in, tree);
        }
        catch (const pt::ini_parser_error &e)
        {
            throw DomainError(std::string("config: ") + e.what());
        }
        ExperimentConfig c;
        c.seeds = {0};
        auto text = [&](const std::string &key) -> std::optional<std::string> {
            if (auto v = tree.get_optional<std::string>(key))
            {
                std::string s = *v;
                if (const auto hash = s.find_first_of(";#"); hash != std::string::npos)
                    s.erase(hash);
                boost::trim(s);
                return s;
            }
            return std::nullopt;
        };
        auto number = [&](const std::string &key, double &dst) {
            if (auto s = text(key))
                dst = detail::parse_double(*s, key);
        };
        auto integer = [&](const std::string &key, int &dst) {
            double v = dst;
            number(key, v);
            if (v != std::floor(v))
                throw DomainError("config: '" + key + "' must be an integer");
            dst = static_cast<int>(v);
        };
        auto dbm = [&](const std::string &key, double &dst_w) {
            if (auto s = text(key))
                dst_w = dbm_to_watts(detail::parse_double(*s, key));
        };
        auto threshold = [&](const std::string &key, double &dst) {
            if (auto s = text(key))
                dst = *s == "auto" ? std::numeric_limits<double>::quiet_NaN()
                      : *s == "inf" ? std::numeric_limits<double>::infinity()
                                    : detail::parse_double(*s, key);
        };

        integer("geometry.n_tx", c.geometry.n_tx);
        integer("geometry.n_rx", c.geometry.n_rx);
        integer("geometry.n_rf", c.geometry.n_rf);
        double ghz = c.geometry.carrier_hz * 1e-9;
        number("geometry.carrier_ghz", ghz);
        c.geometry.carrier_hz = ghz * 1e9;
        number("geometry.spacing_m", c.geometry.spacing);

        integer("scenario.users", c.users);
        number("scenario.range_min_m", c.range_min);
        number("scenario.range_max_m", c.range_max);
        number("scenario.angle_min_rad", c.angle_min);
        number("scenario.angle_max_rad", c.angle_max);
        integer("scenario.slots", c.slots);
        dbm("scenario.power_dbm", c.power_w);
        dbm("scenario.noise_dbm", c.noise_w);
        threshold("scenario.crb_angle_rad2", c.crb_angle);
        threshold("scenario.crb_range_m2", c.crb_range);
        number("scenario.crb_factor", c.crb_factor);

        if (auto s = text("sweep.axis"))
            c.axis = parse_axis(*s);
        if (auto s = text("sweep.values"))
            for (const std::string &v : detail::split_list(*s))
                c.grid.push_back(detail::parse_double(v, "sweep.values"));

        if (auto s = text("run.schemes"))
        {
            c.schemes.clear();
            for (const std::string &v : detail::split_list(*s))
            {
                const auto id = parse_scheme(v);
                if (!id)
                    throw DomainError("config: unknown scheme '" + v + "'");
                c.schemes.push_back(*id);
            }
        }
        if (auto s = text("run.seeds"))
            c.seeds = detail::parse_seeds(*s);
        if (auto s = text("run.output"))
            c.output = *s;
        int threads = 0;
        integer("run.threads", threads);
        if (threads < 0)
            throw DomainError("config: threads must be >= 0");
        c.threads = static_cast<unsigned>(threads);

        number("schedule.rho0", c.schedule.rho0);
        number("schedule.shrink", c.schedule.shrink);
        number("schedule.eps_inner", c.schedule.eps_inner);
        number("schedule.eps_penalty_rel", c.schedule.eps_penalty_rel);
        integer("schedule.max_outer", c.schedule.max_outer);
        integer("schedule.max_inner", c.schedule.max_inner);
        integer("schedule.max_inner_iterations", c.schedule.max_inner_iterations);

        c.validate();
        return c;
    }

    inline ExperimentConfig load_config(const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
            throw DomainError("config: cannot open '" + path + "'");
        return parse_config(in);
    }

    enum class Scale
    {
        Desk,
        Paper
    };

    inline Scale parse_scale(const std::string &s)
    {
        if (s == "desk")
            return Scale::Desk;
        if (s == "paper")
            return Scale::Paper;
        throw DomainError("unknown scale '" + s + "'");
    }

    inline void apply_scale(ExperimentConfig &c, Scale s)
    {
        const bool desk = s == Scale::Desk;
        c.geometry.n_tx = desk ? 16 : 128;
        c.geometry.n_rx = desk ? 8 : 64;
        c.geometry.n_rf = desk ? 4 : 8;
        c.users = desk ? 2 : 4;
        c.slots = desk ? 64 : 1000;
        c.seeds.clear();
        for (std::uint64_t i = 0; i < (desk ? 20u : 100u); ++i)
            c.seeds.push_back(i);
    }

    // ---------------------------------------------------------------------------------------
    // Sampling
    // ---------------------------------------------------------------------------------------

    struct Realization
    {
        SystemGeometry geometry;
        Scenario scenario;
        ChannelSet channels;
        SensingModel sensing;
    };

    // Config with the sweep axis set to `value` (thresholds untouched).
    inline ExperimentConfig at_axis(const ExperimentConfig &base, double value)
    {
        ExperimentConfig c = base;
        switch (base.axis)
        {
        case SweepAxis::Power: c.power_w = dbm_to_watts(value); break;
        case SweepAxis::Users: c.users = static_cast<int>(value); break;
        case SweepAxis::TxAntennas: c.geometry.n_tx = static_cast<int>(value); break;
        case SweepAxis::CrbRange: c.crb_range = value * value; break;
        case SweepAxis::CrbAngle: c.crb_angle = value * value; break;
        }
        c.geometry.n_rf = std::min(c.geometry.n_rf, c.geometry.n_tx);
        return c;
    }

    // Positions are uniform over [range_min, range_max] x [angle_min, angle_max]. User k reads
    // stream k, the target its own stream, so positions are nested across K. Thresholds left NaN
    // by the config are resolved by sample_cell.
    inline Realization sample_scenario(const ExperimentConfig &c, std::uint64_t seed)
    {
        Realization r;
        r.geometry = c.geometry;
        Scenario &sc = r.scenario;
        auto draw = [&](std::uint64_t stream) {
            const CounterRng rng{seed, stream};
            return PolarPoint{rng.uniform(0, c.range_min, c.range_max), rng.uniform(1, c.angle_min, c.angle_max)};
        };
        for (int k = 0; k < c.users; ++k)
            sc.users.push_back(draw(static_cast<std::uint64_t>(k)));
        sc.target = draw(target_stream);
        sc.noise_user.assign(c.users, c.noise_w);
        sc.noise_eve = c.noise_w;
        sc.power_budget = c.power_w;
        sc.slots = c.slots;
        sc.crb_angle_max = c.crb_angle;
        sc.crb_range_max = c.crb_range;
        r.channels = build_channels(r.geometry, sc);
        r.sensing = build_sensing_model(r.geometry, sc);
        return r;
    }

    // crb_factor times the CRBs of the RSMA initialization at the base (unswept) configuration.
    inline std::array<double, 2> auto_thresholds(const ExperimentConfig &base, std::uint64_t seed)
    {
        const Realization r = sample_scenario(base, seed);
        const BeamState st = initialize(r.geometry, r.scenario, r.channels);
        const CMat FW = st.hybrid();
        return {base.crb_factor * crb_closed_form(FW, r.sensing, r.scenario.noise_eve, r.scenario.slots, CrbParameter::Angle),
                base.crb_factor * crb_closed_form(FW, r.sensing, r.scenario.noise_eve, r.scenario.slots, CrbParameter::Range)};
    }

    // Realization of one sweep cell with every threshold resolved.
    inline Realization sample_cell(const ExperimentConfig &base, double axis_value, std::uint64_t seed)
    {
        const ExperimentConfig c = at_axis(base, axis_value);
        Realization r = sample_scenario(c, seed);
        if (std::isnan(r.scenario.crb_angle_max) || std::isnan(r.scenario.crb_range_max))
        {
            const auto t = auto_thresholds(base, seed);
            if (std::isnan(r.scenario.crb_angle_max))
                r.scenario.crb_angle_max = t[0];
            if (std::isnan(r.scenario.crb_range_max))
                r.scenario.crb_range_max = t[1];
        }
        return r;
    }

    // ---------------------------------------------------------------------------------------
    // Sweeps
    // ---------------------------------------------------------------------------------------

    struct SweepRow
    {
        double axis_value = 0.0;
        std::string scheme;
        std::uint64_t seed = 0;
        double secrecy = 0.0;   // bits/s/Hz
        double crb_theta = 0.0; // rad^2
        double crb_range = 0.0; // m^2
        std::string status;
        int iterations = 0;     // conic solves
        double seconds = 0.0;
        // Sort keys: grid index, scheme index in the config.
        std::size_t axis_index = 0, scheme_index = 0;
    };

    inline bool row_ok(const SweepRow &r) { return r.status == "converged" || r.status == "infeasible"; }

    inline SweepRow run_cell(const ExperimentConfig &c, std::size_t axis_index, std::size_t scheme_index, std::uint64_t seed)
    {
        SweepRow row;
        const double value = c.axis_values()[axis_index];
        const SchemeId id = c.schemes[scheme_index];
        row.axis_value = value;
        row.scheme = to_string(id);
        row.seed = seed;
        row.axis_index = axis_index;
        row.scheme_index = scheme_index;
        const auto t0 = std::chrono::steady_clock::now();
        try
        {
            const Realization r = sample_cell(c, value, seed);
            const SolveReport rep = run_scheme(id, r.geometry, r.scenario, r.channels, r.sensing, c.schedule);
            row.secrecy = rep.max_min_secrecy;
            row.crb_theta = rep.crb_angle;
            row.crb_range = rep.crb_range;
            row.status = to_string(rep.status);
            row.iterations = rep.conic_solves;
        }
        catch (const std::exception &e)
        {
            row.secrecy = row.crb_theta = row.crb_range = std::numeric_limits<double>::quiet_NaN();
            row.status = std::string("error: ") + e.what();
        }
        row.seconds = detail::seconds_since(t0);
        return row;
    }

    // Every (axis value, scheme, seed) cell on a worker pool; rows sorted by (axis, scheme, seed).
    // `on_row` sees rows in completion order.
    inline std::vector<SweepRow> run_sweep(const ExperimentConfig &c, const std::function<void(const SweepRow &)> &on_row = {})
    {
        c.validate();
        struct Cell
        {
            std::size_t a, s;
            std::uint64_t seed;
        };
        std::vector<Cell> cells;
        const std::size_t n_axis = c.axis_values().size();
        for (std::size_t a = 0; a < n_axis; ++a)
            for (std::size_t s = 0; s < c.schemes.size(); ++s)
                for (std::uint64_t seed : c.seeds)
                    cells.push_back({a, s, seed});

        std::vector<SweepRow> rows(cells.size());
        std::atomic<std::size_t> next{0};
        std::mutex report;
        auto worker = [&]() {
            for (std::size_t i = next++; i < cells.size(); i = next++)
            {
                rows[i] = run_cell(c, cells[i].a, cells[i].s, cells[i].seed);
                if (on_row)
                {
                    std::lock_guard<std::mutex> lock(report);
                    on_row(rows[i]);
                }
            }
        };
        unsigned n_threads = c.threads ? c.threads : std::max(1u, std::thread::hardware_concurrency());
        n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, cells.size()));
        std::vector<std::thread> pool;
        for (unsigned t = 1; t < n_threads; ++t)
            pool.emplace_back(worker);
        worker();
        for (auto &t : pool)
            t.join();

        std::sort(rows.begin(), rows.end(), [](const SweepRow &x, const SweepRow &y) {
            return std::tie(x.axis_index, x.scheme_index, x.seed) < std::tie(y.axis_index, y.scheme_index, y.seed);
        });
        return rows;
    }

    // ---------------------------------------------------------------------------------------
    // CSV
    // ---------------------------------------------------------------------------------------

    inline constexpr const char *csv_header = "axis,scheme,seed,secrecy_bps_hz,crb_theta_rad2,crb_range_m2,status,iters,seconds";

    inline std::string csv_number(double v)
    {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.9g", v);
        return buf;
    }

    inline std::string csv_field(const std::string &s)
    {
        if (s.find_first_of(",\"\r\n") == std::string::npos)
            return s;
        std::string out = "\"";
        for (char ch : s)
        {
            if (ch == '"')
                out += '"';
            out += ch;
        }
        return out + "\"";
    }

    inline std::string csv_row(const SweepRow &r)
    {
        std::string line = csv_number(r.axis_value);
        for (const std::string &f :
             {csv_field(r.scheme), std::to_string(r.seed), csv_number(r.secrecy), csv_number(r.crb_theta),
              csv_number(r.crb_range), csv_field(r.status), std::to_string(r.iterations), csv_number(r.seconds)})
            line += "," + f;
        return line;
    }

    inline void write_csv(const std::vector<SweepRow> &rows, std::ostream &out)
    {
        out << csv_header << '\n';
        for (const auto &r : rows)
            out << csv_row(r) << '\n';
    }

    inline void emit_csv(const std::vector<SweepRow> &rows, const std::string &path)
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out)
            throw DomainError("cannot write '" + path + "'");
        write_csv(rows, out);
        if (!out)
            throw DomainError("write failed for '" + path + "'");
    }

    // Splits one CSV record (RFC 4180, no embedded newlines).
    inline std::vector<std::string> parse_csv_line(const std::string &line)
    {
        std::vector<std::string> out(1);
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i)
        {
            const char ch = line[i];
            if (quoted)
            {
                if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"')
                {
                    out.back() += '"';
                    ++i;
                }
                else if (ch == '"')
                    quoted = false;
                else
                    out.back() += ch;
            }
            else if (ch == '"')
                quoted = true;
            else if (ch == ',')
                out.emplace_back();
            else
                out.back() += ch;
        }
        return out;
    }
} // namespace nfisac

#endif
