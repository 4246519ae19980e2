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

#include <nfisac/harness.hpp>

#include <sstream>

using namespace nfisac;
using Catch::Approx;

namespace
{
    ExperimentConfig parse(const std::string &text)
    {
        std::istringstream in(text);
        return parse_config(in);
    }

    // Small and quick: every cell finishes in well under a second.
    ExperimentConfig tiny()
    {
        ExperimentConfig c;
        c.geometry.n_tx = 4, c.geometry.n_rx = 4, c.geometry.n_rf = 2;
        c.users = 1;
        c.slots = 8;
        c.schedule.max_outer = 2;
        c.schedule.max_inner = 2;
        c.schedule.max_inner_iterations = 3;
        c.threads = 1;
        return c;
    }
} // namespace

TEST_CASE("harness: counter RNG is stateless and uniform")
{
    const CounterRng a{42, 3}, b{42, 3}, other{42, 4};
    CHECK(a.bits(17) == b.bits(17));
    CHECK(a.bits(17) != other.bits(17));
    CHECK(a.bits(17) != a.bits(18));
    double mean = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i)
    {
        const double u = a.uniform(static_cast<std::uint64_t>(i));
        CHECK((u >= 0.0 && u < 1.0));
        mean += a.uniform(static_cast<std::uint64_t>(i), 10.0, 20.0);
    }
    CHECK(mean / n == Approx(15.0).epsilon(0.01));
    CHECK(splitmix64(0) == 0xE220A8397B1DCDAFULL);
}

TEST_CASE("harness: scenario sampling is deterministic and inside the sector")
{
    ExperimentConfig c;
    apply_scale(c, Scale::Desk);
    const Realization a = sample_scenario(c, 7), b = sample_scenario(c, 7), d = sample_scenario(c, 8);
    REQUIRE(a.scenario.users.size() == 2);
    for (int k = 0; k < 2; ++k)
    {
        CHECK(a.scenario.users[k].range_m == b.scenario.users[k].range_m);
        CHECK(a.scenario.users[k].angle_rad == b.scenario.users[k].angle_rad);
    }
    CHECK(a.scenario.target.range_m == b.scenario.target.range_m);
    CHECK(a.channels.eve_channel == b.channels.eve_channel);
    CHECK(a.scenario.target.range_m != d.scenario.target.range_m);

    double mean = 0.0;
    for (std::uint64_t s = 0; s < 10000; ++s)
    {
        const CounterRng rng{s, 0};
        const double r = rng.uniform(0, c.range_min, c.range_max);
        CHECK((r >= 10.0 && r <= 20.0));
        mean += r;
    }
    CHECK(mean / 10000 == Approx(15.0).epsilon(0.01));

    // Positions are nested across the user count.
    ExperimentConfig three = c;
    three.users = 3;
    const Realization t = sample_scenario(three, 7);
    CHECK(t.scenario.users[1].range_m == a.scenario.users[1].range_m);
    CHECK(t.scenario.target.angle_rad == a.scenario.target.angle_rad);
}

TEST_CASE("harness: Rayleigh distance of the two array scales")
{
    ExperimentConfig c;
    apply_scale(c, Scale::Paper);
    const double lambda = speed_of_light / 30e9;
    const double D = 128 * lambda / 2;
    CHECK(c.geometry.rayleigh_distance() == Approx(2.0 * D * D / lambda).epsilon(1e-14));
    CHECK(c.geometry.rayleigh_distance() > 20.0);
    apply_scale(c, Scale::Desk);
    // Recorded only: at 16 antennas the sampled users sit beyond the Rayleigh distance.
    INFO("desk Rayleigh distance " << c.geometry.rayleigh_distance() << " m");
    const double d = 16 * lambda / 2;
    CHECK(c.geometry.rayleigh_distance() == Approx(2.0 * d * d / lambda).epsilon(1e-14));
}

TEST_CASE("harness: scale presets")
{
    ExperimentConfig c;
    apply_scale(c, Scale::Desk);
    CHECK(c.geometry.n_tx == 16);
    CHECK(c.geometry.n_rx == 8);
    CHECK(c.geometry.n_rf == 4);
    CHECK(c.users == 2);
    CHECK(c.slots == 64);
    REQUIRE(c.seeds.size() == 20);
    CHECK(c.seeds.front() == 0);
    CHECK(c.seeds.back() == 19);
    CHECK(parse_scale("paper") == Scale::Paper);
    CHECK_THROWS_AS(parse_scale("huge"), DomainError);
}

TEST_CASE("harness: config parsing")
{
    const ExperimentConfig c = parse(R"(
[geometry]
n_tx = 32
n_rf = 6   ; inline comment
carrier_ghz = 28

[scenario]
users = 3
power_dbm = 20
noise_dbm = -84
crb_angle_rad2 = inf
crb_range_m2 = auto
slots = 100

[sweep]
axis = users
values = 1, 2, 3

[run]
schemes = RSMA_HB, SDMA_HB
seeds = 0-3, 7
output = out.csv

[schedule]
rho0 = 50
)");
    CHECK(c.geometry.n_tx == 32);
    CHECK(c.geometry.n_rf == 6);
    CHECK(c.geometry.carrier_hz == Approx(28e9));
    CHECK(c.users == 3);
    CHECK(c.power_w == Approx(0.1).epsilon(1e-14));
    CHECK(c.noise_w == Approx(std::pow(10.0, -11.4)).epsilon(1e-14));
    CHECK(std::isinf(c.crb_angle));
    CHECK(std::isnan(c.crb_range));
    CHECK(c.axis == SweepAxis::Users);
    CHECK(c.axis_values() == std::vector<double>{1.0, 2.0, 3.0});
    CHECK(c.schemes == std::vector<SchemeId>{SchemeId::RsmaHb, SchemeId::SdmaHb});
    CHECK(c.seeds == std::vector<std::uint64_t>{0, 1, 2, 3, 7});
    CHECK(c.output == "out.csv");
    CHECK(c.schedule.rho0 == 50.0);
}

TEST_CASE("harness: config errors")
{
    CHECK_THROWS_AS(parse("[run]\nseeds = 1, 1\n"), DomainError);
    CHECK_THROWS_AS(parse("[run]\nseeds = 5-2\n"), DomainError);
    CHECK_THROWS_AS(parse("[run]\nschemes = NOMA\n"), DomainError);
    CHECK_THROWS_AS(parse("[sweep]\naxis = bandwidth\n"), DomainError);
    CHECK_THROWS_AS(parse("[sweep]\naxis = users\nvalues = 1, 2.5\n"), DomainError);
    CHECK_THROWS_AS(parse("[scenario]\nusers = two\n"), DomainError);
    CHECK_THROWS_AS(parse("[geometry]\nn_tx = 4\nn_rf = 8\n"), DomainError);
    CHECK_THROWS_AS(parse("[schedule]\nshrink = 1.5\n"), DomainError);
    CHECK_NOTHROW(parse(""));
}

TEST_CASE("harness: axis values map onto the configuration")
{
    ExperimentConfig c;
    CHECK(at_axis(c, 10.0).power_w == Approx(0.01));
    c.axis = SweepAxis::TxAntennas;
    c.geometry.n_rf = 8;
    const ExperimentConfig small = at_axis(c, 4.0);
    CHECK(small.geometry.n_tx == 4);
    CHECK(small.geometry.n_rf == 4);
    c.axis = SweepAxis::CrbRange;
    CHECK(at_axis(c, 0.1).crb_range == Approx(0.01));
    c.axis = SweepAxis::CrbAngle;
    CHECK(at_axis(c, 0.02).crb_angle == Approx(4e-4));
}

TEST_CASE("harness: auto thresholds come from the base configuration")
{
    ExperimentConfig c = tiny();
    c.grid = {10.0, 20.0};
    const auto t = auto_thresholds(c, 3);
    const Realization lo = sample_cell(c, 10.0, 3), hi = sample_cell(c, 20.0, 3);
    CHECK(lo.scenario.crb_angle_max == t[0]);
    CHECK(hi.scenario.crb_range_max == t[1]);
    CHECK(lo.scenario.power_budget == Approx(0.01));
    c.crb_angle = 0.5;
    CHECK(sample_cell(c, 10.0, 3).scenario.crb_angle_max == 0.5);
}

TEST_CASE("harness: sweep covers the full grid in sorted order")
{
    ExperimentConfig c = tiny();
    c.grid = {10.0, 15.0, 20.0};
    c.schemes = {SchemeId::SdmaHb, SchemeId::RsmaHb};
    c.seeds = {4, 0, 1, 2, 3};
    std::size_t streamed = 0;
    const auto rows = run_sweep(c, [&](const SweepRow &) { ++streamed; });
    REQUIRE(rows.size() == 30);
    CHECK(streamed == 30);
    CHECK(rows.front().axis_value == 10.0);
    CHECK(rows.front().scheme == "SDMA_HB");
    CHECK(rows.front().seed == 0);
    CHECK(rows.back().axis_value == 20.0);
    CHECK(rows.back().scheme == "RSMA_HB");
    CHECK(rows.back().seed == 4);
    for (const auto &r : rows)
        CHECK(r.iterations >= 1);
}

TEST_CASE("harness: CSV format")
{
    std::ostringstream empty;
    write_csv({}, empty);
    CHECK(empty.str() == std::string(csv_header) + "\n");

    SweepRow r;
    r.axis_value = 15.0;
    r.scheme = "RSMA_HB";
    r.seed = 7;
    r.secrecy = 8.123456789012;
    r.crb_theta = 1.5e-7;
    r.crb_range = 2.25e-5;
    r.status = "converged";
    r.iterations = 23;
    r.seconds = 1.25;
    CHECK(csv_row(r) == "15,RSMA_HB,7,8.12345679,1.5e-07,2.25e-05,converged,23,1.25");

    r.status = "error: a, \"b\"";
    r.secrecy = std::numeric_limits<double>::quiet_NaN();
    const std::string line = csv_row(r);
    CHECK(line == "15,RSMA_HB,7,nan,1.5e-07,2.25e-05,\"error: a, \"\"b\"\"\",23,1.25");
    const auto fields = parse_csv_line(line);
    REQUIRE(fields.size() == 9);
    CHECK(fields[6] == "error: a, \"b\"");
    CHECK(fields[4] == "1.5e-07");
    CHECK(!row_ok(r));
}

TEST_CASE("harness: CSV round trip keeps nine significant digits")
{
    const ExperimentConfig c = tiny();
    std::vector<SweepRow> rows{run_cell(c, 0, 0, 5), run_cell(c, 0, 0, 6)};
    std::ostringstream out;
    write_csv(rows, out);
    const std::string text = out.str();
    CHECK(text.find('\r') == std::string::npos);
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    CHECK(line == csv_header);
    for (const auto &r : rows)
    {
        REQUIRE(std::getline(in, line));
        const auto f = parse_csv_line(line);
        REQUIRE(f.size() == 9);
        CHECK(f[1] == r.scheme);
        CHECK(std::stoull(f[2]) == r.seed);
        CHECK(std::stod(f[3]) == Approx(r.secrecy).epsilon(1e-8));
        CHECK(std::stod(f[4]) == Approx(r.crb_theta).epsilon(1e-8));
        CHECK(f[6] == r.status);
        CHECK(std::stoi(f[7]) == r.iterations);
    }
}
