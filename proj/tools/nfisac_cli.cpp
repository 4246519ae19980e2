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

// nfisac_cli solve | sweep | verify | export-inner

#include <nfisac/nfisac.hpp>
#include <nfisac/verify.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

using json = nlohmann::json;
using namespace nfisac;

namespace
{
    struct CommonFlags
    {
        std::string config;
        std::string scale;
        std::string out;
        std::string scheme;
        std::optional<std::uint64_t> seed;
    };

    void add_common(CLI::App *cmd, CommonFlags &f)
    {
        cmd->add_option("--config", f.config, "INI experiment configuration")->check(CLI::ExistingFile);
        cmd->add_option("--scale", f.scale, "desk or paper presets")->check(CLI::IsMember({"desk", "paper"}));
        cmd->add_option("--out", f.out, "output path (stdout when absent)");
        cmd->add_option("--scheme", f.scheme, "RSMA_HB, RSMA_FD, RSMA_SC, SDMA_HB or RSMA_FAR");
        cmd->add_option("--seed", f.seed, "realization seed");
    }

    ExperimentConfig make_config(const CommonFlags &f)
    {
        ExperimentConfig c;
        if (!f.config.empty())
            c = load_config(f.config);
        else
            c.seeds = {0};
        if (!f.scale.empty())
            apply_scale(c, parse_scale(f.scale));
        if (f.seed)
            c.seeds = {*f.seed};
        if (!f.scheme.empty())
        {
            const auto id = parse_scheme(f.scheme);
            if (!id)
                throw DomainError("unknown scheme '" + f.scheme + "'");
            c.schemes = {*id};
        }
        if (!f.out.empty())
            c.output = f.out;
        c.validate();
        return c;
    }

    void write_text(const std::string &path, const std::string &text)
    {
        if (path.empty() || path == "-")
        {
            std::cout << text;
            return;
        }
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out)
            throw DomainError("cannot write '" + path + "'");
        out << text;
    }

    json number(double v)
    {
        if (std::isfinite(v))
            return v;
        return std::isnan(v) ? json("nan") : json(v > 0 ? "inf" : "-inf");
    }

    json cmat_json(const CMat &M)
    {
        json re = json::array(), im = json::array();
        for (Eigen::Index r = 0; r < M.rows(); ++r)
        {
            json rr = json::array(), ii = json::array();
            for (Eigen::Index c = 0; c < M.cols(); ++c)
            {
                rr.push_back(M(r, c).real());
                ii.push_back(M(r, c).imag());
            }
            re.push_back(rr);
            im.push_back(ii);
        }
        return {{"re", re}, {"im", im}};
    }

    json rvec_json(const RVec &v) { return std::vector<double>(v.data(), v.data() + v.size()); }

    json report_json(const SolveReport &r, const Realization &real, SchemeId id, std::uint64_t seed)
    {
        const Scenario &sc = real.scenario;
        json users = json::array();
        for (const auto &u : sc.users)
            users.push_back({{"range_m", u.range_m}, {"angle_rad", u.angle_rad}});
        json j;
        j["scheme"] = to_string(id);
        j["seed"] = seed;
        j["status"] = to_string(r.status);
        j["scenario"] = {{"users", users},
                         {"target", {{"range_m", sc.target.range_m}, {"angle_rad", sc.target.angle_rad}}},
                         {"power_budget_w", sc.power_budget},
                         {"crb_angle_max_rad2", number(sc.crb_angle_max)},
                         {"crb_range_max_m2", number(sc.crb_range_max)},
                         {"slots", sc.slots},
                         {"rayleigh_distance_m", real.geometry.rayleigh_distance()}};
        j["secrecy_bps_hz"] = r.max_min_secrecy;
        j["crb_theta_rad2"] = number(r.crb_angle);
        j["crb_range_m2"] = number(r.crb_range);
        j["penalty_residual"] = r.penalty_residual;
        j["rates"] = {{"common", r.rates.r_common},
                      {"eve_common", r.rates.r_ec},
                      {"private", rvec_json(r.rates.r_kp)},
                      {"eve_private", rvec_json(r.rates.r_ek)},
                      {"secrecy_total", rvec_json(r.rates.secrecy_total)},
                      {"common_alloc", rvec_json(r.state.common_alloc)}};
        j["feasibility"] = {{"power_excess_w", r.feasibility.power_excess},
                            {"unit_modulus_error", r.feasibility.unit_modulus_error},
                            {"crb_angle_excess", number(r.feasibility.crb_angle_excess)},
                            {"crb_range_excess", number(r.feasibility.crb_range_excess)},
                            {"allocation_excess", r.feasibility.allocation_excess}};
        j["iterations"] = {{"outer", r.outer_iterations}, {"conic_solves", r.conic_solves}};
        j["traces"] = {{"inner", r.inner_traces},
                       {"round_objective", r.round_objective},
                       {"outer_residual", r.outer_residual},
                       {"outer_secrecy_digital", r.outer_secrecy_digital},
                       {"outer_secrecy_hybrid", r.outer_secrecy_hybrid}};
        j["seconds"] = {{"total", r.seconds}, {"inner", r.times.inner}, {"analog", r.times.analog}, {"digital", r.times.digital}};
        j["beam"] = {{"analog", cmat_json(r.state.analog)}, {"digital", cmat_json(r.state.digital)}};
        return j;
    }

    int cmd_solve(const CommonFlags &f)
    {
        const ExperimentConfig c = make_config(f);
        const std::uint64_t seed = c.seeds.front();
        const SchemeId id = c.schemes.front();
        const Realization real = sample_cell(c, c.axis_values().front(), seed);
        const SolveReport r = run_scheme(id, real.geometry, real.scenario, real.channels, real.sensing, c.schedule);
        write_text(f.out, report_json(r, real, id, seed).dump(2) + "\n");
        return r.status == SolveStatus::Converged || r.status == SolveStatus::Infeasible ? 0 : 1;
    }

    int cmd_sweep(const CommonFlags &f, bool quiet)
    {
        const ExperimentConfig c = make_config(f);
        std::size_t done = 0;
        const std::size_t total = c.axis_values().size() * c.schemes.size() * c.seeds.size();
        const auto rows = run_sweep(c, [&](const SweepRow &r) {
            ++done;
            if (!quiet)
                std::cerr << "[" << done << "/" << total << "] " << to_string(c.axis) << "=" << csv_number(r.axis_value) << " "
                          << r.scheme << " seed " << r.seed << ": " << r.status << " " << csv_number(r.secrecy) << std::endl;
        });
        if (c.output.empty() || c.output == "-")
            write_csv(rows, std::cout);
        else
            emit_csv(rows, c.output);
        return std::all_of(rows.begin(), rows.end(), row_ok) ? 0 : 1;
    }

    int cmd_verify(const std::vector<int> &only, unsigned threads)
    {
        VerifyOptions opt;
        opt.only = only;
        opt.threads = threads;
        opt.log = &std::cout;
        const auto results = run_verification(opt);
        return std::all_of(results.begin(), results.end(), [](const CriterionResult &r) { return r.passed; }) ? 0 : 1;
    }

    // The first inner conic program of RSMA_HB with its solution, for external cross-checks.
    int cmd_export_inner(const CommonFlags &f)
    {
        const ExperimentConfig c = make_config(f);
        const Realization real = sample_cell(c, c.axis_values().front(), c.seeds.front());
        const BeamState st = initialize(real.geometry, real.scenario, real.channels);
        InnerSettings is;
        is.penalty_weight = 1.0 / c.schedule.rho0;
        is.fw_target = st.hybrid();
        const ConicProblem prob = inner_problem_at(st.digital_full, real.scenario, real.channels, real.sensing, is);
        const ConicSolution sol = solve_conic(prob, 1e-8);
        json blocks = json::array();
        for (const auto &b : prob.blocks)
        {
            json rows = json::array();
            for (Eigen::Index r = 0; r < b.A.rows(); ++r)
                rows.push_back(rvec_json(b.A.row(r).transpose()));
            blocks.push_back({{"kind", to_string(b.kind)}, {"tag", b.tag}, {"A", rows}, {"b", rvec_json(b.b)}});
        }
        const json j{{"c", rvec_json(prob.c)},
                     {"blocks", blocks},
                     {"status", to_string(sol.status)},
                     {"objective", sol.objective},
                     {"gap", sol.gap},
                     {"x", rvec_json(sol.x)}};
        write_text(f.out, j.dump() + "\n");
        return sol.status == ConicStatus::Optimal ? 0 : 1;
    }
} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Secure near-field ISAC beamfocusing: solver, sweeps and checks"};
    app.require_subcommand(1);

    CommonFlags solve_f, sweep_f, export_f;
    auto *solve = app.add_subcommand("solve", "solve one realization and print the report as JSON");
    add_common(solve, solve_f);
    auto *sweep = app.add_subcommand("sweep", "run an experiment grid and write CSV");
    add_common(sweep, sweep_f);
    bool quiet = false;
    sweep->add_flag("--quiet", quiet, "no progress on stderr");
    auto *verify = app.add_subcommand("verify", "run the oracle and property checks");
    std::vector<int> only;
    unsigned threads = 0;
    verify->add_option("--only", only, "criterion ids to run")->delimiter(',');
    verify->add_option("--threads", threads, "worker threads (0: all cores)");
    auto *exp = app.add_subcommand("export-inner", "dump the first inner conic program and its solution as JSON");
    add_common(exp, export_f);

    CLI11_PARSE(app, argc, argv);
    try
    {
        if (*solve)
            return cmd_solve(solve_f);
        if (*sweep)
            return cmd_sweep(sweep_f, quiet);
        if (*verify)
            return cmd_verify(only, threads);
        if (*exp)
            return cmd_export_inner(export_f);
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << std::endl;
        return 2;
    }
    return 2;
}
