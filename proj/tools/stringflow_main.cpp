#include "stringflow/oracles.hpp"
#include "stringflow/scenario.hpp"
#include "stringflow/sugra.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CommonOpts {
    std::string scenario;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
    std::size_t budget = 0;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool scenario_required) {
    auto* s = cmd->add_option("--scenario", o.scenario, "scenario file (INI)");
    if (scenario_required) s->required();
    cmd->add_option("--out", o.out, "output directory (overrides scenario)");
    cmd->add_option("--seed", o.seed, "64-bit seed (overrides scenario)")
        ->each([&o](const std::string&) { o.seed_set = true; });
    cmd->add_option("--threads", o.threads, "worker threads (recorded; compute is single-threaded)");
    cmd->add_option("--budget", o.budget, "grid point budget (overrides scenario)");
}

sf::Scenario load_with_overrides(const CommonOpts& o, const char* dflt_kind) {
    sf::Scenario s;
    if (!o.scenario.empty()) {
        s = sf::load_scenario(o.scenario);
    } else {
        s.kind = dflt_kind;
        for (int d = 0; d < 2 * s.m; ++d) s.active.push_back(d);
    }
    if (!o.out.empty()) s.out = o.out;
    if (o.seed_set) s.seed = o.seed;
    if (o.threads > 0) s.threads = o.threads;
    if (o.budget > 0) s.budget = o.budget;
    return s;
}

int guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const sf::scenario_error& e) {
        sf::log_msg(sf::LogLevel::Error, e.what());
        std::fprintf(stderr, "%s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        sf::log_msg(sf::LogLevel::Error, e.what());
        std::fprintf(stderr, "%s\n", e.what());
        return 3;
    }
}

int cmd_ma_solve(const sf::Scenario& s) {
    std::size_t budget = s.budget ? s.budget : sf::LatticeGrid::default_budget;
    sf::GridPtr g = sf::make_grid(s.m, s.res, s.active, {}, budget);
    sf::MetricField chi_hat = sf::MetricField::identity(g);
    sf::ScalarField f(g, true);
    std::vector<int> idx;
    for (std::size_t pt = 0; pt < g->npoints; ++pt) {
        g->unflatten(pt, idx);
        double x = g->coord(idx, s.f_mode_dim) / g->periods[s.f_mode_dim];
        f.v[pt] = s.f_amplitude * std::sin(2.0 * M_PI * s.f_mode_k * x);
    }
    sf::NewtonMaResult r = sf::newton_ma(chi_hat, f, s.stop_tol);
    fs::create_directories(s.out);
    {
        std::ofstream os(fs::path(s.out) / "phi.dat");
        sf::dump_field(os, r.phi);
    }
    json j;
    j["kind"] = "ma-solve";
    j["seed"] = s.seed;
    j["c"] = r.c;
    j["residual"] = r.residual;
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    int code = r.converged ? 0 : 3;
    j["exit_code"] = code;
    std::ofstream os(fs::path(s.out) / "summary.json");
    os << j.dump(2) << "\n";
    std::cout << j.dump(2) << "\n";
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"stringflow: geometric flow and supergravity toolkit"};
    app.require_subcommand(1);

    CommonOpts flow_o, ma_o, ode_o, chk_o, ver_o;
    std::string report_dir;

    auto* c_flow = app.add_subcommand("flow", "run a scenario-driven flow");
    add_common(c_flow, flow_o, true);
    auto* c_ma = app.add_subcommand("ma-solve", "stationary Monge-Ampere solve");
    add_common(c_ma, ma_o, false);
    auto* c_ode = app.add_subcommand("sugra-ode", "membrane ODE integration");
    add_common(c_ode, ode_o, false);
    auto* c_chk = app.add_subcommand("sugra-check", "11d field-equation verifier");
    add_common(c_chk, chk_o, false);
    auto* c_ver = app.add_subcommand("verify", "kernel-vs-reference checks");
    add_common(c_ver, ver_o, false);
    auto* c_rep = app.add_subcommand("report", "emit plot data from a run");
    c_rep->add_option("--run", report_dir, "completed run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (c_flow->parsed())
        return guarded([&] { return sf::run_scenario(load_with_overrides(flow_o, "ma")); });
    if (c_ma->parsed())
        return guarded([&] {
            sf::Scenario s = load_with_overrides(ma_o, "ma");
            return cmd_ma_solve(s);
        });
    if (c_ode->parsed())
        return guarded([&] {
            sf::Scenario s = load_with_overrides(ode_o, "sugra-ode");
            s.kind = "sugra-ode";
            return sf::run_scenario(s);
        });
    if (c_chk->parsed())
        return guarded([&] {
            sf::Scenario s = load_with_overrides(chk_o, "sugra-check");
            s.kind = "sugra-check";
            return sf::run_scenario(s);
        });
    if (c_ver->parsed())
        return guarded([&] {
            sf::Scenario s = load_with_overrides(ver_o, "verify");
            s.kind = "verify";
            return sf::run_scenario(s);
        });
    if (c_rep->parsed()) return guarded([&] { return sf::run_report(report_dir); });
    return 1;
}
