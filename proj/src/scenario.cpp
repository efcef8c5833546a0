#include "stringflow/scenario.hpp"
#include "stringflow/flows.hpp"
#include "stringflow/monitors.hpp"
#include "stringflow/oracles.hpp"
#include "stringflow/sugra.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace sf {

// ---------------------------------------------------------------------------
// Logging

LogLevel log_level() {
    const char* e = std::getenv("STRINGFLOW_LOG");
    if (!e) return LogLevel::Info;
    std::string s(e);
    if (s == "error") return LogLevel::Error;
    if (s == "debug") return LogLevel::Debug;
    return LogLevel::Info;
}

void log_msg(LogLevel lvl, const std::string& msg) {
    static LogLevel active = log_level();
    if (int(lvl) > int(active)) return;
    const char* tag = lvl == LogLevel::Error   ? "error"
                      : lvl == LogLevel::Info ? "info"
                                              : "debug";
    std::fprintf(stderr, "[stringflow] %s: %s\n", tag, msg.c_str());
}

// ---------------------------------------------------------------------------
// INI parsing

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void fail(const std::string& path, int line, const std::string& what) {
    std::ostringstream os;
    os << path << ":" << line << ": " << what;
    throw scenario_error(os.str());
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (tok.empty()) continue;
        out.push_back(std::stoi(tok));
    }
    return out;
}

} // namespace

std::string IniData::get(const std::string& key, const std::string& dflt) const {
    auto it = kv.find(key);
    return it == kv.end() ? dflt : it->second;
}

double IniData::get_num(const std::string& key, double dflt) const {
    auto it = kv.find(key);
    if (it == kv.end()) return dflt;
    try {
        std::size_t used = 0;
        double v = std::stod(it->second, &used);
        if (used != it->second.size())
            throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw scenario_error(path + ": field '" + key + "' is not a number: '" +
                             it->second + "'");
    }
}

long IniData::get_int(const std::string& key, long dflt) const {
    auto it = kv.find(key);
    if (it == kv.end()) return dflt;
    try {
        std::size_t used = 0;
        long v = std::stol(it->second, &used);
        if (used != it->second.size())
            throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw scenario_error(path + ": field '" + key + "' is not an integer: '" +
                             it->second + "'");
    }
}

bool IniData::get_bool(const std::string& key, bool dflt) const {
    auto it = kv.find(key);
    if (it == kv.end()) return dflt;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw scenario_error(path + ": field '" + key + "' is not a boolean: '" + v +
                         "'");
}

IniData parse_ini(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw scenario_error(path + ": cannot open scenario file");
    IniData ini;
    ini.path = path;
    std::string line, section;
    int lno = 0;
    while (std::getline(in, line)) {
        ++lno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(path, lno, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) fail(path, lno, "empty section name");
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) fail(path, lno, "expected key=value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty()) fail(path, lno, "empty key");
        if (section.empty()) fail(path, lno, "key outside any [section]");
        std::string full = section + "." + key;
        if (ini.kv.count(full)) fail(path, lno, "duplicate key '" + full + "'");
        ini.kv[full] = val;
    }
    return ini;
}

// ---------------------------------------------------------------------------
// Scenario loading

Scenario load_scenario(const std::string& path) {
    IniData ini = parse_ini(path);
    Scenario s;
    s.kind = ini.get("run.kind", "");
    static const std::vector<std::string> kinds = {
        "anomaly",     "eta",         "ma",       "fu-yau",          "iib",
        "sugra-ode",   "sugra-check", "verify",   "homogeneous-flow"};
    if (std::find(kinds.begin(), kinds.end(), s.kind) == kinds.end())
        throw scenario_error(path + ": field 'run.kind' has unknown value '" +
                             s.kind + "'");
    s.out = ini.get("run.out", s.out);
    s.seed = std::uint64_t(ini.get_int("run.seed", long(s.seed)));
    s.threads = int(ini.get_int("run.threads", s.threads));
    s.budget = std::size_t(ini.get_int("run.budget", 0));

    s.m = int(ini.get_int("grid.m", s.m));
    s.res = int(ini.get_int("grid.res", s.res));
    if (ini.has("grid.active")) s.active = parse_int_list(ini.get("grid.active", ""));

    s.preset = ini.get("initial.preset", s.preset);
    static const std::vector<std::string> presets = {
        "flat", "conformal-mode", "fu-yau-ansatz", "kahler-perturbation",
        "manufactured"};
    if (std::find(presets.begin(), presets.end(), s.preset) == presets.end())
        throw scenario_error(path + ": field 'initial.preset' has unknown value '" +
                             s.preset + "'");
    s.amplitude = ini.get_num("initial.amplitude", s.amplitude);
    s.mode_dim = int(ini.get_int("initial.mode_dim", s.mode_dim));
    s.mode_k = int(ini.get_int("initial.mode_k", s.mode_k));
    s.perturb = ini.get_num("initial.perturb", s.perturb);

    s.alpha_prime = ini.get_num("flow.alpha_prime", s.alpha_prime);
    s.t_end = ini.get_num("flow.t_end", s.t_end);
    s.stop_tol = ini.get_num("flow.stop_tol", s.stop_tol);
    s.max_steps = ini.get_int("flow.max_steps", s.max_steps);
    s.monitor_every = int(ini.get_int("flow.monitor_every", s.monitor_every));
    s.dt_init = ini.get_num("flow.dt_init", s.dt_init);
    s.dt_max = ini.get_num("flow.dt_max", s.dt_max);
    s.rel_tol = ini.get_num("flow.rel_tol", s.rel_tol);
    s.abs_tol = ini.get_num("flow.abs_tol", s.abs_tol);
    s.use_direct_11 = ini.get_bool("flow.use_direct_11", s.use_direct_11);
    s.balanced_breach = ini.get_num("flow.balanced_breach", s.balanced_breach);

    s.f_amplitude = ini.get_num("ma.f_amplitude", s.f_amplitude);
    s.f_mode_dim = int(ini.get_int("ma.f_mode_dim", s.f_mode_dim));
    s.f_mode_k = int(ini.get_int("ma.f_mode_k", s.f_mode_k));

    s.v0 = ini.get_num("ode.v0", s.v0);
    s.v1 = ini.get_num("ode.v1", s.v1);
    s.v2 = ini.get_num("ode.v2", s.v2);
    s.ode_t_end = ini.get_num("ode.t_end", s.ode_t_end);
    s.ode_tol = ini.get_num("ode.tol", s.ode_tol);
    s.fixed_dt = ini.get_num("ode.fixed_dt", s.fixed_dt);

    s.eps = ini.get_num("sugra.eps", s.eps);
    s.coarse_mask_res = int(ini.get_int("sugra.coarse_mask_res", s.coarse_mask_res));
    s.sugra_tol = ini.get_num("sugra.tol", s.sugra_tol);
    if (ini.has("sugra.res_list"))
        s.res_list = parse_int_list(ini.get("sugra.res_list", ""));

    s.count = int(ini.get_int("verify.count", s.count));

    if (s.active.empty())
        for (int d = 0; d < 2 * s.m; ++d) s.active.push_back(d);
    return s;
}

// ---------------------------------------------------------------------------
// Initial data presets

namespace {

ScalarField mode_scalar(GridPtr g, double amplitude, int dim, int k) {
    ScalarField u(g, true);
    if (!g->active[dim])
        throw scenario_error("initial data mode requested on inactive coordinate " +
                             std::to_string(dim));
    std::vector<int> idx;
    for (std::size_t pt = 0; pt < g->npoints; ++pt) {
        g->unflatten(pt, idx);
        double x = g->coord(idx, dim) / g->periods[dim];
        u.v[pt] = amplitude * std::cos(2.0 * M_PI * k * x);
    }
    return u;
}

ScalarField sine_scalar(GridPtr g, double amplitude, int dim, int k) {
    ScalarField u(g, true);
    std::vector<int> idx;
    for (std::size_t pt = 0; pt < g->npoints; ++pt) {
        g->unflatten(pt, idx);
        double x = g->coord(idx, dim) / g->periods[dim];
        u.v[pt] = amplitude * std::sin(2.0 * M_PI * k * x);
    }
    return u;
}

struct FlowSetup {
    GridPtr grid;
    MetricField g0;
    ScalarField s0;
    MetricField chi_hat;
    ScalarField f;
    FuYauData fu_yau;
    FormField rho_B;
    bool metric_kind = false;
};

FlowKind flow_kind_of(const std::string& kind) {
    if (kind == "anomaly") return FlowKind::Anomaly;
    if (kind == "eta") return FlowKind::Eta;
    if (kind == "ma") return FlowKind::MA;
    if (kind == "fu-yau") return FlowKind::FuYau;
    return FlowKind::IIB;
}

FlowSetup build_flow_setup(const Scenario& s, std::mt19937_64& rng) {
    FlowSetup fx;
    std::size_t budget = s.budget ? s.budget : LatticeGrid::default_budget;
    fx.grid = make_grid(s.m, s.res, s.active, {}, budget);
    GridPtr g = fx.grid;
    FlowKind k = flow_kind_of(s.kind);
    fx.metric_kind =
        (k == FlowKind::Anomaly || k == FlowKind::Eta || k == FlowKind::IIB);

    auto base_mode = [&] { return mode_scalar(g, s.amplitude, s.mode_dim, s.mode_k); };

    if (k == FlowKind::MA) {
        fx.chi_hat = MetricField::identity(g);
        fx.f = sine_scalar(g, s.f_amplitude, s.f_mode_dim, s.f_mode_k);
        fx.s0 = (s.preset == "flat") ? ScalarField(g, true) : base_mode();
        return fx;
    }
    if (k == FlowKind::FuYau) {
        if (s.m != 2) throw scenario_error("fu-yau scenarios need grid.m = 2");
        fx.fu_yau.chi_hat = MetricField::identity(g);
        fx.fu_yau.alpha_prime = s.alpha_prime;
        fx.s0 = (s.preset == "flat") ? ScalarField(g, true) : base_mode();
        return fx;
    }
    if (k == FlowKind::Anomaly) {
        if (s.preset == "flat") {
            fx.g0 = MetricField::identity(g);
        } else if (s.preset == "fu-yau-ansatz") {
            if (s.m != 3) throw scenario_error("fu-yau-ansatz needs grid.m = 3");
            fx.g0 = fu_yau_metric(g, base_mode());
        } else if (s.preset == "kahler-perturbation") {
            fx.g0 = hessian_metric(MetricField::identity(g), base_mode());
        } else {
            throw scenario_error("anomaly scenarios accept presets flat, "
                                 "fu-yau-ansatz, kahler-perturbation");
        }
        return fx;
    }
    if (k == FlowKind::Eta) {
        if (s.preset == "flat")
            fx.g0 = MetricField::identity(g);
        else if (s.preset == "conformal-mode")
            fx.g0 = MetricField::conformal(base_mode());
        else if (s.preset == "kahler-perturbation")
            fx.g0 = hessian_metric(MetricField::identity(g), base_mode());
        else
            throw scenario_error("eta scenarios accept presets flat, "
                                 "conformal-mode, kahler-perturbation");
        return fx;
    }
    // IIB: manufactured stationary point eta* with rho_B = the rate of eta*.
    if (s.m != 3) throw scenario_error("iib scenarios need grid.m = 3");
    ScalarField ustar = base_mode();
    MetricField eta_star = fu_yau_metric(g, ustar);
    fx.rho_B = iib_rhs(eta_star, FormField(g, 2, 2));
    ScalarField u0 = ustar;
    if (s.perturb != 0.0) {
        ScalarField du = mode_scalar(g, s.perturb, s.mode_dim, s.mode_k + 1);
        for (std::size_t pt = 0; pt < g->npoints; ++pt) u0.v[pt] += du.v[pt];
    }
    (void)rng;
    fx.g0 = fu_yau_metric(g, u0);
    return fx;
}

double fit_decay_rate(const std::vector<std::pair<double, double>>& series) {
    // least-squares slope of ln(value) against t over positive entries
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (auto& [t, v] : series) {
        if (v <= 1e-13) continue;
        double y = std::log(v);
        sx += t;
        sy += y;
        sxx += t * t;
        sxy += t * y;
        ++n;
    }
    if (n < 2) return 0.0;
    double denom = n * sxx - sx * sx;
    return denom == 0.0 ? 0.0 : -(n * sxy - sx * sy) / denom;
}

void write_summary(const fs::path& out, const json& j) {
    std::ofstream os(out / "summary.json");
    os << j.dump(2) << "\n";
}

int run_flow_scenario(const Scenario& s) {
    auto wall0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(s.seed);
    FlowSetup fx = build_flow_setup(s, rng);
    fs::create_directories(s.out);
    fs::path out(s.out);

    FlowConfig cfg;
    cfg.kind = flow_kind_of(s.kind);
    cfg.alpha_prime = s.alpha_prime;
    cfg.t_end = s.t_end;
    cfg.max_steps = s.max_steps;
    cfg.stop_tol = s.stop_tol;
    cfg.monitor_every = s.monitor_every;
    cfg.ode.dt_init = s.dt_init;
    cfg.ode.dt_max = s.dt_max;
    cfg.ode.rel_tol = s.rel_tol;
    cfg.ode.abs_tol = s.abs_tol;
    cfg.use_direct_11 = s.use_direct_11;
    if (cfg.kind == FlowKind::MA) {
        cfg.chi_hat = &fx.chi_hat;
        cfg.f = &fx.f;
    }
    if (cfg.kind == FlowKind::FuYau) cfg.fu_yau = &fx.fu_yau;
    if (cfg.kind == FlowKind::IIB) cfg.rho_B = &fx.rho_B;

    std::ofstream traj(out / "trajectory.csv");
    cfg.trajectory_csv = &traj;
    std::ofstream mons(out / "monitors.csv");
    std::vector<std::pair<double, double>> dev_series;
    if (fx.metric_kind)
        mons << "step,t,min_eig,max_dev\n";
    else
        mons << "step,t,sup,inf,dev_from_mean\n";
    cfg.snapshot_hook = [&](long step, double t, const MetricField* g,
                            const ScalarField* sc) {
        char line[192];
        if (g) {
            MetricCheckResult chk = check_metric(*g);
            double dev = 0.0;
            MetricField flat = MetricField::identity(g->grid);
            for (std::size_t i = 0; i < g->a.size(); ++i)
                dev = std::max(dev, std::abs(g->a[i] - flat.a[i]));
            std::snprintf(line, sizeof line, "%ld,%.17g,%.17g,%.17g\n", step, t,
                          chk.min_eigenvalue, dev);
        } else {
            double sup = -1e300, inf = 1e300, mean = 0.0;
            for (const cplx& z : sc->v) {
                sup = std::max(sup, z.real());
                inf = std::min(inf, z.real());
                mean += z.real();
            }
            mean /= double(sc->size());
            double dev = std::max(sup - mean, mean - inf);
            std::snprintf(line, sizeof line, "%ld,%.17g,%.17g,%.17g,%.17g\n", step,
                          t, sup, inf, dev);
            dev_series.emplace_back(t, dev);
        }
        mons << line;
    };

    {
        std::ofstream snap(out / "initial.dat");
        if (fx.metric_kind)
            dump_field(snap, fx.g0.to_form());
        else
            dump_field(snap, fx.s0);
    }

    FlowResult res;
    std::string failure;
    try {
        res = run_flow(cfg, fx.metric_kind ? &fx.g0 : nullptr,
                       fx.metric_kind ? nullptr : &fx.s0);
    } catch (const grid_error& e) {
        failure = e.what();
    }
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                wall0)
                      .count();

    int code = 0;
    json j;
    j["kind"] = s.kind;
    j["preset"] = s.preset;
    j["seed"] = s.seed;
    j["grid"] = {{"m", s.m}, {"res", s.res}, {"active", s.active}};
    j["wall_time_s"] = wall;
    if (!failure.empty()) {
        j["termination"] = "error";
        j["message"] = failure;
        code = 3;
        log_msg(LogLevel::Error, failure);
        write_summary(out, j);
        return code;
    }
    {
        std::ofstream snap(out / "final.dat");
        if (fx.metric_kind)
            dump_field(snap, res.g.to_form());
        else
            dump_field(snap, res.scalar);
    }
    j["termination"] = to_string(res.reason);
    j["converged"] = (res.reason == FlowTermination::Converged);
    j["t_final"] = res.t;
    j["steps"] = res.steps;
    j["final_rhs_norm"] = res.final_rhs_norm;
    j["initial_balanced"] = res.initial_balanced;
    j["max_balanced"] = res.max_balanced;
    j["volume_initial"] = res.volume_initial;
    j["max_volume_drift"] = res.max_volume_drift;
    j["min_eig_seen"] = res.min_eig_seen;
    if (!res.message.empty()) j["message"] = res.message;
    if (cfg.kind == FlowKind::FuYau)
        j["fit_decay_rate"] = fit_decay_rate(dev_series);

    switch (res.reason) {
        case FlowTermination::Converged:
        case FlowTermination::TimeEnd:
            code = 0;
            break;
        case FlowTermination::PositivityLoss:
        case FlowTermination::ParabolicityLoss:
            code = 2;
            log_msg(LogLevel::Error,
                    breach_line(to_string(res.reason), res.t, res.min_eig_seen, 0.0));
            break;
        default:
            code = 3;
            break;
    }
    if (code == 0 && res.max_balanced > s.balanced_breach) {
        code = 2;
        log_msg(LogLevel::Error, breach_line("balanced_residual", res.t,
                                             res.max_balanced, s.balanced_breach));
    }
    j["exit_code"] = code;
    write_summary(out, j);
    return code;
}

int run_ode_scenario(const Scenario& s) {
    auto wall0 = std::chrono::steady_clock::now();
    fs::create_directories(s.out);
    fs::path out(s.out);
    OdeState init{0.0, s.v0, s.v1, s.v2};
    OdeTrajectory tr = integrate_ode(init, s.ode_t_end, s.ode_tol, s.fixed_dt);
    {
        std::ofstream csv(out / "trajectory.csv");
        csv << "step,t,v,v1,v2,err\n";
        char line[224];
        long step = 0;
        for (const auto& r : tr.rows) {
            std::snprintf(line, sizeof line, "%ld,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                          step++, r[0], r[1], r[2], r[3], r[4]);
            csv << line;
        }
    }
    json j;
    j["kind"] = s.kind;
    j["seed"] = s.seed;
    j["initial"] = {s.v0, s.v1, s.v2};
    j["t_final"] = tr.rows.empty() ? 0.0 : tr.rows.back()[0];
    j["v_final"] = tr.rows.empty() ? 0.0 : tr.rows.back()[1];
    j["rows"] = tr.rows.size();
    j["blew_up"] = tr.blew_up;
    if (tr.blew_up) j["blowup_bracket"] = {tr.blowup_lo, tr.blowup_hi};
    j["dt_underflow"] = tr.dt_underflow;
    j["wall_time_s"] = std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - wall0)
                           .count();
    int code = tr.dt_underflow ? 3 : 0;
    j["exit_code"] = code;
    write_summary(out, j);
    return code;
}

int run_sugra_check_scenario(const Scenario& s) {
    auto wall0 = std::chrono::steady_clock::now();
    fs::create_directories(s.out);
    fs::path out(s.out);
    json j;
    j["kind"] = s.kind;
    j["seed"] = s.seed;
    j["eps"] = s.eps;
    std::vector<int> resolutions = s.res_list.empty()
                                       ? std::vector<int>{s.res}
                                       : s.res_list;
    int coarse = s.coarse_mask_res;
    if (coarse == 0 && resolutions.size() > 1)
        coarse = *std::min_element(resolutions.begin(), resolutions.end());
    json runs = json::array();
    std::vector<double> full_resids;
    bool all_pass = true;
    std::ofstream csv(out / "residuals.csv");
    csv << "res,c_residual,d_residual,einstein_residual,flux_residual\n";
    for (int r : resolutions) {
        WarpedAnsatz wa = duff_stelle_data(r, s.eps, coarse);
        DuffStelleReport rep = duff_stelle_check(wa, s.sugra_tol);
        auto [einstein, flux] = sugra_field_residual(wa);
        char line[224];
        std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g,%.17g\n", r,
                      rep.c_residual, rep.d_residual, einstein, flux);
        csv << line;
        json jr;
        jr["res"] = r;
        jr["flat_g3"] = rep.flat_g3;
        jr["flat_gbar8"] = rep.flat_gbar8;
        jr["c_pass"] = rep.c_pass;
        jr["d_pass"] = rep.d_pass;
        jr["c_residual"] = rep.c_residual;
        jr["d_residual"] = rep.d_residual;
        jr["einstein_residual"] = einstein;
        jr["flux_residual"] = flux;
        runs.push_back(jr);
        full_resids.push_back(einstein);
        all_pass = all_pass && rep.c_pass && rep.d_pass;
    }
    j["runs"] = runs;
    if (full_resids.size() >= 2) {
        std::vector<double> orders;
        for (std::size_t i = 0; i + 1 < full_resids.size(); ++i)
            orders.push_back(std::log2(full_resids[i] / full_resids[i + 1]));
        j["observed_orders"] = orders;
    }
    j["wall_time_s"] = std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - wall0)
                           .count();
    int code = all_pass ? 0 : 2;
    j["exit_code"] = code;
    write_summary(out, j);
    if (!all_pass)
        log_msg(LogLevel::Error,
                breach_line("duff_stelle", 0.0, full_resids.front(), s.sugra_tol));
    return code;
}

int run_homogeneous_scenario(const Scenario& s) {
    auto wall0 = std::chrono::steady_clock::now();
    fs::create_directories(s.out);
    fs::path out(s.out);
    HomogeneousState st;
    st.G.assign(11 * 11, 0.0);
    for (int i = 0; i < 11; ++i) st.G[i * 11 + i] = (i == 0) ? -1.0 : 1.0;
    st.beta.assign(8, 0.0);
    st.beta[0] = s.amplitude;
    st.Psi = Form4(8);
    if (s.perturb != 0.0) st.Psi.set(0, 1, 2, 3, s.perturb);

    const int n = 11;
    auto pack = [&](const std::vector<double>& G, OdeVec& y) {
        y.resize(66);
        int c = 0;
        for (int i = 0; i < n; ++i)
            for (int jj = i; jj < n; ++jj) y[c++] = G[i * n + jj];
    };
    auto unpack = [&](const OdeVec& y, std::vector<double>& G) {
        int c = 0;
        for (int i = 0; i < n; ++i)
            for (int jj = i; jj < n; ++jj) {
                G[i * n + jj] = y[c];
                G[jj * n + i] = y[c];
                ++c;
            }
    };
    double last_fnorm2 = 0.0;
    auto rhs = [&](double, const OdeVec& y, OdeVec& dy) -> bool {
        HomogeneousState cur = st;
        unpack(y, cur.G);
        try {
            HomogeneousRates r = homogeneous_flow_rhs(cur);
            last_fnorm2 = r.f_norm2;
            pack(r.Gdot, dy);
            return true;
        } catch (const grid_error&) {
            return false;
        }
    };
    OdeOptions opt;
    opt.rel_tol = s.rel_tol;
    opt.abs_tol = s.abs_tol;
    opt.dt_init = s.dt_init;
    OdeVec y0;
    pack(st.G, y0);
    AdaptiveRk4 stepper(rhs, opt, 0.0, std::move(y0));

    std::ofstream csv(out / "trajectory.csv");
    csv << "step,t,blowup_norm,f_norm2\n";
    char line[160];
    long step = 0;
    bool blew_up = false, underflow = false;
    HomogeneousState cur = st;
    auto emit = [&](double t) {
        unpack(stepper.y(), cur.G);
        double bn = homogeneous_blowup_norm(cur);
        OdeVec dy;
        rhs(t, stepper.y(), dy);
        std::snprintf(line, sizeof line, "%ld,%.17g,%.17g,%.17g\n", step, t, bn,
                      last_fnorm2);
        csv << line;
        return bn;
    };
    emit(0.0);
    while (stepper.t() < s.t_end && step < s.max_steps) {
        StepOutcome oc = stepper.step(s.t_end);
        if (oc != StepOutcome::Accepted) {
            underflow = true;
            break;
        }
        ++step;
        double bn = emit(stepper.t());
        if (bn > 1e8) {
            blew_up = true;
            break;
        }
    }
    json j;
    j["kind"] = s.kind;
    j["seed"] = s.seed;
    j["t_final"] = stepper.t();
    j["steps"] = step;
    j["blew_up"] = blew_up;
    j["dt_underflow"] = underflow;
    unpack(stepper.y(), cur.G);
    j["final_blowup_norm"] = homogeneous_blowup_norm(cur);
    j["wall_time_s"] = std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - wall0)
                           .count();
    int code = underflow ? 3 : 0;
    j["exit_code"] = code;
    write_summary(out, j);
    return code;
}

int run_verify_scenario(const Scenario& s) {
    auto wall0 = std::chrono::steady_clock::now();
    fs::create_directories(s.out);
    fs::path out(s.out);
    std::vector<OracleReport> reps = run_verification(s.seed, s.count);
    json arr = json::array();
    bool all = true;
    for (const auto& r : reps) {
        json jr;
        jr["name"] = r.name;
        jr["max_dev"] = r.max_dev;
        jr["order"] = r.order;
        jr["tol"] = r.tol;
        jr["pass"] = r.pass;
        arr.push_back(jr);
        all = all && r.pass;
        log_msg(LogLevel::Info, r.name + (r.pass ? ": pass" : ": FAIL"));
    }
    {
        std::ofstream os(out / "verify.json");
        os << arr.dump(2) << "\n";
    }
    std::cout << arr.dump(2) << "\n";
    json j;
    j["kind"] = s.kind;
    j["seed"] = s.seed;
    j["count"] = s.count;
    j["all_pass"] = all;
    j["wall_time_s"] = std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - wall0)
                           .count();
    int code = all ? 0 : 2;
    j["exit_code"] = code;
    write_summary(out, j);
    return code;
}

} // namespace

int run_scenario(const Scenario& s) {
    log_msg(LogLevel::Info, "running scenario kind=" + s.kind + " out=" + s.out);
    if (s.kind == "sugra-ode") return run_ode_scenario(s);
    if (s.kind == "sugra-check") return run_sugra_check_scenario(s);
    if (s.kind == "verify") return run_verify_scenario(s);
    if (s.kind == "homogeneous-flow") return run_homogeneous_scenario(s);
    return run_flow_scenario(s);
}

// ---------------------------------------------------------------------------
// Report

int run_report(const std::string& run_dir) {
    fs::path dir(run_dir);
    fs::path csv_path = dir / "trajectory.csv";
    std::ifstream in(csv_path);
    if (!in) {
        log_msg(LogLevel::Error, "missing artifact: " + csv_path.string());
        return 1;
    }
    std::string header;
    if (!std::getline(in, header)) {
        log_msg(LogLevel::Error, "empty trajectory: " + csv_path.string());
        return 1;
    }
    std::vector<std::string> cols;
    {
        std::stringstream ss(header);
        std::string tok;
        while (std::getline(ss, tok, ',')) cols.push_back(trim(tok));
    }
    int tcol = -1;
    for (std::size_t i = 0; i < cols.size(); ++i)
        if (cols[i] == "t") tcol = int(i);
    if (tcol < 0) {
        log_msg(LogLevel::Error, "trajectory has no 't' column");
        return 1;
    }
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) row.push_back(std::stod(tok));
        if (row.size() == cols.size()) rows.push_back(std::move(row));
    }
    const std::size_t max_rows = 512;
    std::size_t stride = rows.size() > max_rows
                             ? (rows.size() + max_rows - 1) / max_rows
                             : 1;
    for (std::size_t c = 0; c < cols.size(); ++c) {
        if (int(c) == tcol || cols[c] == "step" || cols[c] == "dt") continue;
        std::ofstream os(dir / (cols[c] + ".dat"));
        os << "# t " << cols[c] << "\n";
        char buf[96];
        for (std::size_t r = 0; r < rows.size(); r += stride) {
            std::snprintf(buf, sizeof buf, "%.17g %.17g\n", rows[r][tcol],
                          rows[r][c]);
            os << buf;
        }
        // always include the final row
        if (stride > 1 && (rows.size() - 1) % stride != 0 && !rows.empty()) {
            std::snprintf(buf, sizeof buf, "%.17g %.17g\n",
                          rows.back()[tcol], rows.back()[c]);
            os << buf;
        }
    }
    return 0;
}

} // namespace sf
