#ifndef STRINGFLOW_SCENARIO_HPP
#define STRINGFLOW_SCENARIO_HPP

#include "stringflow/grid.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace sf {

/// Malformed scenario file / invalid field combination. Messages carry the
/// file name, line number and field name; maps to exit code 1.
struct scenario_error : grid_error {
    using grid_error::grid_error;
};

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };
/// Parses STRINGFLOW_LOG (error|info|debug), default info.
LogLevel log_level();
void log_msg(LogLevel lvl, const std::string& msg);

/// Plain-text sectioned key=value configuration. `#` starts a comment,
/// keys are flattened to "section.key".
struct IniData {
    std::map<std::string, std::string> kv;
    std::string path;
    bool has(const std::string& key) const { return kv.count(key) != 0; }
    std::string get(const std::string& key, const std::string& dflt) const;
    double get_num(const std::string& key, double dflt) const;
    long get_int(const std::string& key, long dflt) const;
    bool get_bool(const std::string& key, bool dflt) const;
};
IniData parse_ini(const std::string& path);

struct Scenario {
    std::string kind; // anomaly|eta|ma|fu-yau|iib|sugra-ode|sugra-check|
                      // homogeneous-flow|verify
    std::string out = "run-out";
    std::uint64_t seed = 1;
    int threads = 1;
    std::size_t budget = 0; // 0 = library default

    // [grid]
    int m = 2;
    int res = 16;
    std::vector<int> active;

    // [initial]
    std::string preset = "flat"; // flat|conformal-mode|fu-yau-ansatz|
                                 // kahler-perturbation|manufactured
    double amplitude = 0.1;
    int mode_dim = 0;
    int mode_k = 1;
    double perturb = 0.0; // extra perturbation on top of the preset

    // [flow]
    double alpha_prime = 0.0;
    double t_end = 1.0;
    double stop_tol = 1e-8;
    long max_steps = 200000;
    int monitor_every = 10;
    double dt_init = 1e-3;
    double dt_max = 0.25;
    double rel_tol = 1e-8;
    double abs_tol = 1e-10;
    bool use_direct_11 = false;
    double balanced_breach = 1e30; // monitor threshold -> exit 2

    // [ma]
    double f_amplitude = 0.0;
    int f_mode_dim = 0;
    int f_mode_k = 1;

    // [ode]
    double v0 = 0.0, v1 = 0.0, v2 = 0.0;
    double ode_t_end = 10.0;
    double ode_tol = 1e-10;
    double fixed_dt = 0.0;

    // [sugra]
    double eps = 1e-3;
    int coarse_mask_res = 0;
    double sugra_tol = 1e-9;
    std::vector<int> res_list; // order study when non-empty

    // [verify]
    int count = 50;
};

/// Loads and validates a scenario file; unknown kinds and malformed values
/// throw scenario_error with line/field diagnostics.
Scenario load_scenario(const std::string& path);

/// Runs the scenario, writing trajectory.csv, monitors.csv, snapshot dumps
/// and summary.json into s.out. Returns the process exit code:
/// 0 completed/converged, 2 monitor breach, 3 numerical failure.
int run_scenario(const Scenario& s);

/// Emits downsampled two-column `<column>.dat` series from a completed run
/// directory; byte-identical on rerun. Returns 0, or 1 when artifacts are
/// missing.
int run_report(const std::string& run_dir);

} // namespace sf

#endif
