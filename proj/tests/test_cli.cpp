#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const char* cli_path() { return STRINGFLOW_CLI_PATH; }

int run_cli(const std::string& args) {
    std::string cmd = std::string(cli_path()) + " " + args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -2;
}

fs::path fresh_dir(const std::string& tag) {
    fs::path d = fs::temp_directory_path() / ("sf_cli_" + tag);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

void write_file(const fs::path& p, const std::string& body) {
    std::ofstream os(p);
    os << body;
}

json load_json(const fs::path& p) {
    std::ifstream is(p);
    REQUIRE(is.good());
    return json::parse(is);
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    REQUIRE(is.good());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("flow: trivial Monge-Ampere scenario converges immediately") {
    fs::path d = fresh_dir("ma_flat");
    write_file(d / "sc.ini",
               "[run]\nkind = ma\nout = " + (d / "out").string() +
                   "\n[grid]\nm = 2\nres = 8\nactive = 0,1\n"
                   "[initial]\npreset = flat\n"
                   "[flow]\nt_end = 0.2\nstop_tol = 1e-10\n");
    CHECK(run_cli("flow --scenario " + (d / "sc.ini").string()) == 0);
    json j = load_json(d / "out" / "summary.json");
    CHECK(j["termination"] == "converged");
    CHECK(j["steps"].get<long>() <= 1);
    CHECK(fs::exists(d / "out" / "final.dat"));
    CHECK(fs::exists(d / "out" / "trajectory.csv"));
}

TEST_CASE("sugra-ode: stationary start stays constant in the CSV") {
    fs::path d = fresh_dir("ode");
    write_file(d / "sc.ini", "[run]\nkind = sugra-ode\nout = " +
                                 (d / "out").string() +
                                 "\n[ode]\nv0 = 2\node_t_end = 5\n");
    CHECK(run_cli("sugra-ode --scenario " + (d / "sc.ini").string()) == 0);
    std::ifstream csv(d / "out" / "trajectory.csv");
    REQUIRE(csv.good());
    std::string line;
    REQUIRE(std::getline(csv, line));
    CHECK(line == "step,t,v,v1,v2,err");
    int nrows = 0;
    while (std::getline(csv, line)) {
        std::stringstream ss(line);
        std::string tok;
        std::vector<double> row;
        while (std::getline(ss, tok, ',')) row.push_back(std::stod(tok));
        REQUIRE(row.size() == 6);
        CHECK(std::abs(row[2] - 2.0) < 1e-12);
        ++nrows;
    }
    CHECK(nrows > 1);
}

TEST_CASE("malformed scenarios exit with code 1") {
    fs::path d = fresh_dir("bad");
    write_file(d / "garbage.ini", "[run\nkind ma\n");
    CHECK(run_cli("flow --scenario " + (d / "garbage.ini").string()) == 1);

    write_file(d / "unknown.ini", "[run]\nkind = warp-drive\n");
    CHECK(run_cli("flow --scenario " + (d / "unknown.ini").string()) == 1);

    CHECK(run_cli("flow --scenario " + (d / "missing.ini").string()) == 1);

    // missing required subcommand / unknown flag are usage errors
    CHECK(run_cli("") == 1);
    CHECK(run_cli("flow --no-such-flag") == 1);
}

TEST_CASE("monitor breach exits with code 2") {
    fs::path d = fresh_dir("breach");
    write_file(d / "sc.ini",
               "[run]\nkind = anomaly\nout = " + (d / "out").string() +
                   "\n[grid]\nm = 3\nres = 8\nactive = 0,1,2,3\n"
                   "[initial]\npreset = fu-yau-ansatz\namplitude = 0.2\n"
                   "[flow]\nuse_direct_11 = true\nt_end = 0.01\n"
                   "stop_tol = 1e-14\nbalanced_breach = 1e-30\n");
    CHECK(run_cli("flow --scenario " + (d / "sc.ini").string()) == 2);
    json j = load_json(d / "out" / "summary.json");
    CHECK(j["exit_code"].get<int>() == 2);
}

TEST_CASE("hitting the step limit exits with code 3") {
    fs::path d = fresh_dir("maxsteps");
    write_file(d / "sc.ini",
               "[run]\nkind = anomaly\nout = " + (d / "out").string() +
                   "\n[grid]\nm = 3\nres = 8\nactive = 0,1,2,3\n"
                   "[initial]\npreset = fu-yau-ansatz\namplitude = 0.2\n"
                   "[flow]\nuse_direct_11 = true\nt_end = 10\n"
                   "stop_tol = 0\nmax_steps = 1\n");
    CHECK(run_cli("flow --scenario " + (d / "sc.ini").string()) == 3);
    json j = load_json(d / "out" / "summary.json");
    CHECK(j["termination"] == "max-steps");
}

TEST_CASE("verify subcommand writes a passing report") {
    fs::path d = fresh_dir("verify");
    write_file(d / "sc.ini", "[run]\nkind = verify\nout = " +
                                 (d / "out").string() + "\nseed = 99\n"
                                 "[verify]\ncount = 5\n");
    CHECK(run_cli("verify --scenario " + (d / "sc.ini").string()) == 0);
    json j = load_json(d / "out" / "verify.json");
    REQUIRE(j.is_array());
    CHECK(j.size() >= 8);
    for (const auto& rep : j) CHECK(rep["pass"].get<bool>());
}

TEST_CASE("report emits series files and is idempotent") {
    fs::path d = fresh_dir("report");
    write_file(d / "sc.ini", "[run]\nkind = sugra-ode\nout = " +
                                 (d / "out").string() +
                                 "\n[ode]\nv0 = 0\node_t_end = 0.5\n");
    REQUIRE(run_cli("sugra-ode --scenario " + (d / "sc.ini").string()) == 0);
    REQUIRE(run_cli("report --run " + (d / "out").string()) == 0);
    CHECK(fs::exists(d / "out" / "v.dat"));
    CHECK(fs::exists(d / "out" / "v1.dat"));
    std::string first = slurp(d / "out" / "v.dat");
    REQUIRE(run_cli("report --run " + (d / "out").string()) == 0);
    CHECK(slurp(d / "out" / "v.dat") == first);

    // missing artifacts give exit 1
    fs::path empty = fresh_dir("report_empty");
    CHECK(run_cli("report --run " + empty.string()) == 1);
}

TEST_CASE("identical seeds reproduce byte-identical trajectories") {
    fs::path d = fresh_dir("determinism");
    std::string base =
        "[run]\nkind = anomaly\nseed = 42\nout = OUTDIR\n"
        "[grid]\nm = 3\nres = 8\nactive = 0,1,2,3\n"
        "[initial]\npreset = fu-yau-ansatz\namplitude = 0.15\n"
        "[flow]\nuse_direct_11 = true\nt_end = 0.02\nstop_tol = 1e-14\n"
        "monitor_every = 2\n";
    for (const char* run : {"a", "b"}) {
        std::string body = base;
        body.replace(body.find("OUTDIR"), 6, (d / run).string());
        write_file(d / (std::string("sc_") + run + ".ini"), body);
        REQUIRE(run_cli("flow --scenario " +
                        (d / (std::string("sc_") + run + ".ini")).string()) == 0);
    }
    CHECK(slurp(d / "a" / "trajectory.csv") == slurp(d / "b" / "trajectory.csv"));
    CHECK(slurp(d / "a" / "final.dat") == slurp(d / "b" / "final.dat"));
}
