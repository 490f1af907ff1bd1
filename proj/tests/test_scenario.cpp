#include <catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "tlw/errors.hpp"
#include "tlw/scenario.hpp"

using namespace tlw;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("tlw_test_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

template <class F>
std::string rejection_reason(F&& f) {
    try {
        f();
    } catch (const ValidationError& e) {
        return e.reason();
    }
    return "accepted";
}

struct CliResult {
    int code = -1;
    json out, err;
};

CliResult cli(const std::string& args, const fs::path& dir) {
    const char* exe = std::getenv("TLW_CLI");
    REQUIRE(exe != nullptr);
    const fs::path o = dir / "stdout.txt", e = dir / "stderr.txt";
    const std::string cmd = std::string(exe) + " " + args + " > " + o.string() + " 2> " + e.string();
    const int st = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    // CLI11 may print usage text ahead of the JSON line; keep the last line.
    auto last_json = [](const std::string& s) {
        std::istringstream in(s);
        std::string line, last;
        while (std::getline(in, line))
            if (!line.empty() && line.front() == '{') last = line;
        return last.empty() ? json() : json::parse(last);
    };
    r.out = last_json(slurp(o));
    r.err = last_json(slurp(e));
    return r;
}

}  // namespace

TEST_CASE("scenario json round trip", "[scenario]") {
    const json cases[] = {
        json{{"run", "simulate"}, {"model", "hartree"}, {"branch", "symmetric_plus"}, {"kappa", 1.4}, {"numerics", {{"T", 5.0}}}},
        json{{"run", "count"}, {"model", "coupled"}, {"branch", "asym_minus"}, {"kappa", 2.42}, {"grid", {{"modes", 64}}}},
        json{{"run", "dispersion"}, {"tau", -1}, {"kappa", 0.5604}, {"shape", {{"width", 0.25}}}},
        json{{"run", "plemelj"}, {"plemelj", {{"mu", {1.0}}, {"B", {0.1, 0.01}}}}, {"output", {{"format", "jsonl"}}}},
    };
    for (const auto& j : cases) {
        const Scenario s = scenario_from_json(j);
        const json full = to_json(s);
        CHECK(to_json(scenario_from_json(full)) == full);
        for (const auto& [k, v] : j.items())
            if (!v.is_object()) CHECK(full.at(k) == v);
    }
    // Defaults are spelled out in full.
    const json d = to_json(scenario_from_json(json::object()));
    CHECK(d.at("grid").at("modes") == 256);
    CHECK(d.at("numerics").at("dt") == 1e-3);
    CHECK(d.at("dispersion").at("speeds").size() == 5);
}

TEST_CASE("scenario validation reasons", "[scenario]") {
    auto reason = [](const json& j) { return rejection_reason([&] { (void)scenario_from_json(j); }); };
    CHECK(reason({{"kapa", 1.4}}) == "config");
    CHECK(reason({{"grid", {{"mode", 64}}}}) == "config");
    CHECK(reason({{"run", "fly"}}) == "config");
    CHECK(reason({{"run", "count"}, {"branch", "asym_plus"}, {"kappa", 1.4}}) == "regime");
    CHECK(reason({{"run", "count"}, {"branch", "symmetric_plus"}, {"kappa", 2.0}}) == "threshold");
    CHECK(reason({{"run", "count"}}) == "config");
    CHECK(reason({{"branch", "symmetric_plus"}, {"tau", -1}}) == "config");
    CHECK(reason({{"kappa", -1.0}}) == "regime");
    CHECK(reason({{"shape", {{"dim", 2}}}}) == "dimension");
    CHECK(reason({{"shape", {{"width", 0.0}}}}) == "shape");
    CHECK(reason({{"grid", {{"modes", 40}}}}) == "config");
    CHECK(reason({{"run", "growth"}, {"branch", "symmetric_plus"}, {"kappa", 1.4}}) == "regime");
    CHECK(reason({{"run", "growth"}, {"branch", "symmetric_plus"}, {"kappa", 2.4}, {"growth", {{"deltas", {0.5}}}}}) == "domain");
    CHECK(reason({{"run", "dispersion"}, {"kappa", 0.5}}) == "config");
    CHECK(reason({{"run", "plemelj"}, {"plemelj", {{"mu", {-1.0}}}}}) == "domain");
    CHECK(reason({{"output", {{"format", "xml"}}}}) == "config");
    // The threshold only matters where the branches are involved.
    CHECK(reason({{"run", "plemelj"}, {"kappa", 2.0}}) == "accepted");

    const fs::path dir = scratch("bad_json");
    std::ofstream(dir / "broken.json") << "{ \"kappa\": ";
    CHECK(rejection_reason([&] { (void)load_scenario(dir / "broken.json"); }) == "config");
    CHECK(rejection_reason([&] { (void)load_scenario(dir / "missing.json"); }) == "config");
}

TEST_CASE("seventeen digit floats round trip", "[scenario]") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<int> ex(-300, 300);
    for (int i = 0; i < 10000; ++i) {
        const double x = std::ldexp(u(rng), ex(rng));
        CHECK(std::strtod(format_double(x).c_str(), nullptr) == x);
    }
    CHECK(std::strtod(format_double(0.1).c_str(), nullptr) == 0.1);
}

TEST_CASE("simulate is deterministic and conserves", "[scenario]") {
    const json j{{"run", "simulate"}, {"model", "hartree"}, {"branch", "symmetric_plus"}, {"kappa", 1.4},
                 {"initial", {{"perturbation", 0.05}}}, {"numerics", {{"T", 100.0}, {"dt", 1e-3}}}};
    const Scenario s = scenario_from_json(j);
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    const auto ra = run_scenario(s, a);
    run_scenario(s, b);
    CHECK(slurp(a / "trajectory.csv") == slurp(b / "trajectory.csv"));
    json ma = json::parse(slurp(a / "manifest.json")), mb = json::parse(slurp(b / "manifest.json"));
    ma.erase("created");
    mb.erase("created");
    CHECK(ma == mb);
    CHECK(ma.at("scenario") == to_json(s));

    const auto& cons = ra.summary.at("conservation");
    CHECK(cons.at("l2_ok") == true);
    CHECK(cons.at("energy_ok") == true);
    // Stable branch: the perturbed orbit stays a bounded loop near the orbit.
    const double d = ra.summary.at("max_orbit_distance").get<double>();
    CHECK(d < 0.2);
    CHECK(d > 0.01);
    const std::string csv = slurp(a / "trajectory.csv");
    CHECK(csv.rfind("t,q0,p0,q1,p1,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 1001);
}

TEST_CASE("count and dispersion runs", "[scenario]") {
    const fs::path dir = scratch("runs");
    const json c{{"run", "count"}, {"model", "coupled"}, {"branch", "symmetric_minus"}, {"kappa", 1.58}, {"c", 1.0},
                 {"grid", {{"modes", 128}}}};
    const auto r = run_scenario(scenario_from_json(c), dir / "count");
    CHECK(r.summary.at("verdict") == "spectrally_unstable");
    CHECK(r.summary.at("counts").at("N_complex") == 2);
    CHECK(r.summary.at("morse_index") == 3);
    CHECK(r.summary.at("diagnostics").empty());
    CHECK(fs::exists(dir / "count" / "verdict.json"));

    const json d{{"run", "dispersion"}, {"tau", -1}, {"kappa", 0.5604}, {"shape", {{"width", 0.25}}}};
    const auto rd = run_scenario(scenario_from_json(d), dir / "disp");
    CHECK(rd.summary.at("monotone_in_B") == true);
    CHECK(rd.summary.at("final_relative_gap").get<double>() <= 0.05);
    CHECK(rd.summary.at("roots").size() == 5);
    const std::string csv = slurp(dir / "disp" / "dispersion_path.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);

    const json p{{"run", "plemelj"}, {"output", {{"format", "jsonl"}}}};
    run_scenario(scenario_from_json(p), dir / "plem");
    std::ifstream in(dir / "plem" / "plemelj.jsonl");
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
        const json row = json::parse(line);
        CHECK(row.contains("error"));
        ++rows;
    }
    CHECK(rows == 9);
}

TEST_CASE("sweep ordering, isolation and worker independence", "[scenario]") {
    SweepConfig cfg;
    cfg.base = {{"run", "count"}, {"model", "hartree"}};
    cfg.branches = std::vector<std::string>{"symmetric_plus", "symmetric_minus", "asym_plus"};
    cfg.kappas = std::vector<double>{0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
    cfg.workers = 1;
    const auto one = run_sweep(cfg, scratch("sweep1"));
    cfg.workers = 3;
    const auto three = run_sweep(cfg, scratch("sweep3"));
    REQUIRE(one.size() == 18);
    CHECK(one == three);
    CHECK(slurp(fs::temp_directory_path() / ("tlw_test_" + std::to_string(::getpid())) / "sweep1" / "sweep.jsonl") ==
          slurp(fs::temp_directory_path() / ("tlw_test_" + std::to_string(::getpid())) / "sweep3" / "sweep.jsonl"));

    for (std::size_t i = 0; i < one.size(); ++i) {
        const auto& r = one[i];
        CHECK(r.at("cell") == i);
        const std::string b = r.at("branch");
        const double k = r.at("kappa");
        CHECK(b == cfg.branches->at(i / 6));
        CHECK(k == cfg.kappas->at(i % 6));
        INFO(b << " kappa=" << k);
        if (k == 2.0) {
            REQUIRE(r.at("status") == "error");
            CHECK(r.at("error").at("reason") == "threshold");
            continue;
        }
        if (b == "asym_plus" && k < 2.0) {
            CHECK(r.at("error").at("reason") == "regime");
            continue;
        }
        REQUIRE(r.at("status") == "ok");
        const bool stable = r.at("result").at("verdict") == "spectrally_stable";
        // Hartree tables: only the tau = +1 symmetric branch past the threshold is unstable.
        CHECK(stable == !(b == "symmetric_plus" && k > 2.0));
    }

    SweepConfig empty = cfg;
    empty.kappas = std::vector<double>{};
    const fs::path ed = scratch("sweep_empty");
    CHECK(run_sweep(empty, ed).empty());
    CHECK(slurp(ed / "sweep.jsonl").empty());

    const auto parsed = sweep_from_json({{"base", {{"run", "count"}}}, {"axes", {{"kappa", json::array()}}}, {"workers", 2}});
    REQUIRE(parsed.kappas.has_value());
    CHECK(parsed.kappas->empty());
    CHECK(rejection_reason([] { (void)sweep_from_json({{"axes", {{"speed", {1.0}}}}}); }) == "config");
    CHECK(rejection_reason([] { (void)sweep_from_json({{"workers", 0}}); }) == "config");
}

TEST_CASE("worker count from the environment", "[scenario]") {
    ::setenv("TLW_WORKERS", "4", 1);
    CHECK(worker_count(1) == 4);
    ::setenv("TLW_WORKERS", "zero", 1);
    CHECK(worker_count(2) == 2);
    ::unsetenv("TLW_WORKERS");
    CHECK(worker_count(0) == 1);
}

TEST_CASE("command line exit codes", "[scenario][cli]") {
    const fs::path dir = scratch("cli");
    const std::string out = " --out " + (dir / "o").string();

    auto ok = cli("branches --kappa 2.5" + out, dir);
    CHECK(ok.code == 0);
    CHECK(ok.out.at("status") == "ok");
    CHECK(ok.out.at("summary").at("branches").size() == 4);
    CHECK(fs::exists(dir / "o" / "manifest.json"));

    auto c = cli("count --model coupled --branch symmetric_minus --kappa 1.58 --modes 128" + out, dir);
    CHECK(c.code == 0);
    CHECK(c.out.at("summary").at("counts").at("N_complex") == 2);

    auto regime = cli("count --branch asym_plus --kappa 1.4" + out, dir);
    CHECK(regime.code == 2);
    CHECK(regime.err.at("kind") == "validation");
    CHECK(regime.err.at("reason") == "regime");

    auto thr = cli("count --branch symmetric_plus --kappa 2" + out, dir);
    CHECK(thr.code == 2);
    CHECK(thr.err.at("reason") == "threshold");

    CHECK(cli("count --no-such-flag 1" + out, dir).code == 2);
    CHECK(cli("simulate --config " + (dir / "absent.json").string() + out, dir).code == 2);

    // A cutoff far inside the transform support fails the grid quality check.
    auto num = cli("simulate --model coupled --branch symmetric_plus --kappa 1.4 --cutoff 1 --modes 32 --T 1" + out, dir);
    CHECK(num.code == 3);
    CHECK(num.err.at("kind") == "numerical");

    std::ofstream(dir / "sweep.json") << json{{"base", {{"run", "count"}}},
                                               {"axes", {{"branch", {"symmetric_plus"}}, {"kappa", {1.4, 2.0, 2.5}}}}}.dump();
    auto sw = cli("sweep --config " + (dir / "sweep.json").string() + out, dir);
    CHECK(sw.code == 0);
    CHECK(sw.out.at("cells") == 3);
    CHECK(sw.out.at("failed_cells") == 1);

    std::ofstream(dir / "empty.json") << json{{"axes", {{"kappa", json::array()}}}}.dump();
    auto e = cli("sweep --config " + (dir / "empty.json").string() + out, dir);
    CHECK(e.code == 0);
    CHECK(e.out.at("cells") == 0);

    ::setenv("TLW_OUTPUT_DIR", (dir / "env").string().c_str(), 1);
    auto env = cli("branches --kappa 1.4", dir);
    ::unsetenv("TLW_OUTPUT_DIR");
    CHECK(env.code == 0);
    CHECK(fs::exists(dir / "env" / "branches.csv"));
}
