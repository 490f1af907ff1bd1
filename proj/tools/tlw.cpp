// Command-line front end. Every subcommand builds one scenario from, in increasing
// precedence, the built-in defaults, an optional --config file and the flags given.
//
// Exit codes: 0 success, 2 rejected input, 3 numerical failure, 1 anything else.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>

#include "tlw/errors.hpp"
#include "tlw/scenario.hpp"

using nlohmann::json;

namespace {

// Flags overlaid on the config file; only flags the user actually passed are applied.
struct Overlay {
    std::vector<std::pair<CLI::Option*, std::function<void(json&)>>> items;

    template <class T>
    CLI::Option* add(CLI::App* app, const std::string& flag, T& storage, std::vector<std::string> path, const std::string& help) {
        CLI::Option* opt = app->add_option(flag, storage, help);
        items.emplace_back(opt, [&storage, path](json& j) {
            json* node = &j;
            for (std::size_t i = 0; i + 1 < path.size(); ++i) node = &(*node)[path[i]];
            (*node)[path.back()] = storage;
        });
        return opt;
    }

    void apply(json& j) const {
        for (const auto& [opt, fn] : items)
            if (opt->count() > 0) fn(j);
    }
};

struct Storage {
    std::string name, model, branch, shape, scheme, initial, direction, format;
    double kappa = 0, c = 0, amplitude = 0, width = 0, cutoff = 0, dt = 0, T = 0, perturbation = 0;
    double A0 = 0, B0 = 0, epsilon = 0, horizon = 0, lemma_s = 0;
    int tau = 0, dim = 0, modes = 0, order = 0, store_every = 0;
    std::uint64_t seed = 0;
    std::vector<double> particle, speeds, deltas, mu, B;
};

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw tlw::ValidationError("config", "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw tlw::ValidationError("config", std::string("malformed JSON in ") + path + ": " + e.what());
    }
}

std::string output_dir(const std::string& flag, const std::string& configured) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("TLW_OUTPUT_DIR"); env && *env) return env;
    return configured;
}

void report_error(const char* kind, const std::string& reason, const std::string& message) {
    std::cerr << json{{"status", "error"}, {"kind", kind}, {"reason", reason}, {"message", message}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-level particle coupled to a wave field: stationary states, dynamics and stability."};
    app.require_subcommand(1);

    Storage st;
    Overlay overlay;
    std::string config_path, out_flag;
    bool no_equilibrium_field = false;

    const std::vector<std::string> runs{"branches", "simulate", "linearize", "spectrum", "count",
                                        "dispersion", "growth", "plemelj"};
    std::vector<CLI::App*> run_apps;
    for (const auto& r : runs) {
        CLI::App* sub = app.add_subcommand(r, "Run a '" + r + "' scenario");
        sub->add_option("--config", config_path, "Scenario JSON file");
        sub->add_option("--out", out_flag, "Output directory (overrides TLW_OUTPUT_DIR and output.dir)");
        overlay.add(sub, "--name", st.name, {"name"}, "Scenario name");
        overlay.add(sub, "--model", st.model, {"model"}, "hartree | coupled");
        overlay.add(sub, "--branch", st.branch, {"branch"}, "symmetric_plus | symmetric_minus | asym_plus | asym_minus");
        overlay.add(sub, "--kappa", st.kappa, {"kappa"}, "Coupling constant");
        overlay.add(sub, "--tau", st.tau, {"tau"}, "+1 or -1");
        overlay.add(sub, "--c", st.c, {"c"}, "Wave speed");
        overlay.add(sub, "--shape", st.shape, {"shape", "kind"}, "gaussian | bump");
        overlay.add(sub, "--amplitude", st.amplitude, {"shape", "amplitude"}, "Form function amplitude (recalibrated)");
        overlay.add(sub, "--width", st.width, {"shape", "width"}, "Form function width");
        overlay.add(sub, "--dim", st.dim, {"shape", "dim"}, "Space dimension (>= 3)");
        overlay.add(sub, "--modes", st.modes, {"grid", "modes"}, "Field modes");
        overlay.add(sub, "--order", st.order, {"grid", "order"}, "Gauss-Legendre panel order");
        overlay.add(sub, "--cutoff", st.cutoff, {"grid", "cutoff"}, "Wave-number cutoff (0 = automatic)");
        overlay.add(sub, "--dt", st.dt, {"numerics", "dt"}, "Time step");
        overlay.add(sub, "--T", st.T, {"numerics", "T"}, "Final time");
        overlay.add(sub, "--store-every", st.store_every, {"numerics", "store_every"}, "Output stride in steps");
        overlay.add(sub, "--seed", st.seed, {"numerics", "seed"}, "Random seed");
        overlay.add(sub, "--scheme", st.scheme, {"numerics", "scheme"}, "gauss4 | midpoint | strang | triple_jump");
        overlay.add(sub, "--initial", st.initial, {"initial", "kind"}, "branch | vector");
        overlay.add(sub, "--particle", st.particle, {"initial", "particle"}, "Four real components")->expected(4);
        overlay.add(sub, "--perturbation", st.perturbation, {"initial", "perturbation"}, "Random kick size");
        sub->add_flag("--no-equilibrium-field", no_equilibrium_field, "Start the coupled field at rest at zero");
        overlay.add(sub, "--speeds", st.speeds, {"dispersion", "speeds"}, "Wave speeds for the root path");
        overlay.add(sub, "--A0", st.A0, {"dispersion", "A0"}, "Newton start, real part of lambda^2");
        overlay.add(sub, "--B0", st.B0, {"dispersion", "B0"}, "Newton start, imaginary part of lambda^2");
        overlay.add(sub, "--epsilon", st.epsilon, {"growth", "epsilon"}, "Escape radius");
        overlay.add(sub, "--deltas", st.deltas, {"growth", "deltas"}, "Initial perturbation sizes");
        overlay.add(sub, "--horizon", st.horizon, {"growth", "horizon"}, "Longest run");
        overlay.add(sub, "--direction", st.direction, {"growth", "direction"}, "eigenvector | lemma");
        overlay.add(sub, "--lemma-s", st.lemma_s, {"growth", "lemma_s"}, "Offset of the lemma direction");
        overlay.add(sub, "--mu", st.mu, {"plemelj", "mu"}, "Resonance positions");
        overlay.add(sub, "--B", st.B, {"plemelj", "B"}, "Distances from the cut");
        overlay.add(sub, "--format", st.format, {"output", "format"}, "csv | jsonl");
        run_apps.push_back(sub);
    }

    std::vector<std::string> sweep_models, sweep_branches;
    std::vector<double> sweep_kappas, sweep_cs;
    int workers = 0;
    CLI::App* sweep = app.add_subcommand("sweep", "Run a grid of scenarios in a bounded worker pool");
    sweep->add_option("--config", config_path, "Sweep JSON file: {base, axes, workers}");
    sweep->add_option("--out", out_flag, "Output directory (overrides TLW_OUTPUT_DIR)");
    auto* o_models = sweep->add_option("--models", sweep_models, "Model axis");
    auto* o_branches = sweep->add_option("--branches", sweep_branches, "Branch axis");
    auto* o_kappas = sweep->add_option("--kappas", sweep_kappas, "Kappa axis");
    auto* o_cs = sweep->add_option("--cs", sweep_cs, "Wave speed axis");
    sweep->add_option("--workers", workers, "Worker threads (TLW_WORKERS overrides)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        report_error("validation", "config", e.what());
        return 2;
    }

    try {
        if (sweep->parsed()) {
            tlw::SweepConfig cfg = config_path.empty() ? tlw::SweepConfig{} : tlw::sweep_from_json(read_json(config_path));
            if (o_models->count()) cfg.models = sweep_models;
            if (o_branches->count()) cfg.branches = sweep_branches;
            if (o_kappas->count()) cfg.kappas = sweep_kappas;
            if (o_cs->count()) cfg.speeds = sweep_cs;
            cfg.workers = tlw::worker_count(workers > 0 ? workers : cfg.workers);
            const std::string dir = output_dir(out_flag, "out/sweep");
            const auto records = tlw::run_sweep(cfg, dir);
            std::size_t failed = 0;
            for (const auto& r : records) failed += r.at("status") == "error";
            std::cout << json{{"status", "ok"}, {"cells", records.size()}, {"failed_cells", failed},
                              {"output", dir + "/sweep.jsonl"}}.dump() << '\n';
            return 0;
        }

        std::string run;
        for (std::size_t i = 0; i < runs.size(); ++i)
            if (run_apps[i]->parsed()) run = runs[i];
        json j = config_path.empty() ? json::object() : read_json(config_path);
        j["run"] = run;
        overlay.apply(j);
        if (no_equilibrium_field) j["initial"]["equilibrium_field"] = false;
        const tlw::Scenario s = tlw::scenario_from_json(j);
        const std::string dir = output_dir(out_flag, s.output.dir);
        const auto result = tlw::run_scenario(s, dir);
        std::cout << json{{"status", "ok"}, {"run", run}, {"output", dir}, {"files", result.files},
                          {"summary", result.summary}}.dump() << '\n';
        return 0;
    } catch (const tlw::ValidationError& e) {
        report_error("validation", e.reason(), e.what());
        return 2;
    } catch (const tlw::NumericalError& e) {
        report_error("numerical", e.reason(), e.what());
        return 3;
    } catch (const std::exception& e) {
        report_error("internal", "internal", e.what());
        return 1;
    }
}
