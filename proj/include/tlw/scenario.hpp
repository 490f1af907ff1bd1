#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tlw/coupling.hpp"
#include "tlw/stationary.hpp"

namespace tlw {

enum class ModelKind { hartree, coupled };
enum class RunKind { branches, simulate, linearize, spectrum, count, dispersion, growth, plemelj };

std::string to_string(ModelKind m);
std::string to_string(RunKind r);
ModelKind model_from_string(const std::string& s);
RunKind run_from_string(const std::string& s);

struct ShapeConfig {
    ShapeKind kind = ShapeKind::gaussian;
    double amplitude = 1.0;  // recalibrated to kappa on the grid
    double width = 1.0;
    int dim = 3;
};

struct GridConfig {
    int modes = 256;      // multiple of the panel order
    int order = 16;
    double cutoff = 0.0;  // 0 picks the cutoff from the shape tail
};

struct NumericsConfig {
    double dt = 1e-3;
    double T = 100.0;
    int store_every = 100;
    std::uint64_t seed = 7;
    std::string scheme;  // empty: gauss4 (hartree) or triple_jump (coupled)
};

// Initial data for simulate / linearize.
struct InitialConfig {
    std::string kind = "branch";  // branch | vector
    std::array<double, 4> particle{1.0, 0.0, 0.0, 0.0};
    double perturbation = 0.0;    // size of a seeded random kick, renormalized to |X| = 1
    bool equilibrium_field = true;
};

struct DispersionConfig {
    std::vector<double> speeds{1.0, 2.0, 5.0, 10.0, 20.0};
    double A0 = -4.5;
    double B0 = 0.7;
};

struct GrowthConfig {
    double epsilon = 0.1;
    std::vector<double> deltas{1e-3, 1e-4, 1e-5};
    double horizon = 200.0;
    double t0 = 1.0;
    double fit_ceiling = 0.1;
    std::string direction = "eigenvector";  // eigenvector | lemma
    double lemma_s = 0.1;
};

struct PlemeljConfig {
    std::vector<double> mu{0.5, 1.0, 2.0};
    std::vector<double> B{1e-1, 1e-2, 1e-3};
};

struct OutputConfig {
    std::string dir = "out";
    std::string format = "csv";  // csv | jsonl
};

struct Scenario {
    std::string name = "scenario";
    RunKind run = RunKind::branches;
    ModelKind model = ModelKind::hartree;
    std::optional<BranchLabel> branch;
    double kappa = 1.4;
    int tau = 0;  // derived from a symmetric branch; required by dispersion
    double c = 1.0;
    ShapeConfig shape;
    GridConfig grid;
    NumericsConfig numerics;
    InitialConfig initial;
    DispersionConfig dispersion;
    GrowthConfig growth;
    PlemeljConfig plemelj;
    OutputConfig output;
};

// Unknown keys and out-of-regime values throw ValidationError before anything runs.
Scenario scenario_from_json(const nlohmann::json& j);
// Every field, defaults included.
nlohmann::json to_json(const Scenario& s);
Scenario load_scenario(const std::filesystem::path& path);
void validate(const Scenario& s);

struct RunResult {
    nlohmann::json summary;
    std::vector<std::string> files;
};

// Writes data files plus manifest.json into `dir` (created when missing).
RunResult run_scenario(const Scenario& s, const std::filesystem::path& dir);

// An absent axis takes the base value; an empty axis makes an empty grid.
struct SweepConfig {
    nlohmann::json base = nlohmann::json::object();
    std::optional<std::vector<std::string>> models;
    std::optional<std::vector<std::string>> branches;
    std::optional<std::vector<double>> kappas;
    std::optional<std::vector<double>> speeds;
    int workers = 1;
};

SweepConfig sweep_from_json(const nlohmann::json& j);

// One record per cell in grid order (model, branch, kappa, c). A failing cell yields an
// error record and never stops the others. Records are also merged into sweep.jsonl.
std::vector<nlohmann::json> run_sweep(const SweepConfig& cfg, const std::filesystem::path& dir);

// Worker count: TLW_WORKERS when set and positive, else `fallback`.
int worker_count(int fallback);

std::string format_double(double x);

}  // namespace tlw
