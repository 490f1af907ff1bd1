#include "tlw/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <random>
#include <set>
#include <thread>

#include "tlw/counting.hpp"
#include "tlw/dispersion.hpp"
#include "tlw/dynamics.hpp"
#include "tlw/errors.hpp"
#include "tlw/instability.hpp"
#include "tlw/spectral.hpp"

namespace tlw {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(ModelKind m) { return m == ModelKind::hartree ? "hartree" : "coupled"; }

std::string to_string(RunKind r) {
    switch (r) {
        case RunKind::branches: return "branches";
        case RunKind::simulate: return "simulate";
        case RunKind::linearize: return "linearize";
        case RunKind::spectrum: return "spectrum";
        case RunKind::count: return "count";
        case RunKind::dispersion: return "dispersion";
        case RunKind::growth: return "growth";
        case RunKind::plemelj: return "plemelj";
    }
    return "branches";
}

ModelKind model_from_string(const std::string& s) {
    if (s == "hartree") return ModelKind::hartree;
    if (s == "coupled") return ModelKind::coupled;
    throw ValidationError("config", "unknown model '" + s + "'");
}

RunKind run_from_string(const std::string& s) {
    for (RunKind r : {RunKind::branches, RunKind::simulate, RunKind::linearize, RunKind::spectrum, RunKind::count,
                      RunKind::dispersion, RunKind::growth, RunKind::plemelj})
        if (to_string(r) == s) return r;
    throw ValidationError("config", "unknown run '" + s + "'");
}

std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace {

// Reads keys from one JSON object and rejects whatever it did not consume.
class Fields {
public:
    Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ValidationError("config", where_ + " must be an object");
    }

    template <class T>
    void get(const char* key, T& out) {
        if (!j_.contains(key)) return;
        used_.insert(key);
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ValidationError("config", where_ + "." + key + ": " + e.what());
        }
    }

    const json* sub(const char* key) {
        if (!j_.contains(key)) return nullptr;
        used_.insert(key);
        return &j_.at(key);
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) throw ValidationError("config", "unknown key '" + where_ + "." + it.key() + "'");
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> used_;
};

bool needs_branch(const Scenario& s) {
    switch (s.run) {
        case RunKind::linearize:
        case RunKind::spectrum:
        case RunKind::count:
        case RunKind::growth: return true;
        case RunKind::simulate: return s.initial.kind == "branch";
        default: return false;
    }
}

bool uses_kappa_threshold(RunKind r) {
    return r != RunKind::dispersion && r != RunKind::plemelj;
}

bool positive(double x) { return std::isfinite(x) && x > 0.0; }

}  // namespace

void validate(const Scenario& s) {
    require(!s.name.empty(), "config", "scenario name must not be empty");
    require(positive(s.kappa), "regime", "kappa must be positive");
    if (uses_kappa_threshold(s.run))
        require(s.kappa != 2.0, "threshold", "kappa = 2 is the degenerate threshold");
    require(positive(s.c), "config", "wave speed c must be positive");
    (void)make_shape(s.shape.kind, s.shape.amplitude, s.shape.width, s.shape.dim);

    require(s.grid.order == 8 || s.grid.order == 16 || s.grid.order == 32, "config", "grid order must be 8, 16 or 32");
    require(s.grid.modes >= s.grid.order && s.grid.modes % s.grid.order == 0, "config",
            "grid modes must be a positive multiple of the order");
    require(std::isfinite(s.grid.cutoff) && s.grid.cutoff >= 0.0, "config", "grid cutoff must be >= 0");

    const auto& n = s.numerics;
    require(positive(n.dt) && positive(n.T), "config", "dt and T must be positive");
    require(n.T / n.dt <= 1e8, "config", "more than 1e8 steps requested");
    require(n.store_every >= 1, "config", "store_every must be >= 1");
    if (!n.scheme.empty()) {
        if (s.model == ModelKind::hartree) (void)hartree_scheme_from_string(n.scheme);
        else (void)coupled_scheme_from_string(n.scheme);
    }

    if (s.branch) {
        if (is_extra(*s.branch)) {
            require(s.kappa > 2.0, "regime", "extra branches exist only for kappa > 2");
            require(s.tau == 0, "config", "tau does not apply to an extra branch");
        } else {
            const int t = *s.branch == BranchLabel::symmetric_plus ? 1 : -1;
            require(s.tau == 0 || s.tau == t, "config", "tau contradicts the branch");
        }
    }
    require(s.tau == 0 || s.tau == 1 || s.tau == -1, "config", "tau must be +1 or -1");
    if (needs_branch(s)) require(s.branch.has_value(), "config", to_string(s.run) + " needs a branch");

    const auto& in = s.initial;
    require(in.kind == "branch" || in.kind == "vector", "config", "initial.kind must be branch or vector");
    require(std::isfinite(in.perturbation) && in.perturbation >= 0.0, "config", "perturbation must be >= 0");
    if (in.kind == "vector" || s.run == RunKind::linearize) {
        double norm = 0.0;
        for (double x : in.particle) norm += x * x;
        require(std::isfinite(norm) && norm > 0.0, "config", "initial.particle must be a nonzero vector");
    }

    if (s.run == RunKind::growth) {
        const auto& g = s.growth;
        require(positive(g.epsilon) && positive(g.horizon) && positive(g.fit_ceiling), "config",
                "growth epsilon, horizon and fit_ceiling must be positive");
        require(!g.deltas.empty(), "config", "growth needs at least one delta");
        for (double d : g.deltas) require(d >= 1e-6 && d <= 1e-2 && d < g.epsilon, "domain", "delta must lie in [1e-6, 1e-2] below epsilon");
        require(g.direction == "eigenvector" || g.direction == "lemma", "config", "direction must be eigenvector or lemma");
        require(!is_extra(*s.branch), "regime", "extra branches are stable; nothing grows");
        const bool plus = *s.branch == BranchLabel::symmetric_plus;
        if (s.model == ModelKind::hartree)
            require(plus && s.kappa > 2.0, "regime", "the Hartree branch is unstable only for tau = +1, kappa > 2");
        else
            require(!plus || s.kappa > 2.0, "regime", "the coupled branch is stable for tau = +1, kappa < 2");
        require(g.direction == "eigenvector" || s.model == ModelKind::hartree, "config",
                "the lemma direction applies to the Hartree model");
    }
    if (s.run == RunKind::dispersion) {
        const int t = s.branch && !is_extra(*s.branch) ? (*s.branch == BranchLabel::symmetric_plus ? 1 : -1) : s.tau;
        require(t == 1 || t == -1, "config", "dispersion needs tau or a symmetric branch");
        require(!s.dispersion.speeds.empty(), "config", "dispersion needs at least one wave speed");
        for (double c : s.dispersion.speeds) require(positive(c), "config", "wave speeds must be positive");
        require(std::isfinite(s.dispersion.A0) && std::isfinite(s.dispersion.B0) && s.dispersion.B0 != 0.0, "config",
                "dispersion start needs finite A0 and nonzero B0");
    }
    if (s.run == RunKind::plemelj) {
        require(!s.plemelj.mu.empty() && !s.plemelj.B.empty(), "config", "plemelj needs mu and B values");
        for (double m : s.plemelj.mu) require(positive(m), "domain", "mu must be positive");
        for (double b : s.plemelj.B) require(positive(b), "domain", "B must be positive");
    }
    require(s.output.format == "csv" || s.output.format == "jsonl", "config", "output.format must be csv or jsonl");
}

Scenario scenario_from_json(const json& j) {
    Scenario s;
    Fields f(j, "scenario");
    std::string run = to_string(s.run), model = to_string(s.model), branch;
    f.get("name", s.name);
    f.get("run", run);
    f.get("model", model);
    f.get("branch", branch);
    f.get("kappa", s.kappa);
    f.get("tau", s.tau);
    f.get("c", s.c);
    s.run = run_from_string(run);
    s.model = model_from_string(model);
    if (!branch.empty()) {
        try {
            s.branch = branch_from_string(branch);
        } catch (const std::exception& e) {
            throw ValidationError("config", e.what());
        }
    }
    if (const json* p = f.sub("shape")) {
        Fields g(*p, "shape");
        std::string kind = to_string(s.shape.kind);
        g.get("kind", kind);
        g.get("amplitude", s.shape.amplitude);
        g.get("width", s.shape.width);
        g.get("dim", s.shape.dim);
        g.finish();
        try {
            s.shape.kind = shape_kind_from_string(kind);
        } catch (const std::exception& e) {
            throw ValidationError("config", e.what());
        }
    }
    if (const json* p = f.sub("grid")) {
        Fields g(*p, "grid");
        g.get("modes", s.grid.modes);
        g.get("order", s.grid.order);
        g.get("cutoff", s.grid.cutoff);
        g.finish();
    }
    if (const json* p = f.sub("numerics")) {
        Fields g(*p, "numerics");
        g.get("dt", s.numerics.dt);
        g.get("T", s.numerics.T);
        g.get("store_every", s.numerics.store_every);
        g.get("seed", s.numerics.seed);
        g.get("scheme", s.numerics.scheme);
        g.finish();
    }
    if (const json* p = f.sub("initial")) {
        Fields g(*p, "initial");
        g.get("kind", s.initial.kind);
        g.get("particle", s.initial.particle);
        g.get("perturbation", s.initial.perturbation);
        g.get("equilibrium_field", s.initial.equilibrium_field);
        g.finish();
    }
    if (const json* p = f.sub("dispersion")) {
        Fields g(*p, "dispersion");
        g.get("speeds", s.dispersion.speeds);
        g.get("A0", s.dispersion.A0);
        g.get("B0", s.dispersion.B0);
        g.finish();
    }
    if (const json* p = f.sub("growth")) {
        Fields g(*p, "growth");
        g.get("epsilon", s.growth.epsilon);
        g.get("deltas", s.growth.deltas);
        g.get("horizon", s.growth.horizon);
        g.get("t0", s.growth.t0);
        g.get("fit_ceiling", s.growth.fit_ceiling);
        g.get("direction", s.growth.direction);
        g.get("lemma_s", s.growth.lemma_s);
        g.finish();
    }
    if (const json* p = f.sub("plemelj")) {
        Fields g(*p, "plemelj");
        g.get("mu", s.plemelj.mu);
        g.get("B", s.plemelj.B);
        g.finish();
    }
    if (const json* p = f.sub("output")) {
        Fields g(*p, "output");
        g.get("dir", s.output.dir);
        g.get("format", s.output.format);
        g.finish();
    }
    f.finish();
    validate(s);
    return s;
}

json to_json(const Scenario& s) {
    return json{
        {"name", s.name},
        {"run", to_string(s.run)},
        {"model", to_string(s.model)},
        {"branch", s.branch ? to_string(*s.branch) : ""},
        {"kappa", s.kappa},
        {"tau", s.tau},
        {"c", s.c},
        {"shape", {{"kind", to_string(s.shape.kind)}, {"amplitude", s.shape.amplitude}, {"width", s.shape.width}, {"dim", s.shape.dim}}},
        {"grid", {{"modes", s.grid.modes}, {"order", s.grid.order}, {"cutoff", s.grid.cutoff}}},
        {"numerics", {{"dt", s.numerics.dt}, {"T", s.numerics.T}, {"store_every", s.numerics.store_every},
                      {"seed", s.numerics.seed}, {"scheme", s.numerics.scheme}}},
        {"initial", {{"kind", s.initial.kind}, {"particle", s.initial.particle}, {"perturbation", s.initial.perturbation},
                     {"equilibrium_field", s.initial.equilibrium_field}}},
        {"dispersion", {{"speeds", s.dispersion.speeds}, {"A0", s.dispersion.A0}, {"B0", s.dispersion.B0}}},
        {"growth", {{"epsilon", s.growth.epsilon}, {"deltas", s.growth.deltas}, {"horizon", s.growth.horizon},
                    {"t0", s.growth.t0}, {"fit_ceiling", s.growth.fit_ceiling}, {"direction", s.growth.direction},
                    {"lemma_s", s.growth.lemma_s}}},
        {"plemelj", {{"mu", s.plemelj.mu}, {"B", s.plemelj.B}}},
        {"output", {{"dir", s.output.dir}, {"format", s.output.format}}},
    };
}

Scenario load_scenario(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config", "cannot open scenario file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("config", std::string("malformed scenario file: ") + e.what());
    }
    return scenario_from_json(j);
}

namespace {

class Table {
public:
    Table(const fs::path& path, std::string format, std::vector<std::string> columns)
        : out_(path), format_(std::move(format)), columns_(std::move(columns)) {
        if (!out_) throw ValidationError("config", "cannot write " + path.string());
        if (format_ == "csv") {
            for (std::size_t i = 0; i < columns_.size(); ++i) out_ << (i ? "," : "") << columns_[i];
            out_ << '\n';
        }
    }

    void row(const std::vector<double>& values) {
        if (values.size() != columns_.size()) throw NumericalError("shape", "table row has the wrong width");
        if (format_ == "csv") {
            for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_double(values[i]);
            out_ << '\n';
        } else {
            json r = json::object();
            for (std::size_t i = 0; i < values.size(); ++i) r[columns_[i]] = values[i];
            out_ << r.dump() << '\n';
        }
    }

private:
    std::ofstream out_;
    std::string format_;
    std::vector<std::string> columns_;
};

struct Context {
    const Scenario& s;
    fs::path dir;
    RunResult result;
    json resolved = json::object();

    std::string table_name(const std::string& stem) const { return stem + (s.output.format == "csv" ? ".csv" : ".jsonl"); }

    Table table(const std::string& stem, std::vector<std::string> columns) {
        const std::string name = table_name(stem);
        result.files.push_back(name);
        return Table(dir / name, s.output.format, std::move(columns));
    }

    void write_json(const std::string& name, const json& j) {
        std::ofstream out(dir / name);
        if (!out) throw ValidationError("config", "cannot write " + (dir / name).string());
        out << j.dump(2) << '\n';
        result.files.push_back(name);
    }
};

struct Coupling {
    CouplingShape shape;
    RadialGrid grid;
    double kappa_grid = 0.0;
};

Coupling resolve_coupling(Context& ctx) {
    const Scenario& s = ctx.s;
    const CouplingShape base = make_shape(s.shape.kind, s.shape.amplitude, s.shape.width, s.shape.dim);
    const double cutoff = s.grid.cutoff > 0.0 ? s.grid.cutoff : choose_cutoff(base);
    Coupling c;
    c.grid = make_grid(cutoff, s.grid.modes / s.grid.order, s.grid.order);
    c.shape = calibrate_amplitude(base, s.kappa, c.grid);
    c.kappa_grid = compute_kappa(c.shape, c.grid);
    ctx.resolved["amplitude"] = c.shape.amplitude;
    ctx.resolved["cutoff"] = c.grid.cutoff;
    ctx.resolved["panels"] = c.grid.panels;
    ctx.resolved["modes"] = c.grid.size();
    ctx.resolved["kappa_grid"] = c.kappa_grid;
    return c;
}

int branch_tau(const Scenario& s) {
    if (s.branch && !is_extra(*s.branch)) return *s.branch == BranchLabel::symmetric_plus ? 1 : -1;
    return s.tau;
}

Vec4 initial_particle(const Scenario& s, const StationaryBranch* branch) {
    Vec4 X;
    if (s.initial.kind == "branch") X = branch->particle;
    else X = Vec4(s.initial.particle.data());
    if (s.initial.perturbation > 0.0) {
        std::mt19937_64 rng(s.numerics.seed);
        std::normal_distribution<double> normal;
        Vec4 kick;
        for (int i = 0; i < 4; ++i) kick(i) = normal(rng);
        X += s.initial.perturbation * kick.normalized();
    }
    return X.normalized();
}

RunOptions run_options(const Scenario& s) {
    RunOptions o;
    o.dt = s.numerics.dt;
    o.T = s.numerics.T;
    o.store_every = s.numerics.store_every;
    return o;
}

json branch_json(const StationaryBranch& b) {
    return {{"branch", to_string(b.label)}, {"kappa", b.kappa}, {"tau", b.tau()}, {"omega", b.omega},
            {"energy", b.energy}, {"classification", to_string(b.classification)},
            {"particle", {b.particle(0), b.particle(1), b.particle(2), b.particle(3)}}};
}

json conservation_json(const ConservationReport& r) {
    return {{"applicable", r.applicable}, {"l2_drift", r.l2_drift}, {"energy_drift_rel", r.energy_drift_rel},
            {"l2_tolerance", r.l2_tolerance}, {"energy_tolerance", r.energy_tolerance}, {"l2_ok", r.l2_ok},
            {"energy_ok", r.energy_ok}};
}

json spectral_json(const SpectralReport& r) {
    json j;
    j["eigenvalues"] = json::array();
    for (const auto& e : r.eigenvalues)
        j["eigenvalues"].push_back({{"re", e.value.real()}, {"im", e.value.imag()}, {"multiplicity", e.multiplicity},
                                    {"source", e.source}, {"tag", e.tag}});
    j["jordan"] = json::array();
    for (const auto& ji : r.jordan)
        j["jordan"].push_back({{"re", ji.eigenvalue.real()}, {"im", ji.eigenvalue.imag()},
                               {"algebraic", ji.algebraic}, {"geometric", ji.geometric}});
    j["essential"] = r.essential ? json(*r.essential) : json(nullptr);
    j["max_mismatch"] = r.max_mismatch;
    return j;
}

json verdict_json(const StabilityVerdict& v) {
    json ev = json::array();
    for (const auto& e : v.evidence)
        ev.push_back({{"name", e.name}, {"value", e.value}, {"expectation", e.expectation}, {"consistent", e.consistent}});
    return {{"model", v.model},
            {"branch", to_string(v.branch)},
            {"kappa", v.kappa},
            {"tau", v.tau},
            {"c", v.c},
            {"counts", {{"N_neg", v.counts.N_neg}, {"N_zero", v.counts.N_zero}, {"N_pos", v.counts.N_pos},
                        {"N_complex", v.counts.N_complex}}},
            {"morse_index", v.morse_index},
            {"gamma_c", v.gamma_c ? json(*v.gamma_c) : json(nullptr)},
            {"verdict", to_string(v.verdict)},
            {"evidence", ev},
            {"diagnostics", v.diagnostics},
            {"scan", {{"complex", v.complex_scan}, {"real", v.real_scan}, {"max_real_part", v.max_real_part}}}};
}

json growth_json(const GrowthFit& g) {
    return {{"kind", g.kind}, {"rate", g.rate}, {"predicted", g.predicted}, {"t0", g.t0}, {"t1", g.t1},
            {"r_squared", g.r_squared}, {"delta", g.delta}, {"envelope", g.envelope}, {"accepted", g.accepted},
            {"deltas", g.deltas}, {"escape_times", g.escape_times}, {"predicted_escape", g.predicted_escape}};
}

void run_branches(Context& ctx) {
    const Scenario& s = ctx.s;
    auto table = ctx.table("branches", {"kappa", "tau", "omega", "energy", "q0", "p0", "q1", "p1", "V0", "V1"});
    json list = json::array();
    std::vector<StationaryBranch> branches;
    std::optional<Coupling> cp;
    if (s.model == ModelKind::coupled) cp = resolve_coupling(ctx);
    const double kappa = cp ? cp->kappa_grid : s.kappa;
    for (const auto& b : hartree_branches(kappa)) {
        if (s.branch && b.label != *s.branch) continue;
        std::array<double, 2> V{-kappa * b.particle(0) * b.particle(0), -kappa * b.particle(2) * b.particle(2)};
        if (cp) {
            const auto st = coupled_stationary(b, cp->shape, cp->grid);
            const CoupledModel model(cp->shape, cp->grid, s.c);
            FieldState f = FieldState::zeros(cp->grid.size());
            f.psi[0] = st.psi0;
            f.psi[1] = st.psi1;
            V = model.potentials(f);
        }
        table.row({b.kappa, double(b.tau()), b.omega, b.energy, b.particle(0), b.particle(1), b.particle(2),
                   b.particle(3), V[0], V[1]});
        json bj = branch_json(b);
        bj["potentials"] = {V[0], V[1]};
        list.push_back(bj);
    }
    ctx.result.summary = {{"branches", list}};
}

void run_simulate(Context& ctx) {
    const Scenario& s = ctx.s;
    std::optional<StationaryBranch> branch;
    TrajectoryRecord tr;
    if (s.model == ModelKind::hartree) {
        if (s.branch) branch = make_branch(*s.branch, s.kappa);
        const Vec4 X0 = initial_particle(s, branch ? &*branch : nullptr);
        const auto scheme = s.numerics.scheme.empty() ? HartreeScheme::gauss4 : hartree_scheme_from_string(s.numerics.scheme);
        ctx.resolved["scheme"] = to_string(scheme);
        tr = simulate_hartree(X0, s.kappa, run_options(s), branch ? &*branch : nullptr, scheme);
    } else {
        const Coupling cp = resolve_coupling(ctx);
        const CoupledModel model(cp.shape, cp.grid, s.c);
        std::optional<CoupledStationary> st;
        if (s.branch) {
            branch = make_branch(*s.branch, cp.kappa_grid);
            st = coupled_stationary(*branch, cp.shape, cp.grid);
        }
        const Vec4 X0 = initial_particle(s, branch ? &*branch : nullptr);
        FieldState f = FieldState::zeros(cp.grid.size());
        if (s.initial.equilibrium_field) {
            if (st && s.initial.kind == "branch" && s.initial.perturbation == 0.0) {
                f.psi[0] = st->psi0;
                f.psi[1] = st->psi1;
            } else {
                f = model.equilibrium_field(X0);
            }
        }
        const auto scheme = s.numerics.scheme.empty() ? CoupledScheme::triple_jump : coupled_scheme_from_string(s.numerics.scheme);
        ctx.resolved["scheme"] = to_string(scheme);
        tr = simulate_coupled(X0, f, model, run_options(s), st ? &*st : nullptr, scheme);
    }
    auto table = ctx.table("trajectory", {"t", "q0", "p0", "q1", "p1", "l2_norm", "energy", "wave_energy",
                                          "particle_energy", "orbit_distance"});
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        const auto& X = tr.particles[i];
        const auto& d = tr.diagnostics[i];
        table.row({tr.times[i], X(0), X(1), X(2), X(3), d.l2_norm, d.total_energy, d.wave_energy, d.particle_energy,
                   d.orbit_distance});
    }
    double max_orbit = 0.0;
    for (const auto& d : tr.diagnostics) max_orbit = std::max(max_orbit, d.orbit_distance);
    ctx.result.summary = {{"samples", tr.times.size()},
                          {"conservation", conservation_json(conservation_report(tr))},
                          {"max_orbit_distance", branch ? json(max_orbit) : json(nullptr)}};
}

void run_linearize(Context& ctx) {
    const Scenario& s = ctx.s;
    MatX L;
    VecX Y0;
    std::string kind;
    if (s.model == ModelKind::hartree) {
        L = is_extra(*s.branch) ? MatX(build_L_hartree_extra(s.kappa, *s.branch).entries)
                                : MatX(build_L_hartree(s.kappa, branch_tau(s)).entries);
        kind = to_string(is_extra(*s.branch) ? LinearKind::hartree_extra : LinearKind::hartree_sym);
    } else {
        const Coupling cp = resolve_coupling(ctx);
        const auto op = build_coupled_operator(make_branch(*s.branch, cp.kappa_grid), cp.shape, cp.grid, s.c);
        L = op.L;
        kind = to_string(is_extra(*s.branch) ? LinearKind::coupled_extra : LinearKind::coupled_sym);
    }
    Y0 = VecX::Zero(L.rows());
    for (int i = 0; i < 4; ++i) Y0(i) = s.initial.particle[static_cast<std::size_t>(i)];
    ctx.resolved["linear_kind"] = kind;
    const auto tr = simulate_linearized(L, Y0, run_options(s));
    auto table = ctx.table("linearized", {"t", "q0", "p0", "q1", "p1", "field_norm", "norm"});
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        const VecX& Y = tr.linear_states[i];
        const double field = Y.size() > 4 ? Y.tail(Y.size() - 4).norm() : 0.0;
        table.row({tr.times[i], Y(0), Y(1), Y(2), Y(3), field, Y.norm()});
    }
    ctx.result.summary = {{"samples", tr.times.size()}, {"final_norm", tr.linear_states.back().norm()}};
}

void run_spectrum(Context& ctx) {
    const Scenario& s = ctx.s;
    json out;
    if (s.model == ModelKind::hartree) {
        if (is_extra(*s.branch)) {
            out["generator"] = spectral_json(spectrum_extra_hartree(s.kappa));
            out["second_variation"] = spectral_json(spectrum_Lscript_extra_hartree(s.kappa));
        } else {
            out["generator"] = spectral_json(spectrum_L_hartree(s.kappa, branch_tau(s)));
            out["second_variation"] = spectral_json(spectrum_Lscript_hartree(s.kappa, branch_tau(s)));
        }
    } else {
        const Coupling cp = resolve_coupling(ctx);
        const auto op = build_coupled_operator(make_branch(*s.branch, cp.kappa_grid), cp.shape, cp.grid, s.c);
        out["second_variation"] = spectral_json(spectrum_coupled_Lscript(op));
        auto eigs = spectrum_coupled_L(op);
        std::sort(eigs.begin(), eigs.end(), [](const cplx& a, const cplx& b) {
            if (a.real() != b.real()) return a.real() > b.real();
            return a.imag() < b.imag();
        });
        auto table = ctx.table("generator_eigenvalues", {"re", "im"});
        for (const auto& z : eigs) table.row({z.real(), z.imag()});
        out["generator"] = {{"max_real_part", max_real_part(eigs)},
                            {"quadruple_symmetry_defect", quadruple_symmetry_defect(eigs)},
                            {"factorization_error", (op.L - op.J * op.Lscript).cwiseAbs().maxCoeff()},
                            {"size", eigs.size()}};
    }
    ctx.write_json("spectrum.json", out);
    ctx.result.summary = out;
}

void run_count(Context& ctx) {
    const Scenario& s = ctx.s;
    StabilityVerdict v;
    if (s.model == ModelKind::hartree) {
        v = count_hartree(s.kappa, *s.branch);
    } else {
        const CouplingShape base = make_shape(s.shape.kind, s.shape.amplitude, s.shape.width, s.shape.dim);
        CoupledCountOptions opt;
        opt.scan_modes = s.grid.modes;
        require(s.grid.order == 16, "config", "the counting scan uses order-16 panels");
        v = count_coupled(*s.branch, s.kappa, s.c, base, opt);
        ctx.resolved["scan_modes"] = opt.scan_modes;
    }
    const json j = verdict_json(v);
    ctx.write_json("verdict.json", j);
    ctx.result.summary = j;
}

void run_dispersion(Context& ctx) {
    const Scenario& s = ctx.s;
    const Coupling cp = resolve_coupling(ctx);
    const KappaFamily family(cp.shape);
    const int tau = branch_tau(s);
    DispersionPoint start;
    start.A = s.dispersion.A0;
    start.B = s.dispersion.B0;
    const auto path = dispersion_path(start, family, tau, s.dispersion.speeds);
    auto table = ctx.table("dispersion_path", {"c", "A", "B", "lambda_re", "lambda_im", "residual", "iterations",
                                               "converged", "stiff"});
    json roots = json::array();
    for (const auto& p : path) {
        table.row({p.c, p.A, p.B, p.lambda.real(), p.lambda.imag(), p.residual, double(p.iterations),
                   p.converged ? 1.0 : 0.0, p.stiff ? 1.0 : 0.0});
        roots.push_back({{"c", p.c}, {"A", p.A}, {"B", p.B}, {"converged", p.converged}});
    }
    bool monotone = true;
    for (std::size_t i = 1; i < path.size(); ++i)
        monotone = monotone && std::abs(path[i].B) < std::abs(path[i - 1].B);
    const double A_inf = -4.0 + 2.0 * tau * family.kappa();
    ctx.resolved["tau"] = tau;
    ctx.resolved["kappa_adaptive"] = family.kappa();
    ctx.result.summary = {{"roots", roots},
                          {"asymptote_A", A_inf},
                          {"final_relative_gap", std::abs(path.back().A - A_inf) / std::abs(A_inf)},
                          {"monotone_in_B", monotone}};
}

void run_growth(Context& ctx) {
    const Scenario& s = ctx.s;
    GrowthOptions opt;
    opt.epsilon = s.growth.epsilon;
    opt.deltas = s.growth.deltas;
    opt.dt = s.numerics.dt;
    opt.horizon = s.growth.horizon;
    opt.t0 = s.growth.t0;
    opt.fit_ceiling = s.growth.fit_ceiling;
    opt.direction = s.growth.direction == "lemma" ? DirectionKind::lemma : DirectionKind::eigenvector;
    opt.lemma_s = s.growth.lemma_s;
    GrowthFit fit;
    if (s.model == ModelKind::hartree) {
        fit = growth_experiment_hartree(s.kappa, branch_tau(s), opt);
    } else {
        CoupledGrowthSetup setup;
        setup.label = *s.branch;
        setup.kappa = s.kappa;
        setup.c = s.c;
        setup.base_shape = make_shape(s.shape.kind, s.shape.amplitude, s.shape.width, s.shape.dim);
        setup.modes = s.grid.modes;
        fit = growth_experiment_coupled(setup, opt);
    }
    auto table = ctx.table("escape_times", {"delta", "escape_time", "predicted"});
    for (std::size_t i = 0; i < fit.deltas.size(); ++i)
        table.row({fit.deltas[i], fit.escape_times[i], fit.predicted_escape[i]});
    const json j = growth_json(fit);
    ctx.write_json("growth.json", j);
    ctx.result.summary = j;
}

void run_plemelj(Context& ctx) {
    const Scenario& s = ctx.s;
    // The integral is linear in |sigma_hat|^2; the shape is used exactly as configured.
    const CouplingShape shape = make_shape(s.shape.kind, s.shape.amplitude, s.shape.width, s.shape.dim);
    auto table = ctx.table("plemelj", {"mu", "B", "re", "im", "pv", "jump", "error"});
    json list = json::array();
    for (double mu : s.plemelj.mu) {
        const auto ev = plemelj_sequence(mu, s.plemelj.B, shape);
        for (std::size_t i = 0; i < ev.B_values.size(); ++i)
            table.row({mu, ev.B_values[i], ev.integral_values[i].real(), ev.integral_values[i].imag(), ev.pv_value,
                       ev.residue_term, ev.errors[i]});
        list.push_back({{"mu", mu}, {"pv", ev.pv_value}, {"jump", ev.residue_term}, {"errors", ev.errors}});
    }
    ctx.result.summary = {{"limits", list}};
}

std::string utc_timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

RunResult run_scenario(const Scenario& s, const fs::path& dir) {
    validate(s);
    fs::create_directories(dir);
    Context ctx{s, dir, {}, json::object()};
    switch (s.run) {
        case RunKind::branches: run_branches(ctx); break;
        case RunKind::simulate: run_simulate(ctx); break;
        case RunKind::linearize: run_linearize(ctx); break;
        case RunKind::spectrum: run_spectrum(ctx); break;
        case RunKind::count: run_count(ctx); break;
        case RunKind::dispersion: run_dispersion(ctx); break;
        case RunKind::growth: run_growth(ctx); break;
        case RunKind::plemelj: run_plemelj(ctx); break;
    }
    // The manifest is the only file carrying a timestamp.
    json manifest = {{"scenario", to_json(s)}, {"resolved", ctx.resolved}, {"files", ctx.result.files},
                     {"summary", ctx.result.summary}, {"created", utc_timestamp()}};
    std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
    ctx.result.files.push_back("manifest.json");
    return ctx.result;
}

SweepConfig sweep_from_json(const json& j) {
    SweepConfig cfg;
    Fields f(j, "sweep");
    if (const json* b = f.sub("base")) {
        if (!b->is_object()) throw ValidationError("config", "sweep.base must be an object");
        cfg.base = *b;
    }
    if (const json* a = f.sub("axes")) {
        Fields g(*a, "axes");
        auto axis = [&](const char* key, auto& out) {
            std::remove_reference_t<decltype(*out)> v;
            g.get(key, v);
            if (a->contains(key)) out = v;
        };
        axis("model", cfg.models);
        axis("branch", cfg.branches);
        axis("kappa", cfg.kappas);
        axis("c", cfg.speeds);
        g.finish();
    }
    f.get("workers", cfg.workers);
    f.finish();
    require(cfg.workers >= 1, "config", "workers must be >= 1");
    return cfg;
}

int worker_count(int fallback) {
    if (const char* env = std::getenv("TLW_WORKERS")) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && n > 0) return static_cast<int>(std::min<long>(n, 256));
    }
    return std::max(1, fallback);
}

std::vector<json> run_sweep(const SweepConfig& cfg, const fs::path& dir) {
    std::vector<json> cells;
    const json& base = cfg.base;
    auto str_axis = [&](const std::optional<std::vector<std::string>>& axis, const char* key) {
        if (axis) return *axis;
        return std::vector<std::string>{base.contains(key) ? base.at(key).get<std::string>() : std::string()};
    };
    auto num_axis = [&](const std::optional<std::vector<double>>& axis, const char* key) -> std::vector<std::optional<double>> {
        if (axis) return {axis->begin(), axis->end()};
        return {base.contains(key) ? std::optional<double>(base.at(key).get<double>()) : std::nullopt};
    };
    for (const auto& m : str_axis(cfg.models, "model"))
        for (const auto& b : str_axis(cfg.branches, "branch"))
            for (const auto& k : num_axis(cfg.kappas, "kappa"))
                for (const auto& c : num_axis(cfg.speeds, "c")) {
                    json cell = base;
                    if (!m.empty()) cell["model"] = m;
                    if (!b.empty()) cell["branch"] = b;
                    if (k) cell["kappa"] = *k;
                    if (c) cell["c"] = *c;
                    cells.push_back(cell);
                }

    fs::create_directories(dir);
    std::vector<json> records(cells.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            char name[32];
            std::snprintf(name, sizeof name, "cell_%04zu", i);
            const fs::path cell_dir = dir / "cells" / name;
            json rec = {{"cell", i},
                        {"model", cells[i].value("model", "hartree")},
                        {"branch", cells[i].value("branch", "")},
                        {"kappa", cells[i].contains("kappa") ? cells[i]["kappa"] : json(nullptr)},
                        {"c", cells[i].contains("c") ? cells[i]["c"] : json(nullptr)}};
            try {
                json cj = cells[i];
                cj["name"] = cells[i].value("name", std::string("sweep")) + "_" + name;
                const Scenario s = scenario_from_json(cj);
                const auto r = run_scenario(s, cell_dir);
                rec["status"] = "ok";
                rec["result"] = r.summary;
            } catch (const ValidationError& e) {
                rec["status"] = "error";
                rec["error"] = {{"kind", "validation"}, {"reason", e.reason()}, {"message", e.what()}};
            } catch (const NumericalError& e) {
                rec["status"] = "error";
                rec["error"] = {{"kind", "numerical"}, {"reason", e.reason()}, {"message", e.what()}};
            } catch (const std::exception& e) {
                rec["status"] = "error";
                rec["error"] = {{"kind", "internal"}, {"reason", "internal"}, {"message", e.what()}};
            }
            fs::create_directories(cell_dir);
            std::ofstream(cell_dir / "record.json") << rec.dump() << '\n';
            records[i] = std::move(rec);
        }
    };
    const int workers = std::max(1, std::min<int>(cfg.workers, static_cast<int>(std::max<std::size_t>(cells.size(), 1))));
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    std::ofstream out(dir / "sweep.jsonl");
    for (const auto& r : records) out << r.dump() << '\n';
    return records;
}

}  // namespace tlw
