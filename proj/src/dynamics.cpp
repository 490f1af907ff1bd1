#include "tlw/dynamics.hpp"

#include <unsupported/Eigen/MatrixFunctions>
#include <algorithm>
#include <cmath>
#include <complex>

#include "tlw/errors.hpp"

namespace tlw {

HartreeScheme hartree_scheme_from_string(const std::string& s) {
    if (s == "gauss4") return HartreeScheme::gauss4;
    if (s == "midpoint") return HartreeScheme::midpoint;
    throw ValidationError("config", "unknown Hartree scheme '" + s + "'");
}

std::string to_string(HartreeScheme s) { return s == HartreeScheme::gauss4 ? "gauss4" : "midpoint"; }

CoupledScheme coupled_scheme_from_string(const std::string& s) {
    if (s == "strang") return CoupledScheme::strang;
    if (s == "triple_jump") return CoupledScheme::triple_jump;
    throw ValidationError("config", "unknown coupled scheme '" + s + "'");
}

std::string to_string(CoupledScheme s) { return s == CoupledScheme::strang ? "strang" : "triple_jump"; }

std::string to_string(LinearKind k) {
    switch (k) {
        case LinearKind::hartree_sym: return "hartree_sym";
        case LinearKind::hartree_extra: return "hartree_extra";
        case LinearKind::coupled_sym: return "coupled_sym";
        case LinearKind::coupled_extra: return "coupled_extra";
    }
    return "?";
}

Vec4 hartree_rhs(const Vec4& X, double kappa) {
    const Vec4 g = hartree_gradient(X, kappa);
    return Vec4(g(1), -g(0), g(3), -g(2));
}

namespace {

// Stage iteration for implicit collocation; stops at round-off stagnation.
template <class Update>
void fixed_point(Update&& update, int max_sweeps = 50) {
    double prev = INFINITY;
    for (int it = 0; it < max_sweeps; ++it) {
        const double diff = update();
        if (diff <= 1e-15) return;
        if (diff < 1e-12 && diff >= prev) return;
        prev = diff;
    }
    if (prev > 1e-12) throw NumericalError("step_size", "implicit stage iteration did not converge");
}

}  // namespace

Vec4 step_hartree(const Vec4& X, double dt, double kappa, HartreeScheme scheme) {
    require(dt > 0.0 && std::isfinite(dt), "config", "dt must be positive");
    if (scheme == HartreeScheme::midpoint) {
        Vec4 K = hartree_rhs(X, kappa);
        fixed_point([&] {
            const Vec4 Kn = hartree_rhs(X + 0.5 * dt * K, kappa);
            const double d = (Kn - K).cwiseAbs().maxCoeff();
            K = Kn;
            return d;
        });
        return X + dt * K;
    }
    static const double r3 = std::sqrt(3.0) / 6.0;
    static const double a11 = 0.25, a12 = 0.25 - r3, a21 = 0.25 + r3, a22 = 0.25;
    Vec4 K1 = hartree_rhs(X, kappa), K2 = K1;
    fixed_point([&] {
        const Vec4 N1 = hartree_rhs(X + dt * (a11 * K1 + a12 * K2), kappa);
        const Vec4 N2 = hartree_rhs(X + dt * (a21 * K1 + a22 * K2), kappa);
        const double d = std::max((N1 - K1).cwiseAbs().maxCoeff(), (N2 - K2).cwiseAbs().maxCoeff());
        K1 = N1;
        K2 = N2;
        return d;
    });
    return X + 0.5 * dt * (K1 + K2);
}

// ---- coupled ----

FieldState FieldState::zeros(std::size_t n) {
    FieldState f;
    for (int j = 0; j < 2; ++j) {
        f.psi[j].assign(n, 0.0);
        f.pi[j].assign(n, 0.0);
    }
    return f;
}

CoupledModel::CoupledModel(const CouplingShape& shape_, const RadialGrid& grid_, double c_)
    : shape(shape_), grid(grid_), c(c_) {
    require(std::isfinite(c) && c > 0.0, "config", "wave speed c must be positive");
    require(grid.size() > 0, "shape", "empty radial grid");
    kappa = compute_kappa(shape, grid);
    s = mode_coefficients(shape, grid);
    g.resize(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) g[k] = s[k] * grid.nodes[k];
}

std::array<double, 2> CoupledModel::potentials(const FieldState& f) const {
    require(f.size() == g.size(), "shape", "field state does not match the model grid");
    std::array<double, 2> V{0.0, 0.0};
    for (int j = 0; j < 2; ++j)
        for (std::size_t k = 0; k < g.size(); ++k) V[j] += g[k] * f.psi[j][k];
    return V;
}

double CoupledModel::particle_energy(const Vec4& X) const {
    const double dq = X(0) - X(2), dp = X(1) - X(3);
    return 0.5 * (dq * dq + dp * dp);
}

double CoupledModel::wave_energy(const Vec4& X, const FieldState& f) const {
    const auto V = potentials(f);
    const double m0 = X.segment<2>(0).squaredNorm(), m1 = X.segment<2>(2).squaredNorm();
    double field = 0.0;
    for (int j = 0; j < 2; ++j)
        for (std::size_t k = 0; k < g.size(); ++k) {
            const double xi = grid.nodes[k];
            field += f.pi[j][k] * f.pi[j][k] + xi * xi * f.psi[j][k] * f.psi[j][k];
        }
    return 0.25 * field + 0.5 * (V[0] * m0 + V[1] * m1);
}

double CoupledModel::energy(const Vec4& X, const FieldState& f) const {
    return particle_energy(X) + wave_energy(X, f);
}

void CoupledModel::rhs(const Vec4& X, const FieldState& f, Vec4& dX, FieldState& df) const {
    const auto V = potentials(f);
    const std::size_t N = g.size();
    // i u_j' = u_j - u_{1-j} + V_j u_j
    const double gq0 = X(0) - X(2) + V[0] * X(0), gp0 = X(1) - X(3) + V[0] * X(1);
    const double gq1 = X(2) - X(0) + V[1] * X(2), gp1 = X(3) - X(1) + V[1] * X(3);
    dX << gp0, -gq0, gp1, -gq1;
    df = FieldState::zeros(N);
    const double m[2] = {X.segment<2>(0).squaredNorm(), X.segment<2>(2).squaredNorm()};
    for (int j = 0; j < 2; ++j)
        for (std::size_t k = 0; k < N; ++k) {
            const double xi = grid.nodes[k];
            df.psi[j][k] = c * f.pi[j][k];
            df.pi[j][k] = -c * xi * xi * f.psi[j][k] - c * g[k] * m[j];
        }
}

FieldState CoupledModel::equilibrium_field(const Vec4& X) const {
    FieldState f = FieldState::zeros(g.size());
    const double m[2] = {X.segment<2>(0).squaredNorm(), X.segment<2>(2).squaredNorm()};
    for (int j = 0; j < 2; ++j)
        for (std::size_t k = 0; k < g.size(); ++k) {
            const double xi = grid.nodes[k];
            f.psi[j][k] = -m[j] * g[k] / (xi * xi);
        }
    return f;
}

CoupledStepper::CoupledStepper(const CoupledModel& model, double dt, CoupledScheme scheme)
    : model_(model), dt_(dt) {
    require(dt > 0.0 && std::isfinite(dt), "config", "dt must be positive");
    std::vector<double> hs;
    if (scheme == CoupledScheme::strang) {
        hs = {dt};
    } else {
        const double y1 = 1.0 / (2.0 - std::cbrt(2.0));
        const double y0 = -std::cbrt(2.0) * y1;
        hs = {y1 * dt, y0 * dt, y1 * dt};
    }
    for (double h : hs) {
        Sub sub{h, {}, {}};
        sub.cos_wh.resize(model.g.size());
        sub.sin_wh.resize(model.g.size());
        for (std::size_t k = 0; k < model.g.size(); ++k) {
            const double w = model.c * model.grid.nodes[k];
            sub.cos_wh[k] = std::cos(w * h);
            sub.sin_wh[k] = std::sin(w * h);
        }
        subs_.push_back(std::move(sub));
    }
}

namespace {

// Exact flow of i u' = (u - u_other) over time h.
void hop(Vec4& X, double h) {
    using C = std::complex<double>;
    const C u0(X(0), X(1)), u1(X(2), X(3));
    const C sum = 0.5 * (u0 + u1);
    const C diff = 0.5 * (u0 - u1) * std::exp(C(0.0, -2.0 * h));
    const C v0 = sum + diff, v1 = sum - diff;
    X << v0.real(), v0.imag(), v1.real(), v1.imag();
}

}  // namespace

void CoupledStepper::strang(const Sub& sub, Vec4& X, FieldState& f) const {
    const double h = sub.h;
    hop(X, 0.5 * h);
    const auto& m = model_;
    const std::size_t N = m.g.size();
    const double dens[2] = {X.segment<2>(0).squaredNorm(), X.segment<2>(2).squaredNorm()};
    double phase[2] = {0.0, 0.0};
    for (int j = 0; j < 2; ++j) {
        auto& psi = f.psi[j];
        auto& pi = f.pi[j];
        double acc = 0.0;
        for (std::size_t k = 0; k < N; ++k) {
            const double xi = m.grid.nodes[k];
            const double w = m.c * xi;
            const double eq = -dens[j] * m.g[k] / (xi * xi);
            const double a = psi[k] - eq;
            const double v = m.c * pi[k];
            const double co = sub.cos_wh[k], si = sub.sin_wh[k];
            // Forced oscillator psi'' = -w^2 (psi - eq), and its time integral over [0, h].
            const double integral = eq * h + a * si / w + v * (1.0 - co) / (w * w);
            psi[k] = eq + a * co + v * si / w;
            pi[k] = (-a * w * si + v * co) / m.c;
            acc += m.g[k] * integral;
        }
        phase[j] = -acc;
    }
    for (int j = 0; j < 2; ++j) {
        const double cph = std::cos(phase[j]), sph = std::sin(phase[j]);
        const double q = X(2 * j), p = X(2 * j + 1);
        X(2 * j) = cph * q - sph * p;
        X(2 * j + 1) = sph * q + cph * p;
    }
    hop(X, 0.5 * h);
}

void CoupledStepper::step(Vec4& X, FieldState& f) const {
    require(f.size() == model_.g.size(), "shape", "field state does not match the model grid");
    for (const auto& sub : subs_) strang(sub, X, f);
}

void step_coupled(Vec4& X, FieldState& f, double dt, const CoupledModel& model, CoupledScheme scheme) {
    CoupledStepper(model, dt, scheme).step(X, f);
}

// ---- linearized ----

LinearPropagator::LinearPropagator(const MatX& generator, double dt) : dt_(dt) {
    require(dt > 0.0 && std::isfinite(dt), "config", "dt must be positive");
    require(generator.rows() == generator.cols(), "shape", "generator must be square");
    E_ = (dt * generator).exp();
}

VecX step_linearized(const LinearPropagator& prop, const VecX& Y) {
    require(Y.size() == prop.matrix().rows(), "shape", "state size does not match the generator");
    return prop.step(Y);
}

// ---- diagnostics ----

double optimal_phase(const Vec4& V, const Vec4& Xstar) {
    const double x = Xstar(0) * V(0) + Xstar(2) * V(2);
    const double y = Xstar(0) * V(1) + Xstar(2) * V(3);
    require(x != 0.0 || y != 0.0, "domain", "phase undefined: V has no component along the orbit");
    return wrap_angle(-std::atan2(y, x));
}

double orbit_distance(const Vec4& X, const StationaryBranch& branch) {
    const double th = optimal_phase(X, branch.particle);
    return (rotation(th) * X - branch.particle).norm();
}

double orbit_distance(const Vec4& X, const FieldState& f, const CoupledStationary& cs) {
    require(f.size() == cs.psi0.size(), "shape", "field state does not match the reference grid");
    const double th = optimal_phase(X, cs.branch.particle);
    double d2 = (rotation(th) * X - cs.branch.particle).squaredNorm();
    const std::vector<double>* ref[2] = {&cs.psi0, &cs.psi1};
    for (int j = 0; j < 2; ++j)
        for (std::size_t k = 0; k < f.size(); ++k) {
            const double xi = cs.grid.nodes[k];
            const double dpsi = f.psi[j][k] - (*ref[j])[k];
            d2 += xi * xi * dpsi * dpsi + f.pi[j][k] * f.pi[j][k];
        }
    return std::sqrt(d2);
}

ConservationReport conservation_report(const TrajectoryRecord& tr) {
    require(!tr.times.empty(), "config", "empty trajectory");
    ConservationReport r;
    if (!tr.nonlinear) {
        r.applicable = false;
        r.note = "linearized dynamics: conservation laws do not apply";
        return r;
    }
    r.energy_tolerance = tr.model == "coupled" ? 1e-6 : 1e-8;
    const double l0 = tr.diagnostics.front().l2_norm;
    const double e0 = tr.diagnostics.front().total_energy;
    const double scale = std::max(std::abs(e0), 1e-300);
    for (const auto& d : tr.diagnostics) {
        r.l2_drift = std::max(r.l2_drift, std::abs(d.l2_norm - l0));
        r.energy_drift_rel = std::max(r.energy_drift_rel, std::abs(d.total_energy - e0) / scale);
    }
    r.l2_ok = r.l2_drift <= r.l2_tolerance;
    r.energy_ok = r.energy_drift_rel <= r.energy_tolerance;
    r.note = tr.model == "coupled" ? "energy relative to the initial total energy"
                                   : "Hamiltonian relative to its initial value";
    return r;
}

TrajectoryRecord simulate_hartree(const Vec4& X0, double kappa, const RunOptions& opt,
                                  const StationaryBranch* branch, HartreeScheme scheme) {
    require(opt.dt > 0.0 && opt.T >= 0.0 && opt.store_every >= 1, "config", "invalid run options");
    TrajectoryRecord tr;
    tr.model = "hartree";
    const long steps = std::lround(opt.T / opt.dt);
    auto record = [&](double t, const Vec4& X) {
        Diagnostics d;
        d.l2_norm = X.squaredNorm();
        d.total_energy = hartree_energy(X, kappa);
        d.particle_energy = 0.5 * ((X(0) - X(2)) * (X(0) - X(2)) + (X(1) - X(3)) * (X(1) - X(3)));
        d.wave_energy = d.total_energy - d.particle_energy;
        d.orbit_distance = branch ? orbit_distance(X, *branch) : 0.0;
        tr.times.push_back(t);
        tr.particles.push_back(X);
        tr.diagnostics.push_back(d);
    };
    Vec4 X = X0;
    record(0.0, X);
    for (long i = 1; i <= steps; ++i) {
        X = step_hartree(X, opt.dt, kappa, scheme);
        if (i % opt.store_every == 0 || i == steps) record(i * opt.dt, X);
    }
    return tr;
}

TrajectoryRecord simulate_coupled(const Vec4& X0, const FieldState& f0, const CoupledModel& model,
                                  const RunOptions& opt, const CoupledStationary* reference,
                                  CoupledScheme scheme) {
    require(opt.dt > 0.0 && opt.T >= 0.0 && opt.store_every >= 1, "config", "invalid run options");
    TrajectoryRecord tr;
    tr.model = "coupled";
    CoupledStepper stepper(model, opt.dt, scheme);
    const long steps = std::lround(opt.T / opt.dt);
    auto record = [&](double t, const Vec4& X, const FieldState& f) {
        Diagnostics d;
        d.l2_norm = X.squaredNorm();
        d.particle_energy = model.particle_energy(X);
        d.wave_energy = model.wave_energy(X, f);
        d.total_energy = d.particle_energy + d.wave_energy;
        d.orbit_distance = reference ? orbit_distance(X, f, *reference) : 0.0;
        tr.times.push_back(t);
        tr.particles.push_back(X);
        if (opt.store_fields) tr.fields.push_back(f);
        tr.diagnostics.push_back(d);
    };
    Vec4 X = X0;
    FieldState f = f0;
    record(0.0, X, f);
    for (long i = 1; i <= steps; ++i) {
        stepper.step(X, f);
        if (i % opt.store_every == 0 || i == steps) record(i * opt.dt, X, f);
    }
    return tr;
}

TrajectoryRecord simulate_linearized(const MatX& generator, const VecX& Y0, const RunOptions& opt) {
    require(opt.dt > 0.0 && opt.T >= 0.0 && opt.store_every >= 1, "config", "invalid run options");
    TrajectoryRecord tr;
    tr.model = "linearized";
    tr.nonlinear = false;
    LinearPropagator prop(generator, opt.dt);
    const long steps = std::lround(opt.T / opt.dt);
    auto record = [&](double t, const VecX& Y) {
        Diagnostics d;
        d.l2_norm = Y.squaredNorm();
        tr.times.push_back(t);
        tr.linear_states.push_back(Y);
        if (Y.size() >= 4) tr.particles.push_back(Y.head<4>());
        tr.diagnostics.push_back(d);
    };
    VecX Y = Y0;
    record(0.0, Y);
    for (long i = 1; i <= steps; ++i) {
        Y = prop.step(Y);
        if (i % opt.store_every == 0 || i == steps) record(i * opt.dt, Y);
    }
    return tr;
}

}  // namespace tlw
