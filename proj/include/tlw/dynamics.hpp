#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "tlw/coupling.hpp"
#include "tlw/linalg.hpp"
#include "tlw/stationary.hpp"

namespace tlw {

// ---- Hartree system -------------------------------------------------------

enum class HartreeScheme { gauss4, midpoint };

HartreeScheme hartree_scheme_from_string(const std::string& s);
std::string to_string(HartreeScheme s);

// d/dt X = J grad H(X).
Vec4 hartree_rhs(const Vec4& X, double kappa);

// One step of a symmetric Gauss-Legendre collocation method (1 or 2 stages), both of
// which preserve |X|^2 exactly. Throws NumericalError("step_size") when the stage
// fixed point fails to converge in 50 sweeps.
Vec4 step_hartree(const Vec4& X, double dt, double kappa, HartreeScheme scheme = HartreeScheme::gauss4);

// ---- Coupled Schroedinger-wave system -------------------------------------

// Field in mode coordinates. For channel j and grid node k,
//   psi[j][k] = sqrt(w_k * measure) xi_k^{(n-1)/2} psi_hat_j(xi_k),
//   pi[j][k]  = same weighting of d/dt psi_hat_j / c.
// With this weighting int sigma psi_j dz = sum_k g_k psi[j][k], g_k = s_k xi_k.
// All mode values are real: sigma_hat is real and the data are real.
struct FieldState {
    std::array<std::vector<double>, 2> psi;
    std::array<std::vector<double>, 2> pi;

    static FieldState zeros(std::size_t n);
    std::size_t size() const { return psi[0].size(); }
};

struct CoupledModel {
    CouplingShape shape;
    RadialGrid grid;
    double c = 1.0;
    double kappa = 0.0;        // compute_kappa(shape, grid)
    std::vector<double> s;     // mode coefficients
    std::vector<double> g;     // s_k xi_k

    CoupledModel(const CouplingShape& shape, const RadialGrid& grid, double c);

    std::array<double, 2> potentials(const FieldState& f) const;
    double particle_energy(const Vec4& X) const;
    // Field energy plus the interaction term.
    double wave_energy(const Vec4& X, const FieldState& f) const;
    double energy(const Vec4& X, const FieldState& f) const;
    void rhs(const Vec4& X, const FieldState& f, Vec4& dX, FieldState& df) const;
    // Static field slaved to the particle densities.
    FieldState equilibrium_field(const Vec4& X) const;
};

enum class CoupledScheme { strang, triple_jump };

CoupledScheme coupled_scheme_from_string(const std::string& s);
std::string to_string(CoupledScheme s);

// Splitting step: exact hopping flow on half steps around an exact forced-oscillator
// flow of every mode with |u_j|^2 frozen, during which u_j picks up the phase
// -int V_j dt. triple_jump composes three such steps into a fourth-order method.
class CoupledStepper {
public:
    CoupledStepper(const CoupledModel& model, double dt, CoupledScheme scheme = CoupledScheme::triple_jump);
    void step(Vec4& X, FieldState& f) const;
    double dt() const { return dt_; }

private:
    struct Sub {
        double h;
        std::vector<double> cos_wh, sin_wh;
    };
    void strang(const Sub& sub, Vec4& X, FieldState& f) const;

    const CoupledModel& model_;
    double dt_;
    std::vector<Sub> subs_;
};

void step_coupled(Vec4& X, FieldState& f, double dt, const CoupledModel& model,
                  CoupledScheme scheme = CoupledScheme::triple_jump);

// ---- Linearized dynamics --------------------------------------------------

enum class LinearKind { hartree_sym, hartree_extra, coupled_sym, coupled_extra };

std::string to_string(LinearKind k);

// Exact propagator exp(dt L) for a constant generator.
class LinearPropagator {
public:
    LinearPropagator(const MatX& generator, double dt);
    VecX step(const VecX& Y) const { return E_ * Y; }
    double dt() const { return dt_; }
    const MatX& matrix() const { return E_; }

private:
    double dt_;
    MatX E_;
};

VecX step_linearized(const LinearPropagator& prop, const VecX& Y);

// ---- Trajectories and diagnostics -----------------------------------------

struct Diagnostics {
    double l2_norm = 0.0;
    double total_energy = 0.0;
    double wave_energy = 0.0;
    double particle_energy = 0.0;
    double orbit_distance = 0.0;
};

struct TrajectoryRecord {
    std::string model;   // hartree | coupled | linearized
    bool nonlinear = true;
    std::vector<double> times;
    std::vector<Vec4> particles;
    std::vector<FieldState> fields;  // empty unless requested
    std::vector<VecX> linear_states; // linearized runs only
    std::vector<Diagnostics> diagnostics;
};

struct ConservationReport {
    bool applicable = true;
    double l2_drift = 0.0;
    double energy_drift_rel = 0.0;
    double l2_tolerance = 1e-10;
    double energy_tolerance = 0.0;
    bool l2_ok = true;
    bool energy_ok = true;
    std::string note;
};

ConservationReport conservation_report(const TrajectoryRecord& tr);

// Phase theta minimizing |R(theta) V - Xstar| for real Xstar = (a0, 0, a1, 0), in [0, 2 pi).
// Throws ValidationError("domain") when every phase is optimal.
double optimal_phase(const Vec4& V, const Vec4& Xstar);

double orbit_distance(const Vec4& X, const StationaryBranch& branch);
double orbit_distance(const Vec4& X, const FieldState& f, const CoupledStationary& cs);

struct RunOptions {
    double dt = 1e-3;
    double T = 1.0;
    int store_every = 1;
    bool store_fields = false;
};

TrajectoryRecord simulate_hartree(const Vec4& X0, double kappa, const RunOptions& opt,
                                  const StationaryBranch* branch = nullptr,
                                  HartreeScheme scheme = HartreeScheme::gauss4);

TrajectoryRecord simulate_coupled(const Vec4& X0, const FieldState& f0, const CoupledModel& model,
                                  const RunOptions& opt, const CoupledStationary* reference = nullptr,
                                  CoupledScheme scheme = CoupledScheme::triple_jump);

TrajectoryRecord simulate_linearized(const MatX& generator, const VecX& Y0, const RunOptions& opt);

}  // namespace tlw
