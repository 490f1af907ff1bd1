#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tlw/coupling.hpp"
#include "tlw/dynamics.hpp"
#include "tlw/linalg.hpp"
#include "tlw/spectral.hpp"
#include "tlw/stationary.hpp"

namespace tlw {

// Orbit geometry about a symmetric Hartree branch. X_{2 tau - kappa} = (1, 0, -tau, 0),
// X_2 = (0, 1, 0, -tau) (second-variation eigenvectors orthogonal to X* and to the kernel).
struct OrbitProjection {
    double theta_star = 0.0;
    Vec4 aligned = Vec4::Zero();  // R(theta*) V
    double lambda_coeff = 0.0;    // Lambda(V) = aligned . X_{2-k} / |X_{2-k}|^2
    double a = 0.0;               // aligned . X*
    Vec4 M = Vec4::Zero();        // aligned - Lambda X_{2-k} - a X*
    Vec4 M_tilde = Vec4::Zero();  // part of M orthogonal to X_2
};

// Closed-form minimizer of |R(theta) V - X*|^2; the maximizing arctangent branch is never returned.
OrbitProjection theta_star(const Vec4& V, const StationaryBranch& branch);
Vec4 theta_star_gradient(const Vec4& V, const StationaryBranch& branch);

Vec4 x_second(const StationaryBranch& branch);      // X_2
Vec4 x_soft(const StationaryBranch& branch);        // X_{2 tau - kappa}

double functional_A(const Vec4& V, const StationaryBranch& branch);
Vec4 functional_A_gradient(const Vec4& V, const StationaryBranch& branch);
// P(V) = grad A(V) . J grad H(V): the time derivative of A along the Hartree flow.
double functional_P(const Vec4& V, const StationaryBranch& branch);

// V_s = sqrt(1 - 2 s^2) X* + s X_{2 tau - kappa}, unit norm.
Vec4 lemma_direction(double s, const StationaryBranch& branch);

struct UnstableDirection {
    VecX direction;     // real, unit norm
    VecX eigvec_re, eigvec_im;
    cplx lambda;
    double residual = 0.0;  // |L Y - lambda Y| / |Y|
};

UnstableDirection unstable_direction_hartree(double kappa, int tau);
UnstableDirection unstable_direction_coupled(const CoupledOperator& op);

struct GrowthFit {
    std::string kind;  // exponential | linear
    double rate = 0.0;
    double predicted = 0.0;
    double t0 = 0.0, t1 = 0.0;
    double r_squared = 0.0;
    double delta = 0.0;
    bool envelope = false;
    bool accepted = false;  // r_squared >= 0.99
    std::vector<double> deltas;
    std::vector<double> escape_times;
    std::vector<double> predicted_escape;
};

struct LineFit {
    double slope = 0.0, intercept = 0.0, r_squared = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

enum class DirectionKind { eigenvector, lemma };

struct GrowthOptions {
    double epsilon = 0.1;
    std::vector<double> deltas{1e-3, 1e-4, 1e-5};
    double dt = 1e-3;
    double horizon = 200.0;
    double t0 = 1.0;
    // Fit window ends when the distance first reaches fit_ceiling * epsilon.
    double fit_ceiling = 0.1;
    DirectionKind direction = DirectionKind::eigenvector;
    double lemma_s = 0.1;
};

GrowthFit growth_experiment_hartree(double kappa, int tau, const GrowthOptions& opt = {});
GrowthFit growth_linearized_hartree(double kappa, int tau, const Vec4& Y0, double horizon, double dt = 1e-2);
// Linearized run with Re(v0 + tau v1)(0) != 0: p0 + tau p1 grows like C2 + kappa C1 t.
GrowthFit growth_ill_prepared(double kappa, int tau, const Vec4& Y0, double horizon, double dt = 1e-2);

struct CoupledGrowthSetup {
    BranchLabel label = BranchLabel::symmetric_minus;
    double kappa = 1.58;
    double c = 1.0;
    CouplingShape base_shape;
    int modes = 256;
};

GrowthFit growth_experiment_coupled(const CoupledGrowthSetup& setup, const GrowthOptions& opt);

// Minimum of Lscript X . X over `samples` random unit X orthogonal to X* and Ker (Hartree,
// symmetric branch). Deterministic for a fixed seed.
double hartree_coercivity_min(double kappa, int tau, int samples = 10000, std::uint64_t seed = 7);
// Smallest eigenvalue of the discretized coupled second variation restricted to the
// orthogonal complement of X* and Ker, with the lower bound C(eps) it must respect.
struct CoercivityCertificate {
    double minimum = 0.0;
    double bound = 0.0;
    double eps = 0.0;
};
CoercivityCertificate coupled_coercivity(const CoupledOperator& op);

// Evaluates |1/(lambda^2 + eps)| <= sqrt(2)/|lambda|^2. It holds for every eps >= 0 when
// |Im lambda| <= sqrt(3)|Re lambda|; in the complementary sector lambda = i, eps = 1 breaks it.
bool resolvent_bound_holds(cplx lambda, double eps);

}  // namespace tlw
