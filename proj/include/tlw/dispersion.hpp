#pragma once

#include <array>
#include <vector>

#include "tlw/coupling.hpp"
#include "tlw/linalg.hpp"

namespace tlw {

// lambda^2 = A + iB for a candidate eigenvalue lambda = a + ib of the coupled generator.
struct DispersionPoint {
    double A = 0.0;
    double B = 0.0;
    cplx lambda;
    double residual = 0.0;
    double c = 1.0;
    int iterations = 0;
    bool converged = false;
    bool stiff = false;
};

// Components of lambda^2 + 4 - 2 tau kappa_{lambda^2/c^2} = 0 after splitting real and
// imaginary parts, the imaginary one divided by B:
//   F1 = A + 4 - 2 tau c^2 int |sigma_hat|^2 (A + c^2 xi^2) / D
//   F2 = 1 + 2 tau c^2 int |sigma_hat|^2 / D,     D = (A + c^2 xi^2)^2 + B^2.
std::array<double, 2> dispersion_F(double A, double B, const KappaFamily& family, int tau, double c);
Eigen::Matrix2d dispersion_jacobian(double A, double B, const KappaFamily& family, int tau, double c);

struct NewtonOptions {
    int max_iterations = 100;
    double tolerance = 1e-10;
    double stiff_condition = 1e12;
};

// Damped Newton with step halving. Never throws on non-convergence: the returned point
// carries converged = false instead.
DispersionPoint newton_dispersion(const DispersionPoint& start, const KappaFamily& family, int tau, double c,
                                  const NewtonOptions& opt = {});

// Continuation in c, each solve warm-started from the previous root.
std::vector<DispersionPoint> dispersion_path(const DispersionPoint& start, const KappaFamily& family, int tau,
                                             const std::vector<double>& speeds, const NewtonOptions& opt = {});

cplx lambda_from_AB(double A, double B);

// P(-mu, B) = int_0^inf Sigma(r) / (r^2 - mu + iB) dr with Sigma(r) = |sigma_hat(r)|^2 r^{n-1}.
cplx plemelj_integral(double mu, double B, const CouplingShape& shape);

struct PlemeljLimit {
    double pv = 0.0;
    double jump = 0.0;  // pi Sigma(sqrt mu) / (2 sqrt mu)
};

PlemeljLimit plemelj_limit(double mu, const CouplingShape& shape);

struct PlemeljEvaluation {
    double mu = 0.0;
    std::vector<double> B_values;
    std::vector<cplx> integral_values;
    double pv_value = 0.0;
    double residue_term = 0.0;
    std::vector<double> errors;  // |P(-mu, B) - (pv - i jump)|
};

PlemeljEvaluation plemelj_sequence(double mu, const std::vector<double>& B_values, const CouplingShape& shape);

}  // namespace tlw
