#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tlw/coupling.hpp"
#include "tlw/linalg.hpp"
#include "tlw/stationary.hpp"

namespace tlw {

enum class OperatorKind { L_hartree_sym, L_hartree_extra, Lscript_hartree_sym, Lscript_hartree_extra };

std::string to_string(OperatorKind k);

struct OperatorMatrix {
    OperatorKind kind;
    Mat4 entries;
    double kappa = 0.0;
    int tau = 0;        // symmetric kinds
    double A = 0.0;     // extra kinds
    double B = 0.0;
};

// Linearization about the symmetric branch with phase tau, in the frame rotating with it.
OperatorMatrix build_L_hartree(double kappa, int tau);
OperatorMatrix build_Lscript_hartree(double kappa, int tau);
// Same about an extra branch (kappa > 2); A = kappa U_1^2, B = kappa U_0^2, AB = 1.
OperatorMatrix build_L_hartree_extra(double kappa, BranchLabel label = BranchLabel::asym_plus);
OperatorMatrix build_Lscript_hartree_extra(double kappa, BranchLabel label = BranchLabel::asym_plus);

struct EigenEntry {
    cplx value;
    int multiplicity = 1;
    std::string source;  // closed_form | numeric
    std::string tag;     // discrete | essential_cluster
};

struct JordanInfo {
    cplx eigenvalue;
    int algebraic = 0;
    int geometric = 0;
};

struct SpectralReport {
    std::vector<EigenEntry> eigenvalues;
    std::vector<JordanInfo> jordan;
    std::optional<std::vector<double>> essential;
    std::vector<VecX> eigenvectors;
    // Largest distance from a closed-form value to its nearest numeric eigenvalue.
    double max_mismatch = 0.0;

    std::vector<cplx> values(const std::string& source) const;
};

// Kernel and generalized kernel sizes of M at zero: dim Ker M and dim Ker M^2.
JordanInfo jordan_at_zero(const MatX& M, double threshold = 1e-10);

SpectralReport spectrum_L_hartree(double kappa, int tau);
SpectralReport spectrum_Lscript_hartree(double kappa, int tau);
SpectralReport spectrum_extra_hartree(double kappa);
SpectralReport spectrum_Lscript_extra_hartree(double kappa);

// Discretized linearization of the coupled model. State ordering:
// (q0, p0, q1, p1, phi_0[N], varpi_0[N], phi_1[N], varpi_1[N]) where phi = xi psi and
// varpi = pi in the mode coordinates of FieldState.
struct CoupledOperator {
    StationaryBranch branch;
    RadialGrid grid;
    double c = 1.0;
    std::vector<double> s;  // mode coefficients
    MatX L;                 // generator
    MatX Lscript;           // symmetric second variation
    MatX J;                 // antisymmetric symplectic block operator

    std::size_t modes() const { return grid.size(); }
    Eigen::Index dim() const { return L.rows(); }
    Eigen::Index phi(int j, std::size_t k) const { return 4 + (2 * j) * modes() + k; }
    Eigen::Index varpi(int j, std::size_t k) const { return 4 + (2 * j + 1) * modes() + k; }
    // Phase generator (0, 1, 0, A or tau, 0...).
    VecX kernel_vector() const;
};

// The branch kappa must equal compute_kappa(shape, grid) to 1e-8 relative.
CoupledOperator build_coupled_operator(const StationaryBranch& branch, const CouplingShape& shape,
                                       const RadialGrid& grid, double c);

// Closed-form discrete eigenvalues of the coupled second variation plus essential {1/2}.
SpectralReport spectrum_coupled_Lscript(BranchLabel label, double kappa);
// Same, overlaid with the numeric spectrum of a discretized operator.
SpectralReport spectrum_coupled_Lscript(const CoupledOperator& op);

// Numeric eigenvalues of the discretized generator.
std::vector<cplx> spectrum_coupled_L(const CoupledOperator& op);

// Imaginary parts of the on-axis eigenvalues (Im > 0) whose eigenvectors carry negative
// Lscript energy. These are the modes that can collide with the field band.
std::vector<double> negative_energy_frequencies(const CoupledOperator& op);

// Roots of 4l^4 - 4(k+1)l^3 + l^2 + (4A^2+4B^2+k) l - 2(A-B)^2.
std::vector<cplx> extra_quartic_roots(double kappa);

struct KernelPairing {
    VecX Y0;           // solution of Lscript Y = -J X0, orthogonal to Ker
    double product;    // (-J X0 | Y0)
    double residual;   // |Lscript Y0 + J X0|
    double kernel_residual;  // |Lscript X0|
};

KernelPairing coupled_kernel_pairing(const CoupledOperator& op);

// Largest distance from some lambda (|lambda| > floor) to the nearest of -lambda,
// conj(lambda), -conj(lambda) in the same list.
double quadruple_symmetry_defect(const std::vector<cplx>& eigs, double floor = 1e-10);

double max_real_part(const std::vector<cplx>& eigs);

}  // namespace tlw
