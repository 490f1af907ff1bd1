#pragma once

#include <array>
#include <string>
#include <vector>

#include "tlw/coupling.hpp"
#include "tlw/linalg.hpp"

namespace tlw {

enum class BranchLabel { symmetric_plus, symmetric_minus, asym_plus, asym_minus };
enum class Classification { min, max, local_max, saddle };

std::string to_string(BranchLabel b);
std::string to_string(Classification c);
BranchLabel branch_from_string(const std::string& s);

inline bool is_extra(BranchLabel b) {
    return b == BranchLabel::asym_plus || b == BranchLabel::asym_minus;
}

// Stationary state u(t) = e^{i omega t} U* of the Hartree system; X* = (Re U0, Im U0, Re U1, Im U1).
struct StationaryBranch {
    BranchLabel label = BranchLabel::symmetric_plus;
    double kappa = 0.0;
    Vec4 particle = Vec4::Zero();
    double omega = 0.0;
    double energy = 0.0;
    Classification classification = Classification::saddle;

    // +1 / -1 on the symmetric branches; 0 on the extra branches.
    int tau() const;
    std::array<double, 2> amplitudes() const { return {particle(0), particle(2)}; }
    // Diagonal entries 1 + omega - kappa U_j^2 of the second variation. They equal
    // (tau, tau) on the symmetric branches and (A, B) with AB = 1 on the extra ones.
    std::array<double, 2> diagonal() const;
    // Ker of the second variation, the generator of phase rotations.
    Vec4 kernel() const { return symplectic_J4().transpose() * particle; }
};

double hartree_energy(const Vec4& X, double kappa);
Vec4 hartree_gradient(const Vec4& X, double kappa);

double reduced_energy(double theta, double kappa);
std::array<double, 2> reduced_energy_derivatives(double theta, double kappa);

// theta_kappa^+ = arcsin(2/kappa)/2, kappa > 2.
double theta_kappa_plus(double kappa);

std::vector<StationaryBranch> hartree_branches(double kappa);
StationaryBranch make_branch(BranchLabel label, double kappa);
double dispersion_omega(BranchLabel label, double kappa);

struct CoupledStationary {
    StationaryBranch branch;
    RadialGrid grid;
    std::vector<double> profile0, profile1;  // transforms of Psi*_j at the grid nodes
    std::vector<double> psi0, psi1;          // mode coordinates (see FieldState)
};

// The branch kappa must equal compute_kappa(shape, grid).
CoupledStationary coupled_stationary(const StationaryBranch& branch, const CouplingShape& shape,
                                     const RadialGrid& grid);

}  // namespace tlw
