#include "tlw/stationary.hpp"

#include <cmath>

#include "tlw/errors.hpp"

namespace tlw {

std::string to_string(BranchLabel b) {
    switch (b) {
        case BranchLabel::symmetric_plus: return "symmetric_plus";
        case BranchLabel::symmetric_minus: return "symmetric_minus";
        case BranchLabel::asym_plus: return "asym_plus";
        case BranchLabel::asym_minus: return "asym_minus";
    }
    return "?";
}

std::string to_string(Classification c) {
    switch (c) {
        case Classification::min: return "min";
        case Classification::max: return "max";
        case Classification::local_max: return "local_max";
        case Classification::saddle: return "saddle";
    }
    return "?";
}

BranchLabel branch_from_string(const std::string& s) {
    if (s == "symmetric_plus" || s == "sym+") return BranchLabel::symmetric_plus;
    if (s == "symmetric_minus" || s == "sym-") return BranchLabel::symmetric_minus;
    if (s == "asym_plus" || s == "extra" || s == "extra+") return BranchLabel::asym_plus;
    if (s == "asym_minus" || s == "extra-") return BranchLabel::asym_minus;
    throw ValidationError("config", "unknown branch '" + s + "'");
}

int StationaryBranch::tau() const {
    if (label == BranchLabel::symmetric_plus) return 1;
    if (label == BranchLabel::symmetric_minus) return -1;
    return 0;
}

std::array<double, 2> StationaryBranch::diagonal() const {
    const double m0 = particle.segment<2>(0).squaredNorm();
    const double m1 = particle.segment<2>(2).squaredNorm();
    return {1.0 + omega - kappa * m0, 1.0 + omega - kappa * m1};
}

double hartree_energy(const Vec4& X, double kappa) {
    const double dq = X(0) - X(2), dp = X(1) - X(3);
    const double m0 = X(0) * X(0) + X(1) * X(1);
    const double m1 = X(2) * X(2) + X(3) * X(3);
    return 0.5 * (dq * dq + dp * dp) - 0.25 * kappa * (m0 * m0 + m1 * m1);
}

Vec4 hartree_gradient(const Vec4& X, double kappa) {
    const double m0 = X(0) * X(0) + X(1) * X(1);
    const double m1 = X(2) * X(2) + X(3) * X(3);
    Vec4 g;
    g(0) = (X(0) - X(2)) - kappa * m0 * X(0);
    g(1) = (X(1) - X(3)) - kappa * m0 * X(1);
    g(2) = (X(2) - X(0)) - kappa * m1 * X(2);
    g(3) = (X(3) - X(1)) - kappa * m1 * X(3);
    return g;
}

double reduced_energy(double theta, double kappa) {
    const double c = std::cos(theta), s = std::sin(theta);
    return 0.5 * (c - s) * (c - s) - 0.25 * kappa * (c * c * c * c + s * s * s * s);
}

std::array<double, 2> reduced_energy_derivatives(double theta, double kappa) {
    const double s2 = std::sin(2.0 * theta), c2 = std::cos(2.0 * theta);
    const double d1 = 0.5 * kappa * c2 * (s2 - 2.0 / kappa);
    const double d2 = kappa * (c2 * c2 - s2 * (s2 - 2.0 / kappa));
    return {d1, d2};
}

double theta_kappa_plus(double kappa) {
    require(kappa > 2.0, "regime", "extra branches exist only for kappa > 2");
    return 0.5 * std::asin(2.0 / kappa);
}

double dispersion_omega(BranchLabel label, double kappa) {
    switch (label) {
        case BranchLabel::symmetric_plus: return 0.5 * kappa;
        case BranchLabel::symmetric_minus: return 0.5 * kappa - 2.0;
        default:
            require(kappa > 2.0, "regime", "extra branches exist only for kappa > 2");
            return kappa - 1.0;
    }
}

StationaryBranch make_branch(BranchLabel label, double kappa) {
    require(std::isfinite(kappa) && kappa > 0.0, "regime", "kappa must be positive");
    require(kappa != 2.0, "threshold", "kappa = 2 is the degenerate threshold");
    StationaryBranch b;
    b.label = label;
    b.kappa = kappa;
    const double r = 1.0 / std::sqrt(2.0);
    double theta = 0.0;
    switch (label) {
        case BranchLabel::symmetric_plus:
            b.particle << r, 0.0, r, 0.0;
            theta = M_PI / 4.0;
            b.classification = kappa < 2.0 ? Classification::min : Classification::local_max;
            break;
        case BranchLabel::symmetric_minus:
            b.particle << r, 0.0, -r, 0.0;
            theta = 3.0 * M_PI / 4.0;
            b.classification = Classification::max;
            break;
        case BranchLabel::asym_plus:
        case BranchLabel::asym_minus: {
            const double t = theta_kappa_plus(kappa);
            const double alpha = std::sin(t), beta = std::cos(t);
            if (label == BranchLabel::asym_plus) {
                b.particle << alpha, 0.0, beta, 0.0;
                theta = 0.5 * M_PI - t;
            } else {
                b.particle << beta, 0.0, alpha, 0.0;
                theta = t;
            }
            b.classification = Classification::min;
            break;
        }
    }
    b.omega = dispersion_omega(label, kappa);
    b.energy = reduced_energy(theta, kappa);
    return b;
}

std::vector<StationaryBranch> hartree_branches(double kappa) {
    std::vector<StationaryBranch> out;
    out.push_back(make_branch(BranchLabel::symmetric_plus, kappa));
    out.push_back(make_branch(BranchLabel::symmetric_minus, kappa));
    if (kappa > 2.0) {
        out.push_back(make_branch(BranchLabel::asym_plus, kappa));
        out.push_back(make_branch(BranchLabel::asym_minus, kappa));
    }
    return out;
}

CoupledStationary coupled_stationary(const StationaryBranch& branch, const CouplingShape& shape,
                                     const RadialGrid& grid) {
    const double kgrid = compute_kappa(shape, grid);
    require(std::abs(kgrid - branch.kappa) <= 1e-8 * branch.kappa, "regime",
            "branch kappa does not match the coupling shape on this grid");
    // Rebuild the branch at the grid value so the discrete equilibrium is exact.
    CoupledStationary cs{make_branch(branch.label, kgrid), grid, {}, {}, {}, {}};
    const auto gp = gamma_potential(shape, grid);
    const auto s = mode_coefficients(shape, grid);
    const double m0 = cs.branch.particle.segment<2>(0).squaredNorm();
    const double m1 = cs.branch.particle.segment<2>(2).squaredNorm();
    const std::size_t N = grid.size();
    cs.profile0.resize(N);
    cs.profile1.resize(N);
    cs.psi0.resize(N);
    cs.psi1.resize(N);
    for (std::size_t k = 0; k < N; ++k) {
        const double xi = grid.nodes[k];
        cs.profile0[k] = -m0 * gp.gamma_hat[k];
        cs.profile1[k] = -m1 * gp.gamma_hat[k];
        // psi_k = -|U_j|^2 g_k / xi_k^2 with g_k = s_k xi_k.
        cs.psi0[k] = -m0 * s[k] / xi;
        cs.psi1[k] = -m1 * s[k] / xi;
    }
    return cs;
}

}  // namespace tlw
