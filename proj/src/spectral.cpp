#include "tlw/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/Polynomials>
#include <algorithm>
#include <cmath>

#include "tlw/errors.hpp"

namespace tlw {

std::string to_string(OperatorKind k) {
    switch (k) {
        case OperatorKind::L_hartree_sym: return "L_hartree_sym";
        case OperatorKind::L_hartree_extra: return "L_hartree_extra";
        case OperatorKind::Lscript_hartree_sym: return "Lscript_hartree_sym";
        case OperatorKind::Lscript_hartree_extra: return "Lscript_hartree_extra";
    }
    return "?";
}

std::vector<cplx> SpectralReport::values(const std::string& source) const {
    std::vector<cplx> out;
    for (const auto& e : eigenvalues)
        if (e.source == source)
            for (int m = 0; m < e.multiplicity; ++m) out.push_back(e.value);
    return out;
}

namespace {

void check_tau(int tau) { require(tau == 1 || tau == -1, "config", "tau must be +1 or -1"); }

std::pair<double, double> extra_AB(double kappa, BranchLabel label) {
    require(kappa > 2.0, "regime", "extra branches exist only for kappa > 2");
    const auto b = make_branch(label, kappa);
    const auto d = b.diagonal();
    return {d[0], d[1]};
}

// Numeric eigenvalues of a small matrix, appended as numeric entries, with the
// closed-form mismatch recorded.
void overlay_numeric(SpectralReport& rep, const MatX& M) {
    const auto num = eigenvalues_general(M);
    const auto closed = rep.values("closed_form");
    for (const auto& z : num) rep.eigenvalues.push_back({z, 1, "numeric", "discrete"});
    // Greedy matching; the zero eigenvalue of a Jordan block splits by ~sqrt(eps), so it
    // is matched at that looser scale and excluded from the mismatch.
    std::vector<bool> used(num.size(), false);
    for (const auto& z : closed) {
        double best = INFINITY;
        std::size_t arg = 0;
        for (std::size_t i = 0; i < num.size(); ++i)
            if (!used[i] && std::abs(num[i] - z) < best) best = std::abs(num[i] - z), arg = i;
        if (best < INFINITY) used[arg] = true;
        if (std::abs(z) > 1e-6) rep.max_mismatch = std::max(rep.max_mismatch, best);
    }
}

void add_closed(SpectralReport& rep, cplx z, int mult = 1) {
    for (auto& e : rep.eigenvalues)
        if (e.source == "closed_form" && std::abs(e.value - z) < 1e-14) {
            e.multiplicity += mult;
            return;
        }
    rep.eigenvalues.push_back({z, mult, "closed_form", "discrete"});
}

}  // namespace

OperatorMatrix build_L_hartree(double kappa, int tau) {
    check_tau(tau);
    const double t = tau, k = kappa;
    OperatorMatrix m{OperatorKind::L_hartree_sym, Mat4::Zero(), kappa, tau, 0.0, 0.0};
    m.entries << 0, t, 0, -1,
                 k - t, 0, 1, 0,
                 0, -1, 0, t,
                 1, 0, k - t, 0;
    return m;
}

OperatorMatrix build_Lscript_hartree(double kappa, int tau) {
    check_tau(tau);
    const double t = tau, k = kappa;
    OperatorMatrix m{OperatorKind::Lscript_hartree_sym, Mat4::Zero(), kappa, tau, 0.0, 0.0};
    m.entries << t - k, 0, -1, 0,
                 0, t, 0, -1,
                 -1, 0, t - k, 0,
                 0, -1, 0, t;
    return m;
}

OperatorMatrix build_L_hartree_extra(double kappa, BranchLabel label) {
    const auto [A, B] = extra_AB(kappa, label);
    OperatorMatrix m{OperatorKind::L_hartree_extra, Mat4::Zero(), kappa, 0, A, B};
    m.entries << 0, A, 0, -1,
                 2 * B - A, 0, 1, 0,
                 0, -1, 0, B,
                 1, 0, 2 * A - B, 0;
    return m;
}

OperatorMatrix build_Lscript_hartree_extra(double kappa, BranchLabel label) {
    const auto [A, B] = extra_AB(kappa, label);
    OperatorMatrix m{OperatorKind::Lscript_hartree_extra, Mat4::Zero(), kappa, 0, A, B};
    m.entries << A - 2 * B, 0, -1, 0,
                 0, A, 0, -1,
                 -1, 0, B - 2 * A, 0,
                 0, -1, 0, B;
    return m;
}

JordanInfo jordan_at_zero(const MatX& M, double threshold) {
    const int n = static_cast<int>(M.rows());
    JordanInfo j;
    j.eigenvalue = 0.0;
    j.geometric = n - numerical_rank(M, threshold);
    j.algebraic = n - numerical_rank(M * M, threshold);
    return j;
}

SpectralReport spectrum_L_hartree(double kappa, int tau) {
    const auto L = build_L_hartree(kappa, tau);
    SpectralReport rep;
    const cplx root = std::sqrt(cplx(2.0 * tau * kappa - 4.0, 0.0));
    add_closed(rep, 0.0, 2);
    add_closed(rep, root);
    add_closed(rep, -root);
    rep.jordan.push_back(jordan_at_zero(L.entries));
    overlay_numeric(rep, L.entries);
    return rep;
}

SpectralReport spectrum_Lscript_hartree(double kappa, int tau) {
    const auto L = build_Lscript_hartree(kappa, tau);
    SpectralReport rep;
    for (double z : {0.0, -kappa, 2.0 * tau, 2.0 * tau - kappa}) add_closed(rep, z);
    overlay_numeric(rep, L.entries);
    const double t = tau;
    Vec4 v;
    v << 0, 1, 0, t;   rep.eigenvectors.push_back(v);
    v << 1, 0, t, 0;   rep.eigenvectors.push_back(v);
    v << 0, 1, 0, -t;  rep.eigenvectors.push_back(v);
    v << 1, 0, -t, 0;  rep.eigenvectors.push_back(v);
    return rep;
}

SpectralReport spectrum_extra_hartree(double kappa) {
    const auto L = build_L_hartree_extra(kappa);
    SpectralReport rep;
    const cplx root(0.0, std::sqrt(kappa * kappa - 4.0));
    add_closed(rep, 0.0, 2);
    add_closed(rep, root);
    add_closed(rep, -root);
    rep.jordan.push_back(jordan_at_zero(L.entries));
    overlay_numeric(rep, L.entries);
    Vec4 ker;
    ker << 0, 1, 0, L.A;
    rep.eigenvectors.push_back(ker);
    return rep;
}

SpectralReport spectrum_Lscript_extra_hartree(double kappa) {
    const auto L = build_Lscript_hartree_extra(kappa);
    SpectralReport rep;
    const double d = std::sqrt(9.0 * kappa * kappa - 32.0);
    for (double z : {0.0, kappa, 0.5 * (-kappa + d), 0.5 * (-kappa - d)}) add_closed(rep, z);
    overlay_numeric(rep, L.entries);
    return rep;
}

VecX CoupledOperator::kernel_vector() const {
    VecX X0 = VecX::Zero(dim());
    const auto d = branch.diagonal();
    X0(1) = 1.0;
    X0(3) = d[0];
    return X0;
}

CoupledOperator build_coupled_operator(const StationaryBranch& branch, const CouplingShape& shape,
                                       const RadialGrid& grid, double c) {
    require(c > 0.0 && std::isfinite(c), "config", "wave speed c must be positive");
    const double kgrid = compute_kappa(shape, grid);
    require(std::abs(kgrid - branch.kappa) <= 1e-8 * branch.kappa, "regime",
            "branch kappa does not match the coupling shape on this grid");
    CoupledOperator op;
    op.branch = make_branch(branch.label, kgrid);
    op.grid = grid;
    op.c = c;
    op.s = mode_coefficients(shape, grid);
    const std::size_t N = grid.size();
    const Eigen::Index D = 4 + 4 * static_cast<Eigen::Index>(N);
    op.L = MatX::Zero(D, D);
    op.Lscript = MatX::Zero(D, D);
    op.J = MatX::Zero(D, D);
    const auto d = op.branch.diagonal();
    const double U[2] = {op.branch.particle(0), op.branch.particle(2)};

    for (int j = 0; j < 2; ++j) {
        const int q = 2 * j, p = 2 * j + 1, qo = 2 * (1 - j), po = 2 * (1 - j) + 1;
        // generator, particle rows
        op.L(q, p) = d[j];
        op.L(q, po) = -1.0;
        op.L(p, q) = -d[j];
        op.L(p, qo) = 1.0;
        // second variation, particle rows
        op.Lscript(q, q) = d[j];
        op.Lscript(q, qo) = -1.0;
        op.Lscript(p, p) = d[j];
        op.Lscript(p, po) = -1.0;
        op.J(q, p) = 1.0;
        op.J(p, q) = -1.0;
        for (std::size_t k = 0; k < N; ++k) {
            const double xi = grid.nodes[k], sk = op.s[k];
            const auto f = op.phi(j, k), w = op.varpi(j, k);
            // p_j' gets -U_j * (perturbed potential) = -U_j sum_k s_k phi_k
            op.L(p, f) = -U[j] * sk;
            op.L(f, w) = c * xi;
            op.L(w, f) = -c * xi;
            op.L(w, q) = -2.0 * c * xi * sk * U[j];

            op.Lscript(q, f) = U[j] * sk;
            op.Lscript(f, q) = U[j] * sk;
            op.Lscript(f, f) = 0.5;
            op.Lscript(w, w) = 0.5;

            op.J(f, w) = 2.0 * c * xi;
            op.J(w, f) = -2.0 * c * xi;
        }
    }
    return op;
}

std::vector<cplx> extra_quartic_roots(double kappa) {
    require(kappa > 2.0, "regime", "extra branches exist only for kappa > 2");
    const double A2B2 = kappa * kappa - 2.0, AmB2 = kappa * kappa - 4.0;
    Eigen::Matrix<double, 5, 1> coeffs;
    coeffs << -2.0 * AmB2, 4.0 * A2B2 + kappa, 1.0, -4.0 * (kappa + 1.0), 4.0;
    Eigen::PolynomialSolver<double, 4> solver(coeffs);
    std::vector<cplx> out;
    for (Eigen::Index i = 0; i < solver.roots().size(); ++i) out.push_back(solver.roots()(i));
    std::sort(out.begin(), out.end(), [](cplx a, cplx b) { return a.real() < b.real(); });
    return out;
}

SpectralReport spectrum_coupled_Lscript(BranchLabel label, double kappa) {
    SpectralReport rep;
    rep.essential = std::vector<double>{0.5};
    if (!is_extra(label)) {
        require(kappa > 0.0 && kappa != 2.0, "regime", "invalid kappa for the symmetric branch");
        const double t = label == BranchLabel::symmetric_plus ? 1.0 : -1.0;
        add_closed(rep, 0.0);
        add_closed(rep, 2.0 * t);
        // (l - 1/2)(l - t + 1) - k/2 = 0 and (l - 1/2)(l - t - 1) - k/2 = 0
        for (double shift : {t - 1.0, t + 1.0}) {
            const double b = -(0.5 + shift), c0 = 0.5 * shift - 0.5 * kappa;
            const double disc = std::sqrt(b * b - 4.0 * c0);
            add_closed(rep, 0.5 * (-b + disc));
            add_closed(rep, 0.5 * (-b - disc));
        }
    } else {
        add_closed(rep, 0.0);
        add_closed(rep, kappa);
        for (const auto& z : extra_quartic_roots(kappa)) add_closed(rep, cplx(z.real(), 0.0));
    }
    return rep;
}

SpectralReport spectrum_coupled_Lscript(const CoupledOperator& op) {
    SpectralReport rep = spectrum_coupled_Lscript(op.branch.label, op.branch.kappa);
    const auto num = eigenvalues_symmetric(op.Lscript);
    const auto closed = rep.values("closed_form");
    // Numeric multiplicities: count numeric values within 1e-6 of each closed-form value.
    for (auto& e : rep.eigenvalues) {
        int m = 0;
        for (double z : num)
            if (std::abs(z - e.value.real()) < 1e-6) ++m;
        if (std::abs(e.value.real() - 0.5) >= 1e-6) e.multiplicity = std::max(m, 1);
    }
    int cluster = 0;
    for (double z : num) {
        const bool ess = std::abs(z - 0.5) < 1e-6;
        if (ess) ++cluster;
        rep.eigenvalues.push_back({cplx(z, 0.0), 1, "numeric", ess ? "essential_cluster" : "discrete"});
    }
    for (const auto& z : closed) {
        if (std::abs(z.real() - 0.5) < 1e-6) continue;
        double best = INFINITY;
        for (double v : num)
            if (std::abs(v - 0.5) >= 1e-6) best = std::min(best, std::abs(v - z.real()));
        rep.max_mismatch = std::max(rep.max_mismatch, best);
    }
    rep.jordan.push_back({cplx(0.5, 0.0), cluster, cluster});
    return rep;
}

namespace {

// Exchanging the channels (fields picking up tau) commutes with the generator when
// U_1 = tau U_0. The even and odd subspaces then give two half-size blocks.
bool split_by_exchange(const CoupledOperator& op, const MatX& L, MatX& even, MatX& odd) {
    const auto U = op.branch.amplitudes();
    const int tau = op.branch.tau();
    if (std::abs(U[1] - tau * U[0]) > 1e-14 * std::abs(U[0])) return false;
    const Eigen::Index n = op.dim(), h = n / 2;
    const auto N = static_cast<Eigen::Index>(op.modes());
    std::vector<Eigen::Index> first(h), second(h);
    std::vector<double> sign(h);
    first[0] = 0, second[0] = 2, sign[0] = 1.0;
    first[1] = 1, second[1] = 3, sign[1] = 1.0;
    for (Eigen::Index k = 0; k < 2 * N; ++k) {
        first[2 + k] = 4 + k;
        second[2 + k] = 4 + 2 * N + k;
        sign[2 + k] = tau;
    }
    even.resize(h, h);
    odd.resize(h, h);
    double leak = 0.0;
    for (Eigen::Index a = 0; a < h; ++a) {
        const Eigen::Index ia = first[a], ja = second[a];
        for (Eigen::Index b = 0; b < h; ++b) {
            const Eigen::Index ib = first[b], jb = second[b];
            const double sab = sign[a] * sign[b];
            const double direct = L(ia, ib) + sab * L(ja, jb);
            const double cross = sign[b] * L(ia, jb) + sign[a] * L(ja, ib);
            even(a, b) = 0.5 * (direct + cross);
            odd(a, b) = 0.5 * (direct - cross);
            leak = std::max(leak, std::abs(L(ia, ib) - sab * L(ja, jb)));
            leak = std::max(leak, std::abs(sign[b] * L(ia, jb) - sign[a] * L(ja, ib)));
        }
    }
    return leak <= 1e-12 * std::max(1.0, L.cwiseAbs().maxCoeff());
}

}  // namespace

std::vector<cplx> spectrum_coupled_L(const CoupledOperator& op) {
    MatX even, odd;
    if (!split_by_exchange(op, op.L, even, odd)) return eigenvalues_general(op.L);
    auto values = eigenvalues_general(even);
    const auto rest = eigenvalues_general(odd);
    values.insert(values.end(), rest.begin(), rest.end());
    return values;
}

std::vector<double> negative_energy_frequencies(const CoupledOperator& op) {
    std::vector<std::pair<MatX, MatX>> blocks;
    MatX Le, Lo, Se, So;
    if (split_by_exchange(op, op.L, Le, Lo) && split_by_exchange(op, op.Lscript, Se, So)) {
        blocks.emplace_back(std::move(Le), std::move(Se));
        blocks.emplace_back(std::move(Lo), std::move(So));
    } else {
        blocks.emplace_back(op.L, op.Lscript);
    }
    std::vector<double> out;
    for (const auto& [L, S] : blocks) {
        Eigen::EigenSolver<MatX> es(L, true);
        if (es.info() != Eigen::Success) throw NumericalError("quadrature", "eigen decomposition failed");
        for (Eigen::Index i = 0; i < L.rows(); ++i) {
            const cplx z = es.eigenvalues()(i);
            if (z.imag() <= 1e-6 || std::abs(z.real()) > 1e-6) continue;
            const Eigen::VectorXcd v = es.eigenvectors().col(i);
            const double energy = (v.adjoint() * S.cast<cplx>() * v)(0, 0).real();
            if (energy < 0.0) out.push_back(z.imag());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

KernelPairing coupled_kernel_pairing(const CoupledOperator& op) {
    const VecX X0 = op.kernel_vector();
    const VecX rhs = -op.J * X0;
    const MatX reg = op.Lscript + X0 * X0.transpose() / X0.squaredNorm();
    VecX Y = reg.partialPivLu().solve(rhs);
    Y -= (Y.dot(X0) / X0.squaredNorm()) * X0;
    KernelPairing kp;
    kp.Y0 = Y;
    kp.product = rhs.dot(Y);
    kp.residual = (op.Lscript * Y - rhs).norm();
    kp.kernel_residual = (op.Lscript * X0).norm();
    return kp;
}

double quadruple_symmetry_defect(const std::vector<cplx>& eigs, double floor) {
    double worst = 0.0;
    auto nearest = [&](cplx z) {
        double best = INFINITY;
        for (const auto& w : eigs) best = std::min(best, std::abs(w - z));
        return best;
    };
    for (const auto& z : eigs) {
        if (std::abs(z) <= floor) continue;
        worst = std::max({worst, nearest(-z), nearest(std::conj(z)), nearest(-std::conj(z))});
    }
    return worst;
}

double max_real_part(const std::vector<cplx>& eigs) {
    double m = -INFINITY;
    for (const auto& z : eigs) m = std::max(m, z.real());
    return m;
}

}  // namespace tlw
