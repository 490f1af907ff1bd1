// Structural properties, runnable on their own: ./test_properties
// Each case draws its inputs from a fixed seed.

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "tlw/instability.hpp"
#include "tlw/spectral.hpp"

using namespace tlw;
using Catch::Matchers::WithinAbs;

namespace {

constexpr int kSamples = 200;

struct Sampler {
    std::mt19937_64 rng;
    explicit Sampler(std::uint64_t seed) : rng(seed) {}
    double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }
    Vec4 near(const Vec4& X, double spread) {
        std::normal_distribution<double> n(0.0, spread);
        return X + Vec4(n(rng), n(rng), n(rng), n(rng));
    }
};

std::vector<StationaryBranch> symmetric_branches() {
    return {make_branch(BranchLabel::symmetric_plus, 1.4), make_branch(BranchLabel::symmetric_plus, 2.4),
            make_branch(BranchLabel::symmetric_minus, 0.193), make_branch(BranchLabel::symmetric_minus, 2.5)};
}

std::vector<CoupledOperator> coupled_operators() {
    const auto base = make_shape(ShapeKind::gaussian, 1.0, 1.0, 3);
    const auto grid = make_grid(choose_cutoff(base), 4);
    std::vector<CoupledOperator> ops;
    for (auto [label, kappa] : {std::pair{BranchLabel::symmetric_plus, 1.4}, std::pair{BranchLabel::symmetric_minus, 1.58},
                                std::pair{BranchLabel::symmetric_plus, 2.42}, std::pair{BranchLabel::asym_minus, 2.42}}) {
        const auto sh = calibrate_amplitude(base, kappa, grid);
        ops.push_back(build_coupled_operator(make_branch(label, compute_kappa(sh, grid)), sh, grid, 1.0));
    }
    return ops;
}

}  // namespace

TEST_CASE("theta_star is equivariant under phase rotation", "[property]") {
    Sampler s(101);
    for (const auto& br : symmetric_branches())
        for (int i = 0; i < kSamples; ++i) {
            const Vec4 V = s.near(br.particle, 0.25);
            const double a = s.uniform(-M_PI, M_PI);
            const double t0 = theta_star(V, br).theta_star, t1 = theta_star(rotation(a) * V, br).theta_star;
            CHECK(std::abs(angle_difference(t1, t0 - a)) <= 1e-12);
        }
}

TEST_CASE("A and P are invariant under phase rotation", "[property]") {
    Sampler s(102);
    for (const auto& br : symmetric_branches())
        for (int i = 0; i < kSamples; ++i) {
            const Vec4 V = s.near(br.particle, 0.25);
            const Mat4 R = rotation(s.uniform(-M_PI, M_PI));
            CHECK_THAT(functional_A(R * V, br), WithinAbs(functional_A(V, br), 1e-12));
            CHECK_THAT(functional_P(R * V, br), WithinAbs(functional_P(V, br), 1e-11));
        }
}

TEST_CASE("chain rule: d/dt A equals P along the flow", "[property]") {
    Sampler s(103);
    for (const auto& br : symmetric_branches())
        for (int i = 0; i < 10; ++i) {
            const Vec4 V = s.near(br.particle, 0.1).normalized();
            const double dt = 2e-4;
            const Vec4 mid = step_hartree(V, dt, br.kappa);
            const Vec4 end = step_hartree(mid, dt, br.kappa);
            const double fd = (functional_A(end, br) - functional_A(V, br)) / (2.0 * dt);
            CHECK_THAT(fd, WithinAbs(functional_P(mid, br), 1e-6));
        }
}

TEST_CASE("gradients agree with central differences", "[property]") {
    Sampler s(104);
    const double h = 1e-6;
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
    for (const auto& br : symmetric_branches())
        for (int i = 0; i < 20; ++i) {
            const Vec4 V = s.near(br.particle, 0.3);
            const Vec4 gA = functional_A_gradient(V, br), gE = hartree_gradient(V, br.kappa);
            for (int j = 0; j < 4; ++j) {
                const Vec4 e = Vec4::Unit(j) * h;
                CHECK(rel(gA(j), (functional_A(V + e, br) - functional_A(V - e, br)) / (2 * h)) <= 1e-6);
                CHECK(rel(gE(j), (hartree_energy(V + e, br.kappa) - hartree_energy(V - e, br.kappa)) / (2 * h)) <= 1e-6);
            }
        }
}

TEST_CASE("coercivity lower bounds", "[property]") {
    for (double kappa : {0.193, 1.4, 1.58})
        CHECK(hartree_coercivity_min(kappa, 1) >= (2.0 - kappa) - 1e-9);
    for (const auto& op : coupled_operators()) {
        if (op.branch.label != BranchLabel::symmetric_plus || op.branch.kappa > 2.0) continue;
        const auto cc = coupled_coercivity(op);
        CHECK(cc.minimum >= cc.bound - 1e-9);
    }
}

TEST_CASE("generator factors through the symplectic matrix", "[property]") {
    const Mat4 J = symplectic_J4();
    for (double kappa : {1.4, 2.4, 2.5}) {
        for (int tau : {1, -1}) {
            const MatX d = build_L_hartree(kappa, tau).entries - J * build_Lscript_hartree(kappa, tau).entries;
            CHECK(d.cwiseAbs().maxCoeff() == 0.0);
        }
        if (kappa > 2.0)
            for (auto label : {BranchLabel::asym_plus, BranchLabel::asym_minus}) {
                const MatX d = build_L_hartree_extra(kappa, label).entries - J * build_Lscript_hartree_extra(kappa, label).entries;
                CHECK(d.cwiseAbs().maxCoeff() <= 1e-15);
            }
    }
    for (const auto& op : coupled_operators()) {
        CHECK((op.L - op.J * op.Lscript).cwiseAbs().maxCoeff() <= 1e-14);
        CHECK((op.Lscript - op.Lscript.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK((op.J + op.J.transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("generator spectrum is symmetric under conjugation and reflection", "[property]") {
    for (double kappa : {1.4, 2.4, 2.5})
        for (int tau : {1, -1})
            CHECK(quadruple_symmetry_defect(eigenvalues_general(build_L_hartree(kappa, tau).entries)) <= 1e-8);
    for (const auto& op : coupled_operators()) CHECK(quadruple_symmetry_defect(spectrum_coupled_L(op)) <= 1e-8);
}
