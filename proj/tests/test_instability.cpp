#include <catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

#include "tlw/errors.hpp"
#include "tlw/instability.hpp"

using namespace tlw;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Vec4 random_near(const Vec4& X, double spread, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, spread);
    return X + Vec4(n(rng), n(rng), n(rng), n(rng));
}

double wrap(double a) { return std::remainder(a, 2.0 * M_PI); }

}  // namespace

TEST_CASE("theta_star minimizes the orbit distance", "[instability]") {
    const auto br = make_branch(BranchLabel::symmetric_plus, 1.4);
    const Vec4 V = Vec4(1, 1, 0, 0) / std::sqrt(2.0);
    const auto p = theta_star(V, br);
    double best = INFINITY, best_t = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
        const double t = 2.0 * M_PI * i / n;
        const double d = (rotation(t) * V - br.particle).squaredNorm();
        if (d < best) best = d, best_t = t;
    }
    CHECK(std::abs(wrap(p.theta_star - best_t)) <= 1e-5);
    CHECK((p.aligned - br.particle).squaredNorm() <= best + 1e-14);
}

TEST_CASE("theta_star equivariance and decomposition", "[instability]") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ang(-M_PI, M_PI);
    for (auto label : {BranchLabel::symmetric_plus, BranchLabel::symmetric_minus}) {
        const auto br = make_branch(label, label == BranchLabel::symmetric_plus ? 2.4 : 1.4);
        const Vec4 xs = x_soft(br), x2 = x_second(br);
        CHECK(xs.dot(br.particle) == 0.0);
        CHECK(x2.dot(br.particle) == 0.0);
        CHECK(xs.dot(br.kernel()) == 0.0);
        for (int i = 0; i < 100; ++i) {
            const Vec4 V = random_near(br.particle, 0.2, rng);
            const double a = ang(rng);
            const auto p = theta_star(V, br);
            const auto q = theta_star(rotation(a) * V, br);
            CHECK(std::abs(wrap(q.theta_star - (p.theta_star - a))) <= 1e-12);
            CHECK((q.aligned - p.aligned).norm() <= 1e-12);
            // R(theta*) V has no component along the phase generator.
            CHECK(std::abs(p.aligned.dot(br.kernel())) <= 1e-12);
            const Vec4 back = p.lambda_coeff * xs + p.a * br.particle + p.M;
            CHECK((back - p.aligned).norm() <= 1e-14);
            CHECK(std::abs(p.M.dot(xs)) <= 1e-12);
            CHECK(std::abs(p.M.dot(br.particle)) <= 1e-12);
            CHECK(std::abs(p.M_tilde.dot(x2)) <= 1e-12);
            CHECK_THAT(functional_A(rotation(a) * V, br), WithinAbs(functional_A(V, br), 1e-12));
            CHECK_THAT(functional_P(rotation(a) * V, br), WithinAbs(functional_P(V, br), 1e-11));
        }
    }
}

TEST_CASE("gradients match central differences", "[instability]") {
    std::mt19937_64 rng(5);
    const auto br = make_branch(BranchLabel::symmetric_plus, 2.4);
    const double h = 1e-6;
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
    for (int i = 0; i < 20; ++i) {
        const Vec4 V = random_near(br.particle, 0.3, rng);
        const Vec4 gA = functional_A_gradient(V, br), gT = theta_star_gradient(V, br), gE = hartree_gradient(V, br.kappa);
        for (int j = 0; j < 4; ++j) {
            const Vec4 e = Vec4::Unit(j) * h;
            const double dA = (functional_A(V + e, br) - functional_A(V - e, br)) / (2 * h);
            const double dT = wrap(optimal_phase(V + e, br.particle) - optimal_phase(V - e, br.particle)) / (2 * h);
            const double dE = (hartree_energy(V + e, br.kappa) - hartree_energy(V - e, br.kappa)) / (2 * h);
            CHECK(rel(gA(j), dA) <= 1e-6);
            CHECK(rel(gT(j), dT) <= 1e-6);
            CHECK(rel(gE(j), dE) <= 1e-6);
        }
    }
}

TEST_CASE("A changes at the rate P along the Hartree flow", "[instability]") {
    std::mt19937_64 rng(3);
    const auto br = make_branch(BranchLabel::symmetric_plus, 2.4);
    for (int i = 0; i < 5; ++i) {
        const Vec4 V = random_near(br.particle, 0.1, rng).normalized();
        double err[2];
        int j = 0;
        for (double dt : {1e-2, 5e-3}) {
            // Central difference at the midpoint of two forward steps.
            const Vec4 mid = step_hartree(V, dt, br.kappa);
            const double Ap = functional_A(step_hartree(mid, dt, br.kappa), br);
            err[j++] = std::abs((Ap - functional_A(V, br)) / (2 * dt) - functional_P(mid, br));
        }
        CHECK(err[1] <= 1e-5);
        CHECK(err[0] / err[1] > 3.5);
        CHECK(err[0] / err[1] < 4.5);
    }
}

TEST_CASE("lemma direction", "[instability]") {
    const auto br = make_branch(BranchLabel::symmetric_plus, 2.4);
    for (double s : {-0.05, -0.02, 0.02, 0.05, 0.1}) {
        const Vec4 V = lemma_direction(s, br);
        CHECK_THAT(V.norm(), WithinAbs(1.0, 1e-15));
        // Leading order: P(V_s) = s (2 - kappa) |X_{2-k}|^2, so the sign is that of -s.
        const double first = s * (2.0 - br.kappa) * x_soft(br).squaredNorm();
        CHECK(functional_P(V, br) * first > 0.0);
        if (std::abs(s) <= 0.05) CHECK_THAT(functional_P(V, br), WithinRel(first, 0.1));
        CHECK(hartree_energy(V, br.kappa) < hartree_energy(br.particle, br.kappa));
    }
    CHECK_THAT(functional_P(lemma_direction(-0.05, br), br), WithinRel(0.04, 0.1));
    CHECK_THROWS_AS(lemma_direction(0.8, br), ValidationError);
    CHECK_THROWS_AS(x_soft(make_branch(BranchLabel::asym_plus, 2.4)), ValidationError);
}

TEST_CASE("unstable directions", "[instability]") {
    const auto u = unstable_direction_hartree(2.4, 1);
    CHECK_THAT(u.lambda.real(), WithinAbs(2.0 * std::sqrt(0.2), 1e-15));
    CHECK(u.residual <= 1e-14);
    CHECK_THROWS_AS(unstable_direction_hartree(1.4, 1), ValidationError);
    CHECK_THROWS_AS(unstable_direction_hartree(2.4, -1), ValidationError);

    const auto base = make_shape(ShapeKind::gaussian, 1.0, 1.0, 3);
    const auto grid = make_grid(choose_cutoff(base), 4);
    for (auto [label, kappa] : {std::pair{BranchLabel::symmetric_minus, 1.58}, std::pair{BranchLabel::symmetric_plus, 2.42}}) {
        const auto sh = calibrate_amplitude(base, kappa, grid);
        const auto op = build_coupled_operator(make_branch(label, compute_kappa(sh, grid)), sh, grid, 1.0);
        const auto d = unstable_direction_coupled(op);
        CHECK(d.residual <= 1e-8);
        CHECK(d.lambda.real() > 1e-4);
        CHECK_THAT(d.lambda.real(), WithinAbs(max_real_part(spectrum_coupled_L(op)), 1e-8));
        CHECK_THAT(d.direction.norm(), WithinAbs(1.0, 1e-14));
        CHECK(std::abs(d.eigvec_re.dot(d.eigvec_im)) <= 1e-10);
    }
    const auto sh = calibrate_amplitude(base, 1.4, grid);
    const auto stable = build_coupled_operator(make_branch(BranchLabel::symmetric_plus, compute_kappa(sh, grid)), sh, grid, 1.0);
    CHECK_THROWS_AS(unstable_direction_coupled(stable), ValidationError);
}

TEST_CASE("hartree escape experiment", "[instability]") {
    const auto fit = growth_experiment_hartree(2.4, 1);
    const double a = 2.0 * std::sqrt(0.2);
    CHECK(fit.accepted);
    CHECK_THAT(fit.predicted, WithinAbs(a, 1e-15));
    CHECK_THAT(fit.rate, WithinRel(a, 0.02));
    REQUIRE(fit.escape_times.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        INFO("delta=" << fit.deltas[i]);
        REQUIRE(std::isfinite(fit.escape_times[i]));
        CHECK_THAT(fit.escape_times[i], WithinRel(fit.predicted_escape[i], 0.05));
    }
    // Escape time grows by ln(10)/a per decade of delta.
    const double slope = (fit.escape_times[2] - fit.escape_times[0]) / std::log(100.0);
    CHECK_THAT(slope, WithinRel(1.0 / a, 0.02));

    GrowthOptions bad;
    bad.deltas = {0.5};
    CHECK_THROWS_AS(growth_experiment_hartree(2.4, 1, bad), ValidationError);
}

TEST_CASE("linearized growth", "[instability]") {
    const auto fit = growth_linearized_hartree(2.4, 1, Vec4(0.3, -0.1, 0.2, 0.4), 30.0);
    CHECK(fit.accepted);
    CHECK_THAT(fit.rate, WithinRel(2.0 * std::sqrt(0.2), 1e-3));

    for (auto [kappa, tau] : {std::pair{1.4, 1}, std::pair{1.4, -1}, std::pair{2.4, -1}}) {
        for (const Vec4& Y : {Vec4(0.2, 0.0, 0.1, 0.0), Vec4(-0.5, 0.3, 0.25, 0.1)}) {
            const double C1 = Y(0) + tau * Y(2);
            const auto lin = growth_ill_prepared(kappa, tau, Y, 20.0);
            CHECK_THAT(lin.predicted, WithinAbs(kappa * C1, 1e-15));
            CHECK_THAT(lin.rate, WithinRel(kappa * C1, 1e-6));
            CHECK(lin.r_squared > 0.9);
        }
    }
    CHECK_THROWS_AS(growth_ill_prepared(1.4, 1, Vec4(0.2, 0.0, -0.2, 0.0), 10.0), ValidationError);
}

TEST_CASE("coupled escape follows the leading eigenvalue", "[instability]") {
    CoupledGrowthSetup setup;
    setup.label = BranchLabel::symmetric_plus;
    setup.kappa = 2.42;
    setup.base_shape = make_shape(ShapeKind::gaussian, 1.0, 1.0, 3);
    setup.modes = 64;
    GrowthOptions opt;
    opt.dt = 4e-3;
    opt.horizon = 150.0;
    const auto fit = growth_experiment_coupled(setup, opt);
    CHECK(fit.predicted > 0.1);
    CHECK(fit.accepted);
    CHECK_THAT(fit.rate, WithinRel(fit.predicted, 0.05));
    for (double t : fit.escape_times) CHECK(std::isfinite(t));
}

TEST_CASE("coercivity", "[instability]") {
    for (auto [kappa, tau] : {std::pair{1.4, 1}, std::pair{0.5, 1}, std::pair{1.4, -1}, std::pair{0.5, -1}}) {
        INFO("kappa=" << kappa << " tau=" << tau);
        // Exact minimum of the quadratic form on the complement of X* and Ker.
        const auto br = make_branch(tau == 1 ? BranchLabel::symmetric_plus : BranchLabel::symmetric_minus, kappa);
        Eigen::Matrix<double, 4, 2> B;
        B.col(0) = br.particle;
        B.col(1) = br.kernel();
        Eigen::HouseholderQR<Eigen::Matrix<double, 4, 2>> qr(B);
        const Mat4 Qf = qr.householderQ();
        const Eigen::Matrix<double, 4, 2> C = Qf.rightCols<2>();
        const Eigen::Matrix2d R = C.transpose() * build_Lscript_hartree(kappa, tau).entries * C;
        const double exact = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(R).eigenvalues()(0);
        const double sampled = hartree_coercivity_min(kappa, tau);
        CHECK(sampled >= exact - 1e-12);
        CHECK(sampled <= exact + 1e-3);
        if (tau == 1) CHECK(sampled >= (2.0 - kappa) - 1e-9);
        CHECK(hartree_coercivity_min(kappa, tau) == sampled);
    }

    const auto base = make_shape(ShapeKind::gaussian, 1.0, 1.0, 3);
    const auto grid = make_grid(choose_cutoff(base), 8);
    for (double kappa : {0.193, 1.4, 1.58}) {
        const auto sh = calibrate_amplitude(base, kappa, grid);
        const auto op = build_coupled_operator(make_branch(BranchLabel::symmetric_plus, compute_kappa(sh, grid)), sh, grid, 1.0);
        const auto cc = coupled_coercivity(op);
        CHECK_THAT(cc.eps, WithinAbs(0.5 * (0.25 * kappa + 0.5), 1e-12));
        CHECK(cc.bound > 0.0);
        CHECK(cc.minimum >= cc.bound - 1e-9);
    }
}

TEST_CASE("resolvent bound on the sector where it holds", "[instability]") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::exponential_distribution<double> e(0.5);
    for (int i = 0; i < 20000; ++i) {
        const double a = 3.0 * u(rng);
        if (a == 0.0) continue;
        const double b = std::sqrt(3.0) * std::abs(a) * u(rng);
        const double eps = e(rng);
        CHECK(resolvent_bound_holds(cplx(a, b), eps));
        CHECK(std::abs(cplx(a, b) / (cplx(a, b) * cplx(a, b) + eps)) <= std::sqrt(2.0) / std::abs(cplx(a, b)) * (1 + 1e-12));
    }
    // The opposite sector fails as soon as eps meets -lambda^2.
    CHECK_FALSE(resolvent_bound_holds(cplx(0.0, 1.0), 1.0));
    CHECK_FALSE(resolvent_bound_holds(cplx(0.1, 2.0), 3.99));
    CHECK_THROWS_AS(resolvent_bound_holds(cplx(1.0, 0.0), -1.0), ValidationError);
}

TEST_CASE("line fit", "[instability]") {
    const auto f = fit_line({0, 1, 2, 3}, {1, 3, 5, 7});
    CHECK_THAT(f.slope, WithinAbs(2.0, 1e-15));
    CHECK_THAT(f.intercept, WithinAbs(1.0, 1e-15));
    CHECK_THAT(f.r_squared, WithinAbs(1.0, 1e-15));
    CHECK_THROWS_AS(fit_line({0, 1}, {0, 1}), ValidationError);
}
