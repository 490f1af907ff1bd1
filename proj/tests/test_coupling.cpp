#include <catch_amalgamated.hpp>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <complex>

#include "tlw/coupling.hpp"
#include "tlw/errors.hpp"

using namespace tlw;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

using gk = boost::math::quadrature::gauss_kronrod<double, 61>;

// kappa_gamma in real space for n = 3, never touching the Fourier transform:
// 4 pi int sigma(r) G(r) r^2 dr with G the radial Yukawa (gamma > 0) or Coulomb potential of sigma.
double kappa_real_space(const CouplingShape& sh, double gamma, double R) {
    const double m = std::sqrt(gamma);
    auto G = [&](double r) {
        if (m == 0.0) {
            const double in = gk::integrate([&](double p) { return sh.sigma(p) * p * p; }, 0, r, 8, 1e-12);
            const double out = gk::integrate([&](double p) { return sh.sigma(p) * p; }, r, R, 8, 1e-12);
            return in / r + out;
        }
        const double in = gk::integrate(
            [&](double p) { return sh.sigma(p) * p * std::sinh(m * p) * std::exp(-m * r); }, 0, r, 8, 1e-12);
        const double out = gk::integrate(
            [&](double p) { return sh.sigma(p) * p * std::exp(-m * p) * std::sinh(m * r); }, r, R, 8, 1e-12);
        return (in + out) / (m * r);
    };
    return 4.0 * M_PI *
           gk::integrate([&](double r) { return r <= 0.0 ? 0.0 : sh.sigma(r) * G(r) * r * r; }, 0, R, 8, 1e-11);
}

template <class F>
void require_rejected(F&& f, const std::string& reason) {
    try {
        f();
        FAIL("expected ValidationError(" << reason << ")");
    } catch (const ValidationError& e) {
        CHECK(e.reason() == reason);
    }
}

}  // namespace

TEST_CASE("gaussian transform has the closed form", "[coupling]") {
    const auto sh = make_shape(ShapeKind::gaussian, 1.0, 1.0, 3);
    for (double xi : {0.0, 0.3, 1.0, 2.5, 6.0})
        CHECK_THAT(sh.sigma_hat(xi), WithinRel(std::pow(2.0 * M_PI, 1.5) * std::exp(-0.5 * xi * xi), 1e-14));
    CHECK(sh.sigma(0.7) >= 0.0);
    CHECK(sh.sigma(-0.7) == sh.sigma(0.7));
}

TEST_CASE("shape construction rejects bad parameters", "[coupling]") {
    require_rejected([] { make_shape(ShapeKind::gaussian, 0.0, 1.0, 3); }, "amplitude");
    require_rejected([] { make_shape(ShapeKind::gaussian, -1.0, 1.0, 3); }, "amplitude");
    require_rejected([] { make_shape(ShapeKind::gaussian, 1.0, 1.0, 2); }, "dimension");
    require_rejected([] { make_shape(ShapeKind::gaussian, 1.0, 0.0, 3); }, "shape");
    require_rejected([] { shape_kind_from_string("tophat"); }, "shape");
}

TEST_CASE("grid nodes and self-test", "[coupling]") {
    const auto sh = make_shape(ShapeKind::gaussian, 1.0, 1.0, 3);
    const auto grid = resolve_grid(sh);
    REQUIRE(grid.size() > 0);
    CHECK(grid.nodes.front() > 0.0);
    CHECK(grid.nodes.back() <= grid.cutoff);
    for (std::size_t k = 1; k < grid.size(); ++k) CHECK(grid.nodes[k] > grid.nodes[k - 1]);
    for (double w : grid.weights) CHECK(w > 0.0);
    CHECK(grid_self_test(grid) <= 1e-10);
}

TEST_CASE("graded grid keeps the quadrature exact and packs the window", "[coupling]") {
    const auto g = make_graded_grid(10.0, 32, 2.0, 2.4);
    REQUIRE(g.size() == 32u * 16u);
    CHECK(grid_self_test(g) <= 1e-12);
    std::size_t inside = 0;
    for (double x : g.nodes) inside += (x > 2.0 && x < 2.4);
    CHECK(inside == 16u * 16u);
    require_rejected([] { make_graded_grid(10.0, 32, 3.0, 2.0); }, "config");
}

TEST_CASE("kappa of the unit gaussian", "[coupling]") {
    const auto sh = make_shape(ShapeKind::gaussian, 1.0, 1.0, 3);
    const auto grid = resolve_grid(sh);
    const double exact = 2.0 * std::pow(M_PI, 1.5);
    // Independent routes: real-space Coulomb energy and exp-sinh quadrature of the transform.
    const double real_space = kappa_real_space(sh, 0.0, 12.0);
    boost::math::quadrature::exp_sinh<double> es;
    const double fourier = sh.measure() * es.integrate([&](double xi) {
        const double v = sh.sigma_hat(xi);
        return v * v;
    });
    CHECK_THAT(real_space, WithinRel(exact, 1e-11));
    CHECK_THAT(fourier, WithinRel(exact, 1e-11));
    CHECK_THAT(compute_kappa(sh, grid), WithinRel(exact, 1e-10));
    CHECK_THAT(KappaFamily(sh).kappa(), WithinRel(exact, 1e-10));
}

TEST_CASE("kappa of the bump matches the real-space oracle", "[coupling]") {
    const auto sh = make_shape(ShapeKind::bump, 1.0, 1.0, 3);
    const auto grid = resolve_grid(sh);
    // Frozen from kappa_real_space(sh, 0, 1), which agrees to 1e-15.
    const double oracle = 0.184879252946879;
    CHECK_THAT(compute_kappa(sh, grid), WithinRel(oracle, 1e-10));
    CHECK_THAT(kappa_real_space(sh, 0.0, 1.0), WithinRel(oracle, 1e-10));
}

TEST_CASE("kappa scales with the square of the amplitude", "[coupling]") {
    const auto sh = make_shape(ShapeKind::gaussian, 1.0, 1.0, 3);
    const auto grid = resolve_grid(sh);
    CHECK(compute_kappa(sh.scaled(2.0), grid) == 4.0 * compute_kappa(sh, grid));
    CHECK_THAT(compute_kappa(sh.scaled(0.3), grid), WithinRel(0.09 * compute_kappa(sh, grid), 1e-14));
}

TEST_CASE("calibration hits the target kappa", "[coupling]") {
    const auto base = make_shape(ShapeKind::gaussian, 1.0, 1.0, 3);
    const auto grid = resolve_grid(base);
    const double k0 = compute_kappa(base, grid);
    for (double target : {1.4, 2.42, 0.5604, 0.193}) {
        const auto sh = calibrate_amplitude(base, target, grid);
        CHECK_THAT(compute_kappa(sh, grid), WithinRel(target, 1e-10));
        CHECK_THAT(sh.amplitude, WithinRel(std::sqrt(target / k0), 1e-12));
    }
    require_rejected([&] { calibrate_amplitude(base, -1.0, grid); }, "regime");
}

TEST_CASE("kappa_gamma matches the real-space Yukawa oracle", "[coupling]") {
    const auto base = make_shape(ShapeKind::gaussian, 1.0, 1.0, 3);
    const auto sh = calibrate_amplitude(base, 2.42, resolve_grid(base));
    const KappaFamily fam(sh);
    CHECK_THAT(kappa_gamma(fam, 0.0), WithinRel(fam.kappa(), 1e-15));
    CHECK_THAT(kappa_gamma(fam, 1.0), WithinRel(kappa_real_space(sh, 1.0, 12.0), 1e-9));
    for (double g : {0.01, 0.5, 3.0}) CHECK_THAT(kappa_gamma(fam, g), WithinRel(kappa_real_space(sh, g, 12.0), 1e-9));
}

TEST_CASE("kappa_gamma is positive, bounded by kappa and strictly decreasing", "[coupling]") {
    const KappaFamily fam(make_shape(ShapeKind::gaussian, 1.0, 1.0, 3));
    double prev = fam.kappa();
    for (int i = 0; i < 50; ++i) {
        const double g = std::pow(10.0, -4.0 + 6.0 * i / 49.0);
        const double v = kappa_gamma(fam, g);
        CHECK(v > 0.0);
        CHECK(v < prev);
        prev = v;
    }
    CHECK(kappa_gamma(fam, 1.0) > kappa_gamma(fam, 10.0));
    CHECK(kappa_gamma(fam, 10.0) > kappa_gamma(fam, 100.0));
    CHECK(kappa_gamma(fam, 100.0) < 0.1 * fam.kappa());
    require_rejected([&] { kappa_gamma(fam, -0.1); }, "domain");
}

TEST_CASE("kappa_complex against exp-sinh quadrature", "[coupling]") {
    const auto base = make_shape(ShapeKind::gaussian, 1.0, 1.0, 3);
    const auto sh = calibrate_amplitude(base, 0.5604, resolve_grid(base));
    const KappaFamily fam(sh);
    const std::complex<double> z(1.0, 2.0);
    const std::complex<double> w = z * z;
    boost::math::quadrature::exp_sinh<double> es;
    auto part = [&](bool imag) {
        return sh.measure() * es.integrate([&](double xi) {
            const double v = sh.sigma_hat(xi);
            const std::complex<double> q = v * v * xi * xi / (w + xi * xi);
            return imag ? q.imag() : q.real();
        });
    };
    const auto got = kappa_complex(fam, z);
    CHECK_THAT(got.real(), WithinRel(part(false), 1e-9));
    CHECK_THAT(got.imag(), WithinRel(part(true), 1e-9));

    const auto conj = kappa_complex(fam, std::conj(z));
    CHECK_THAT(conj.real(), WithinRel(got.real(), 1e-14));
    CHECK_THAT(conj.imag(), WithinRel(-got.imag(), 1e-14));

    for (double x : {0.3, 1.0, 2.0}) {
        const auto r = kappa_complex(fam, {x, 0.0});
        CHECK_THAT(r.real(), WithinRel(kappa_gamma(fam, x * x), 1e-12));
        CHECK_THAT(r.imag(), WithinAbs(0.0, 1e-15));
    }
    require_rejected([&] { kappa_complex(fam, {0.0, 1.5}); }, "domain");
}

TEST_CASE("gamma potential", "[coupling]") {
    const auto sh = make_shape(ShapeKind::gaussian, 1.0, 1.0, 3);
    const auto grid = resolve_grid(sh);
    const auto gp = gamma_potential(sh, grid);
    // Gamma(0) = int sigma(y) / (4 pi |y|) dy = int_0^inf sigma(r) r dr = A s^2.
    CHECK_THAT(gp.at(0.0), WithinRel(1.0, 1e-8));

    const double pairing = 4.0 * M_PI * gk::integrate([&](double r) { return sh.sigma(r) * gp.at(r) * r * r; },
                                                      0.0, 12.0, 8, 1e-12);
    CHECK_THAT(pairing, WithinRel(compute_kappa(sh, grid), 1e-9));

    const auto gp3 = gamma_potential(sh.scaled(3.0), grid);
    for (double r : {0.0, 0.5, 2.0}) CHECK_THAT(gp3.at(r), WithinRel(3.0 * gp.at(r), 1e-13));
    for (std::size_t k = 0; k < grid.size(); k += 37)
        CHECK_THAT(gp.gamma_hat[k], WithinRel(sh.sigma_hat(grid.nodes[k]) / (grid.nodes[k] * grid.nodes[k]), 1e-15));
}

TEST_CASE("gamma potential of the bump", "[coupling]") {
    const auto sh = make_shape(ShapeKind::bump, 1.0, 1.0, 3);
    const auto grid = resolve_grid(sh);
    const double oracle = gk::integrate([&](double r) { return sh.sigma(r) * r; }, 0.0, 1.0, 10, 1e-13);
    CHECK_THAT(gamma_potential(sh, grid).at(0.0), WithinRel(oracle, 1e-8));
}

TEST_CASE("mode coefficients carry kappa", "[coupling]") {
    const auto sh = make_shape(ShapeKind::gaussian, 1.0, 1.0, 3);
    const auto grid = resolve_grid(sh);
    const auto s = mode_coefficients(sh, grid);
    double sum = 0.0;
    for (double v : s) sum += v * v;
    CHECK_THAT(sum, WithinRel(compute_kappa(sh, grid), 1e-13));
}

TEST_CASE("higher dimension uses the general sphere constant", "[coupling]") {
    // |S^4| = 8 pi^2 / 3; kappa checked against exp-sinh quadrature of |sigma_hat|^2 xi^2.
    const auto sh = make_shape(ShapeKind::gaussian, 1.0, 1.0, 5);
    const auto grid = resolve_grid(sh);
    boost::math::quadrature::exp_sinh<double> es;
    const double oracle = sh.measure() * es.integrate([&](double xi) {
        const double v = sh.sigma_hat(xi);
        return v * v * xi * xi;
    });
    CHECK_THAT(compute_kappa(sh, grid), WithinRel(oracle, 1e-10));
    CHECK_THAT(sh.sphere_area(), WithinRel(8.0 * M_PI * M_PI / 3.0, 1e-15));
}

TEST_CASE("coupling evaluations are deterministic", "[coupling]") {
    const auto sh = make_shape(ShapeKind::gaussian, 1.3, 0.8, 3);
    const KappaFamily a(sh), b(sh);
    CHECK(a.kappa() == b.kappa());
    CHECK(a.at(0.37) == b.at(0.37));
    CHECK(kappa_complex(a, {0.4, 0.9}) == kappa_complex(b, {0.4, 0.9}));
}
