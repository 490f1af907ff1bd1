#include "tlw/dispersion.hpp"

#include <cmath>

#include "tlw/errors.hpp"
#include "tlw/quadrature.hpp"

namespace tlw {

namespace {

std::vector<double> resonance_breaks(double A, double B, double c) {
    std::vector<double> br;
    if (A >= 0.0) return br;
    const double r = std::sqrt(-A) / c;
    const double w = std::abs(B) / (2.0 * c * c * r);
    br.push_back(r);
    for (double m : {1.0, 10.0, 100.0, 1000.0}) {
        br.push_back(r - m * w);
        br.push_back(r + m * w);
    }
    return br;
}

void check_off_cut(double A, double B) {
    require(std::isfinite(A) && std::isfinite(B), "domain", "non-finite dispersion argument");
    require(!(B == 0.0 && A <= 0.0), "domain", "dispersion function evaluated on the branch cut");
}

}  // namespace

std::array<double, 2> dispersion_F(double A, double B, const KappaFamily& family, int tau, double c) {
    check_off_cut(A, B);
    const double c2 = c * c;
    const auto br = resonance_breaks(A, B, c);
    const double I1 = family.integrate(
        [&](double xi) {
            const double X = A + c2 * xi * xi;
            return X / (X * X + B * B);
        },
        br);
    const double I2 = family.integrate(
        [&](double xi) {
            const double X = A + c2 * xi * xi;
            return 1.0 / (X * X + B * B);
        },
        br);
    return {A + 4.0 - 2.0 * tau * c2 * I1, 1.0 + 2.0 * tau * c2 * I2};
}

Eigen::Matrix2d dispersion_jacobian(double A, double B, const KappaFamily& family, int tau, double c) {
    check_off_cut(A, B);
    const double c2 = c * c;
    const auto br = resonance_breaks(A, B, c);
    auto moment = [&](auto&& g) {
        return family.integrate(
            [&](double xi) {
                const double X = A + c2 * xi * xi;
                const double D = X * X + B * B;
                return g(X) / (D * D);
            },
            br);
    };
    const double dI1_dA = moment([&](double X) { return B * B - X * X; });
    const double dI1_dB = moment([&](double X) { return -2.0 * B * X; });
    const double dI2_dA = moment([&](double X) { return -2.0 * X; });
    const double dI2_dB = moment([&](double) { return -2.0 * B; });
    Eigen::Matrix2d J;
    J << 1.0 - 2.0 * tau * c2 * dI1_dA, -2.0 * tau * c2 * dI1_dB,
         2.0 * tau * c2 * dI2_dA, 2.0 * tau * c2 * dI2_dB;
    return J;
}

cplx lambda_from_AB(double A, double B) { return std::sqrt(cplx(A, B)); }

DispersionPoint newton_dispersion(const DispersionPoint& start, const KappaFamily& family, int tau, double c,
                                  const NewtonOptions& opt) {
    DispersionPoint pt = start;
    pt.c = c;
    pt.stiff = false;
    pt.converged = false;
    auto norm = [](const std::array<double, 2>& f) { return std::hypot(f[0], f[1]); };
    auto F = dispersion_F(pt.A, pt.B, family, tau, c);
    double fn = norm(F);
    int it = 0;
    for (; it < opt.max_iterations && fn > opt.tolerance; ++it) {
        const Eigen::Matrix2d J = dispersion_jacobian(pt.A, pt.B, family, tau, c);
        Eigen::JacobiSVD<Eigen::Matrix2d> svd(J, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const auto sv = svd.singularValues();
        const double cond = sv(1) > 0.0 ? sv(0) / sv(1) : INFINITY;
        if (cond > opt.stiff_condition) pt.stiff = true;
        Eigen::Vector2d step = -svd.solve(Eigen::Vector2d(F[0], F[1]));
        if (!step.allFinite()) break;
        // Stay on the same side of the branch cut and insist on residual decrease.
        double t = 1.0;
        bool accepted = false;
        for (int h = 0; h < 40; ++h, t *= 0.5) {
            const double An = pt.A + t * step(0), Bn = pt.B + t * step(1);
            if (An < 0.0 && Bn * pt.B <= 0.0) continue;
            const auto Fn = dispersion_F(An, Bn, family, tau, c);
            if (norm(Fn) < fn) {
                pt.A = An;
                pt.B = Bn;
                F = Fn;
                fn = norm(Fn);
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
    }
    pt.iterations = it;
    pt.residual = fn;
    pt.converged = fn <= opt.tolerance;
    pt.lambda = lambda_from_AB(pt.A, pt.B);
    return pt;
}

std::vector<DispersionPoint> dispersion_path(const DispersionPoint& start, const KappaFamily& family, int tau,
                                             const std::vector<double>& speeds, const NewtonOptions& opt) {
    std::vector<DispersionPoint> out;
    DispersionPoint guess = start;
    for (double c : speeds) {
        require(c > 0.0, "config", "wave speed c must be positive");
        auto root = newton_dispersion(guess, family, tau, c, opt);
        out.push_back(root);
        if (root.converged) guess = root;
    }
    return out;
}

namespace {

double big_sigma(double r, const CouplingShape& shape) {
    const double sh = shape.sigma_hat(r);
    return sh * sh * std::pow(r, shape.dim - 1.0);
}

cplx plemelj_quadrature(double mu, double B, const CouplingShape& shape, double upper, int levels) {
    const double m = std::sqrt(mu);
    std::vector<double> br{m, 0.5 * m, 1.5 * m};
    const double w = std::abs(B) / (2.0 * m);
    double scale = 1.0;
    for (int k = 0; k < levels; ++k, scale *= 4.0) {
        br.push_back(m - scale * w);
        br.push_back(m + scale * w);
    }
    auto f = [&](double r) { return big_sigma(r, shape) / cplx(r * r - mu, B); };
    return integrate_adaptive_complex(f, 0.0, upper, br, 1e-12);
}

}  // namespace

cplx plemelj_integral(double mu, double B, const CouplingShape& shape) {
    require(mu > 0.0 && std::isfinite(mu), "domain", "mu must be positive");
    require(B != 0.0 && std::isfinite(B), "domain", "B = 0 lies on the cut; use plemelj_limit");
    const double upper = std::max(choose_cutoff(shape), 3.0 * std::sqrt(mu));
    // Refine the node clustering around sqrt(mu) until two refinements agree.
    cplx prev = plemelj_quadrature(mu, B, shape, upper, 4);
    for (int levels = 6; levels <= 14; levels += 2) {
        const cplx cur = plemelj_quadrature(mu, B, shape, upper, levels);
        if (std::abs(cur - prev) <= 1e-8 * std::max(1.0, std::abs(cur))) return cur;
        prev = cur;
    }
    throw NumericalError("quadrature", "Plemelj integral did not settle under refinement");
}

PlemeljLimit plemelj_limit(double mu, const CouplingShape& shape) {
    require(mu > 0.0 && std::isfinite(mu), "domain", "mu must be positive");
    const double m = std::sqrt(mu);
    const double upper = std::max(choose_cutoff(shape), 2.0 * m);
    const double Sm = big_sigma(m, shape);
    // 1/(r^2 - m^2) = (1/(2m)) (1/(r - m) - 1/(r + m)); the first part is regularized
    // by subtracting Sigma(m) on the symmetric window [0, 2m], where its P.V. vanishes.
    auto reg = [&](double r) { return (big_sigma(r, shape) - Sm) / (r - m); };
    double pv_minus = integrate_adaptive(reg, 0.0, m, {}) + integrate_adaptive(reg, m, 2.0 * m, {});
    if (upper > 2.0 * m)
        pv_minus += integrate_adaptive([&](double r) { return big_sigma(r, shape) / (r - m); }, 2.0 * m, upper, {});
    const double plus = integrate_adaptive([&](double r) { return big_sigma(r, shape) / (r + m); }, 0.0, upper,
                                           {m, 2.0 * m});
    return {(pv_minus - plus) / (2.0 * m), M_PI * Sm / (2.0 * m)};
}

PlemeljEvaluation plemelj_sequence(double mu, const std::vector<double>& B_values, const CouplingShape& shape) {
    PlemeljEvaluation ev;
    ev.mu = mu;
    const auto lim = plemelj_limit(mu, shape);
    ev.pv_value = lim.pv;
    ev.residue_term = lim.jump;
    for (double B : B_values) {
        const cplx P = plemelj_integral(mu, B, shape);
        const cplx target(lim.pv, B > 0.0 ? -lim.jump : lim.jump);
        ev.B_values.push_back(B);
        ev.integral_values.push_back(P);
        ev.errors.push_back(std::abs(P - target));
    }
    return ev;
}

}  // namespace tlw
