#include "tlw/coupling.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "tlw/errors.hpp"
#include "tlw/quadrature.hpp"

namespace tlw {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

// Unit-interval rule for the numeric Hankel transform of the bump.
struct BumpRule {
    std::vector<double> x, w;
    BumpRule() { composite_gauss_legendre(0.0, 1.0, 64, 16, x, w); }
};

const BumpRule& bump_rule() {
    static const BumpRule rule;
    return rule;
}

double bump_profile(double r, double s) {
    if (r >= s) return 0.0;
    return std::exp(-r * r / (s * s - r * r));
}

// J_nu(x) x^(1/2); half-integer orders use the closed form, which is far cheaper than
// std::cyl_bessel_j inside the cutoff scan.
double bessel_j_scaled(double nu, double x) {
    const double l = nu - 0.5;
    if (l >= 0.0 && l <= 2.0 && l == std::floor(l)) {
        const double c = std::sqrt(2.0 / M_PI);
        const double sn = std::sin(x), cs = std::cos(x);
        if (x < 1e-3) return std::cyl_bessel_j(nu, x) * std::sqrt(x);
        if (l == 0.0) return c * sn;
        if (l == 1.0) return c * (sn / x - cs);
        return c * ((3.0 / (x * x) - 1.0) * sn - 3.0 * cs / x);
    }
    return std::cyl_bessel_j(nu, x) * std::sqrt(x);
}

}  // namespace

std::string to_string(ShapeKind k) { return k == ShapeKind::gaussian ? "gaussian" : "bump"; }

ShapeKind shape_kind_from_string(const std::string& s) {
    if (s == "gaussian") return ShapeKind::gaussian;
    if (s == "bump") return ShapeKind::bump;
    throw ValidationError("shape", "unknown shape kind '" + s + "'");
}

double CouplingShape::sphere_area() const {
    return 2.0 * std::pow(M_PI, 0.5 * dim) / std::tgamma(0.5 * dim);
}

double CouplingShape::measure() const { return sphere_area() / std::pow(kTwoPi, dim); }

double CouplingShape::sigma(double r) const {
    r = std::abs(r);
    if (kind == ShapeKind::gaussian) return amplitude * std::exp(-0.5 * r * r / (width * width));
    return amplitude * bump_profile(r, width);
}

double CouplingShape::sigma_hat(double xi) const {
    xi = std::abs(xi);
    const double n = dim;
    if (kind == ShapeKind::gaussian) {
        return amplitude * std::pow(kTwoPi, 0.5 * n) * std::pow(width, n) *
               std::exp(-0.5 * width * width * xi * xi);
    }
    // n-dimensional Hankel transform of a radial function supported in [0, s].
    const auto& rule = bump_rule();
    const double s = width;
    const double nu = 0.5 * n - 1.0;
    double acc = 0.0;
    if (xi == 0.0) {
        for (std::size_t i = 0; i < rule.x.size(); ++i) {
            const double r = s * rule.x[i];
            acc += rule.w[i] * bump_profile(r, s) * std::pow(r, n - 1.0);
        }
        return amplitude * s * acc * sphere_area();
    }
    for (std::size_t i = 0; i < rule.x.size(); ++i) {
        const double r = s * rule.x[i];
        acc += rule.w[i] * bump_profile(r, s) * bessel_j_scaled(nu, xi * r) * std::pow(r, 0.5 * n - 0.5);
    }
    return amplitude * s * acc * std::pow(kTwoPi, 0.5 * n) * std::pow(xi, -nu - 0.5);
}

CouplingShape CouplingShape::scaled(double factor) const {
    CouplingShape out = *this;
    out.amplitude *= factor;
    return out;
}

CouplingShape make_shape(ShapeKind kind, double amplitude, double width, int dim) {
    require(dim >= 3, "dimension", "dimension n must be at least 3 (got " + std::to_string(dim) + ")");
    require(std::isfinite(amplitude) && amplitude > 0.0, "amplitude", "amplitude must be positive");
    require(std::isfinite(width) && width > 0.0, "shape", "width must be positive");
    return CouplingShape{kind, amplitude, width, dim};
}

RadialGrid make_grid(double cutoff, int panels, int order) {
    require(cutoff > 0.0, "config", "grid cutoff must be positive");
    RadialGrid g;
    g.cutoff = cutoff;
    g.panels = panels;
    g.order = order;
    composite_gauss_legendre(0.0, cutoff, panels, order, g.nodes, g.weights);
    return g;
}

RadialGrid make_graded_grid(double cutoff, int panels, double lo, double hi, int order) {
    require(cutoff > 0.0, "config", "grid cutoff must be positive");
    require(0.0 < lo && lo < hi && hi < cutoff, "config", "refinement window must lie inside (0, cutoff)");
    require(panels >= 4, "config", "graded grid needs at least 4 panels");
    const int fine = panels / 2;
    const int outer = panels - fine;
    const double left = lo, right = cutoff - hi;
    int n_left = std::max(1, static_cast<int>(std::lround(outer * left / (left + right))));
    n_left = std::min(n_left, outer - 1);
    const int n_right = outer - n_left;
    RadialGrid g;
    g.cutoff = cutoff;
    g.panels = panels;
    g.order = order;
    const std::array<std::array<double, 2>, 3> pieces{{{0.0, lo}, {lo, hi}, {hi, cutoff}}};
    const std::array<int, 3> counts{n_left, fine, n_right};
    for (std::size_t i = 0; i < 3; ++i) {
        std::vector<double> x, w;
        composite_gauss_legendre(pieces[i][0], pieces[i][1], counts[i], order, x, w);
        g.nodes.insert(g.nodes.end(), x.begin(), x.end());
        g.weights.insert(g.weights.end(), w.begin(), w.end());
    }
    return g;
}

double choose_cutoff(const CouplingShape& shape, double tail_tol) {
    if (tail_tol <= 0.0) tail_tol = shape.kind == ShapeKind::bump ? 1e-11 : 1e-14;
    const double n = shape.dim;
    const double h = 0.05 / shape.width;
    const double span = 20.0 / shape.width;
    const double limit = 2000.0 / shape.width;
    auto v = [&](double xi) { return std::abs(shape.sigma_hat(xi)) * std::pow(xi, n - 1.0); };
    double peak = 0.0, last_above = h;
    for (double xi = h; xi <= limit; xi += h) {
        const double val = v(xi);
        peak = std::max(peak, val);
        if (val > tail_tol * peak) last_above = xi;
        else if (xi - last_above > span) return last_above + h;
    }
    throw NumericalError("resolution", "transform tail does not decay below tolerance");
}

RadialGrid resolve_grid(const CouplingShape& shape, int min_panels, double tol) {
    const double cutoff = choose_cutoff(shape);
    int panels = std::max(1, min_panels);
    RadialGrid g = make_grid(cutoff, panels);
    double k = compute_kappa(shape, g);
    for (int iter = 0; iter < 12; ++iter) {
        RadialGrid g2 = make_grid(cutoff, 2 * panels);
        const double k2 = compute_kappa(shape, g2);
        if (std::abs(k2 - k) <= tol * std::abs(k2)) return g;
        panels *= 2;
        g = std::move(g2);
        k = k2;
    }
    throw NumericalError("resolution", "kappa did not converge under panel doubling");
}

double grid_self_test(const RadialGrid& grid) {
    double acc = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) acc += grid.weights[k] * std::exp(-grid.nodes[k] * grid.nodes[k]);
    const double exact = 0.5 * std::sqrt(M_PI) * std::erf(grid.cutoff);
    return std::abs(acc - exact) / exact;
}

double compute_kappa(const CouplingShape& shape, const RadialGrid& grid) {
    require(grid.size() > 0, "shape", "empty radial grid");
    const double e = shape.dim - 3.0;
    double acc = 0.0, peak = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double xi = grid.nodes[k];
        const double sh = shape.sigma_hat(xi);
        acc += grid.weights[k] * sh * sh * std::pow(xi, e);
        peak = std::max(peak, std::abs(sh) * std::pow(xi, shape.dim - 1.0));
    }
    const double tail = std::abs(shape.sigma_hat(grid.cutoff)) * std::pow(grid.cutoff, shape.dim - 1.0);
    if (tail > 1e-10 * peak)
        throw NumericalError("resolution", "grid cutoff truncates the transform tail");
    return shape.measure() * acc;
}

CouplingShape calibrate_amplitude(const CouplingShape& shape, double target_kappa,
                                  const RadialGrid& grid) {
    require(std::isfinite(target_kappa) && target_kappa > 0.0, "regime", "target kappa must be positive");
    const double base = compute_kappa(shape, grid);
    return shape.scaled(std::sqrt(target_kappa / base));
}

KappaFamily::KappaFamily(CouplingShape shape)
    : shape_(shape), cutoff_(choose_cutoff(shape)), kappa_(0.0) {
    const double e = shape_.dim - 3.0;
    kappa_ = shape_.measure() * integrate_adaptive(
                                    [&](double xi) {
                                        const double sh = shape_.sigma_hat(xi);
                                        return sh * sh * std::pow(xi, e);
                                    },
                                    0.0, cutoff_, {1.0 / shape_.width, 4.0 / shape_.width});
}

double KappaFamily::integrate(const std::function<double(double)>& g, std::vector<double> breaks) const {
    const double n1 = shape_.dim - 1.0;
    breaks.push_back(1.0 / shape_.width);
    breaks.push_back(4.0 / shape_.width);
    return shape_.measure() * integrate_adaptive(
                                  [&](double xi) {
                                      const double sh = shape_.sigma_hat(xi);
                                      return sh * sh * std::pow(xi, n1) * g(xi);
                                  },
                                  0.0, cutoff_, std::move(breaks));
}

// Small gamma puts a length scale far below the shape width; split geometrically between them.
std::vector<double> KappaFamily::resonance_breaks(double gamma) const {
    std::vector<double> breaks;
    if (gamma <= 0.0) return breaks;
    const double top = 1.0 / shape_.width;
    for (double x = std::sqrt(gamma); x < top; x *= 4.0) breaks.push_back(x);
    if (breaks.empty()) breaks.push_back(std::sqrt(gamma));
    return breaks;
}

double KappaFamily::at(double gamma) const {
    require(std::isfinite(gamma) && gamma >= 0.0, "domain", "kappa_gamma needs gamma >= 0");
    if (gamma == 0.0) return kappa_;
    return integrate([&](double xi) { return 1.0 / (gamma + xi * xi); }, resonance_breaks(gamma));
}

double KappaFamily::resolvent_moment(double gamma, int p) const {
    require(gamma > 0.0 || (gamma == 0.0 && 2 * p < shape_.dim), "domain",
            "resolvent moment diverges at this gamma");
    return integrate([&](double xi) { return std::pow(gamma + xi * xi, -p); }, resonance_breaks(gamma));
}

std::complex<double> KappaFamily::at_complex(std::complex<double> w) const {
    if (w.imag() == 0.0 && w.real() >= 0.0) return at(w.real());
    require(!(w.imag() == 0.0 && w.real() < 0.0), "domain", "kappa evaluated on the branch cut");
    std::vector<double> breaks;
    if (w.real() < 0.0) {
        const double r = std::sqrt(-w.real());
        const double width = std::abs(w.imag()) / (2.0 * r);
        breaks.push_back(r);
        for (double m : {1.0, 10.0, 100.0}) {
            breaks.push_back(r - m * width);
            breaks.push_back(r + m * width);
        }
    }
    const double n1 = shape_.dim - 1.0;
    const double meas = shape_.measure();
    auto f = [&](double xi) {
        const double sh = shape_.sigma_hat(xi);
        return sh * sh * std::pow(xi, n1) / (w + xi * xi);
    };
    return meas * integrate_adaptive_complex(f, 0.0, cutoff_, breaks);
}

double kappa_gamma(const KappaFamily& family, double gamma) { return family.at(gamma); }

std::complex<double> kappa_complex(const KappaFamily& family, std::complex<double> z) {
    require(z.real() != 0.0, "domain", "kappa_complex is singular on the imaginary axis");
    return family.at_complex(z * z);
}

GammaProfile gamma_potential(const CouplingShape& shape, const RadialGrid& grid) {
    GammaProfile p{shape, grid, {}};
    p.gamma_hat.resize(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double xi = grid.nodes[k];
        p.gamma_hat[k] = shape.sigma_hat(xi) / (xi * xi);
    }
    return p;
}

double GammaProfile::at(double r) const {
    const double n = shape.dim;
    r = std::abs(r);
    double acc = 0.0;
    if (r == 0.0) {
        for (std::size_t k = 0; k < grid.size(); ++k)
            acc += grid.weights[k] * gamma_hat[k] * std::pow(grid.nodes[k], n - 1.0);
        return shape.measure() * acc;
    }
    const double nu = 0.5 * n - 1.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double xi = grid.nodes[k];
        acc += grid.weights[k] * gamma_hat[k] * std::cyl_bessel_j(nu, xi * r) * std::pow(xi, 0.5 * n);
    }
    return acc * std::pow(kTwoPi, -0.5 * n) * std::pow(r, -nu);
}

std::vector<double> mode_coefficients(const CouplingShape& shape, const RadialGrid& grid) {
    std::vector<double> s(grid.size());
    const double meas = shape.measure();
    const double e = 0.5 * (shape.dim - 3.0);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double xi = grid.nodes[k];
        s[k] = std::sqrt(grid.weights[k] * meas) * shape.sigma_hat(xi) * std::pow(xi, e);
    }
    return s;
}

}  // namespace tlw
