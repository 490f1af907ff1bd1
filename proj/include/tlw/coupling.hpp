#pragma once

#include <complex>
#include <functional>
#include <string>
#include <vector>

namespace tlw {

enum class ShapeKind { gaussian, bump };

std::string to_string(ShapeKind k);
ShapeKind shape_kind_from_string(const std::string& s);

// Radial form function sigma on R^n and its Fourier transform.
// gaussian: sigma(r) = A exp(-r^2 / (2 s^2)), transform A (2 pi)^{n/2} s^n exp(-s^2 xi^2 / 2).
// bump:     sigma(r) = A exp(-r^2 / (s^2 - r^2)) for r < s, zero beyond.
struct CouplingShape {
    ShapeKind kind = ShapeKind::gaussian;
    double amplitude = 1.0;
    double width = 1.0;
    int dim = 3;

    double sigma(double r) const;
    double sigma_hat(double xi) const;
    // Area of the unit sphere S^{n-1} divided by (2 pi)^n.
    double measure() const;
    double sphere_area() const;
    CouplingShape scaled(double factor) const;
};

CouplingShape make_shape(ShapeKind kind, double amplitude, double width, int dim);

// Gauss-Legendre panels on (0, cutoff]. Nodes are the wave numbers of the field modes.
struct RadialGrid {
    std::vector<double> nodes;
    std::vector<double> weights;
    double cutoff = 0.0;
    int panels = 0;
    int order = 16;

    std::size_t size() const { return nodes.size(); }
};

RadialGrid make_grid(double cutoff, int panels, int order = 16);
// Half of the panels packed into [lo, hi], the rest spread over the two outer pieces.
RadialGrid make_graded_grid(double cutoff, int panels, double lo, double hi, int order = 16);

// Smallest cutoff past which |sigma_hat(xi)| xi^{n-1} stays below tail_tol of its peak.
// tail_tol = 0 picks the shape default: 1e-14 for the Gaussian, 1e-11 for the bump, whose
// numeric transform carries roundoff that xi^{n-1} amplifies past 1e-12 of the peak.
double choose_cutoff(const CouplingShape& shape, double tail_tol = 0.0);

// Panel count doubled from `min_panels` until kappa changes by less than tol (relative).
RadialGrid resolve_grid(const CouplingShape& shape, int min_panels = 4, double tol = 1e-12);

// Relative error of the grid quadrature of the Gaussian exp(-xi^2) on (0, cutoff].
double grid_self_test(const RadialGrid& grid);

double compute_kappa(const CouplingShape& shape, const RadialGrid& grid);

// Rescales the amplitude so that compute_kappa(result, grid) == target.
CouplingShape calibrate_amplitude(const CouplingShape& shape, double target_kappa,
                                  const RadialGrid& grid);

// kappa_w = int |sigma_hat|^2 / (w + xi^2) dxi / (2 pi)^n, by adaptive quadrature.
class KappaFamily {
public:
    explicit KappaFamily(CouplingShape shape);

    double kappa() const { return kappa_; }
    double at(double gamma) const;
    std::complex<double> at_complex(std::complex<double> w) const;
    // int |sigma_hat|^2 / (gamma + xi^2)^p dxi / (2 pi)^n
    double resolvent_moment(double gamma, int p) const;
    // measure * int_0^cutoff |sigma_hat|^2 xi^{n-1} g(xi) dxi with optional breakpoints.
    double integrate(const std::function<double(double)>& g, std::vector<double> breaks = {}) const;
    const CouplingShape& shape() const { return shape_; }
    double cutoff() const { return cutoff_; }

private:
    std::vector<double> resonance_breaks(double gamma) const;

    CouplingShape shape_;
    double cutoff_;
    double kappa_;
};

double kappa_gamma(const KappaFamily& family, double gamma);
// Evaluates kappa at w = z^2; z on the imaginary axis is rejected.
std::complex<double> kappa_complex(const KappaFamily& family, std::complex<double> z);

// Solution of -Delta Gamma = sigma, stored through its transform on the grid nodes.
struct GammaProfile {
    CouplingShape shape;
    RadialGrid grid;
    std::vector<double> gamma_hat;

    // Inverse radial transform at |z| = r, evaluated on the grid.
    double at(double r) const;
};

GammaProfile gamma_potential(const CouplingShape& shape, const RadialGrid& grid);

// Mode coefficients s_k = sqrt(w_k * measure) sigma_hat(xi_k) xi_k^{(n-3)/2}; sum s_k^2 = kappa.
std::vector<double> mode_coefficients(const CouplingShape& shape, const RadialGrid& grid);

}  // namespace tlw
