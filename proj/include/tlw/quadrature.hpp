#pragma once

#include <complex>
#include <functional>
#include <vector>

namespace tlw {

// Adaptive Gauss-Kronrod over [a, b] split at the given interior points.
// Points outside (a, b) are ignored; duplicates are merged.
double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          std::vector<double> breaks = {}, double rel_tol = 1e-12);

std::complex<double> integrate_adaptive_complex(
    const std::function<std::complex<double>(double)>& f, double a, double b,
    std::vector<double> breaks = {}, double rel_tol = 1e-12);

// Fixed composite Gauss-Legendre rule on [a, b]: `panels` equal panels of `order` nodes.
// Supported orders: 8, 16, 32.
void composite_gauss_legendre(double a, double b, int panels, int order,
                              std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace tlw
