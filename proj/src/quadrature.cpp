#include "tlw/quadrature.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <queue>

#include "tlw/errors.hpp"

namespace tlw {

namespace {

std::vector<double> segment_points(double a, double b, std::vector<double> breaks) {
    std::vector<double> pts{a};
    std::sort(breaks.begin(), breaks.end());
    for (double x : breaks) {
        if (x > a && x < b && x - pts.back() > 1e-15 * (1.0 + std::abs(x))) pts.push_back(x);
    }
    pts.push_back(b);
    return pts;
}

template <int N>
void append_rule(double a, double b, int panels, std::vector<double>& nodes,
                 std::vector<double>& weights) {
    using rule = boost::math::quadrature::gauss<double, N>;
    const auto& x = rule::abscissa();
    const auto& w = rule::weights();
    const double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + p * h;
        const double mid = lo + 0.5 * h, half = 0.5 * h;
        // Boost stores the non-negative half of a symmetric rule, increasing from 0.
        for (int i = static_cast<int>(x.size()) - 1; i >= 0; --i) {
            if (x[i] == 0.0) continue;
            nodes.push_back(mid - half * x[i]);
            weights.push_back(half * w[i]);
        }
        if (x[0] == 0.0) {
            nodes.push_back(mid);
            weights.push_back(half * w[0]);
        }
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] == 0.0) continue;
            nodes.push_back(mid + half * x[i]);
            weights.push_back(half * w[i]);
        }
    }
}

}  // namespace

// Global adaptive Gauss-Kronrod: always bisect the interval with the largest error
// estimate, and stop once the summed estimate is small relative to the whole integral.
// Per-segment relative tests stall on segments that contribute next to nothing.
double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          std::vector<double> breaks, double rel_tol) {
    using gk = boost::math::quadrature::gauss_kronrod<double, 31>;
    struct Piece {
        double lo, hi, value, error, l1;
        bool operator<(const Piece& o) const { return error < o.error; }
    };
    auto eval = [&](double lo, double hi) {
        double err = 0.0, l1 = 0.0;
        const double v = gk::integrate(f, lo, hi, 0, 0.0, &err, &l1);
        return Piece{lo, hi, v, err, l1};
    };
    std::priority_queue<Piece> queue;
    double total = 0.0, error = 0.0, l1 = 0.0;
    const auto pts = segment_points(a, b, std::move(breaks));
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const Piece p = eval(pts[i], pts[i + 1]);
        total += p.value;
        error += p.error;
        l1 += p.l1;
        queue.push(p);
    }
    constexpr int kMaxPieces = 4000;
    const double floor = 50.0 * std::numeric_limits<double>::epsilon();
    while (error > std::max(rel_tol * std::abs(total), floor * l1) &&
           static_cast<int>(queue.size()) < kMaxPieces) {
        const Piece worst = queue.top();
        const double mid = 0.5 * (worst.lo + worst.hi);
        if (!(mid > worst.lo && mid < worst.hi)) break;
        queue.pop();
        const Piece left = eval(worst.lo, mid), right = eval(mid, worst.hi);
        total += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        l1 += left.l1 + right.l1 - worst.l1;
        queue.push(left);
        queue.push(right);
    }
    if (!std::isfinite(total)) throw NumericalError("quadrature", "non-finite integral");
    return total;
}

std::complex<double> integrate_adaptive_complex(
    const std::function<std::complex<double>(double)>& f, double a, double b,
    std::vector<double> breaks, double rel_tol) {
    const double re = integrate_adaptive([&](double x) { return f(x).real(); }, a, b, breaks, rel_tol);
    const double im = integrate_adaptive([&](double x) { return f(x).imag(); }, a, b, breaks, rel_tol);
    return {re, im};
}

void composite_gauss_legendre(double a, double b, int panels, int order,
                              std::vector<double>& nodes, std::vector<double>& weights) {
    require(panels >= 1, "config", "panel count must be positive");
    require(b > a, "config", "empty quadrature interval");
    nodes.clear();
    weights.clear();
    switch (order) {
        case 8: append_rule<8>(a, b, panels, nodes, weights); break;
        case 16: append_rule<16>(a, b, panels, nodes, weights); break;
        case 32: append_rule<32>(a, b, panels, nodes, weights); break;
        default: throw ValidationError("config", "unsupported Gauss-Legendre order");
    }
}

}  // namespace tlw
