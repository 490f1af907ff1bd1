#include "tlw/instability.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <random>

#include "tlw/errors.hpp"

namespace tlw {

namespace {

void require_symmetric(const StationaryBranch& b) {
    require(!is_extra(b.label), "regime", "orbit functionals are defined about the symmetric branches");
}

}  // namespace

Vec4 x_second(const StationaryBranch& b) {
    require_symmetric(b);
    return Vec4(0.0, 1.0, 0.0, -b.tau());
}

Vec4 x_soft(const StationaryBranch& b) {
    require_symmetric(b);
    return Vec4(1.0, 0.0, -b.tau(), 0.0);
}

OrbitProjection theta_star(const Vec4& V, const StationaryBranch& branch) {
    OrbitProjection p;
    p.theta_star = optimal_phase(V, branch.particle);
    p.aligned = rotation(p.theta_star) * V;
    p.a = p.aligned.dot(branch.particle);
    if (!is_extra(branch.label)) {
        const Vec4 xs = x_soft(branch), x2 = x_second(branch);
        p.lambda_coeff = p.aligned.dot(xs) / xs.squaredNorm();
        p.M = p.aligned - p.lambda_coeff * xs - p.a * branch.particle;
        p.M_tilde = p.M - (p.M.dot(x2) / x2.squaredNorm()) * x2;
    }
    return p;
}

Vec4 theta_star_gradient(const Vec4& V, const StationaryBranch& branch) {
    const Vec4& X = branch.particle;
    const double x = X(0) * V(0) + X(2) * V(2);
    const double y = X(0) * V(1) + X(2) * V(3);
    const double r2 = x * x + y * y;
    require(r2 > 0.0, "domain", "phase undefined: V has no component along the orbit");
    return Vec4(y * X(0), -x * X(0), y * X(2), -x * X(2)) / r2;
}

double functional_A(const Vec4& V, const StationaryBranch& branch) {
    const double th = optimal_phase(V, branch.particle);
    return -x_second(branch).dot(rotation(th) * V);
}

Vec4 functional_A_gradient(const Vec4& V, const StationaryBranch& branch) {
    const Vec4 x2 = x_second(branch);
    const double th = optimal_phase(V, branch.particle);
    const double dtheta_coeff = x2.dot(rotation_derivative(th) * V);
    return -rotation(th).transpose() * x2 - dtheta_coeff * theta_star_gradient(V, branch);
}

double functional_P(const Vec4& V, const StationaryBranch& branch) {
    return functional_A_gradient(V, branch).dot(hartree_rhs(V, branch.kappa));
}

Vec4 lemma_direction(double s, const StationaryBranch& branch) {
    require(2.0 * s * s <= 1.0, "domain", "|s| must not exceed 1/sqrt(2)");
    return std::sqrt(1.0 - 2.0 * s * s) * branch.particle + s * x_soft(branch);
}

UnstableDirection unstable_direction_hartree(double kappa, int tau) {
    require(tau == 1 && kappa > 2.0, "regime", "the Hartree branch is spectrally stable in this regime");
    const double a = 2.0 * std::sqrt(0.5 * kappa - 1.0);
    UnstableDirection u;
    u.lambda = a;
    Vec4 Y(1.0, 0.5 * a, -1.0, -0.5 * a);
    Y.normalize();
    u.direction = Y;
    u.eigvec_re = Y;
    u.eigvec_im = VecX::Zero(4);
    const Mat4 L = build_L_hartree(kappa, tau).entries;
    u.residual = (L * Y - a * Y).norm();
    return u;
}

UnstableDirection unstable_direction_coupled(const CoupledOperator& op) {
    const auto eigs = spectrum_coupled_L(op);
    cplx best(-INFINITY, 0.0);
    for (const auto& z : eigs)
        if (z.real() > best.real() || (z.real() == best.real() && z.imag() > best.imag())) best = z;
    require(best.real() > 1e-6, "regime", "the coupled branch shows no unstable eigenvalue");
    // Prefer the representative with Im >= 0.
    if (best.imag() < 0.0) best = std::conj(best);
    for (const auto& z : eigs)
        if (std::abs(z - best) < 1e-9 * (1.0 + std::abs(best)) && z.imag() >= 0.0) best = z;

    const Eigen::Index D = op.dim();
    using CM = Eigen::MatrixXcd;
    using CV = Eigen::VectorXcd;
    const CM shifted = op.L.cast<cplx>() - (best + cplx(1e-10, 0.0)) * CM::Identity(D, D);
    Eigen::PartialPivLU<CM> lu(shifted);
    CV v = CV::Ones(D);
    for (int it = 0; it < 4; ++it) {
        v = lu.solve(v);
        v.normalize();
    }
    // Rayleigh refinement of the eigenvalue.
    const cplx lam = v.dot(op.L.cast<cplx>() * v);
    UnstableDirection u;
    u.lambda = lam;
    u.residual = (op.L.cast<cplx>() * v - lam * v).norm();
    // Rotate so that Re and Im parts are orthogonal with |Re| >= |Im|.
    cplx vv = 0.0;
    for (Eigen::Index i = 0; i < D; ++i) vv += v(i) * v(i);
    const cplx phase = std::exp(cplx(0.0, -0.5 * std::arg(vv)));
    v *= phase;
    u.eigvec_re = v.real();
    u.eigvec_im = v.imag();
    u.direction = v.real().normalized();
    return u;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    require(x.size() == y.size() && x.size() >= 3, "config", "line fit needs at least three points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) sx += x[i], sy += y[i];
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return f;
}

namespace {

struct DistanceSeries {
    std::vector<double> t, d;
    double escape = NAN;
};

// Exponential fit of log d over [t0, first time d >= ceiling]. With a nonzero oscillation
// frequency the fit runs through block maxima over half periods.
void fit_distance(GrowthFit& fit, const DistanceSeries& s, double t0, double ceiling, double omega) {
    std::vector<double> x, y;
    double t1 = s.t.back();
    for (std::size_t i = 0; i < s.t.size(); ++i)
        if (s.d[i] >= ceiling) {
            t1 = s.t[i];
            break;
        }
    if (omega > 1e-6) {
        const double block = M_PI / omega;
        double start = t0;
        while (start + block <= t1) {
            double best = -1.0, bt = start;
            for (std::size_t i = 0; i < s.t.size(); ++i)
                if (s.t[i] >= start && s.t[i] < start + block && s.d[i] > best) best = s.d[i], bt = s.t[i];
            if (best > 0.0) {
                x.push_back(bt);
                y.push_back(std::log(best));
            }
            start += block;
        }
        fit.envelope = true;
    } else {
        for (std::size_t i = 0; i < s.t.size(); ++i)
            if (s.t[i] >= t0 && s.t[i] <= t1 && s.d[i] > 0.0) {
                x.push_back(s.t[i]);
                y.push_back(std::log(s.d[i]));
            }
    }
    if (x.size() < 3) throw NumericalError("fit", "growth fit window holds fewer than three samples");
    const auto lf = fit_line(x, y);
    fit.rate = lf.slope;
    fit.r_squared = lf.r_squared;
    fit.t0 = x.front();
    fit.t1 = x.back();
    fit.accepted = lf.r_squared >= 0.99;
}

}  // namespace

GrowthFit growth_experiment_hartree(double kappa, int tau, const GrowthOptions& opt) {
    require(!opt.deltas.empty(), "config", "no perturbation sizes given");
    for (double d : opt.deltas) require(d >= 1e-6 && d <= 1e-2, "domain", "delta must lie in [1e-6, 1e-2]");
    const auto dir = unstable_direction_hartree(kappa, tau);
    const auto branch = make_branch(tau == 1 ? BranchLabel::symmetric_plus : BranchLabel::symmetric_minus, kappa);
    GrowthFit fit;
    fit.kind = "exponential";
    fit.predicted = dir.lambda.real();
    DistanceSeries fit_series;
    double fit_delta = INFINITY;
    for (double delta : opt.deltas) {
        Vec4 X;
        if (opt.direction == DirectionKind::eigenvector) X = (branch.particle + delta * Vec4(dir.direction)).normalized();
        else X = lemma_direction(delta, branch);
        DistanceSeries s;
        const long steps = std::lround(opt.horizon / opt.dt);
        s.t.push_back(0.0);
        s.d.push_back(orbit_distance(X, branch));
        for (long i = 1; i <= steps; ++i) {
            X = step_hartree(X, opt.dt, kappa);
            const double d = orbit_distance(X, branch);
            if (i % 10 == 0 || d >= opt.epsilon) {
                s.t.push_back(i * opt.dt);
                s.d.push_back(d);
            }
            if (d >= opt.epsilon) {
                s.escape = i * opt.dt;
                break;
            }
        }
        fit.deltas.push_back(delta);
        fit.escape_times.push_back(s.escape);
        fit.predicted_escape.push_back(std::log(opt.epsilon / delta) / fit.predicted);
        if (delta < fit_delta) fit_delta = delta, fit_series = std::move(s);
    }
    fit.delta = fit_delta;
    fit_distance(fit, fit_series, opt.t0, opt.fit_ceiling * opt.epsilon, 0.0);
    return fit;
}

GrowthFit growth_linearized_hartree(double kappa, int tau, const Vec4& Y0, double horizon, double dt) {
    const Mat4 L = build_L_hartree(kappa, tau).entries;
    const auto eigs = eigenvalues_general(L);
    GrowthFit fit;
    fit.kind = "exponential";
    fit.predicted = max_real_part(eigs);
    RunOptions ro;
    ro.dt = dt;
    ro.T = horizon;
    const auto tr = simulate_linearized(L, Y0, ro);
    std::vector<double> x, y;
    const double t0 = std::max(1.0, 0.25 * horizon);
    for (std::size_t i = 0; i < tr.times.size(); ++i)
        if (tr.times[i] >= t0) {
            x.push_back(tr.times[i]);
            y.push_back(std::log(tr.linear_states[i].norm()));
        }
    const auto lf = fit_line(x, y);
    fit.rate = lf.slope;
    fit.r_squared = lf.r_squared;
    fit.t0 = x.front();
    fit.t1 = x.back();
    fit.accepted = lf.r_squared >= 0.99;
    return fit;
}

GrowthFit growth_ill_prepared(double kappa, int tau, const Vec4& Y0, double horizon, double dt) {
    const Mat4 L = build_L_hartree(kappa, tau).entries;
    const double C1 = Y0(0) + tau * Y0(2);
    require(C1 != 0.0, "domain", "data are well prepared: Re(v0 + tau v1)(0) = 0");
    GrowthFit fit;
    fit.kind = "linear";
    fit.predicted = kappa * C1;
    RunOptions ro;
    ro.dt = dt;
    ro.T = horizon;
    const auto tr = simulate_linearized(L, Y0, ro);
    std::vector<double> x, y;
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        x.push_back(tr.times[i]);
        y.push_back(tr.linear_states[i](1) + tau * tr.linear_states[i](3));
    }
    const auto lf = fit_line(x, y);
    fit.rate = lf.slope;
    fit.r_squared = lf.r_squared;
    fit.t0 = x.front();
    fit.t1 = x.back();
    fit.accepted = lf.r_squared >= 0.99;
    return fit;
}

GrowthFit growth_experiment_coupled(const CoupledGrowthSetup& setup, const GrowthOptions& opt) {
    require(!opt.deltas.empty(), "config", "no perturbation sizes given");
    for (double d : opt.deltas) require(d >= 1e-6 && d <= 1e-2, "domain", "delta must lie in [1e-6, 1e-2]");
    require(setup.modes >= 16 && setup.modes % 16 == 0, "config", "modes must be a multiple of 16");
    const RadialGrid grid = make_grid(choose_cutoff(setup.base_shape), setup.modes / 16);
    const CouplingShape shape = calibrate_amplitude(setup.base_shape, setup.kappa, grid);
    const auto branch = make_branch(setup.label, compute_kappa(shape, grid));
    const auto op = build_coupled_operator(branch, shape, grid, setup.c);
    const auto dir = unstable_direction_coupled(op);
    const auto cs = coupled_stationary(branch, shape, grid);
    const CoupledModel model(shape, grid, setup.c);
    const CoupledStepper stepper(model, opt.dt);
    const std::size_t N = grid.size();

    GrowthFit fit;
    fit.kind = "exponential";
    fit.predicted = dir.lambda.real();
    DistanceSeries fit_series;
    double fit_delta = INFINITY;
    for (double delta : opt.deltas) {
        Vec4 X = cs.branch.particle + delta * Vec4(dir.direction.head<4>());
        FieldState f = FieldState::zeros(N);
        for (std::size_t k = 0; k < N; ++k) {
            const double xi = grid.nodes[k];
            f.psi[0][k] = cs.psi0[k] + delta * dir.direction(op.phi(0, k)) / xi;
            f.psi[1][k] = cs.psi1[k] + delta * dir.direction(op.phi(1, k)) / xi;
            f.pi[0][k] = delta * dir.direction(op.varpi(0, k));
            f.pi[1][k] = delta * dir.direction(op.varpi(1, k));
        }
        DistanceSeries s;
        const long steps = std::lround(opt.horizon / opt.dt);
        s.t.push_back(0.0);
        s.d.push_back(orbit_distance(X, f, cs));
        for (long i = 1; i <= steps; ++i) {
            stepper.step(X, f);
            if (i % 10 != 0) continue;
            const double d = orbit_distance(X, f, cs);
            s.t.push_back(i * opt.dt);
            s.d.push_back(d);
            if (d >= opt.epsilon) {
                s.escape = i * opt.dt;
                break;
            }
        }
        fit.deltas.push_back(delta);
        fit.escape_times.push_back(s.escape);
        fit.predicted_escape.push_back(std::log(opt.epsilon / delta) / fit.predicted);
        if (delta < fit_delta) fit_delta = delta, fit_series = std::move(s);
    }
    fit.delta = fit_delta;
    fit_distance(fit, fit_series, opt.t0, opt.fit_ceiling * opt.epsilon, std::abs(dir.lambda.imag()));
    return fit;
}

double hartree_coercivity_min(double kappa, int tau, int samples, std::uint64_t seed) {
    const auto branch = make_branch(tau == 1 ? BranchLabel::symmetric_plus : BranchLabel::symmetric_minus, kappa);
    const Mat4 L = build_Lscript_hartree(kappa, tau).entries;
    const Vec4 u1 = branch.particle.normalized();
    const Vec4 u2 = branch.kernel().normalized();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    double m = INFINITY;
    for (int i = 0; i < samples; ++i) {
        Vec4 X(normal(rng), normal(rng), normal(rng), normal(rng));
        X -= X.dot(u1) * u1;
        X -= X.dot(u2) * u2;
        if (X.norm() < 1e-8) continue;
        X.normalize();
        m = std::min(m, X.dot(L * X));
    }
    return m;
}

CoercivityCertificate coupled_coercivity(const CoupledOperator& op) {
    const Eigen::Index D = op.dim();
    MatX basis = MatX::Zero(D, 2);
    basis.col(0).head<4>() = op.branch.particle;
    basis.col(1) = op.kernel_vector();
    Eigen::HouseholderQR<MatX> qr(basis);
    const MatX Q = qr.householderQ();
    const MatX C = Q.rightCols(D - 2);
    const MatX restricted = C.transpose() * op.Lscript * C;
    const auto ev = eigenvalues_symmetric(0.5 * (restricted + restricted.transpose()));
    CoercivityCertificate cert;
    cert.minimum = ev.front();
    const double k = op.branch.kappa;
    cert.eps = 0.5 * (0.25 * k + 0.5);
    cert.bound = std::min(2.0 - k / (2.0 * cert.eps), 0.5 - cert.eps);
    return cert;
}

bool resolvent_bound_holds(cplx lambda, double eps) {
    require(eps >= 0.0, "domain", "eps must be non-negative");
    const double lhs = 1.0 / std::abs(lambda * lambda + eps);
    return lhs <= std::sqrt(2.0) / std::norm(lambda) * (1.0 + 1e-12);
}

}  // namespace tlw
