#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <vector>

namespace tlw {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using cplx = std::complex<double>;

// Ordering is X = (q0, p0, q1, p1) with u_j = q_j + i p_j.
inline Mat4 symplectic_J4() {
    Mat4 J = Mat4::Zero();
    J(0, 1) = 1.0;
    J(1, 0) = -1.0;
    J(2, 3) = 1.0;
    J(3, 2) = -1.0;
    return J;
}

// Multiplication of both u_j by e^{i theta}.
inline Mat4 rotation(double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    Mat4 R = Mat4::Zero();
    R(0, 0) = c;  R(0, 1) = -s;
    R(1, 0) = s;  R(1, 1) = c;
    R(2, 2) = c;  R(2, 3) = -s;
    R(3, 2) = s;  R(3, 3) = c;
    return R;
}

inline Mat4 rotation_derivative(double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    Mat4 R = Mat4::Zero();
    R(0, 0) = -s; R(0, 1) = -c;
    R(1, 0) = c;  R(1, 1) = -s;
    R(2, 2) = -s; R(2, 3) = -c;
    R(3, 2) = c;  R(3, 3) = -s;
    return R;
}

inline double wrap_angle(double theta) {
    const double two_pi = 2.0 * M_PI;
    double t = std::fmod(theta, two_pi);
    if (t < 0) t += two_pi;
    if (t >= two_pi) t -= two_pi;
    return t;
}

// Signed distance between two angles, in (-pi, pi].
inline double angle_difference(double a, double b) {
    double d = std::remainder(a - b, 2.0 * M_PI);
    return d;
}

std::vector<cplx> eigenvalues_general(const MatX& M);
std::vector<double> eigenvalues_symmetric(const MatX& M);
int numerical_rank(const MatX& M, double rel_threshold);

}  // namespace tlw
