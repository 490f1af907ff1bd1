#include "tlw/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace tlw {

std::vector<cplx> eigenvalues_general(const MatX& M) {
    Eigen::EigenSolver<MatX> es(M, false);
    if (es.info() != Eigen::Success) return {};
    std::vector<cplx> out(M.rows());
    for (Eigen::Index i = 0; i < M.rows(); ++i) out[i] = es.eigenvalues()(i);
    return out;
}

std::vector<double> eigenvalues_symmetric(const MatX& M) {
    Eigen::SelfAdjointEigenSolver<MatX> es(M, Eigen::EigenvaluesOnly);
    std::vector<double> out(M.rows());
    for (Eigen::Index i = 0; i < M.rows(); ++i) out[i] = es.eigenvalues()(i);
    return out;
}

int numerical_rank(const MatX& M, double rel_threshold) {
    Eigen::JacobiSVD<MatX> svd(M);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) return 0;
    int r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > rel_threshold * s(0)) ++r;
    return r;
}

}  // namespace tlw
