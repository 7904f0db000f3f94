#pragma once
// Independent reference computations used to check the library.

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "cfl/graph.hpp"

namespace oracle {

// sigma2 from a full symmetric eigendecomposition of W - (1/n) 11^T.
inline double sigma2(const cfl::MixingMatrix& w) {
    const auto n = static_cast<Eigen::Index>(w.size());
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            m(i, j) = w(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) - 1.0 / static_cast<double>(n);
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline std::vector<double> eigenvalues(const cfl::MixingMatrix& w) {
    const auto n = static_cast<Eigen::Index>(w.size());
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = w(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    return {es.eigenvalues().data(), es.eigenvalues().data() + n};
}

}  // namespace oracle
