#pragma once

#include <Eigen/Dense>

namespace zkstar {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// (M + Mᵀ)/2 — applied after every covariance product to suppress drift.
inline Mat symmetrize(const Mat& M) { return 0.5 * (M + M.transpose()); }

/// Condition number of a symmetric matrix from its eigenvalue spread.
double symmetric_condition(const Mat& S);

}  // namespace zkstar
