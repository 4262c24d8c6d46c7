#pragma once

#include <vector>

#include <Eigen/Dense>

namespace robust_merton {

struct LpResult {
    double value = 0.0;
    Eigen::VectorXd solution;
    int pivots = 0;
};

/// Solves max cᵀx subject to Ax ≤ b, x ≥ 0, for b ≥ 0 (the origin is feasible).
///
/// Dense tableau simplex with Bland's rule. Throws LpFailure when the problem
/// is unbounded, b has a negative entry, or the pivot budget is exhausted.
LpResult maximize_lp(const Eigen::VectorXd& c, const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                     double tolerance = 1e-12, int max_pivots = 100000);

}  // namespace robust_merton
