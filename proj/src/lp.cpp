#include "robust_merton/lp.hpp"

#include "robust_merton/errors.hpp"

namespace robust_merton {

LpResult maximize_lp(const Eigen::VectorXd& c, const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                     double tolerance, int max_pivots) {
    const Eigen::Index m = A.rows();
    const Eigen::Index n = A.cols();
    if (c.size() != n || b.size() != m) throw LpFailure("LP dimensions are inconsistent");
    if ((b.array() < 0.0).any()) throw LpFailure("LP right-hand side must be non-negative");

    // Tableau rows 0..m-1 are constraints with slack columns n..n+m-1; the last
    // row holds reduced costs, the last column the right-hand side.
    Eigen::MatrixXd tab = Eigen::MatrixXd::Zero(m + 1, n + m + 1);
    tab.topLeftCorner(m, n) = A;
    tab.block(0, n, m, m).setIdentity();
    tab.col(n + m).head(m) = b;
    tab.row(m).head(n) = -c.transpose();
    std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) basis[i] = n + i;

    LpResult result;
    while (true) {
        Eigen::Index entering = -1;
        for (Eigen::Index j = 0; j < n + m; ++j) {
            if (tab(m, j) < -tolerance) {
                entering = j;
                break;
            }
        }
        if (entering < 0) break;

        Eigen::Index leaving = -1;
        double best_ratio = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            const double a = tab(i, entering);
            if (a <= tolerance) continue;
            const double ratio = tab(i, n + m) / a;
            if (leaving < 0 || ratio < best_ratio - tolerance ||
                (ratio <= best_ratio + tolerance && basis[i] < basis[leaving])) {
                leaving = i;
                best_ratio = ratio;
            }
        }
        if (leaving < 0) throw LpFailure("LP is unbounded");
        if (++result.pivots > max_pivots) throw LpFailure("LP pivot budget exhausted");

        tab.row(leaving) /= tab(leaving, entering);
        for (Eigen::Index i = 0; i <= m; ++i) {
            if (i != leaving && tab(i, entering) != 0.0) {
                tab.row(i) -= tab(i, entering) * tab.row(leaving);
            }
        }
        basis[leaving] = entering;
    }

    result.solution = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < m; ++i) {
        if (basis[i] < n) result.solution[basis[i]] = tab(i, n + m);
    }
    result.value = c.dot(result.solution);
    return result;
}

}  // namespace robust_merton
