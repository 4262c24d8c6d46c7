#include "robust_merton/quadrature.hpp"

#include <cmath>
#include <numbers>

#include "robust_merton/errors.hpp"

namespace robust_merton {

GaussLegendre::GaussLegendre(int points) {
    if (points < 1) throw DomainError("Gauss-Legendre rule needs at least one point");
    const auto n = static_cast<std::size_t>(points);
    nodes_.resize(n);
    weights_.resize(n);
    for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (points + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = x;
            for (int k = 2; k <= points; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (points == 1) p0 = 1.0;
            dp = points * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // Recompute the derivative at the converged node for the weight.
        double p0 = 1.0;
        double p1 = x;
        for (int k = 2; k <= points; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = points * (x * p1 - p0) / (x * x - 1.0);
        nodes_[i] = -x;
        nodes_[n - 1 - i] = x;
        weights_[i] = weights_[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
}

double pairwise_sum(std::span<const double> values) {
    if (values.size() <= 8) {
        double sum = 0.0;
        for (double v : values) sum += v;
        return sum;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double expm1_ratio(double x) {
    if (std::abs(x) < 1e-8) return 1.0 + 0.5 * x;
    return std::expm1(x) / x;
}

}  // namespace robust_merton
