#pragma once

#include <span>
#include <vector>

namespace robust_merton {

/// n-point Gauss–Legendre rule on [−1, 1].
class GaussLegendre {
public:
    explicit GaussLegendre(int points);

    const std::vector<double>& nodes() const { return nodes_; }
    const std::vector<double>& weights() const { return weights_; }

    template <class F>
    double integrate(F&& f, double a, double b) const {
        const double half = 0.5 * (b - a);
        const double mid = 0.5 * (a + b);
        double sum = 0.0;
        for (std::size_t i = 0; i < nodes_.size(); ++i) sum += weights_[i] * f(mid + half * nodes_[i]);
        return half * sum;
    }

private:
    std::vector<double> nodes_;
    std::vector<double> weights_;
};

/// Pairwise (cascade) summation; the result depends only on the input order.
double pairwise_sum(std::span<const double> values);

/// expm1(x)/x, continuous at 0.
double expm1_ratio(double x);

}  // namespace robust_merton
