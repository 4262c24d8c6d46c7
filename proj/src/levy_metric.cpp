#include "robust_merton/levy_metric.hpp"

#include <algorithm>
#include <cmath>

#include "robust_merton/errors.hpp"
#include "robust_merton/lp.hpp"

namespace robust_merton {

namespace {

double weight_factor(const Vector& z, double epsilon) {
    return std::min(std::pow(z.norm(), 2.0 - epsilon), 1.0);
}

}  // namespace

DiscreteLevyMeasure weighted_measure(const DiscreteLevyMeasure& measure, double epsilon) {
    if (!(epsilon > 0.0 && epsilon <= 2.0)) throw DomainError("epsilon must lie in (0, 2]");
    std::vector<JumpAtom> atoms;
    atoms.reserve(measure.size());
    for (const auto& atom : measure.atoms()) {
        atoms.push_back({atom.location, atom.intensity * weight_factor(atom.location, epsilon)});
    }
    return DiscreteLevyMeasure(std::move(atoms));
}

double kr_distance(const DiscreteLevyMeasure& mu, const DiscreteLevyMeasure& nu,
                   const MetricConfig& cfg) {
    const auto wmu = weighted_measure(mu, cfg.epsilon);
    const auto wnu = weighted_measure(nu, cfg.epsilon);

    // Signed mass on the union of locations.
    std::vector<Vector> locations;
    std::vector<double> mass;
    auto add = [&](const DiscreteLevyMeasure& m, double sign) {
        for (const auto& atom : m.atoms()) {
            auto it = std::find_if(locations.begin(), locations.end(), [&](const Vector& z) {
                return z.size() == atom.location.size() && (z.array() == atom.location.array()).all();
            });
            if (it == locations.end()) {
                locations.push_back(atom.location);
                mass.push_back(sign * atom.intensity);
            } else {
                mass[static_cast<std::size_t>(it - locations.begin())] += sign * atom.intensity;
            }
        }
    };
    add(wmu, 1.0);
    add(wnu, -1.0);
    const auto n = static_cast<Eigen::Index>(locations.size());
    if (n == 0) return 0.0;

    // Shift f = g − 1 so that g ∈ [0, 2] and the origin is feasible.
    const double holder = std::min(cfg.epsilon, 1.0);
    const Eigen::Index pairs = n * (n - 1);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n + pairs, n);
    Eigen::VectorXd b(n + pairs);
    Eigen::VectorXd c(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        A(i, i) = 1.0;
        b[i] = 2.0;
        c[i] = mass[static_cast<std::size_t>(i)];
    }
    Eigen::Index row = n;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            A(row, i) = 1.0;
            A(row, j) = -1.0;
            b[row] = std::pow((locations[i] - locations[j]).norm(), holder);
            ++row;
        }
    }
    const LpResult lp = maximize_lp(c, A, b, cfg.lp_tolerance);
    const double value = lp.value - c.sum();
    return std::max(value, 0.0);
}

double integrand_I(const Vector& z, const Vector& x, double p, double epsilon) {
    if (z.isZero(0.0)) return 0.0;
    const double xz = x.dot(z);
    if (1.0 + xz < 0.0 || (1.0 + xz == 0.0 && p <= 0.0)) {
        throw DomainError("1 + xᵀz must be positive");
    }
    double numerator;
    if (p == 0.0) {
        numerator = std::log1p(xz) - xz;
    } else {
        numerator = std::expm1(p * std::log1p(xz)) / p - xz;
    }
    return numerator / weight_factor(z, epsilon);
}

double holder_modulus(std::span<const Vector> xs, std::span<const std::pair<Vector, Vector>> z_pairs,
                      double p, double epsilon) {
    const double holder = std::min(epsilon, 1.0);
    double modulus = 0.0;
    for (const auto& x : xs) {
        for (const auto& [z, zhat] : z_pairs) {
            const double distance = (z - zhat).norm();
            if (distance == 0.0) continue;
            const double diff = std::abs(integrand_I(z, x, p, epsilon) - integrand_I(zhat, x, p, epsilon));
            modulus = std::max(modulus, diff / std::pow(distance, holder));
        }
    }
    return modulus;
}

}  // namespace robust_merton
