#pragma once

#include <span>
#include <utility>

#include "robust_merton/market_model.hpp"

namespace robust_merton {

struct MetricConfig {
    double epsilon = 2.0;
    double lp_tolerance = 1e-12;
};

/// Same locations, intensities scaled by |z|^{2−ε} ∧ 1.
DiscreteLevyMeasure weighted_measure(const DiscreteLevyMeasure& measure, double epsilon);

/// d_L^ε(μ, ν): bounded-Hölder distance of the weighted measures, solved
/// exactly as a linear program over the union of atom locations.
double kr_distance(const DiscreteLevyMeasure& mu, const DiscreteLevyMeasure& nu,
                   const MetricConfig& cfg);

/// Normalized jump integrand of the CRRA local kernel; p = 0 is the log case.
double integrand_I(const Vector& z, const Vector& x, double p, double epsilon);

/// Empirical sup of |I(z,x) − I(ẑ,x)| / |z − ẑ|^{ε∧1}; coincident pairs are skipped.
double holder_modulus(std::span<const Vector> xs, std::span<const std::pair<Vector, Vector>> z_pairs,
                      double p, double epsilon);

}  // namespace robust_merton
