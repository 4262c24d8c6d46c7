#pragma once

#include <cstdint>
#include <vector>

#include "robust_merton/kernels.hpp"
#include "robust_merton/market_model.hpp"

namespace robust_merton {

struct SolverConfig {
    /// n in xᵀz ≥ −1 + 1/n for CRRA regions with jumps.
    std::int64_t margin = 1'000'000;
    /// Target duality gap of the outer maximization.
    double tolerance = 1e-11;
    /// Newton-step budget for one outer maximization.
    int max_iterations = 2000;
    /// Random points (and as many random mixtures) per certificate.
    int sample_size = 1000;
    int lattice = 11;
    double certificate_tolerance = 1e-6;
    std::uint64_t seed = 0x5eed5addULL;
};

struct InnerResult {
    double value;
    std::size_t vertex;
};

struct OuterResult {
    Vector x;
    double value;
    /// Multipliers of the vertex constraints: the worst-case mixture at x.
    std::vector<double> weights;
    int iterations;
    /// Half-width of the trust box; infinite when the region is bounded.
    double trust_radius;
};

struct SaddleCell {
    std::size_t cell;
    Vector x;
    std::vector<double> weights;
    LevyTriplet theta;
    double value;
    double certificate;
};

struct SaddleSkeleton {
    std::vector<SaddleCell> cells;
    /// One admissible region per segment.
    std::vector<AdmissibleRegion> regions;

    std::vector<Vector> investment() const;
    std::vector<std::vector<double>> weights() const;
    std::vector<double> kernels() const;
};

/// Minimum of the local kernel over the hull, attained at a vertex (lowest index on ties).
InnerResult inner_min(const Vector& x, const ConfidenceSet& set, const KernelContext& ctx);

/// Maximizes x ↦ min_v g_v(x) over the region (plus a trust box when it is unbounded).
OuterResult outer_max(const ConfidenceSet& set, const AdmissibleRegion& region,
                      const KernelContext& ctx, const SolverConfig& cfg);

/// Largest sampled violation of g(x, θ*) ≤ g* ≤ g(x*, θ) over region points and
/// hull mixtures (plus all vertices).
double saddle_certificate(const ConfidenceSet& set, const AdmissibleRegion& region,
                          const KernelContext& ctx, const Vector& x_star,
                          const std::vector<double>& weights, double value, double trust_radius,
                          const SolverConfig& cfg, std::uint64_t stream = 0);

/// Throws SaddleCertificateFailure when the certificate exceeds the tolerance.
SaddleCell local_saddle(const ConfidenceSet& set, const AdmissibleRegion& region,
                        const KernelContext& ctx, const SolverConfig& cfg, std::uint64_t stream = 0);

/// Admissible region of one segment: the margin polyhedron for CRRA, all of ℝ^d for CARA.
AdmissibleRegion segment_region(const MarketSpec& spec, std::size_t segment,
                                const SolverConfig& cfg);

/// One saddle per cell; CRRA cells reuse the solution of their segment.
SaddleSkeleton solve_policy_measure(const MarketSpec& spec, const SolverConfig& cfg);

}  // namespace robust_merton
