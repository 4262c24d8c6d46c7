#include "robust_merton/saddle_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <sstream>

#include "robust_merton/errors.hpp"
#include "robust_merton/parallel.hpp"

namespace robust_merton {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Log-barrier formulation of max t s.t. g_v(x) ≥ t, region and trust-box slacks.
class EpigraphBarrier {
public:
    EpigraphBarrier(const ConfidenceSet& set, const AdmissibleRegion& region,
                    const KernelContext& ctx, double box)
        : set_(set), region_(region), ctx_(ctx), box_(box), dim_(set.dimension()) {}

    std::size_t constraint_count() const {
        return set_.size() + region_.normals.size() +
               (std::isfinite(box_) ? 2 * static_cast<std::size_t>(dim_) : 0);
    }

    // Barrier objective −t − μ Σ log s; +∞ outside the strict interior.
    double objective(const Vector& y, double mu) const {
        const Vector x = y.head(dim_);
        const double t = y[dim_];
        double sum = 0.0;
        auto add = [&](double s) {
            if (!(s > 0.0)) return false;
            sum += std::log(s);
            return true;
        };
        for (const auto& z : region_.normals) {
            if (!add(x.dot(z) - region_.offset)) return kInf;
        }
        if (std::isfinite(box_)) {
            for (Eigen::Index k = 0; k < dim_; ++k) {
                if (!add(box_ - x[k]) || !add(box_ + x[k])) return kInf;
            }
        }
        for (const auto& vertex : set_.vertices()) {
            double g;
            try {
                g = local_kernel(x, vertex, ctx_);
            } catch (const DomainError&) {
                return kInf;
            }
            if (!add(g - t)) return kInf;
        }
        return -t - mu * sum;
    }

    void derivatives(const Vector& y, double mu, Vector& grad, Matrix& hess,
                     std::vector<double>& vertex_slacks) const {
        const Eigen::Index n = dim_ + 1;
        const Vector x = y.head(dim_);
        const double t = y[dim_];
        grad = Vector::Zero(n);
        hess = Matrix::Zero(n, n);
        grad[dim_] = -1.0;
        auto linear = [&](const Vector& a, double s) {
            grad -= (mu / s) * a;
            hess += (mu / (s * s)) * a * a.transpose();
        };
        for (const auto& z : region_.normals) {
            Vector a = Vector::Zero(n);
            a.head(dim_) = z;
            linear(a, x.dot(z) - region_.offset);
        }
        if (std::isfinite(box_)) {
            for (Eigen::Index k = 0; k < dim_; ++k) {
                Vector a = Vector::Zero(n);
                a[k] = -1.0;
                linear(a, box_ - x[k]);
                a[k] = 1.0;
                linear(a, box_ + x[k]);
            }
        }
        vertex_slacks.clear();
        for (const auto& vertex : set_.vertices()) {
            const auto kd = local_kernel_derivatives(x, vertex, ctx_);
            const double s = kd.value - t;
            vertex_slacks.push_back(s);
            Vector a(n);
            a.head(dim_) = kd.gradient;
            a[dim_] = -1.0;
            linear(a, s);
            hess.topLeftCorner(dim_, dim_) -= (mu / s) * kd.hessian;
        }
    }

private:
    const ConfidenceSet& set_;
    const AdmissibleRegion& region_;
    const KernelContext& ctx_;
    double box_;
    Eigen::Index dim_;
};

struct BarrierOutcome {
    Vector x;
    std::vector<double> weights;
    int iterations;
};

BarrierOutcome run_barrier(const EpigraphBarrier& barrier, Eigen::Index dim, double min_at_origin,
                           const SolverConfig& cfg) {
    Vector y = Vector::Zero(dim + 1);
    y[dim] = min_at_origin - 1.0;
    const double mu_final = cfg.tolerance / static_cast<double>(barrier.constraint_count());
    double mu = 0.1;
    int iterations = 0;
    Vector grad;
    Matrix hess;
    std::vector<double> slacks;
    while (true) {
        const bool last = mu <= mu_final;
        for (int step = 0; step < 100; ++step) {
            barrier.derivatives(y, mu, grad, hess, slacks);
            const Vector delta = -hess.ldlt().solve(grad);
            const double decrement = -grad.dot(delta);
            if (!std::isfinite(decrement)) throw NoConvergence("outer maximization: singular Newton system");
            if (decrement < (last ? 1e-24 : 1e-12)) break;
            if (++iterations > cfg.max_iterations) {
                throw NoConvergence("outer maximization exceeded the iteration budget");
            }
            const double base = barrier.objective(y, mu);
            double alpha = 1.0;
            Vector trial = y + delta;
            double value = barrier.objective(trial, mu);
            while (!(value <= base - 0.25 * alpha * decrement) && alpha > 1e-14) {
                alpha *= 0.5;
                trial = y + alpha * delta;
                value = barrier.objective(trial, mu);
            }
            if (!(value <= base)) break;
            y = trial;
        }
        if (last) break;
        mu = std::max(mu * 0.2, mu_final);
    }
    barrier.derivatives(y, mu, grad, hess, slacks);
    std::vector<double> weights(slacks.size());
    double total = 0.0;
    for (std::size_t v = 0; v < slacks.size(); ++v) {
        weights[v] = mu / slacks[v];
        total += weights[v];
    }
    for (auto& w : weights) w /= total;
    for (auto& w : weights) {
        if (w < 1e-7) w = 0.0;
    }
    total = 0.0;
    for (double w : weights) total += w;
    for (auto& w : weights) w /= total;
    return {y.head(dim), weights, iterations};
}

Vector sample_region_point(const AdmissibleRegion& region, const Vector& x_star, double radius,
                           bool local, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> exponent(-6.0, 0.0);
    const Eigen::Index d = x_star.size();
    for (int attempt = 0; attempt < 10000; ++attempt) {
        Vector x(d);
        if (local) {
            const double scale = radius * std::pow(10.0, exponent(rng));
            for (Eigen::Index k = 0; k < d; ++k) x[k] = normal(rng);
            x = x_star + scale * x / std::max(x.norm(), 1e-300);
        } else {
            for (Eigen::Index k = 0; k < d; ++k) x[k] = radius * unit(rng);
        }
        if (region.contains(x)) return x;
    }
    return x_star;
}

}  // namespace

std::vector<Vector> SaddleSkeleton::investment() const {
    std::vector<Vector> out;
    for (const auto& c : cells) out.push_back(c.x);
    return out;
}

std::vector<std::vector<double>> SaddleSkeleton::weights() const {
    std::vector<std::vector<double>> out;
    for (const auto& c : cells) out.push_back(c.weights);
    return out;
}

std::vector<double> SaddleSkeleton::kernels() const {
    std::vector<double> out;
    for (const auto& c : cells) out.push_back(c.value);
    return out;
}

InnerResult inner_min(const Vector& x, const ConfidenceSet& set, const KernelContext& ctx) {
    InnerResult best{kInf, 0};
    for (std::size_t v = 0; v < set.size(); ++v) {
        const double value = local_kernel(x, set.vertices()[v], ctx);
        if (value < best.value) best = {value, v};
    }
    return best;
}

OuterResult outer_max(const ConfidenceSet& set, const AdmissibleRegion& region,
                      const KernelContext& ctx, const SolverConfig& cfg) {
    const Eigen::Index d = set.dimension();
    if (region.dimension != d) throw ValidationError("region dimension does not match the set");
    const double origin_min = inner_min(Vector::Zero(d), set, ctx).value;
    double box = region.unbounded ? 4.0 : kInf;
    int total_iterations = 0;
    for (int expansion = 0; expansion < 60; ++expansion) {
        EpigraphBarrier barrier(set, region, ctx, box);
        auto outcome = run_barrier(barrier, d, origin_min, cfg);
        total_iterations += outcome.iterations;
        if (std::isfinite(box) && outcome.x.cwiseAbs().maxCoeff() > 0.5 * box) {
            box *= 2.0;
            continue;
        }
        OuterResult result{outcome.x, inner_min(outcome.x, set, ctx).value, outcome.weights,
                           total_iterations, box};
        // The origin is always admissible, so the maximum is at least φ(0).
        if (result.value < origin_min && region.contains(Vector::Zero(d))) {
            result.x = Vector::Zero(d);
            result.value = origin_min;
        }
        return result;
    }
    throw NoConvergence("outer maximization: trust box kept expanding");
}

double saddle_certificate(const ConfidenceSet& set, const AdmissibleRegion& region,
                          const KernelContext& ctx, const Vector& x_star,
                          const std::vector<double>& weights, double value, double trust_radius,
                          const SolverConfig& cfg, std::uint64_t stream) {
    if (weights.size() != set.size()) throw ValidationError("one weight per vertex is required");
    std::mt19937_64 rng(splitmix64(cfg.seed ^ splitmix64(stream)));
    const double radius = region.unbounded ? trust_radius : region.ball_radius;
    double violation = 0.0;

    auto mixed_kernel = [&](const Vector& x, const std::vector<double>& w) {
        double g = 0.0;
        for (std::size_t v = 0; v < set.size(); ++v) {
            if (w[v] != 0.0) g += w[v] * local_kernel(x, set.vertices()[v], ctx);
        }
        return g;
    };

    // g(x, θ*) ≤ g* over the region.
    for (int k = 0; k < cfg.sample_size; ++k) {
        const Vector x = sample_region_point(region, x_star, radius, k % 2 == 1, rng);
        violation = std::max(violation, mixed_kernel(x, weights) - value);
    }
    if (region.contains(Vector::Zero(x_star.size()))) {
        violation = std::max(violation, mixed_kernel(Vector::Zero(x_star.size()), weights) - value);
    }

    // g* ≤ g(x*, θ) over the hull.
    std::exponential_distribution<double> expo(1.0);
    std::vector<double> vertex_values(set.size());
    for (std::size_t v = 0; v < set.size(); ++v) {
        vertex_values[v] = local_kernel(x_star, set.vertices()[v], ctx);
        violation = std::max(violation, value - vertex_values[v]);
    }
    for (int k = 0; k < cfg.sample_size; ++k) {
        std::vector<double> w(set.size());
        double total = 0.0;
        for (auto& wi : w) total += (wi = expo(rng));
        double g = 0.0;
        for (std::size_t v = 0; v < set.size(); ++v) g += w[v] / total * vertex_values[v];
        violation = std::max(violation, value - g);
    }
    return violation;
}

SaddleCell local_saddle(const ConfidenceSet& set, const AdmissibleRegion& region,
                        const KernelContext& ctx, const SolverConfig& cfg, std::uint64_t stream) {
    const auto outer = outer_max(set, region, ctx, cfg);
    const double certificate = saddle_certificate(set, region, ctx, outer.x, outer.weights,
                                                  outer.value, outer.trust_radius, cfg, stream);
    if (certificate > cfg.certificate_tolerance) {
        std::ostringstream msg;
        msg << "saddle certificate " << certificate << " exceeds tolerance "
            << cfg.certificate_tolerance;
        throw SaddleCertificateFailure(msg.str());
    }
    return SaddleCell{0, outer.x, outer.weights, set.mixture(outer.weights), outer.value, certificate};
}

AdmissibleRegion segment_region(const MarketSpec& spec, std::size_t segment,
                                const SolverConfig& cfg) {
    const Eigen::Index d = spec.dimension();
    if (!spec.utility.is_crra()) {
        AdmissibleRegion region;
        region.dimension = d;
        return region;
    }
    const auto support = jump_support_union(spec.sets.at(segment));
    return admissible_region(support.locations, cfg.margin, d);
}

SaddleSkeleton solve_policy_measure(const MarketSpec& spec, const SolverConfig& cfg) {
    SaddleSkeleton skeleton;
    for (std::size_t k = 0; k < spec.grid.segment_count(); ++k) {
        skeleton.regions.push_back(segment_region(spec, k, cfg));
    }
    const auto& cells = spec.grid.cells();
    const bool crra = spec.utility.is_crra();
    // CRRA kernels do not depend on t, so each segment is solved once.
    const std::size_t jobs = crra ? spec.grid.segment_count() : cells.size();
    std::vector<std::optional<SaddleCell>> solved(jobs);
    std::vector<std::string> errors(jobs);
    std::vector<int> error_kind(jobs, 0);
    parallel_for(jobs, [&](std::size_t j) {
        const std::size_t segment = crra ? j : cells[j].segment;
        const double q = crra ? 1.0 : q_schedule(cells[j].midpoint(), spec.grid.horizon());
        try {
            solved[j] = local_saddle(spec.sets[segment], skeleton.regions[segment],
                                     KernelContext{spec.utility, q}, cfg, j);
        } catch (const SaddleCertificateFailure& e) {
            errors[j] = e.what();
            error_kind[j] = 1;
        } catch (const Error& e) {
            errors[j] = e.what();
            error_kind[j] = 2;
        }
    });
    std::ostringstream failures;
    int kind = 0;
    for (std::size_t j = 0; j < jobs; ++j) {
        if (errors[j].empty()) continue;
        if (kind == 0) kind = error_kind[j];
        failures << (crra ? "segment " : "cell ") << j << ": " << errors[j] << "; ";
    }
    if (kind == 1) throw SaddleCertificateFailure(failures.str());
    if (kind == 2) throw NoConvergence(failures.str());

    for (std::size_t i = 0; i < cells.size(); ++i) {
        SaddleCell cell = *solved[crra ? cells[i].segment : i];
        cell.cell = i;
        skeleton.cells.push_back(std::move(cell));
    }
    return skeleton;
}

}  // namespace robust_merton
