#include "robust_merton/market_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "robust_merton/errors.hpp"

namespace robust_merton {

namespace {

bool lexicographic_less(const Vector& lhs, const Vector& rhs) {
    return std::lexicographical_compare(lhs.data(), lhs.data() + lhs.size(), rhs.data(),
                                        rhs.data() + rhs.size());
}

bool same_location(const Vector& lhs, const Vector& rhs) {
    return lhs.size() == rhs.size() && (lhs.array() == rhs.array()).all();
}

double weighted_mass(const DiscreteLevyMeasure& measure, double epsilon) {
    double mass = 0.0;
    for (const auto& atom : measure.atoms()) {
        mass += atom.intensity * std::min(std::pow(atom.location.norm(), 2.0 - epsilon), 1.0);
    }
    return mass;
}

// Mixture weights on the lattice: all vertices plus interior points of every edge.
std::vector<std::vector<double>> hull_lattice(std::size_t vertex_count, int points_per_edge) {
    std::vector<std::vector<double>> lattice;
    for (std::size_t i = 0; i < vertex_count; ++i) {
        std::vector<double> w(vertex_count, 0.0);
        w[i] = 1.0;
        lattice.push_back(std::move(w));
    }
    const int interior = std::max(points_per_edge - 2, 0);
    for (std::size_t i = 0; i < vertex_count; ++i) {
        for (std::size_t j = i + 1; j < vertex_count; ++j) {
            for (int k = 1; k <= interior; ++k) {
                const double lambda = static_cast<double>(k) / (interior + 1);
                std::vector<double> w(vertex_count, 0.0);
                w[i] = 1.0 - lambda;
                w[j] = lambda;
                lattice.push_back(std::move(w));
            }
        }
    }
    return lattice;
}

SharpeCheck certify_sharpe(const ConfidenceSet& set, double bound_squared, int lattice_points) {
    SharpeCheck check;
    check.bound_squared = bound_squared;
    check.worst_sharpe_squared = -1.0;
    for (const auto& weights : hull_lattice(set.size(), lattice_points)) {
        // Only (b, Σ) enter the ratio; mixing the jump part is unnecessary.
        Vector drift = Vector::Zero(set.dimension());
        Matrix cov = Matrix::Zero(set.dimension(), set.dimension());
        for (std::size_t v = 0; v < set.size(); ++v) {
            drift += weights[v] * set.vertices()[v].drift();
            cov += weights[v] * set.vertices()[v].covariance();
        }
        const double sharpe_sq = drift.dot(cov.llt().solve(drift));
        if (sharpe_sq > check.worst_sharpe_squared) {
            check.worst_sharpe_squared = sharpe_sq;
            check.worst_weights = weights;
        }
    }
    check.worst = set.mixture(check.worst_weights);
    check.pass = check.worst_sharpe_squared <= bound_squared * (1.0 + 1e-12);
    return check;
}

// Distance from the origin to the nearest supporting hyperplane of Conv(points).
double inscribed_radius_exact(const std::vector<Vector>& points, Eigen::Index dim) {
    const std::size_t m = points.size();
    double radius = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> idx(static_cast<std::size_t>(dim));
    std::iota(idx.begin(), idx.end(), 0);
    double scale = 0.0;
    for (const auto& p : points) scale = std::max(scale, p.norm());
    const double tol = 1e-12 * std::max(scale, 1.0);
    while (true) {
        Matrix diffs(dim - 1, dim);
        for (Eigen::Index r = 1; r < dim; ++r) {
            diffs.row(r - 1) = (points[idx[r]] - points[idx[0]]).transpose();
        }
        Vector normal;
        if (dim == 1) {
            normal = Vector::Ones(1);
        } else {
            Eigen::FullPivLU<Matrix> lu(diffs);
            const Matrix kernel = lu.kernel();
            if (kernel.cols() == 1) normal = kernel.col(0).normalized();
        }
        if (normal.size() == dim) {
            const double offset = normal.dot(points[idx[0]]);
            bool below = true;
            bool above = true;
            for (const auto& p : points) {
                const double s = normal.dot(p) - offset;
                below = below && s <= tol;
                above = above && s >= -tol;
            }
            if (below || above) radius = std::min(radius, std::abs(offset));
        }
        // Next combination in lexicographic order.
        Eigen::Index k = dim - 1;
        while (k >= 0 && idx[k] == m - static_cast<std::size_t>(dim) + static_cast<std::size_t>(k)) --k;
        if (k < 0) break;
        ++idx[k];
        for (Eigen::Index j = k + 1; j < dim; ++j) idx[j] = idx[j - 1] + 1;
    }
    return radius;
}

double inscribed_radius_sampled(const std::vector<Vector>& points, Eigen::Index dim) {
    std::mt19937_64 engine(0x6e6f6e64ULL);
    std::normal_distribution<double> normal;
    double radius = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 200000; ++i) {
        Vector u(dim);
        for (Eigen::Index k = 0; k < dim; ++k) u[k] = normal(engine);
        u.normalize();
        double support = 0.0;
        for (const auto& p : points) support = std::max(support, u.dot(p));
        radius = std::min(radius, support);
    }
    return radius;
}

double binomial(std::size_t n, std::size_t k) {
    double result = 1.0;
    for (std::size_t i = 1; i <= k; ++i) result *= static_cast<double>(n - k + i) / i;
    return result;
}

}  // namespace

DiscreteLevyMeasure::DiscreteLevyMeasure(std::vector<JumpAtom> atoms) : atoms_(std::move(atoms)) {
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
        const auto& atom = atoms_[i];
        if (!(atom.intensity > 0.0) || !std::isfinite(atom.intensity)) {
            throw ValidationError("jump intensity must be positive and finite");
        }
        if (atom.location.size() == 0 || !atom.location.allFinite()) {
            throw ValidationError("jump location must be a finite vector");
        }
        if (atom.location.isZero(0.0)) {
            throw ValidationError("Lévy measure must not charge the origin");
        }
        if (atom.location.size() != atoms_.front().location.size()) {
            throw ValidationError("jump locations have inconsistent dimensions");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (same_location(atoms_[j].location, atom.location)) {
                throw ValidationError("jump locations must be pairwise distinct");
            }
        }
    }
}

double DiscreteLevyMeasure::total_intensity() const {
    double total = 0.0;
    for (const auto& atom : atoms_) total += atom.intensity;
    return total;
}

DiscreteLevyMeasure DiscreteLevyMeasure::mixture(std::span<const DiscreteLevyMeasure> measures,
                                                 std::span<const double> weights) {
    std::vector<JumpAtom> merged;
    for (std::size_t k = 0; k < measures.size(); ++k) {
        if (weights[k] <= 0.0) continue;
        for (const auto& atom : measures[k].atoms()) {
            auto it = std::find_if(merged.begin(), merged.end(), [&](const JumpAtom& other) {
                return same_location(other.location, atom.location);
            });
            if (it == merged.end()) {
                merged.push_back({atom.location, weights[k] * atom.intensity});
            } else {
                it->intensity += weights[k] * atom.intensity;
            }
        }
    }
    return DiscreteLevyMeasure(std::move(merged));
}

LevyTriplet::LevyTriplet(Vector drift, Matrix covariance, DiscreteLevyMeasure jumps)
    : drift_(std::move(drift)), covariance_(std::move(covariance)), jumps_(std::move(jumps)) {
    const Eigen::Index d = drift_.size();
    if (d == 0) throw ValidationError("drift must be non-empty");
    if (covariance_.rows() != d || covariance_.cols() != d) {
        throw ValidationError("covariance dimension does not match drift");
    }
    if (!drift_.allFinite() || !covariance_.allFinite()) {
        throw ValidationError("triplet entries must be finite");
    }
    const double scale = std::max(covariance_.cwiseAbs().maxCoeff(), 1e-300);
    if ((covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw ValidationError("covariance must be symmetric");
    }
    Eigen::LLT<Matrix> llt(covariance_);
    if (llt.info() != Eigen::Success) {
        throw ValidationError("covariance must be positive definite");
    }
    cholesky_ = llt.matrixL();
    if ((cholesky_.diagonal().array() <= 0.0).any()) {
        throw ValidationError("covariance must be positive definite");
    }
    for (const auto& atom : jumps_.atoms()) {
        if (atom.location.size() != d) {
            throw ValidationError("jump location dimension does not match drift");
        }
    }
}

double LevyTriplet::sharpe_squared() const {
    return drift_.dot(covariance_.llt().solve(drift_));
}

LevyTriplet LevyTriplet::mixture(std::span<const LevyTriplet> vertices,
                                 std::span<const double> weights) {
    if (vertices.empty() || vertices.size() != weights.size()) {
        throw ValidationError("mixture needs one weight per vertex");
    }
    const Eigen::Index d = vertices.front().dimension();
    Vector drift = Vector::Zero(d);
    Matrix cov = Matrix::Zero(d, d);
    std::vector<DiscreteLevyMeasure> measures;
    measures.reserve(vertices.size());
    for (std::size_t k = 0; k < vertices.size(); ++k) {
        drift += weights[k] * vertices[k].drift();
        cov += weights[k] * vertices[k].covariance();
        measures.push_back(vertices[k].jumps());
    }
    cov = 0.5 * (cov + cov.transpose());
    return LevyTriplet(std::move(drift), std::move(cov),
                       DiscreteLevyMeasure::mixture(measures, weights));
}

ConfidenceSet::ConfidenceSet(std::vector<LevyTriplet> vertices, double bound)
    : vertices_(std::move(vertices)), bound_(bound) {
    if (vertices_.empty()) throw ValidationError("confidence set needs at least one vertex");
    if (!(bound_ > 0.0)) throw ValidationError("confidence set bound must be positive");
    for (const auto& v : vertices_) {
        if (v.dimension() != vertices_.front().dimension()) {
            throw ValidationError("confidence set vertices have inconsistent dimensions");
        }
    }
}

LevyTriplet ConfidenceSet::mixture(std::span<const double> weights) const {
    if (weights.size() != vertices_.size()) {
        throw ValidationError("mixture needs one weight per vertex");
    }
    double total = 0.0;
    for (double w : weights) {
        if (w < -1e-12) throw ValidationError("mixture weights must be non-negative");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ValidationError("mixture weights must sum to one");
    return LevyTriplet::mixture(vertices_, weights);
}

std::optional<std::string> ConfidenceSet::bound_violation(double epsilon) const {
    const double slack = bound_ * (1.0 + 1e-12);
    for (std::size_t i = 0; i < vertices_.size(); ++i) {
        const auto& v = vertices_[i];
        std::ostringstream msg;
        if (v.drift().norm() > slack) {
            msg << "vertex " << i << ": |b| = " << v.drift().norm() << " exceeds bound " << bound_;
            return msg.str();
        }
        const double spectral = Eigen::SelfAdjointEigenSolver<Matrix>(v.covariance())
                                    .eigenvalues()
                                    .maxCoeff();
        if (spectral > slack) {
            msg << "vertex " << i << ": ||Sigma||_2 = " << spectral << " exceeds bound " << bound_;
            return msg.str();
        }
        const double mass = weighted_mass(v.jumps(), epsilon);
        if (mass > slack) {
            msg << "vertex " << i << ": d_L(F, 0) = " << mass << " exceeds bound " << bound_;
            return msg.str();
        }
    }
    return std::nullopt;
}

double ConfidenceSet::minimal_bound(std::span<const LevyTriplet> vertices, double epsilon) {
    double bound = 0.0;
    for (const auto& v : vertices) {
        bound = std::max(bound, v.drift().norm());
        bound = std::max(bound, Eigen::SelfAdjointEigenSolver<Matrix>(v.covariance())
                                    .eigenvalues()
                                    .maxCoeff());
        // Distance to the zero measure is the weighted total mass (f ≡ 1 is optimal).
        bound = std::max(bound, weighted_mass(v.jumps(), epsilon));
    }
    return bound;
}

TimeGrid::TimeGrid(std::vector<double> breakpoints, double step)
    : breakpoints_(std::move(breakpoints)), step_(step) {
    if (breakpoints_.size() < 2) throw ValidationError("time grid needs at least one segment");
    if (breakpoints_.front() != 0.0) throw ValidationError("time grid must start at 0");
    if (!(step_ > 0.0)) throw ValidationError("grid step must be positive");
    for (std::size_t k = 0; k + 1 < breakpoints_.size(); ++k) {
        const double a = breakpoints_[k];
        const double b = breakpoints_[k + 1];
        if (!(b > a)) throw ValidationError("breakpoints must be strictly increasing");
        const double ratio = (b - a) / step_;
        const double count = std::round(ratio);
        if (count < 1.0 || std::abs(ratio - count) > 1e-6 * std::max(1.0, ratio)) {
            std::ostringstream msg;
            msg << "grid step " << step_ << " does not divide segment [" << a << ", " << b << "]";
            throw ValidationError(msg.str());
        }
        const auto n = static_cast<std::size_t>(count);
        for (std::size_t i = 0; i < n; ++i) {
            const double start = a + (b - a) * static_cast<double>(i) / n;
            const double end = (i + 1 == n) ? b : a + (b - a) * static_cast<double>(i + 1) / n;
            cells_.push_back({start, end, k});
        }
    }
}

std::size_t TimeGrid::cell_at(double t) const {
    auto it = std::upper_bound(cells_.begin(), cells_.end(), t,
                               [](double value, const Cell& cell) { return value < cell.end; });
    if (it == cells_.end()) return cells_.size() - 1;
    return static_cast<std::size_t>(it - cells_.begin());
}

std::vector<double> TimeGrid::nodes() const {
    std::vector<double> nodes;
    nodes.reserve(cells_.size() + 1);
    for (const auto& cell : cells_) nodes.push_back(cell.start);
    nodes.push_back(horizon());
    return nodes;
}

UtilitySpec UtilitySpec::crra_log() { return {UtilityFamily::CrraLog, 0.0, 0.0}; }

UtilitySpec UtilitySpec::crra_power(double p) {
    if (!(p < 1.0) || p == 0.0 || !std::isfinite(p)) {
        throw ValidationError("power utility exponent must lie in (-inf, 0) or (0, 1)");
    }
    return {UtilityFamily::CrraPower, p, 0.0};
}

UtilitySpec UtilitySpec::cara(double a) {
    if (!(a > 0.0) || !std::isfinite(a)) throw ValidationError("CARA risk aversion must be positive");
    return {UtilityFamily::Cara, 0.0, a};
}

double UtilitySpec::operator()(double x) const {
    switch (family_) {
        case UtilityFamily::CrraLog:
            return x > 0.0 ? std::log(x) : -std::numeric_limits<double>::infinity();
        case UtilityFamily::CrraPower:
            if (x > 0.0) return std::pow(x, p_) / p_;
            if (x == 0.0 && p_ > 0.0) return 0.0;
            return -std::numeric_limits<double>::infinity();
        case UtilityFamily::Cara:
            return -std::exp(-a_ * x) / a_;
    }
    return 0.0;
}

std::string UtilitySpec::name() const {
    switch (family_) {
        case UtilityFamily::CrraLog: return "crra-log";
        case UtilityFamily::CrraPower: return "crra-power";
        case UtilityFamily::Cara: return "cara";
    }
    return "";
}

void MarketSpec::validate() const {
    if (sets.size() != grid.segment_count()) {
        throw ValidationError("one confidence set is required per grid segment");
    }
    if (!(epsilon > 0.0 && epsilon <= 2.0)) throw ValidationError("epsilon must lie in (0, 2]");
    if (utility.is_crra() && !(initial_wealth > 0.0)) {
        throw ValidationError("CRRA utility requires positive initial wealth");
    }
    if (!std::isfinite(initial_wealth)) throw ValidationError("initial wealth must be finite");
    for (std::size_t k = 0; k < sets.size(); ++k) {
        if (sets[k].dimension() != sets.front().dimension()) {
            throw ValidationError("all segments must share the market dimension");
        }
        if (auto violation = sets[k].bound_violation(epsilon)) {
            throw ValidationError("segment " + std::to_string(k) + ": " + *violation);
        }
    }
}

bool AdmissibleRegion::contains(const Vector& x) const {
    for (const auto& z : normals) {
        const double s = x.dot(z);
        if (margin ? s < offset : s <= offset) return false;
    }
    return true;
}

double AdmissibleRegion::slack(const Vector& x) const {
    double slack = std::numeric_limits<double>::infinity();
    for (const auto& z : normals) slack = std::min(slack, x.dot(z) - offset);
    return slack;
}

std::pair<double, double> AdmissibleRegion::interval() const {
    if (dimension != 1) throw ValidationError("interval() is defined for one-dimensional regions");
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (const auto& z : normals) {
        const double bound = offset / z[0];
        if (z[0] > 0.0) lo = std::max(lo, bound);
        else hi = std::min(hi, bound);
    }
    return {lo, hi};
}

JumpSupport jump_support_union(const ConfidenceSet& set) {
    JumpSupport support;
    for (const auto& vertex : set.vertices()) {
        for (const auto& atom : vertex.jumps().atoms()) support.locations.push_back(atom.location);
    }
    std::sort(support.locations.begin(), support.locations.end(), lexicographic_less);
    support.locations.erase(std::unique(support.locations.begin(), support.locations.end(),
                                        same_location),
                            support.locations.end());
    return support;
}

JumpSupportReport check_nondegeneracy(std::span<const Vector> support) {
    if (support.empty()) throw DegenerateSupport("jump support is empty");
    const Eigen::Index dim = support.front().size();
    JumpSupportReport report;
    report.support.assign(support.begin(), support.end());
    report.kappa_bound = 0.0;
    for (const auto& z : support) report.kappa_bound = std::max(report.kappa_bound, z.norm());

    Matrix stacked(dim, static_cast<Eigen::Index>(support.size()));
    for (std::size_t i = 0; i < support.size(); ++i) stacked.col(static_cast<Eigen::Index>(i)) = support[i];
    Eigen::FullPivLU<Matrix> lu(stacked);
    lu.setThreshold(1e-12);
    double radius = 0.0;
    if (lu.rank() == dim) {
        std::vector<Vector> points(support.begin(), support.end());
        points.push_back(Vector::Zero(dim));
        if (binomial(points.size(), static_cast<std::size_t>(dim)) <= 1e5) {
            radius = inscribed_radius_exact(points, dim);
        } else {
            radius = inscribed_radius_sampled(points, dim);
        }
    }
    if (!(radius > 1e-14 * std::max(report.kappa_bound, 1.0)) || !std::isfinite(radius)) {
        throw DegenerateSupport("origin is not interior to the convex hull of the jump support");
    }
    report.inscribed_radius = radius;
    report.kappa_nondegeneracy = 1.0 / radius;
    return report;
}

double crra_sharpe_bound_squared(double p) {
    if (p >= 0.0) return std::numeric_limits<double>::infinity();
    return 2.0 * (1.0 - p) * (1.0 - p) / (-p);
}

double cara_sharpe_bound_squared(double q) { return 2.0 * q * (1.0 - std::log(q)); }

SharpeCheck check_sharpe_crra(const ConfidenceSet& set, double p, int lattice_points) {
    if (p >= 0.0) return SharpeCheck{};
    return certify_sharpe(set, crra_sharpe_bound_squared(p), lattice_points);
}

SharpeCheck check_sharpe_cara(const ConfidenceSet& set, double t, double horizon,
                              int lattice_points) {
    if (t < 0.0 || t > horizon) throw DomainError("t must lie in [0, T]");
    const double q = 1.0 / (horizon - t + 1.0);
    return certify_sharpe(set, cara_sharpe_bound_squared(q), lattice_points);
}

AdmissibleRegion admissible_region(std::span<const Vector> support,
                                   std::optional<std::int64_t> margin, Eigen::Index dimension) {
    if (margin && *margin <= 0) throw ValidationError("margin n must be a positive integer");
    AdmissibleRegion region;
    region.dimension = dimension;
    region.normals.assign(support.begin(), support.end());
    region.margin = margin;
    region.offset = margin ? -1.0 + 1.0 / static_cast<double>(*margin) : -1.0;
    if (!support.empty()) {
        try {
            region.ball_radius = check_nondegeneracy(support).kappa_nondegeneracy;
            region.unbounded = false;
        } catch (const DegenerateSupport&) {
            region.unbounded = true;
        }
    }
    return region;
}

}  // namespace robust_merton
