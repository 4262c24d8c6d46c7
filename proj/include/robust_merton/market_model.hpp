#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace robust_merton {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// One jump size with its intensity (expected jumps per unit time).
struct JumpAtom {
    Vector location;
    double intensity = 0.0;
};

/// Finite-activity Lévy measure given as a list of weighted atoms.
///
/// Intensities are strictly positive, locations are pairwise distinct and no
/// atom sits at the origin. An empty list is the zero measure.
class DiscreteLevyMeasure {
public:
    DiscreteLevyMeasure() = default;
    explicit DiscreteLevyMeasure(std::vector<JumpAtom> atoms);

    const std::vector<JumpAtom>& atoms() const { return atoms_; }
    bool empty() const { return atoms_.empty(); }
    std::size_t size() const { return atoms_.size(); }
    double total_intensity() const;

    /// λ-weighted union of several measures; coinciding locations are merged.
    static DiscreteLevyMeasure mixture(std::span<const DiscreteLevyMeasure> measures,
                                       std::span<const double> weights);

private:
    std::vector<JumpAtom> atoms_;
};

/// Differential characteristics (b, Σ, F) of a process with independent increments.
class LevyTriplet {
public:
    LevyTriplet(Vector drift, Matrix covariance, DiscreteLevyMeasure jumps = {});

    const Vector& drift() const { return drift_; }
    const Matrix& covariance() const { return covariance_; }
    /// Lower-triangular σ with positive diagonal and σσᵀ = Σ.
    const Matrix& cholesky_factor() const { return cholesky_; }
    const DiscreteLevyMeasure& jumps() const { return jumps_; }
    Eigen::Index dimension() const { return drift_.size(); }

    /// bᵀΣ⁻¹b, the squared Sharpe ratio of the diffusion part.
    double sharpe_squared() const;

    static LevyTriplet mixture(std::span<const LevyTriplet> vertices,
                               std::span<const double> weights);

private:
    Vector drift_;
    Matrix covariance_;
    Matrix cholesky_;
    DiscreteLevyMeasure jumps_;
};

/// Convex hull of finitely many Lévy triplets, bounded by κ.
class ConfidenceSet {
public:
    ConfidenceSet(std::vector<LevyTriplet> vertices, double bound);

    const std::vector<LevyTriplet>& vertices() const { return vertices_; }
    std::size_t size() const { return vertices_.size(); }
    double bound() const { return bound_; }
    Eigen::Index dimension() const { return vertices_.front().dimension(); }

    /// Mixed triplet for the given convex weights (one per vertex).
    LevyTriplet mixture(std::span<const double> weights) const;

    /// Empty when κ bounds every vertex under d_L^ε, otherwise a description
    /// of the first offending vertex.
    std::optional<std::string> bound_violation(double epsilon) const;

    /// Smallest κ bounding every vertex for the given ε.
    static double minimal_bound(std::span<const LevyTriplet> vertices, double epsilon);

private:
    std::vector<LevyTriplet> vertices_;
    double bound_;
};

/// Piecewise partition of [0, T] into segments (where Θ may change) and
/// uniform cells of width ≈ step inside each segment.
class TimeGrid {
public:
    struct Cell {
        double start;
        double end;
        std::size_t segment;
        double length() const { return end - start; }
        double midpoint() const { return 0.5 * (start + end); }
    };

    TimeGrid(std::vector<double> breakpoints, double step);

    double horizon() const { return breakpoints_.back(); }
    double step() const { return step_; }
    const std::vector<double>& breakpoints() const { return breakpoints_; }
    std::size_t segment_count() const { return breakpoints_.size() - 1; }
    const std::vector<Cell>& cells() const { return cells_; }
    std::size_t cell_count() const { return cells_.size(); }
    /// Index of the cell containing t (right-closed at T).
    std::size_t cell_at(double t) const;
    /// Cell boundaries t_0 < … < t_N.
    std::vector<double> nodes() const;

private:
    std::vector<double> breakpoints_;
    double step_;
    std::vector<Cell> cells_;
};

enum class UtilityFamily { CrraLog, CrraPower, Cara };

class UtilitySpec {
public:
    static UtilitySpec crra_log();
    static UtilitySpec crra_power(double p);
    static UtilitySpec cara(double a);

    UtilityFamily family() const { return family_; }
    bool is_crra() const { return family_ != UtilityFamily::Cara; }
    /// CRRA exponent; zero for log utility.
    double p() const { return p_; }
    /// CARA absolute risk aversion.
    double a() const { return a_; }

    double operator()(double x) const;
    std::string name() const;

private:
    UtilitySpec(UtilityFamily family, double p, double a) : family_(family), p_(p), a_(a) {}
    UtilityFamily family_;
    double p_;
    double a_;
};

/// Full problem description: grid, piecewise-constant Θ, preferences, w0, ε.
struct MarketSpec {
    TimeGrid grid;
    std::vector<ConfidenceSet> sets;
    UtilitySpec utility;
    double initial_wealth;
    double epsilon;

    /// Throws ValidationError on a broken invariant.
    void validate() const;
    const ConfidenceSet& set_for_cell(std::size_t cell) const {
        return sets[grid.cells()[cell].segment];
    }
    Eigen::Index dimension() const { return sets.front().dimension(); }
};

/// Union of jump locations over all vertices, lexicographically ordered.
struct JumpSupport {
    std::vector<Vector> locations;
    /// No jumps anywhere: Conv(S ∪ {0}) = {0}.
    bool degenerate() const { return locations.empty(); }
};

struct JumpSupportReport {
    std::vector<Vector> support;
    double inscribed_radius;
    double kappa_nondegeneracy;
    double kappa_bound;
};

/// Outcome of a Sharpe-ratio certification over a hull.
struct SharpeCheck {
    bool pass = true;
    double bound_squared = std::numeric_limits<double>::infinity();
    double worst_sharpe_squared = 0.0;
    std::vector<double> worst_weights;
    std::optional<LevyTriplet> worst;
};

/// {x : xᵀz ≥ offset for every z in the support} with offset = −1 + 1/n
/// (or the strict version x ᵀz > −1 when no margin is given).
struct AdmissibleRegion {
    std::vector<Vector> normals;
    double offset = -1.0;
    std::optional<std::int64_t> margin;
    double ball_radius = std::numeric_limits<double>::infinity();
    bool unbounded = true;
    Eigen::Index dimension = 1;

    bool contains(const Vector& x) const;
    /// Smallest constraint slack xᵀz − offset (infinity without constraints).
    double slack(const Vector& x) const;
    /// For d = 1: the interval [lo, hi] described by the constraints.
    std::pair<double, double> interval() const;
};

JumpSupport jump_support_union(const ConfidenceSet& set);

/// Throws DegenerateSupport when the origin is not interior to Conv(S ∪ {0}).
JumpSupportReport check_nondegeneracy(std::span<const Vector> support);

double crra_sharpe_bound_squared(double p);
double cara_sharpe_bound_squared(double q);

SharpeCheck check_sharpe_crra(const ConfidenceSet& set, double p, int lattice_points = 11);
SharpeCheck check_sharpe_cara(const ConfidenceSet& set, double t, double horizon,
                              int lattice_points = 11);

AdmissibleRegion admissible_region(std::span<const Vector> support,
                                   std::optional<std::int64_t> margin, Eigen::Index dimension);

}  // namespace robust_merton
