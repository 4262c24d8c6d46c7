#include "robust_merton/kernels.hpp"

#include <cmath>
#include <limits>

#include "robust_merton/errors.hpp"
#include "robust_merton/quadrature.hpp"

namespace robust_merton {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kQuadraturePoints = 20;

const GaussLegendre& cell_rule() {
    static const GaussLegendre rule(kQuadraturePoints);
    return rule;
}

// (1 − r^k)/k with r = e^ℓ, continuous at k = 0.
double power_difference(double k, double ell) { return -ell * expm1_ratio(k * ell); }

double crra_utility(double c, double p) {
    if (p == 0.0) return c > 0.0 ? std::log(c) : kNegInf;
    if (c > 0.0) return std::pow(c, p) / p;
    return p > 0.0 ? 0.0 : kNegInf;
}

double cara_utility(double d, double a) { return -std::exp(-a * d) / a; }

double global_crra_constant(const std::vector<double>& kernels, const ControlPath& consumption,
                            const TimeGrid& grid, double p) {
    double inner = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < grid.cell_count(); ++i) {
        const auto& cell = grid.cells()[i];
        const double L = cell.length();
        const double c = consumption.at(i, cell.start);
        const double net = kernels[i] - c;
        const double u = crra_utility(c, p);
        if (u == kNegInf) return kNegInf;
        if (p == 0.0) {
            total += inner * L + net * L * L / 2.0 + (net + u) * L;
        } else {
            total += std::exp(p * inner) * L * expm1_ratio(p * net * L) * (net + u);
        }
        inner += net * L;
    }
    return total;
}

double global_crra_smooth(const std::vector<double>& kernels, const ControlPath& consumption,
                          const TimeGrid& grid, double p) {
    const auto& rule = cell_rule();
    double inner = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < grid.cell_count(); ++i) {
        const auto& cell = grid.cells()[i];
        const double g = kernels[i];
        auto c = [&](double s) { return consumption.at(i, s); };
        auto integrand = [&](double t) {
            const double ct = c(t);
            const double acc = inner + g * (t - cell.start) - rule.integrate(c, cell.start, t);
            const double u = crra_utility(ct, p);
            if (p == 0.0) return acc + g - ct + u;
            return std::exp(p * acc) * (g - ct + u);
        };
        total += rule.integrate(integrand, cell.start, cell.end);
        inner += g * cell.length() - rule.integrate(c, cell.start, cell.end);
    }
    return total;
}

double global_cara_constant(const std::vector<double>& kernels, const ControlPath& excess,
                            const TimeGrid& grid, double a) {
    const double T = grid.horizon();
    double weight = 1.0;
    double total = 0.0;
    for (std::size_t i = 0; i < grid.cell_count(); ++i) {
        const auto& cell = grid.cells()[i];
        const double d = excess.at(i, cell.start);
        const double net = kernels[i] - d;
        const double beta = a * net;
        const double u_start = T - cell.start + 1.0;
        const double ell = std::log((T - cell.end + 1.0) / u_start);
        total += weight * (net * power_difference(beta, ell) +
                           cara_utility(d, a) * u_start * power_difference(beta + 1.0, ell));
        weight *= std::exp(beta * ell);
    }
    return total;
}

double global_cara_smooth(const std::vector<double>& kernels, const ControlPath& excess,
                          const TimeGrid& grid, double a) {
    const auto& rule = cell_rule();
    const double T = grid.horizon();
    double inner = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < grid.cell_count(); ++i) {
        const auto& cell = grid.cells()[i];
        const double h = kernels[i];
        const double u_start = T - cell.start + 1.0;
        auto qd = [&](double s) { return excess.at(i, s) / (T - s + 1.0); };
        auto integrand = [&](double t) {
            const double q = 1.0 / (T - t + 1.0);
            const double d = excess.at(i, t);
            const double acc = inner + h * std::log(u_start * q) - rule.integrate(qd, cell.start, t);
            return std::exp(-a * acc) * (q * (h - d) + cara_utility(d, a));
        };
        total += rule.integrate(integrand, cell.start, cell.end);
        inner += h * std::log(u_start / (T - cell.end + 1.0)) - rule.integrate(qd, cell.start, cell.end);
    }
    return total;
}

}  // namespace

ControlPath ControlPath::piecewise_constant(std::vector<double> cell_values) {
    ControlPath path;
    path.cells_ = cell_values.size();
    path.values_ = std::move(cell_values);
    return path;
}

ControlPath ControlPath::smooth(std::function<double(std::size_t, double)> fn, std::size_t cells) {
    ControlPath path;
    path.fn_ = std::move(fn);
    path.cells_ = cells;
    return path;
}

double ControlPath::at(std::size_t cell, double t) const {
    if (fn_) return fn_(cell, t);
    return values_.at(cell);
}

TripletPath TripletPath::from_weights(const MarketSpec& spec,
                                      const std::vector<std::vector<double>>& weights) {
    if (weights.size() != spec.grid.cell_count()) {
        throw ValidationError("triplet path needs one weight vector per cell");
    }
    TripletPath path;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        path.triplets.push_back(spec.set_for_cell(i).mixture(weights[i]));
        path.weights.push_back(weights[i]);
    }
    return path;
}

TripletPath TripletPath::vertex(const MarketSpec& spec, std::size_t vertex_index) {
    std::vector<std::vector<double>> weights;
    for (std::size_t i = 0; i < spec.grid.cell_count(); ++i) {
        const auto& set = spec.set_for_cell(i);
        std::vector<double> w(set.size(), 0.0);
        w[std::min(vertex_index, set.size() - 1)] = 1.0;
        weights.push_back(std::move(w));
    }
    return from_weights(spec, weights);
}

double local_kernel_crra(const Vector& x, const LevyTriplet& theta, double p) {
    double value = x.dot(theta.drift()) - 0.5 * (1.0 - p) * x.dot(theta.covariance() * x);
    for (const auto& atom : theta.jumps().atoms()) {
        const double xz = x.dot(atom.location);
        if (1.0 + xz <= 0.0) throw DomainError("local kernel undefined: 1 + xᵀz <= 0");
        const double lg = std::log1p(xz);
        const double jump = (p == 0.0) ? lg : std::expm1(p * lg) / p;
        value += atom.intensity * (jump - xz);
    }
    return value;
}

double local_kernel_cara(const Vector& x, const LevyTriplet& theta, double q, double a) {
    const double aq = a * q;
    double value = x.dot(theta.drift()) - 0.5 * aq * x.dot(theta.covariance() * x);
    for (const auto& atom : theta.jumps().atoms()) {
        const double xz = x.dot(atom.location);
        value += atom.intensity * (-std::expm1(-aq * xz) / aq - xz);
    }
    return value;
}

double local_kernel(const Vector& x, const LevyTriplet& theta, const KernelContext& ctx) {
    if (ctx.utility.is_crra()) return local_kernel_crra(x, theta, ctx.utility.p());
    return local_kernel_cara(x, theta, ctx.q, ctx.utility.a());
}

KernelDerivatives local_kernel_derivatives(const Vector& x, const LevyTriplet& theta,
                                           const KernelContext& ctx) {
    const bool crra = ctx.utility.is_crra();
    const double p = ctx.utility.p();
    const double curvature = crra ? 1.0 - p : ctx.utility.a() * ctx.q;
    const Vector sx = theta.covariance() * x;
    KernelDerivatives out{x.dot(theta.drift()) - 0.5 * curvature * x.dot(sx),
                          theta.drift() - curvature * sx, -curvature * theta.covariance()};
    for (const auto& atom : theta.jumps().atoms()) {
        const Vector& z = atom.location;
        const double w = atom.intensity;
        const double xz = x.dot(z);
        double jump;
        double slope;
        double bend;
        if (crra) {
            if (1.0 + xz <= 0.0) throw DomainError("local kernel undefined: 1 + xᵀz <= 0");
            const double lg = std::log1p(xz);
            jump = (p == 0.0) ? lg : std::expm1(p * lg) / p;
            slope = std::exp((p - 1.0) * lg);
            bend = (p - 1.0) * std::exp((p - 2.0) * lg);
        } else {
            const double aq = curvature;
            const double e = std::exp(-aq * xz);
            jump = -std::expm1(-aq * xz) / aq;
            slope = e;
            bend = -aq * e;
        }
        out.value += w * (jump - xz);
        out.gradient += w * (slope - 1.0) * z;
        out.hessian += w * bend * z * z.transpose();
    }
    return out;
}

double q_schedule(double t, double horizon) {
    if (t < 0.0 || t > horizon) throw DomainError("t must lie in [0, T]");
    return 1.0 / (horizon - t + 1.0);
}

std::vector<double> kernel_path(const std::vector<Vector>& investment, const TripletPath& theta,
                                const TimeGrid& grid, const UtilitySpec& utility) {
    if (investment.size() != grid.cell_count() || theta.triplets.size() != grid.cell_count()) {
        throw ValidationError("policy and triplet paths need one entry per cell");
    }
    std::vector<double> values(grid.cell_count());
    for (std::size_t i = 0; i < grid.cell_count(); ++i) {
        KernelContext ctx{utility, q_schedule(grid.cells()[i].midpoint(), grid.horizon())};
        values[i] = local_kernel(investment[i], theta.triplets[i], ctx);
    }
    return values;
}

double global_kernel_from_path(const std::vector<double>& kernels, const ControlPath& consumption,
                               const TimeGrid& grid, const UtilitySpec& utility) {
    if (kernels.size() != grid.cell_count() || consumption.cell_count() != grid.cell_count()) {
        throw ValidationError("kernel and control paths need one entry per cell");
    }
    if (utility.is_crra()) {
        return consumption.is_smooth() ? global_crra_smooth(kernels, consumption, grid, utility.p())
                                       : global_crra_constant(kernels, consumption, grid, utility.p());
    }
    return consumption.is_smooth() ? global_cara_smooth(kernels, consumption, grid, utility.a())
                                   : global_cara_constant(kernels, consumption, grid, utility.a());
}

double global_kernel_crra(const PolicyPath& policy, const TripletPath& theta, const TimeGrid& grid,
                          const UtilitySpec& utility) {
    if (!utility.is_crra()) throw ValidationError("CRRA global kernel needs a CRRA utility");
    return global_kernel_from_path(kernel_path(policy.investment, theta, grid, utility),
                                   policy.consumption, grid, utility);
}

double global_kernel_cara(const PolicyPath& policy, const TripletPath& theta, const TimeGrid& grid,
                          double a) {
    const auto utility = UtilitySpec::cara(a);
    return global_kernel_from_path(kernel_path(policy.investment, theta, grid, utility),
                                   policy.consumption, grid, utility);
}

bool kernel_dominates(const std::vector<double>& first, const std::vector<double>& second) {
    if (first.size() != second.size()) throw ValidationError("kernel paths differ in length");
    for (std::size_t i = 0; i < first.size(); ++i) {
        if (first[i] < second[i]) return false;
    }
    return true;
}

bool kernel_dominates(const std::vector<Vector>& first_investment, const TripletPath& first_theta,
                      const std::vector<Vector>& second_investment, const TripletPath& second_theta,
                      const TimeGrid& grid, const UtilitySpec& utility) {
    return kernel_dominates(kernel_path(first_investment, first_theta, grid, utility),
                            kernel_path(second_investment, second_theta, grid, utility));
}

}  // namespace robust_merton
