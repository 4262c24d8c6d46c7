#include "robust_merton/policy_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "robust_merton/errors.hpp"
#include "robust_merton/quadrature.hpp"

namespace robust_merton {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_cells(const std::vector<double>& kernels, const TimeGrid& grid) {
    if (kernels.size() != grid.cell_count()) {
        throw ValidationError("kernel path needs one value per cell");
    }
}

std::string at_time(const std::vector<double>& times, std::size_t i) {
    std::ostringstream out;
    if (i < times.size()) out << " at t = " << times[i];
    else out << " at index " << i;
    return out.str();
}

// Backward φ with φ′ = −kφ − 1 from the node values; φ at the grid nodes.
std::vector<double> phi_nodes(const std::vector<double>& kernels, double p, const TimeGrid& grid) {
    std::vector<double> phi(grid.cell_count() + 1, 1.0);
    for (std::size_t i = grid.cell_count(); i-- > 0;) {
        const double k = p * kernels[i] / (1.0 - p);
        const double L = grid.cells()[i].length();
        phi[i] = std::exp(k * L) * phi[i + 1] + L * expm1_ratio(k * L);
    }
    return phi;
}

template <class F>
double rk4_step(F&& f, double t, double y, double h) {
    const double k1 = f(t, y);
    const double k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
    const double k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
    const double k4 = f(t + h, y + h * k3);
    return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

std::size_t steps_in(double length, double step) {
    if (!(step > 0.0)) throw DomainError("ODE step must be positive");
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(length / step)));
}

}  // namespace

std::vector<double> control_at_nodes(const ControlPath& control, const TimeGrid& grid) {
    std::vector<double> nodes;
    nodes.reserve(grid.cell_count() + 1);
    for (std::size_t i = 0; i < grid.cell_count(); ++i) {
        nodes.push_back(control.at(i, grid.cells()[i].start));
    }
    nodes.push_back(control.at(grid.cell_count() - 1, grid.horizon()));
    return nodes;
}

ControlPath optimal_consumption_crra(const std::vector<double>& kernels, const UtilitySpec& utility,
                                     const TimeGrid& grid) {
    require_cells(kernels, grid);
    if (!utility.is_crra()) throw ValidationError("optimal consumption needs a CRRA utility");
    const double T = grid.horizon();
    if (utility.family() == UtilityFamily::CrraLog) {
        return ControlPath::smooth([T](std::size_t, double t) { return 1.0 / (T - t + 1.0); },
                                   grid.cell_count());
    }
    const double p = utility.p();
    auto phi = phi_nodes(kernels, p, grid);
    std::vector<double> ends;
    for (const auto& cell : grid.cells()) ends.push_back(cell.end);
    return ControlPath::smooth(
        [phi = std::move(phi), ends = std::move(ends), kernels, p](std::size_t i, double t) {
            const double k = p * kernels[i] / (1.0 - p);
            const double tau = ends[i] - t;
            return 1.0 / (std::exp(k * tau) * phi[i + 1] + tau * expm1_ratio(k * tau));
        },
        grid.cell_count());
}

ControlPath optimal_excess_consumption_cara(const std::vector<double>& kernels,
                                            const TimeGrid& grid) {
    require_cells(kernels, grid);
    const double T = grid.horizon();
    std::vector<double> tail(grid.cell_count() + 1, 0.0);
    for (std::size_t i = grid.cell_count(); i-- > 0;) {
        tail[i] = tail[i + 1] + kernels[i] * grid.cells()[i].length();
    }
    std::vector<double> ends;
    for (const auto& cell : grid.cells()) ends.push_back(cell.end);
    return ControlPath::smooth(
        [tail = std::move(tail), ends = std::move(ends), kernels, T](std::size_t i, double t) {
            return (kernels[i] * (ends[i] - t) + tail[i + 1]) / (T - t + 1.0);
        },
        grid.cell_count());
}

void consumption_range_check(const std::vector<double>& consumption, const std::vector<double>& kernels,
                             double p, bool at_saddle, const std::vector<double>& times) {
    if (kernels.empty()) throw ValidationError("kernel path is empty");
    const auto [gmin_it, gmax_it] = std::minmax_element(kernels.begin(), kernels.end());
    const double g_min = *gmin_it;
    const double g_max = *gmax_it;
    const double scale = -p / (1.0 - p);
    double lo;
    double hi;
    if (p > 0.0) {
        lo = std::min(std::max(scale * g_max, 0.0), 1.0);
        hi = std::max(scale * g_min, 1.0);
    } else {
        lo = std::min(std::max(scale * g_min, 0.0), 1.0);
        hi = std::max(scale * g_max, 1.0);
    }
    if (at_saddle) hi = std::min(hi, 1.0);
    const double tol = 1e-12;
    for (std::size_t i = 0; i < consumption.size(); ++i) {
        const double c = consumption[i];
        if (!(c >= lo - tol && c <= hi + tol)) {
            std::ostringstream msg;
            msg << "consumption " << c << at_time(times, i) << " outside [" << lo << ", " << hi << "]";
            throw RangeViolation(msg.str());
        }
    }
}

void excess_consumption_check(const std::vector<double>& excess, const std::vector<double>& kernels,
                              const std::vector<double>& times) {
    if (*std::min_element(kernels.begin(), kernels.end()) < 0.0) return;
    for (std::size_t i = 0; i < excess.size(); ++i) {
        if (excess[i] < -1e-12) {
            std::ostringstream msg;
            msg << "excess consumption " << excess[i] << at_time(times, i) << " is negative";
            throw RangeViolation(msg.str());
        }
    }
}

double global_value_closed_form(const std::vector<double>& kernels, const UtilitySpec& utility,
                                const TimeGrid& grid) {
    require_cells(kernels, grid);
    const double T = grid.horizon();
    switch (utility.family()) {
        case UtilityFamily::CrraLog: {
            double inner = 0.0;
            double total = 0.0;
            for (std::size_t i = 0; i < grid.cell_count(); ++i) {
                const double L = grid.cells()[i].length();
                const double g = kernels[i];
                total += inner * L + g * L * L / 2.0 + g * L;
                inner += g * L;
            }
            return total - (T + 1.0) * std::log(T + 1.0);
        }
        case UtilityFamily::CrraPower: {
            const double p = utility.p();
            const double phi0 = phi_nodes(kernels, p, grid).front();
            return std::pow(phi0, 1.0 - p) / p - 1.0 / p;
        }
        case UtilityFamily::Cara: {
            const double a = utility.a();
            double integral = 0.0;
            for (std::size_t i = 0; i < grid.cell_count(); ++i) {
                integral += kernels[i] * grid.cells()[i].length();
            }
            return (1.0 - (T + 1.0) * std::exp(-a * integral / (T + 1.0))) / a;
        }
    }
    return 0.0;
}

double global_value(const std::vector<double>& kernels, const UtilitySpec& utility,
                    const TimeGrid& grid, double tolerance) {
    const double closed = global_value_closed_form(kernels, utility, grid);
    const ControlPath control = utility.is_crra() ? optimal_consumption_crra(kernels, utility, grid)
                                                  : optimal_excess_consumption_cara(kernels, grid);
    const double direct = global_kernel_from_path(kernels, control, grid, utility);
    if (!(std::abs(closed - direct) <= tolerance * std::max(1.0, std::abs(closed)))) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "closed-form global value " << closed << " disagrees with direct evaluation " << direct;
        throw MismatchError(msg.str());
    }
    return closed;
}

double value_function(double w0, double global_value, const UtilitySpec& utility, double horizon) {
    switch (utility.family()) {
        case UtilityFamily::CrraLog:
            if (!(w0 > 0.0)) throw DomainError("CRRA utility requires positive initial wealth");
            return (horizon + 1.0) * std::log(w0) + global_value;
        case UtilityFamily::CrraPower: {
            if (!(w0 > 0.0)) throw DomainError("CRRA utility requires positive initial wealth");
            const double scale = std::pow(w0, utility.p());
            return scale / utility.p() + scale * global_value;
        }
        case UtilityFamily::Cara:
            return std::exp(-utility.a() * w0 / (horizon + 1.0)) * (-1.0 / utility.a() + global_value);
    }
    return 0.0;
}

std::vector<double> solve_riccati_crra(const std::vector<double>& kernels, double p,
                                       const TimeGrid& grid, double step) {
    require_cells(kernels, grid);
    if (p == 0.0 || !(p < 1.0)) throw DomainError("Riccati equation needs p in (-inf, 0) or (0, 1)");
    std::vector<double> nodes(grid.cell_count() + 1, 1.0);
    double c = 1.0;
    for (std::size_t i = grid.cell_count(); i-- > 0;) {
        const auto& cell = grid.cells()[i];
        const double k = p * kernels[i] / (1.0 - p);
        const std::size_t n = steps_in(cell.length(), step);
        const double h = cell.length() / static_cast<double>(n);
        // Backward in time: dc/dτ = −(k c + c²).
        auto f = [k](double, double y) { return -(k * y + y * y); };
        for (std::size_t s = 0; s < n; ++s) {
            c = rk4_step(f, 0.0, c, h);
            if (!(c > 0.0) || !std::isfinite(c)) {
                std::ostringstream msg;
                msg << "Riccati solution left (0, inf) in cell " << i;
                throw StepRejection(msg.str());
            }
        }
        nodes[i] = c;
    }
    return nodes;
}

std::vector<double> solve_ode_cara(const std::vector<double>& kernels, const TimeGrid& grid,
                                   double step) {
    require_cells(kernels, grid);
    const double T = grid.horizon();
    std::vector<double> nodes(grid.cell_count() + 1, 0.0);
    double d = 0.0;
    for (std::size_t i = grid.cell_count(); i-- > 0;) {
        const auto& cell = grid.cells()[i];
        const double h_value = kernels[i];
        const std::size_t n = steps_in(cell.length(), step);
        const double h = cell.length() / static_cast<double>(n);
        // τ runs backward from the cell end: t = end − τ.
        auto f = [&](double tau, double y) {
            const double t = cell.end - tau;
            return -(y - h_value) / (T - t + 1.0);
        };
        for (std::size_t s = 0; s < n; ++s) {
            d = rk4_step(f, static_cast<double>(s) * h, d, h);
            if (!std::isfinite(d)) throw StepRejection("excess-consumption ODE diverged");
        }
        nodes[i] = d;
    }
    return nodes;
}

HjbBounds hjb_bounds(double kernel_min, double kernel_max, const UtilitySpec& utility,
                     double horizon) {
    if (kernel_min > kernel_max) throw DomainError("kernel_min must not exceed kernel_max");
    HjbBounds b{0.0, 0.0, kernel_min, kernel_max, "", ""};
    if (utility.family() == UtilityFamily::CrraLog) {
        throw DomainError("HJB bounds are stated for power and exponential utility only");
    }
    if (utility.family() == UtilityFamily::CrraPower) {
        const double p = utility.p();
        const double threshold = (1.0 - p) / (-p);
        auto formula = [p](double g) { return (std::pow(-p * g / (1.0 - p), p - 1.0) - 1.0) / p; };
        if (kernel_min >= threshold) {
            b.v_min = 0.0;
            b.min_case = "zero";
        } else if (p < 0.0 && kernel_min <= 0.0) {
            b.v_min = -kInf;
            b.min_case = "unbounded";
        } else {
            b.v_min = formula(kernel_min);
            b.min_case = "formula";
        }
        if (kernel_max <= threshold) {
            b.v_max = 0.0;
            b.max_case = "zero";
        } else if (p > 0.0 && kernel_max >= 0.0) {
            b.v_max = kInf;
            b.max_case = "unbounded";
        } else {
            b.v_max = formula(kernel_max);
            b.max_case = "formula";
        }
    } else {
        const double a = utility.a();
        if (kernel_min >= (1.0 + std::log(horizon + 1.0)) / a) {
            b.v_min = 0.0;
            b.min_case = "zero";
        } else {
            b.v_min = (1.0 - (horizon + 1.0) * std::exp(1.0 - a * kernel_min)) / a;
            b.min_case = "formula";
        }
        if (kernel_max >= 1.0 / a) {
            b.v_max = (1.0 - std::exp(1.0 - a * kernel_max)) / a;
            b.max_case = "formula";
        } else {
            b.v_max = 0.0;
            b.max_case = "zero";
        }
    }
    return b;
}

std::vector<double> value_path(const std::vector<double>& control_nodes, const UtilitySpec& utility,
                               const TimeGrid& grid) {
    const auto nodes = grid.nodes();
    if (control_nodes.size() != nodes.size()) {
        throw ValidationError("control path needs one value per grid node");
    }
    std::vector<double> values(nodes.size());
    for (std::size_t j = 0; j < nodes.size(); ++j) {
        switch (utility.family()) {
            case UtilityFamily::CrraLog:
                throw DomainError("the value path is defined for power and exponential utility only");
            case UtilityFamily::CrraPower: {
                const double p = utility.p();
                values[j] = (std::pow(control_nodes[j], p - 1.0) - 1.0) / p;
                break;
            }
            case UtilityFamily::Cara: {
                const double a = utility.a();
                const double q = 1.0 / (grid.horizon() - nodes[j] + 1.0);
                values[j] = (1.0 - std::exp(-a * control_nodes[j]) / q) / a;
                break;
            }
        }
    }
    return values;
}

void check_hjb_containment(const std::vector<double>& values, const HjbBounds& bounds,
                           const UtilitySpec& utility, double tolerance) {
    for (std::size_t j = 0; j < values.size(); ++j) {
        const double v = values[j];
        const double slack = tolerance * std::max(1.0, std::abs(v));
        std::ostringstream msg;
        if (!(v >= bounds.v_min - slack && v <= bounds.v_max + slack)) {
            msg << "V = " << v << " at node " << j << " outside [" << bounds.v_min << ", "
                << bounds.v_max << "]";
            throw BoundsViolation(msg.str());
        }
        const double margin = utility.is_crra() ? 1.0 + utility.p() * v : 1.0 - utility.a() * v;
        if (!(margin > 0.0)) {
            msg << "HJB positivity condition fails at node " << j;
            throw BoundsViolation(msg.str());
        }
    }
}

SaddleSolution assemble_solution(const MarketSpec& spec, SaddleSkeleton skeleton) {
    const auto kernels = skeleton.kernels();
    ControlPath control = spec.utility.is_crra()
                              ? optimal_consumption_crra(kernels, spec.utility, spec.grid)
                              : optimal_excess_consumption_cara(kernels, spec.grid);
    auto nodes = control_at_nodes(control, spec.grid);
    const double g = global_value(kernels, spec.utility, spec.grid);
    const double u = value_function(spec.initial_wealth, g, spec.utility, spec.grid.horizon());
    return SaddleSolution{spec.utility, std::move(skeleton), std::move(control), std::move(nodes), g, u};
}

SaddleSolution solve(const MarketSpec& spec, const SolverConfig& cfg) {
    spec.validate();
    return assemble_solution(spec, solve_policy_measure(spec, cfg));
}

}  // namespace robust_merton
