#pragma once

#include <string>
#include <vector>

#include "robust_merton/kernels.hpp"
#include "robust_merton/saddle_solver.hpp"

namespace robust_merton {

struct HjbBounds {
    double v_min;
    double v_max;
    double kernel_min;
    double kernel_max;
    /// Label of the case that produced each bound.
    std::string min_case;
    std::string max_case;
};

struct SaddleSolution {
    UtilitySpec utility;
    SaddleSkeleton skeleton;
    /// c* (CRRA) or D* (CARA) as a smooth function of time.
    ControlPath control;
    /// Control at the grid nodes t_0, …, t_N.
    std::vector<double> control_nodes;
    double global_value;
    double value_function;

    std::vector<double> kernels() const { return skeleton.kernels(); }
};

/// Values of a control at the grid nodes (the last node uses the last cell).
std::vector<double> control_at_nodes(const ControlPath& control, const TimeGrid& grid);

/// c* = 1/φ with φ′ = −kφ − 1, φ(T) = 1, k = p g/(1 − p) per cell; c* = q_t for log.
ControlPath optimal_consumption_crra(const std::vector<double>& kernels, const UtilitySpec& utility,
                                     const TimeGrid& grid);

/// D*_t = q_t ∫_t^T h_s ds.
ControlPath optimal_excess_consumption_cara(const std::vector<double>& kernels,
                                            const TimeGrid& grid);

/// Throws RangeViolation when a value leaves the admissible bracket (and c ≤ 1 at a saddle).
void consumption_range_check(const std::vector<double>& consumption, const std::vector<double>& kernels,
                             double p, bool at_saddle, const std::vector<double>& times = {});

/// Throws RangeViolation when D* < 0 although the kernel path is non-negative.
void excess_consumption_check(const std::vector<double>& excess, const std::vector<double>& kernels,
                              const std::vector<double>& times = {});

/// Closed-form global value G* or H* of a kernel path at its optimal control.
double global_value_closed_form(const std::vector<double>& kernels, const UtilitySpec& utility,
                                const TimeGrid& grid);

/// Closed form, cross-checked against direct evaluation with the optimal control;
/// throws MismatchError when they disagree beyond the tolerance.
double global_value(const std::vector<double>& kernels, const UtilitySpec& utility,
                    const TimeGrid& grid, double tolerance = 1e-8);

double value_function(double w0, double global_value, const UtilitySpec& utility, double horizon);

/// Classical RK4 backward from c_T = 1 for dc/dt = (p g/(1 − p)) c + c²; returns node values.
std::vector<double> solve_riccati_crra(const std::vector<double>& kernels, double p,
                                       const TimeGrid& grid, double step);

/// RK4 backward from D_T = 0 for dD/dt = q_t (D − h_t); returns node values.
std::vector<double> solve_ode_cara(const std::vector<double>& kernels, const TimeGrid& grid,
                                   double step);

HjbBounds hjb_bounds(double kernel_min, double kernel_max, const UtilitySpec& utility,
                     double horizon);

/// V(t) implied by the control: (c^{p−1} − 1)/p for CRRA power, (1 − e^{−aD}/q)/a for CARA.
std::vector<double> value_path(const std::vector<double>& control_nodes, const UtilitySpec& utility,
                               const TimeGrid& grid);

/// Throws BoundsViolation when V leaves [V_min, V_max] or 1 + pV (1 − aV) is not positive.
void check_hjb_containment(const std::vector<double>& values, const HjbBounds& bounds,
                           const UtilitySpec& utility, double tolerance = 1e-9);

/// Full pipeline: saddle skeleton, optimal control, closed-form value.
SaddleSolution solve(const MarketSpec& spec, const SolverConfig& cfg);

/// Builds a solution from stored per-cell investments, weights and kernels.
SaddleSolution assemble_solution(const MarketSpec& spec, SaddleSkeleton skeleton);

}  // namespace robust_merton
