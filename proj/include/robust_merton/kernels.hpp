#pragma once

#include <functional>
#include <vector>

#include "robust_merton/market_model.hpp"

namespace robust_merton {

/// Utility family plus the q-weight at which a CARA kernel is evaluated.
struct KernelContext {
    UtilitySpec utility;
    double q = 1.0;
};

struct KernelDerivatives {
    double value;
    Vector gradient;
    Matrix hessian;
};

/// Consumption ratio c (CRRA) or excess consumption D (CARA) over the grid.
///
/// Either one constant per cell, or a function of (cell, t) that is smooth
/// inside each cell.
class ControlPath {
public:
    ControlPath() = default;
    static ControlPath piecewise_constant(std::vector<double> cell_values);
    static ControlPath smooth(std::function<double(std::size_t, double)> fn, std::size_t cells);

    bool is_smooth() const { return static_cast<bool>(fn_); }
    std::size_t cell_count() const { return cells_; }
    double at(std::size_t cell, double t) const;

private:
    std::vector<double> values_;
    std::function<double(std::size_t, double)> fn_;
    std::size_t cells_ = 0;
};

/// Investment ratio π (CRRA) or amount Π (CARA) per cell, with consumption.
struct PolicyPath {
    std::vector<Vector> investment;
    ControlPath consumption;
};

/// One triplet per cell together with its hull weights.
struct TripletPath {
    std::vector<LevyTriplet> triplets;
    std::vector<std::vector<double>> weights;

    static TripletPath from_weights(const MarketSpec& spec,
                                    const std::vector<std::vector<double>>& weights);
    static TripletPath vertex(const MarketSpec& spec, std::size_t vertex_index);
};

double local_kernel_crra(const Vector& x, const LevyTriplet& theta, double p);
double local_kernel_cara(const Vector& x, const LevyTriplet& theta, double q, double a);

double local_kernel(const Vector& x, const LevyTriplet& theta, const KernelContext& ctx);
KernelDerivatives local_kernel_derivatives(const Vector& x, const LevyTriplet& theta,
                                           const KernelContext& ctx);

/// q_t = (T − t + 1)⁻¹.
double q_schedule(double t, double horizon);

/// Kernel value per cell; CARA kernels use q at the cell midpoint.
std::vector<double> kernel_path(const std::vector<Vector>& investment, const TripletPath& theta,
                                const TimeGrid& grid, const UtilitySpec& utility);

/// Global kernel from a kernel path and a consumption control.
double global_kernel_from_path(const std::vector<double>& kernels, const ControlPath& consumption,
                               const TimeGrid& grid, const UtilitySpec& utility);

double global_kernel_crra(const PolicyPath& policy, const TripletPath& theta, const TimeGrid& grid,
                          const UtilitySpec& utility);
double global_kernel_cara(const PolicyPath& policy, const TripletPath& theta, const TimeGrid& grid,
                          double a);

/// True iff the first kernel path is ≥ the second on every cell.
bool kernel_dominates(const std::vector<double>& first, const std::vector<double>& second);
bool kernel_dominates(const std::vector<Vector>& first_investment, const TripletPath& first_theta,
                      const std::vector<Vector>& second_investment, const TripletPath& second_theta,
                      const TimeGrid& grid, const UtilitySpec& utility);

}  // namespace robust_merton
