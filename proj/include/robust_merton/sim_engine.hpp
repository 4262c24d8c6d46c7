#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "robust_merton/kernels.hpp"
#include "robust_merton/policy_engine.hpp"

namespace robust_merton {

struct SimConfig {
    std::uint64_t seed = 1;
    std::size_t paths = 100000;
    double step = 1e-3;
    /// Pair paths with negated Gaussian increments and shared jump times.
    bool antithetic = true;
};

struct ObjectiveEstimate {
    double mean;
    double standard_error;
    std::size_t paths;
    std::uint64_t seed;
    double step;
};

struct SimulationResult {
    /// Realized objective ∫U(consumption)dt + U(W_T), one entry per path.
    std::vector<double> objective;
    std::vector<double> terminal_wealth;
    /// Smallest wealth seen on any path at any step.
    double min_wealth;
    /// Distinct jump locations of the triplet path, with realized and expected counts.
    std::vector<Vector> jump_locations;
    std::vector<std::uint64_t> jump_counts;
    std::vector<double> expected_jump_counts;
    bool antithetic;
    std::uint64_t seed;
    double step;
};

/// Log-wealth simulation for a CRRA policy (π ratio, c consumption ratio).
SimulationResult simulate_wealth_crra(const PolicyPath& policy, const TripletPath& theta,
                                      const MarketSpec& spec, const SimConfig& cfg);

/// Simulation of q_t W_t for a CARA policy (Π amount, D excess consumption).
SimulationResult simulate_wealth_cara(const PolicyPath& policy, const TripletPath& theta,
                                      const MarketSpec& spec, const SimConfig& cfg);

SimulationResult simulate(const PolicyPath& policy, const TripletPath& theta, const MarketSpec& spec,
                          const SimConfig& cfg);

/// Mean and standard error; antithetic pairs count as one independent sample.
ObjectiveEstimate summarize(const SimulationResult& result);

struct PairedDifference {
    double mean;
    double standard_error;
};

/// Mean of (first − second) path by path, for runs sharing seed and path count.
PairedDifference paired_difference(const SimulationResult& first, const SimulationResult& second);

ObjectiveEstimate estimate_objective(const PolicyPath& policy, const TripletPath& theta,
                                     const MarketSpec& spec, const SimConfig& cfg);

/// Optimal policy and worst-case triplet path of a solution.
PolicyPath optimal_policy(const SaddleSolution& solution);
TripletPath worst_case_path(const SaddleSolution& solution, const MarketSpec& spec);

struct MartingaleReport {
    ObjectiveEstimate estimate;
    double target;
    double z_score;
    bool pass;
};

/// Compares the Monte-Carlo objective at the saddle with the value function.
/// Throws EqualityViolation when |z| > 3 and strict is set.
MartingaleReport verify_martingale_equality(const SaddleSolution& solution, const MarketSpec& spec,
                                            const SimConfig& cfg, bool strict = true);

struct PerturbationCheck {
    std::string name;
    /// J(perturbed) − J(optimal), sharing random numbers.
    double difference;
    double standard_error;
    bool pass;
};

struct ObjectiveSaddleReport {
    std::vector<PerturbationCheck> checks;
    bool pass;
};

/// Policy perturbations must not beat the optimum under θ*, triplet perturbations
/// must not lower the objective below J(optimum, θ*) (both within 3 SE).
/// Throws SaddleViolation on failure when strict is set.
ObjectiveSaddleReport verify_objective_saddle(const SaddleSolution& solution, const MarketSpec& spec,
                                              const SimConfig& cfg, bool strict = true);

}  // namespace robust_merton
