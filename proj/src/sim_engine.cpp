#include "robust_merton/sim_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "robust_merton/errors.hpp"
#include "robust_merton/parallel.hpp"
#include "robust_merton/quadrature.hpp"

namespace robust_merton {

namespace {

/// Allowance for the O(Δ²) time-discretization bias of a path functional of size |value|.
double discretization_floor(double step, double value) { return step * step * (1.0 + std::abs(value)); }

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t unit, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ splitmix64(unit * 4 + stream + 1));
}

struct StepData {
    std::size_t cell;
    double t0;
    double t1;
    double h;
    double drift;
    double sd;
    // log c (CRRA) or D (CARA) at both step ends.
    double aux0;
    double aux1;
};

struct Plan {
    bool crra;
    double p = 0.0;
    double a = 0.0;
    double horizon;
    double start;
    std::vector<StepData> steps;
    std::vector<Vector> locations;
    std::vector<std::vector<double>> intensity;    // [cell][location]
    std::vector<std::vector<double>> jump_effect;  // [cell][location]
};

const GaussLegendre& step_rule() {
    static const GaussLegendre rule(3);
    return rule;
}

std::size_t location_index(std::vector<Vector>& locations, const Vector& z) {
    for (std::size_t j = 0; j < locations.size(); ++j) {
        if ((locations[j].array() == z.array()).all()) return j;
    }
    locations.push_back(z);
    return locations.size() - 1;
}

Plan make_plan(const PolicyPath& policy, const TripletPath& theta, const MarketSpec& spec,
               const SimConfig& cfg, bool crra) {
    const auto& grid = spec.grid;
    const std::size_t cells = grid.cell_count();
    if (policy.investment.size() != cells || theta.triplets.size() != cells ||
        policy.consumption.cell_count() != cells) {
        throw ValidationError("policy and triplet paths need one entry per cell");
    }
    if (!(cfg.step > 0.0)) throw ValidationError("simulation step must be positive");
    if (cfg.paths == 0) throw ValidationError("path count must be positive");
    if (cfg.antithetic && cfg.paths % 2 != 0) {
        throw ValidationError("antithetic sampling needs an even path count");
    }
    Plan plan;
    plan.crra = crra;
    plan.horizon = grid.horizon();
    const double T = plan.horizon;
    if (crra) {
        plan.p = spec.utility.p();
        if (!(spec.initial_wealth > 0.0)) throw DomainError("CRRA simulation needs w0 > 0");
        plan.start = std::log(spec.initial_wealth);
    } else {
        plan.a = spec.utility.a();
        plan.start = spec.initial_wealth / (T + 1.0);
    }

    for (std::size_t i = 0; i < cells; ++i) {
        for (const auto& atom : theta.triplets[i].jumps().atoms()) location_index(plan.locations, atom.location);
    }
    plan.intensity.assign(cells, std::vector<double>(plan.locations.size(), 0.0));
    plan.jump_effect.assign(cells, std::vector<double>(plan.locations.size(), 0.0));

    const auto& rule = step_rule();
    for (std::size_t i = 0; i < cells; ++i) {
        const auto& cell = grid.cells()[i];
        const Vector& x = policy.investment[i];
        const LevyTriplet& th = theta.triplets[i];
        double compensator = 0.0;
        for (const auto& atom : th.jumps().atoms()) {
            const std::size_t j = location_index(plan.locations, atom.location);
            const double xz = x.dot(atom.location);
            plan.intensity[i][j] = atom.intensity;
            compensator += atom.intensity * xz;
            if (crra) {
                plan.jump_effect[i][j] = (1.0 + xz > 0.0) ? std::log1p(xz)
                                                          : std::numeric_limits<double>::quiet_NaN();
            } else {
                plan.jump_effect[i][j] = xz;
            }
        }
        // Jump locations absent in this cell keep zero intensity.
        for (std::size_t j = 0; j < plan.locations.size(); ++j) {
            if (plan.intensity[i][j] == 0.0) plan.jump_effect[i][j] = 0.0;
        }
        const double variance = x.dot(th.covariance() * x);
        const double mean_rate = x.dot(th.drift()) - compensator;
        const std::size_t n =
            std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cell.length() / cfg.step)));
        for (std::size_t s = 0; s < n; ++s) {
            StepData step;
            step.cell = i;
            step.t0 = cell.start + cell.length() * static_cast<double>(s) / static_cast<double>(n);
            step.t1 = (s + 1 == n) ? cell.end
                                   : cell.start + cell.length() * static_cast<double>(s + 1) / static_cast<double>(n);
            step.h = step.t1 - step.t0;
            auto control = [&](double t) { return policy.consumption.at(i, t); };
            if (crra) {
                const double c_int = rule.integrate(control, step.t0, step.t1);
                step.drift = (mean_rate - 0.5 * variance) * step.h - c_int;
                step.sd = std::sqrt(variance * step.h);
                step.aux0 = std::log(control(step.t0));
                step.aux1 = std::log(control(step.t1));
            } else {
                const double q0 = 1.0 / (T - step.t0 + 1.0);
                const double q1 = 1.0 / (T - step.t1 + 1.0);
                const double q_int = std::log(q1 / q0);
                const double qd_int = rule.integrate(
                    [&](double t) { return control(t) / (T - t + 1.0); }, step.t0, step.t1);
                step.drift = mean_rate * q_int - qd_int;
                step.sd = std::sqrt(variance * (q1 - q0));
                step.aux0 = control(step.t0);
                step.aux1 = control(step.t1);
            }
            plan.steps.push_back(step);
        }
    }
    return plan;
}

struct UnitOutput {
    double objective[2];
    double terminal[2];
    double min_wealth;
};

class PathRunner {
public:
    PathRunner(const Plan& plan, const SimConfig& cfg) : plan_(plan), cfg_(cfg) {}

    double utility_at_node(double state, double aux) const {
        if (plan_.crra) {
            const double log_consumption = aux + state;
            return plan_.p == 0.0 ? log_consumption : std::exp(plan_.p * log_consumption) / plan_.p;
        }
        return -std::exp(-plan_.a * (aux + state)) / plan_.a;
    }

    double terminal_utility(double state) const {
        if (plan_.crra) return plan_.p == 0.0 ? state : std::exp(plan_.p * state) / plan_.p;
        return -std::exp(-plan_.a * state) / plan_.a;
    }

    double wealth(double state, double t) const {
        return plan_.crra ? std::exp(state) : state * (plan_.horizon - t + 1.0);
    }

    // Simulates one unit (a single path, or an antithetic pair).
    UnitOutput run(std::uint64_t unit, std::vector<std::uint64_t>& counts) const {
        const int width = cfg_.antithetic ? 2 : 1;
        std::mt19937_64 gauss_engine(stream_seed(cfg_.seed, unit, 0));
        std::mt19937_64 jump_engine(stream_seed(cfg_.seed, unit, 1));
        std::normal_distribution<double> normal;
        std::exponential_distribution<double> expo(1.0);

        const std::size_t m = plan_.locations.size();
        std::vector<double> clock(m, 0.0);
        std::vector<double> next(m);
        for (auto& n : next) n = expo(jump_engine);

        double state[2] = {plan_.start, plan_.start};
        double integral[2] = {0.0, 0.0};
        double node_utility[2];
        const auto& first = plan_.steps.front();
        for (int k = 0; k < width; ++k) node_utility[k] = utility_at_node(state[k], first.aux0);
        double min_wealth = wealth(plan_.start, 0.0);

        for (const auto& step : plan_.steps) {
            const double shock = step.sd * normal(gauss_engine);
            for (int k = 0; k < width; ++k) state[k] += step.drift + (k == 0 ? shock : -shock);
            for (std::size_t j = 0; j < m; ++j) {
                const double rate = plan_.intensity[step.cell][j];
                if (rate == 0.0) continue;
                clock[j] += rate * step.h;
                while (clock[j] >= next[j]) {
                    const double when = step.t1 - (clock[j] - next[j]) / rate;
                    double effect = plan_.jump_effect[step.cell][j];
                    if (std::isnan(effect)) {
                        std::ostringstream msg;
                        msg << "jump drives wealth to zero or below at t = " << when;
                        throw Bankruptcy(msg.str());
                    }
                    if (!plan_.crra) effect /= (plan_.horizon - when + 1.0);
                    for (int k = 0; k < width; ++k) state[k] += effect;
                    counts[j] += static_cast<std::uint64_t>(width);
                    next[j] += expo(jump_engine);
                }
            }
            for (int k = 0; k < width; ++k) {
                const double u1 = utility_at_node(state[k], step.aux1);
                integral[k] += 0.5 * step.h * (node_utility[k] + u1);
                node_utility[k] = u1;
                min_wealth = std::min(min_wealth, wealth(state[k], step.t1));
            }
        }
        UnitOutput out{};
        for (int k = 0; k < width; ++k) {
            out.objective[k] = integral[k] + terminal_utility(state[k]);
            out.terminal[k] = wealth(state[k], plan_.horizon);
        }
        out.min_wealth = min_wealth;
        return out;
    }

private:
    const Plan& plan_;
    const SimConfig& cfg_;
};

SimulationResult run_plan(const Plan& plan, const SimConfig& cfg) {
    const std::size_t width = cfg.antithetic ? 2 : 1;
    const std::size_t units = cfg.paths / width;
    SimulationResult result;
    result.objective.resize(cfg.paths);
    result.terminal_wealth.resize(cfg.paths);
    result.jump_locations = plan.locations;
    result.antithetic = cfg.antithetic;
    result.seed = cfg.seed;
    result.step = cfg.step;

    const std::size_t blocks = std::min<std::size_t>(units, 64);
    std::vector<std::vector<std::uint64_t>> counts(blocks, std::vector<std::uint64_t>(plan.locations.size(), 0));
    std::vector<double> min_wealth(blocks, std::numeric_limits<double>::infinity());
    const PathRunner runner(plan, cfg);
    parallel_for(blocks, [&](std::size_t b) {
        const std::size_t begin = units * b / blocks;
        const std::size_t end = units * (b + 1) / blocks;
        for (std::size_t u = begin; u < end; ++u) {
            const UnitOutput out = runner.run(u, counts[b]);
            for (std::size_t k = 0; k < width; ++k) {
                result.objective[u * width + k] = out.objective[k];
                result.terminal_wealth[u * width + k] = out.terminal[k];
            }
            min_wealth[b] = std::min(min_wealth[b], out.min_wealth);
        }
    });
    result.jump_counts.assign(plan.locations.size(), 0);
    for (const auto& c : counts) {
        for (std::size_t j = 0; j < c.size(); ++j) result.jump_counts[j] += c[j];
    }
    result.min_wealth = *std::min_element(min_wealth.begin(), min_wealth.end());
    result.expected_jump_counts.assign(plan.locations.size(), 0.0);
    for (const auto& step : plan.steps) {
        for (std::size_t j = 0; j < plan.locations.size(); ++j) {
            result.expected_jump_counts[j] += plan.intensity[step.cell][j] * step.h;
        }
    }
    for (auto& e : result.expected_jump_counts) e *= static_cast<double>(cfg.paths);
    return result;
}

// Independent samples: pair means under antithetic sampling, paths otherwise.
std::vector<double> unit_samples(const SimulationResult& r) {
    if (!r.antithetic) return r.objective;
    std::vector<double> samples(r.objective.size() / 2);
    for (std::size_t u = 0; u < samples.size(); ++u) {
        samples[u] = 0.5 * (r.objective[2 * u] + r.objective[2 * u + 1]);
    }
    return samples;
}

std::pair<double, double> mean_and_error(const std::vector<double>& samples) {
    const double n = static_cast<double>(samples.size());
    const double mean = pairwise_sum(samples) / n;
    if (samples.size() < 2) return {mean, 0.0};
    std::vector<double> squares(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) squares[i] = (samples[i] - mean) * (samples[i] - mean);
    const double variance = pairwise_sum(squares) / (n - 1.0);
    return {mean, std::sqrt(variance / n)};
}

PolicyPath scaled_investment(const PolicyPath& policy, double factor) {
    PolicyPath out = policy;
    for (auto& x : out.investment) x *= factor;
    return out;
}

PolicyPath transformed_control(const PolicyPath& policy, double scale, double shift) {
    PolicyPath out = policy;
    const ControlPath base = policy.consumption;
    out.consumption = ControlPath::smooth(
        [base, scale, shift](std::size_t i, double t) { return scale * base.at(i, t) + shift; },
        base.cell_count());
    return out;
}

bool admissible_everywhere(const PolicyPath& policy, const MarketSpec& spec) {
    for (std::size_t i = 0; i < spec.grid.cell_count(); ++i) {
        for (const auto& z : jump_support_union(spec.set_for_cell(i)).locations) {
            if (!(1.0 + policy.investment[i].dot(z) > 0.0)) return false;
        }
    }
    return true;
}

}  // namespace

SimulationResult simulate_wealth_crra(const PolicyPath& policy, const TripletPath& theta,
                                      const MarketSpec& spec, const SimConfig& cfg) {
    if (!spec.utility.is_crra()) throw ValidationError("CRRA simulation needs a CRRA utility");
    return run_plan(make_plan(policy, theta, spec, cfg, true), cfg);
}

SimulationResult simulate_wealth_cara(const PolicyPath& policy, const TripletPath& theta,
                                      const MarketSpec& spec, const SimConfig& cfg) {
    if (spec.utility.is_crra()) throw ValidationError("CARA simulation needs a CARA utility");
    return run_plan(make_plan(policy, theta, spec, cfg, false), cfg);
}

SimulationResult simulate(const PolicyPath& policy, const TripletPath& theta, const MarketSpec& spec,
                          const SimConfig& cfg) {
    return spec.utility.is_crra() ? simulate_wealth_crra(policy, theta, spec, cfg)
                                  : simulate_wealth_cara(policy, theta, spec, cfg);
}

ObjectiveEstimate summarize(const SimulationResult& result) {
    const auto [mean, error] = mean_and_error(unit_samples(result));
    return {mean, error, result.objective.size(), result.seed, result.step};
}

PairedDifference paired_difference(const SimulationResult& first, const SimulationResult& second) {
    if (first.objective.size() != second.objective.size() || first.antithetic != second.antithetic) {
        throw ValidationError("paired comparison needs runs with the same layout");
    }
    auto a = unit_samples(first);
    const auto b = unit_samples(second);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
    const auto [mean, error] = mean_and_error(a);
    return {mean, error};
}

ObjectiveEstimate estimate_objective(const PolicyPath& policy, const TripletPath& theta,
                                     const MarketSpec& spec, const SimConfig& cfg) {
    return summarize(simulate(policy, theta, spec, cfg));
}

PolicyPath optimal_policy(const SaddleSolution& solution) {
    return PolicyPath{solution.skeleton.investment(), solution.control};
}

TripletPath worst_case_path(const SaddleSolution& solution, const MarketSpec& spec) {
    return TripletPath::from_weights(spec, solution.skeleton.weights());
}

MartingaleReport verify_martingale_equality(const SaddleSolution& solution, const MarketSpec& spec,
                                            const SimConfig& cfg, bool strict) {
    const auto estimate =
        estimate_objective(optimal_policy(solution), worst_case_path(solution, spec), spec, cfg);
    const double target = solution.value_function;
    const double diff = estimate.mean - target;
    // The trapezoid rule leaves an O(Δ²) bias that antithetic pairs cannot average out.
    const double scale = std::hypot(estimate.standard_error, discretization_floor(cfg.step, target));
    const double z = diff / scale;
    MartingaleReport report{estimate, target, z, std::abs(z) <= 3.0};
    if (strict && !report.pass) {
        std::ostringstream msg;
        msg.precision(10);
        msg << "Monte-Carlo objective " << estimate.mean << " vs value " << target << ": z = " << z;
        throw EqualityViolation(msg.str());
    }
    return report;
}

ObjectiveSaddleReport verify_objective_saddle(const SaddleSolution& solution, const MarketSpec& spec,
                                              const SimConfig& cfg, bool strict) {
    const PolicyPath optimum = optimal_policy(solution);
    const TripletPath worst = worst_case_path(solution, spec);
    const SimulationResult base = simulate(optimum, worst, spec, cfg);

    const double reference = solution.value_function;
    ObjectiveSaddleReport report{{}, true};
    auto record = [&](const std::string& name, const SimulationResult& run, bool policy_side) {
        const auto d = paired_difference(run, base);
        const double band = 3.0 * std::hypot(d.standard_error, discretization_floor(cfg.step, reference));
        const bool pass = policy_side ? d.mean <= band : d.mean >= -band;
        report.checks.push_back({name, d.mean, d.standard_error, pass});
        report.pass = report.pass && pass;
    };

    std::vector<std::pair<std::string, PolicyPath>> policies;
    policies.emplace_back("policy:unperturbed", optimum);
    policies.emplace_back("policy:investment*0.5", scaled_investment(optimum, 0.5));
    policies.emplace_back("policy:investment*1.5", scaled_investment(optimum, 1.5));
    if (spec.utility.is_crra()) {
        policies.emplace_back("policy:consumption*0.8", transformed_control(optimum, 0.8, 0.0));
        policies.emplace_back("policy:consumption*1.2", transformed_control(optimum, 1.2, 0.0));
    } else {
        policies.emplace_back("policy:excess-0.05", transformed_control(optimum, 1.0, -0.05));
        policies.emplace_back("policy:excess+0.05", transformed_control(optimum, 1.0, 0.05));
    }
    for (const auto& [name, policy] : policies) {
        if (spec.utility.is_crra() && !admissible_everywhere(policy, spec)) continue;
        record(name, simulate(policy, worst, spec, cfg), true);
    }

    std::size_t vertices = 0;
    for (const auto& set : spec.sets) vertices = std::max(vertices, set.size());
    for (std::size_t v = 0; v < vertices; ++v) {
        record("measure:vertex" + std::to_string(v),
               simulate(optimum, TripletPath::vertex(spec, v), spec, cfg), false);
    }

    if (strict && !report.pass) {
        std::ostringstream msg;
        for (const auto& c : report.checks) {
            if (!c.pass) msg << c.name << " (difference " << c.difference << ", SE " << c.standard_error << ") ";
        }
        throw SaddleViolation("objective saddle inequality violated: " + msg.str());
    }
    return report;
}

}  // namespace robust_merton
