#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

#include "generators.hpp"
#include "properties.hpp"
#include "robust_merton/errors.hpp"
#include "robust_merton/levy_metric.hpp"
#include "robust_merton/policy_engine.hpp"
#include "robust_merton/saddle_solver.hpp"
#include "robust_merton/sim_engine.hpp"
#include "robust_merton/spec_io.hpp"

using namespace robust_merton;
using namespace robust_merton::testing;

namespace {

// Pinned tolerances and budgets.
constexpr double kMertonTol = 1e-6;
constexpr double kMertonSeconds = 1.0;
constexpr double kSharpeArgTol = 1e-3;
constexpr double kRiccatiTol = 1e-6;
constexpr double kRiccatiSeconds = 10.0;
constexpr double kValueTol = 1e-6;
constexpr double kCertificateTol = 1e-6;
constexpr double kAnalyticSaddleTol = 1e-6;
constexpr int kMonotonePairs = 100;
constexpr double kZBand = 3.0;
constexpr std::size_t kPaths = 100000;
constexpr double kStep = 1e-3;
constexpr double kSimSeconds = 120.0;
constexpr double kLpTol = 1e-12;
constexpr int kMetricTriples = 200;
constexpr double kExactMetricTol = 1e-12;

const std::string kFixtures = ROBUST_MERTON_FIXTURE_DIR;

struct Fixture {
    std::string name;
    MarketSpec spec;
};

std::vector<Fixture> fixtures() {
    return {{"merton_log", load_market_spec(kFixtures + "/merton_log.json")},
            {"crra_power_drift_hull", load_market_spec(kFixtures + "/crra_power_drift_hull.json")},
            {"cara_constant", load_market_spec(kFixtures + "/cara_constant.json")}};
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

KernelContext crra_ctx(double p) { return {p == 0.0 ? UtilitySpec::crra_log() : UtilitySpec::crra_power(p), 1.0}; }

SaddleCell saddle_on(const ConfidenceSet& set, const KernelContext& ctx) {
    const SolverConfig cfg;
    const auto support = jump_support_union(set);
    return local_saddle(set, admissible_region(support.locations, cfg.margin, set.dimension()), ctx, cfg);
}

/// Runs one criterion; an exception counts as a failure with its message.
bool criterion(int index, const std::string& name, const std::function<bool(std::ostringstream&)>& body) {
    std::ostringstream detail;
    bool pass = false;
    try {
        pass = body(detail);
    } catch (const std::exception& e) {
        detail << "exception: " << e.what();
    }
    std::printf("%s [%d] %s: %s\n", pass ? "PASS" : "FAIL", index, name.c_str(), detail.str().c_str());
    std::fflush(stdout);
    return pass;
}

}  // namespace

int main() {
    const auto specs = fixtures();
    std::vector<std::optional<SaddleSolution>> solutions;
    for (const auto& f : specs) solutions.emplace_back(solve(f.spec, SolverConfig{}));

    bool all = true;

    all &= criterion(1, "Merton recovery", [](std::ostringstream& out) {
        bool ok = true;
        const auto set = make_set({scalar_triplet(0.08, 0.04)});
        for (double p : {0.0, 0.5, -1.0}) {
            const auto start = std::chrono::steady_clock::now();
            const auto cell = saddle_on(set, crra_ctx(p));
            const double elapsed = seconds_since(start);
            const double x_err = std::abs(cell.x[0] - 0.08 / ((1 - p) * 0.04));
            const double g_err = std::abs(cell.value - 0.0064 / (2 * (1 - p) * 0.04));
            ok = ok && x_err <= kMertonTol && g_err <= kMertonTol && elapsed < kMertonSeconds;
            out << "p=" << p << " |dx|=" << x_err << " |dg|=" << g_err << " t=" << elapsed << "s; ";
        }
        return ok;
    });

    all &= criterion(2, "Worked constants", [](std::ostringstream& out) {
        double best_p = 0.0;
        double best = std::numeric_limits<double>::infinity();
        for (int k = 1; k <= 100000; ++k) {
            const double p = -k * 1e-4;
            const double bound = std::sqrt(crra_sharpe_bound_squared(p));
            if (bound < best) {
                best = bound;
                best_p = p;
            }
        }
        const double five = std::sqrt(cara_sharpe_bound_squared(1.0 / 6.0));
        const double ten = std::sqrt(cara_sharpe_bound_squared(1.0 / 11.0));
        const bool ok = std::abs(best_p + 1.0) <= kSharpeArgTol && std::abs(best - 2 * std::sqrt(2.0)) <= 1e-9 &&
                        std::round(five * 100) == 96 && std::round(ten * 100) == 79;
        out << "argmin p=" << best_p << " min=" << best << " CARA(5)=" << five << " CARA(10)=" << ten;
        return ok;
    });

    all &= criterion(3, "Log consumption", [&](std::ostringstream& out) {
        const auto& spec = specs[0].spec;
        const auto nodes = spec.grid.nodes();
        const auto& c = solutions[0]->control_nodes;
        std::size_t mismatches = 0;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (c[i] != 1.0 / (spec.grid.horizon() - nodes[i] + 1.0)) ++mismatches;
        }
        out << nodes.size() << " nodes, " << mismatches << " differ from 1/(T-t+1)";
        return mismatches == 0;
    });

    all &= criterion(4, "Riccati cross-check", [](std::ostringstream& out) {
        const auto start = std::chrono::steady_clock::now();
        Rng rng(2024);
        double crra_err = 0.0;
        double cara_err = 0.0;
        const double powers[] = {-2.0, -1.0, -0.5, 0.3, 0.7};
        for (int trial = 0; trial < 20; ++trial) {
            const double horizon = rng.uniform(0.5, 2.0);
            const TimeGrid grid({0.0, 0.5 * horizon, horizon}, horizon / 20);
            std::vector<double> k(grid.cell_count());
            for (auto& x : k) x = rng.uniform(-0.2, 0.2);
            const double p = powers[trial % 5];
            const auto ode = solve_riccati_crra(k, p, grid, 1e-3);
            const auto closed = control_at_nodes(optimal_consumption_crra(k, UtilitySpec::crra_power(p), grid), grid);
            for (std::size_t i = 0; i < ode.size(); ++i) crra_err = std::max(crra_err, std::abs(ode[i] - closed[i]));
            const auto dode = solve_ode_cara(k, grid, 1e-3);
            const auto dclosed = control_at_nodes(optimal_excess_consumption_cara(k, grid), grid);
            for (std::size_t i = 0; i < dode.size(); ++i) cara_err = std::max(cara_err, std::abs(dode[i] - dclosed[i]));
        }
        const double elapsed = seconds_since(start);
        out << "sup CRRA=" << crra_err << " sup CARA=" << cara_err << " t=" << elapsed << "s";
        return crra_err <= kRiccatiTol && cara_err <= kRiccatiTol && elapsed < kRiccatiSeconds;
    });

    all &= criterion(5, "HJB containment", [&](std::ostringstream& out) {
        bool ok = true;
        for (std::size_t f = 0; f < specs.size(); ++f) {
            const auto& spec = specs[f].spec;
            if (spec.utility.family() == UtilityFamily::CrraLog) {
                out << specs[f].name << ": no bounds for log utility; ";
                continue;
            }
            const auto kernels = solutions[f]->kernels();
            const auto [lo, hi] = std::minmax_element(kernels.begin(), kernels.end());
            const auto values = value_path(solutions[f]->control_nodes, spec.utility, spec.grid);
            check_hjb_containment(values, hjb_bounds(*lo, *hi, spec.utility, spec.grid.horizon()), spec.utility);
            ok = ok && std::abs(values.front() - solutions[f]->global_value) <= kValueTol;
            out << specs[f].name << " V(0)=" << values.front() << "; ";
        }
        const TimeGrid one({0.0, 1.0}, 1e-3);
        const auto pu = UtilitySpec::crra_power(-1.0);
        const std::vector<double> g(one.cell_count(), 0.06);
        const auto v = value_path(control_at_nodes(optimal_consumption_crra(g, pu, one), one), pu, one);
        check_hjb_containment(v, hjb_bounds(0.06, 0.06, pu, 1.0), pu);
        const TimeGrid two({0.0, 2.0}, 1e-3);
        const auto au = UtilitySpec::cara(1.0);
        const std::vector<double> h(two.cell_count(), 0.05);
        const auto w = value_path(control_at_nodes(optimal_excess_consumption_cara(h, two), two), au, two);
        check_hjb_containment(w, hjb_bounds(0.05, 0.05, au, 2.0), au);
        // Independent oracles: 1 − A² with A = e^k + (e^k − 1)/k, k = −0.03, and 1 − 3e^{−0.1/3}.
        const double a = std::exp(-0.03) + std::expm1(-0.03) / -0.03;
        const double crra_oracle = 1 - a * a;
        const double cara_oracle = 1 - 3 * std::exp(-0.1 / 3.0);
        ok = ok && std::abs(v.front() - crra_oracle) <= kValueTol && std::abs(w.front() - cara_oracle) <= kValueTol;
        out << "worked CRRA V(0)=" << v.front() << " (oracle " << crra_oracle << ", reference -2.8243530)"
            << " worked CARA V(0)=" << w.front() << " (oracle " << cara_oracle << ", reference -1.9016484)";
        return ok;
    });

    all &= criterion(6, "Saddle certificates", [&](std::ostringstream& out) {
        double worst = 0.0;
        for (const auto& cell : solutions[1]->skeleton.cells) worst = std::max(worst, cell.certificate);
        const auto vol_spec = make_spec({0.0, 1.0}, 0.01, {make_set({scalar_triplet(0.08, 0.04), scalar_triplet(0.08, 0.09)})},
                                        UtilitySpec::crra_log());
        const auto vol = solve_policy_measure(vol_spec, SolverConfig{});
        for (const auto& cell : vol.cells) worst = std::max(worst, cell.certificate);
        const auto drift = saddle_on(make_set({scalar_triplet(0.05, 0.04), scalar_triplet(0.10, 0.04)}), crra_ctx(0.0));
        const auto v = vol.cells.front();
        const double err = std::max({std::abs(drift.x[0] - 1.25), std::abs(drift.value - 0.03125),
                                     std::abs(v.x[0] - 8.0 / 9.0), std::abs(v.value - 0.08 * 0.08 / (2 * 0.09))});
        out << "max certificate=" << worst << " (1000 samples/cell) analytic error=" << err;
        return worst <= kCertificateTol && err <= kAnalyticSaddleTol;
    });

    all &= criterion(7, "Kernel-order monotonicity", [](std::ostringstream& out) {
        Rng rng(7);
        int violations = 0;
        int missing = 0;
        for (const auto& u : {UtilitySpec::crra_log(), UtilitySpec::crra_power(-1.0), UtilitySpec::crra_power(0.5),
                              UtilitySpec::cara(1.0)}) {
            const auto tally = check_monotonicity(rng, u, kMonotonePairs);
            violations += tally.violations;
            missing += tally.not_dominating;
            out << u.name() << (u.family() == UtilityFamily::CrraPower ? "(p=" + std::to_string(u.p()) + ")" : "")
                << ": " << tally.violations << "/" << tally.pairs << "; ";
        }
        return violations == 0 && missing == 0;
    });

    all &= criterion(8, "Martingale equality", [&](std::ostringstream& out) {
        bool ok = true;
        for (std::size_t f = 0; f < specs.size(); ++f) {
            const auto start = std::chrono::steady_clock::now();
            const auto r = verify_martingale_equality(*solutions[f], specs[f].spec, SimConfig{1, kPaths, kStep, true}, false);
            const double elapsed = seconds_since(start);
            ok = ok && std::abs(r.z_score) <= kZBand && elapsed <= kSimSeconds;
            out << specs[f].name << " z=" << r.z_score << " t=" << elapsed << "s; ";
        }
        return ok;
    });

    all &= criterion(9, "Objective saddle", [&](std::ostringstream& out) {
        bool ok = true;
        for (std::size_t f = 0; f < specs.size(); ++f) {
            const auto r = verify_objective_saddle(*solutions[f], specs[f].spec, SimConfig{2, kPaths, kStep, true}, false);
            std::size_t failed = 0;
            for (const auto& c : r.checks) failed += c.pass ? 0 : 1;
            ok = ok && r.pass;
            out << specs[f].name << " " << r.checks.size() - failed << "/" << r.checks.size() << "; ";
        }
        return ok;
    });

    all &= criterion(10, "Metric suite", [](std::ostringstream& out) {
        Rng rng(10);
        int bad = 0;
        for (int trial = 0; trial < kMetricTriples; ++trial) {
            const Eigen::Index d = rng.integer(1, 3);
            const MetricConfig cfg{rng.uniform(0.1, 2.0), kLpTol};
            const auto pool = location_pool(rng, d, 6, 2.0);
            const auto a = random_measure(rng, 4, pool);
            const auto b = random_measure(rng, 4, pool);
            const auto c = random_measure(rng, 4, pool);
            const double ab = kr_distance(a, b, cfg);
            const double ba = kr_distance(b, a, cfg);
            const double ac = kr_distance(a, c, cfg);
            const double bc = kr_distance(b, c, cfg);
            const double tol = 2 * kLpTol * std::max(1.0, ab + bc);
            if (std::abs(ab - ba) > tol || ac > ab + bc + tol || kr_distance(a, a, cfg) > 2 * kLpTol) ++bad;
        }
        auto atom = [](double z, double w) { return DiscreteLevyMeasure({{Vector::Constant(1, z), w}}); };
        const MetricConfig eps1{1.0, kLpTol};
        const double first = kr_distance(atom(0.5, 1.0), atom(0.6, 1.0), eps1);
        const double second = kr_distance(atom(1.0, 1.0), atom(1.0, 2.0), eps1);
        out << bad << "/" << kMetricTriples << " triples fail; 0.15 case=" << first << " 1.0 case=" << second;
        return bad == 0 && std::abs(first - 0.15) <= kExactMetricTol && std::abs(second - 1.0) <= kExactMetricTol;
    });

    all &= criterion(11, "Nonnegativity", [&](std::ostringstream& out) {
        bool ok = true;
        for (std::size_t f = 0; f < specs.size(); ++f) {
            const auto& c = solutions[f]->control_nodes;
            if (specs[f].spec.utility.is_crra()) {
                const double top = *std::max_element(c.begin(), c.end());
                ok = ok && top <= 1.0;
                out << specs[f].name << " max c*=" << top << "; ";
            } else {
                const double low = *std::min_element(c.begin(), c.end());
                ok = ok && low >= 0.0;
                out << specs[f].name << " min D*=" << low << "; ";
            }
        }
        return ok;
    });

    return all ? 0 : 1;
}
