#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "generators.hpp"
#include "robust_merton/errors.hpp"
#include "robust_merton/sim_engine.hpp"

using namespace robust_merton;
using namespace robust_merton::testing;

namespace {

MarketSpec merton_spec(double step = 0.01) {
    return make_spec({0.0, 1.0}, step, {make_set({scalar_triplet(0.08, 0.04)})}, UtilitySpec::crra_log());
}

MarketSpec jump_spec() {
    return make_spec({0.0, 0.5, 1.0}, 0.01,
                     {make_set({scalar_triplet(0.05, 0.04, {{-0.1, 0.5}, {0.1, 0.3}}),
                                scalar_triplet(0.10, 0.04, {{-0.1, 0.5}, {0.1, 0.3}})}),
                      make_set({scalar_triplet(0.02, 0.04, {{-0.1, 2.0}, {0.1, 1.0}})})},
                     UtilitySpec::crra_power(-1.0));
}

MarketSpec cara_spec() {
    return make_spec({0.0, 2.0}, 0.02, {make_set({scalar_triplet(0.05, 0.04, {{-0.2, 0.4}, {0.15, 0.6}})})},
                     UtilitySpec::cara(1.0));
}

void set_threads(const char* value) { ::setenv("ROBUST_MERTON_THREADS", value, 1); }

}  // namespace

TEST_CASE("estimates are deterministic and independent of the thread count") {
    const auto spec = jump_spec();
    const auto solution = solve(spec, SolverConfig{});
    const SimConfig cfg{7, 2000, 0.01, true};
    set_threads("1");
    const auto a = estimate_objective(optimal_policy(solution), worst_case_path(solution, spec), spec, cfg);
    set_threads("4");
    const auto b = estimate_objective(optimal_policy(solution), worst_case_path(solution, spec), spec, cfg);
    const auto c = estimate_objective(optimal_policy(solution), worst_case_path(solution, spec), spec, cfg);
    ::unsetenv("ROBUST_MERTON_THREADS");
    CHECK(a.mean == b.mean);
    CHECK(a.standard_error == b.standard_error);
    CHECK(b.mean == c.mean);
    const auto other = estimate_objective(optimal_policy(solution), worst_case_path(solution, spec), spec,
                                          SimConfig{8, 2000, 0.01, true});
    CHECK(other.mean != a.mean);
}

TEST_CASE("jump counts match integrated intensities") {
    const auto spec = jump_spec();
    const auto solution = solve(spec, SolverConfig{});
    const auto result =
        simulate(optimal_policy(solution), worst_case_path(solution, spec), spec, SimConfig{3, 4000, 0.01, true});
    REQUIRE(result.jump_locations.size() == 2);
    for (std::size_t k = 0; k < result.jump_counts.size(); ++k) {
        // Antithetic partners share jump times, so half the paths carry independent counts.
        const double expected = result.expected_jump_counts[k];
        const double sd = std::sqrt(2.0 * expected);
        CHECK(std::abs(static_cast<double>(result.jump_counts[k]) - expected) <= 4.0 * sd);
    }
    // Per path: 0.5·0.5 + 0.5·2 = 1.25 down-jumps and 0.5·0.3 + 0.5·1 = 0.65 up-jumps.
    CHECK(result.expected_jump_counts[0] == doctest::Approx(4000 * 1.25));
    CHECK(result.expected_jump_counts[1] == doctest::Approx(4000 * 0.65));
}

TEST_CASE("antithetic pairs reduce the standard error") {
    const auto spec = cara_spec();
    const auto solution = solve(spec, SolverConfig{});
    const auto policy = optimal_policy(solution);
    const auto theta = worst_case_path(solution, spec);
    const auto plain = estimate_objective(policy, theta, spec, SimConfig{5, 4000, 0.02, false});
    const auto paired = estimate_objective(policy, theta, spec, SimConfig{5, 4000, 0.02, true});
    CHECK(paired.standard_error < plain.standard_error);
    CHECK_THROWS_AS(estimate_objective(policy, theta, spec, SimConfig{5, 3, 0.02, true}), ValidationError);
}

TEST_CASE("halving the step leaves the estimate within noise") {
    const auto spec = jump_spec();
    const auto solution = solve(spec, SolverConfig{});
    const auto policy = optimal_policy(solution);
    const auto theta = worst_case_path(solution, spec);
    const auto coarse = estimate_objective(policy, theta, spec, SimConfig{9, 4000, 0.01, true});
    const auto fine = estimate_objective(policy, theta, spec, SimConfig{9, 4000, 0.005, true});
    const double se = std::hypot(coarse.standard_error, fine.standard_error);
    CHECK(std::abs(coarse.mean - fine.mean) <= 4.0 * se);
}

TEST_CASE("vanishing noise gives the deterministic objective") {
    const auto spec = make_spec({0.0, 1.0}, 0.01, {make_set({scalar_triplet(0.08, 1e-12)})}, UtilitySpec::crra_log());
    const std::size_t n = spec.grid.cell_count();
    const std::vector<Vector> investment(n, Vector::Constant(1, 1.0));
    const auto theta = TripletPath::vertex(spec, 0);
    const auto kernels = kernel_path(investment, theta, spec.grid, spec.utility);
    const PolicyPath policy{investment, optimal_consumption_crra(kernels, spec.utility, spec.grid)};
    const auto est = estimate_objective(policy, theta, spec, SimConfig{1, 100, 0.01, true});
    CHECK(est.standard_error <= 1e-10);
    CHECK(est.mean == doctest::Approx(0.08 * 1.5 - 2.0 * std::log(2.0)).epsilon(1e-4));
}

TEST_CASE("reachable ruin raises bankruptcy") {
    const auto spec = make_spec({0.0, 1.0}, 0.01, {make_set({scalar_triplet(0.05, 0.04, {{-0.1, 5.0}, {0.1, 1.0}})})},
                                UtilitySpec::crra_log());
    const auto solution = solve(spec, SolverConfig{});
    PolicyPath policy = optimal_policy(solution);
    policy.investment.assign(spec.grid.cell_count(), Vector::Constant(1, 10.0));
    CHECK_THROWS_AS(simulate(policy, worst_case_path(solution, spec), spec, SimConfig{1, 100, 0.01, true}), Bankruptcy);
}

TEST_CASE("martingale equality at the saddle") {
    for (const auto& spec : {merton_spec(), jump_spec(), cara_spec()}) {
        const auto solution = solve(spec, SolverConfig{});
        const auto report = verify_martingale_equality(solution, spec, SimConfig{11, 20000, 0.01, true}, false);
        CAPTURE(report.estimate.mean);
        CAPTURE(report.target);
        CHECK(std::abs(report.z_score) <= 3.0);
    }
}

TEST_CASE("objective saddle perturbations") {
    const auto spec = jump_spec();
    const auto solution = solve(spec, SolverConfig{});
    const auto report = verify_objective_saddle(solution, spec, SimConfig{13, 4000, 0.01, true}, false);
    CHECK(report.pass);
    CHECK(report.checks.size() >= 6);

    // A suboptimal Merton investment loses about 0.02·(T²/2 + T) = 0.03.
    const auto merton = merton_spec();
    const auto ms = solve(merton, SolverConfig{});
    PolicyPath half = optimal_policy(ms);
    half.investment.assign(merton.grid.cell_count(), Vector::Constant(1, 1.0));
    const SimConfig cfg{17, 4000, 0.01, true};
    const auto base = simulate(optimal_policy(ms), worst_case_path(ms, merton), merton, cfg);
    const auto worse = simulate(half, worst_case_path(ms, merton), merton, cfg);
    const auto diff = paired_difference(worse, base);
    CHECK(diff.mean == doctest::Approx(-0.03).epsilon(0.02));
}
