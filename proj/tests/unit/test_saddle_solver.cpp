#include <doctest.h>

#include <cmath>

#include "generators.hpp"
#include "robust_merton/errors.hpp"
#include "robust_merton/saddle_solver.hpp"

using namespace robust_merton;
using namespace robust_merton::testing;

namespace {

const SolverConfig kCfg{};

KernelContext crra(double p) { return {p == 0.0 ? UtilitySpec::crra_log() : UtilitySpec::crra_power(p), 1.0}; }

AdmissibleRegion region_for(const ConfidenceSet& set) {
    const auto support = jump_support_union(set);
    return admissible_region(support.locations, kCfg.margin, set.dimension());
}

SaddleCell saddle(const ConfidenceSet& set, const KernelContext& ctx) {
    const auto region = ctx.utility.is_crra() ? region_for(set) : admissible_region({}, std::nullopt, set.dimension());
    return local_saddle(set, region, ctx, kCfg);
}

/// max over x of a single vertex kernel, by Newton's method on the smooth concave function.
double vertex_max(const LevyTriplet& t, const KernelContext& ctx, Vector x) {
    for (int k = 0; k < 200; ++k) {
        const auto der = local_kernel_derivatives(x, t, ctx);
        Vector step = der.hessian.ldlt().solve(-der.gradient);
        double s = 1.0;
        while (s > 1e-12) {
            const Vector trial = x + s * step;
            bool ok = true;
            for (const auto& a : t.jumps().atoms()) ok = ok && 1.0 + trial.dot(a.location) > 1e-9;
            if (ok && local_kernel(trial, t, ctx) >= der.value - 1e-15) break;
            s *= 0.5;
        }
        x += s * step;
        if (step.norm() < 1e-14) break;
    }
    return local_kernel(x, t, ctx);
}

}  // namespace

TEST_CASE("inner minimum sits at a vertex") {
    const auto set = make_set({scalar_triplet(0.05, 0.04), scalar_triplet(0.10, 0.09)});
    auto r = inner_min(Vector::Zero(1), set, crra(0.0));
    CHECK(r.value == 0.0);
    CHECK(r.vertex == 0);
    r = inner_min(Vector::Constant(1, 1.0), set, crra(0.0));
    CHECK(r.value == doctest::Approx(0.03));
    CHECK(r.vertex == 0);
    r = inner_min(Vector::Constant(1, -1.0), set, crra(0.0));
    CHECK(r.value == doctest::Approx(-0.145));
    CHECK(r.vertex == 1);
}

TEST_CASE("Merton saddles") {
    const auto set = make_set({scalar_triplet(0.08, 0.04)});
    for (double p : {0.0, 0.5, -1.0}) {
        const auto cell = saddle(set, crra(p));
        CHECK(cell.x[0] == doctest::Approx(0.08 / ((1 - p) * 0.04)).epsilon(1e-8));
        CHECK(cell.value == doctest::Approx(0.0064 / (2 * (1 - p) * 0.04)).epsilon(1e-8));
        CHECK(cell.certificate <= 1e-9);
    }
    const auto cara = saddle(set, {UtilitySpec::cara(1.0), 0.5});
    CHECK(cara.x[0] == doctest::Approx(0.08 / (0.5 * 0.04)).epsilon(1e-8));
}

TEST_CASE("ambiguity saddles") {
    const auto drift = saddle(make_set({scalar_triplet(0.05, 0.04), scalar_triplet(0.10, 0.04)}), crra(0.0));
    CHECK(drift.x[0] == doctest::Approx(1.25).epsilon(1e-8));
    CHECK(drift.value == doctest::Approx(0.03125).epsilon(1e-8));
    CHECK(drift.weights[0] == doctest::Approx(1.0));

    const auto vol = saddle(make_set({scalar_triplet(0.08, 0.04), scalar_triplet(0.08, 0.09)}), crra(0.0));
    CHECK(vol.x[0] == doctest::Approx(8.0 / 9.0).epsilon(1e-8));
    CHECK(vol.value == doctest::Approx(0.0355556).epsilon(1e-6));
    CHECK(vol.weights[1] == doctest::Approx(1.0));

    const auto cara = saddle(make_set({scalar_triplet(0.05, 0.04)}), {UtilitySpec::cara(1.0), 0.5});
    CHECK(cara.x[0] == doctest::Approx(2.5).epsilon(1e-8));
    CHECK(cara.value == doctest::Approx(0.0625).epsilon(1e-8));
}

TEST_CASE("saddle sandwich, minimax equality and sign on random hulls") {
    Rng rng(53);
    for (int trial = 0; trial < 40; ++trial) {
        const Eigen::Index d = rng.integer(1, 2);
        const bool jumps = rng.coin();
        std::vector<LevyTriplet> vertices;
        const auto shared = symmetric_jumps(rng, d, 0.2);
        for (int v = rng.integer(1, 3); v > 0; --v) {
            vertices.emplace_back(rng.vector(d, -0.1, 0.12), rng.spd(d, 0.02, 0.09),
                                  jumps ? shared : DiscreteLevyMeasure{});
        }
        const auto set = make_set(vertices);
        const bool cara = rng.coin();
        const double p = std::vector<double>{-2.0, -1.0, 0.0, 0.5}[static_cast<std::size_t>(rng.integer(0, 3))];
        const KernelContext ctx = cara ? KernelContext{UtilitySpec::cara(1.0), rng.uniform(0.3, 1.0)} : crra(p);
        const auto cell = saddle(set, ctx);
        CHECK(cell.certificate <= kCfg.certificate_tolerance);
        CHECK(cell.value >= -1e-12);

        // min over vertices of max over x ≥ max over x of min over vertices, with equality at a saddle.
        double minimax = INFINITY;
        for (const auto& v : vertices) minimax = std::min(minimax, vertex_max(v, ctx, Vector::Zero(d)));
        CHECK(cell.value <= minimax + 2 * kCfg.tolerance);
        if (vertices.size() == 1) CHECK(std::abs(minimax - cell.value) <= 2 * kCfg.tolerance);

        const double g_star = local_kernel(cell.x, cell.theta, ctx);
        CHECK(g_star == doctest::Approx(cell.value).epsilon(1e-9));
    }
}

TEST_CASE("doubling the drift doubles x* and quadruples the value") {
    Rng rng(59);
    for (int trial = 0; trial < 10; ++trial) {
        const double b = rng.uniform(0.02, 0.1);
        const double s = rng.uniform(0.02, 0.09);
        const double p = rng.uniform(-2.0, 0.6);
        const auto one = saddle(make_set({scalar_triplet(b, s)}), crra(p));
        const auto two = saddle(make_set({scalar_triplet(2 * b, s)}), crra(p));
        CHECK(two.x[0] == doctest::Approx(2 * one.x[0]).epsilon(1e-8));
        CHECK(two.value == doctest::Approx(4 * one.value).epsilon(1e-8));
    }
}

TEST_CASE("certificate flags a non-saddle") {
    const auto set = make_set({scalar_triplet(0.05, 0.04), scalar_triplet(0.10, 0.04)});
    const auto region = region_for(set);
    const Vector x = Vector::Constant(1, 1.25);
    const std::vector<double> wrong{0.0, 1.0};
    const double value = local_kernel(x, set.mixture(wrong), crra(0.0));
    CHECK(saddle_certificate(set, region, crra(0.0), x, wrong, value, INFINITY, kCfg) > 1e-3);
}

TEST_CASE("skeleton reuses CRRA segments and tracks q for CARA") {
    const auto crra_spec = make_spec({0.0, 0.5, 1.0}, 0.1,
                                     {make_set({scalar_triplet(0.05, 0.04), scalar_triplet(0.10, 0.04)}),
                                      make_set({scalar_triplet(0.02, 0.04), scalar_triplet(0.04, 0.04)})},
                                     UtilitySpec::crra_log());
    const auto sk = solve_policy_measure(crra_spec, kCfg);
    const auto g = sk.kernels();
    CHECK(g.front() == doctest::Approx(0.03125).epsilon(1e-8));
    CHECK(g.back() == doctest::Approx(0.005).epsilon(1e-8));
    for (std::size_t i = 1; i < 5; ++i) CHECK(g[i] == g[0]);

    const auto cara_spec = make_spec({0.0, 2.0}, 0.5, {make_set({scalar_triplet(0.05, 0.04)})}, UtilitySpec::cara(1.0));
    const auto ck = solve_policy_measure(cara_spec, kCfg);
    for (std::size_t i = 0; i < ck.cells.size(); ++i) {
        const double q = q_schedule(cara_spec.grid.cells()[i].midpoint(), 2.0);
        CHECK(ck.cells[i].x[0] == doctest::Approx(0.05 / (q * 0.04)).epsilon(1e-8));
        if (i > 0) CHECK(ck.cells[i].x[0] < ck.cells[i - 1].x[0]);
    }
}
