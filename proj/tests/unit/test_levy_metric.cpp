#include <doctest.h>

#include <cmath>

#include "generators.hpp"
#include "oracles.hpp"
#include "robust_merton/errors.hpp"
#include "robust_merton/levy_metric.hpp"

using namespace robust_merton;
using namespace robust_merton::testing;

namespace {

DiscreteLevyMeasure atoms(std::vector<std::pair<double, double>> list) {
    std::vector<JumpAtom> out;
    for (const auto& [z, w] : list) out.push_back({Vector::Constant(1, z), w});
    return DiscreteLevyMeasure(std::move(out));
}

constexpr double kLpTol = 1e-12;

}  // namespace

TEST_CASE("weighted measure") {
    CHECK(weighted_measure(atoms({{0.5, 1.0}}), 2.0).atoms()[0].intensity == 1.0);
    CHECK(weighted_measure(atoms({{0.5, 1.0}}), 1.0).atoms()[0].intensity == doctest::Approx(0.5));
    CHECK(weighted_measure(atoms({{3.0, 2.0}}), 1.0).atoms()[0].intensity == doctest::Approx(2.0));
}

TEST_CASE("distance examples") {
    const MetricConfig eps1{1.0, kLpTol};
    CHECK(kr_distance(atoms({{0.5, 1.0}}), atoms({{0.5, 1.0}}), eps1) == 0.0);
    CHECK(kr_distance(atoms({{0.5, 1.0}}), atoms({{0.6, 1.0}}), eps1) == doctest::Approx(0.15).epsilon(1e-12));
    CHECK(kr_distance(atoms({{1.0, 1.0}}), atoms({{1.0, 2.0}}), eps1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(kr_distance({}, {}, eps1) == 0.0);
}

TEST_CASE("distance matches a brute-force vertex enumeration") {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::Index d = rng.integer(1, 2);
        const double eps = rng.coin() ? 2.0 : rng.uniform(0.2, 2.0);
        const auto pool = location_pool(rng, d, 4, 1.5);
        const auto mu = random_measure(rng, 2, pool);
        const auto nu = random_measure(rng, 2, pool);
        const double oracle = brute_force_kr(mu, nu, eps);
        CHECK(kr_distance(mu, nu, MetricConfig{eps, kLpTol}) == doctest::Approx(oracle).epsilon(1e-9));
    }
}

TEST_CASE("distance is a pseudometric") {
    Rng rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::Index d = rng.integer(1, 3);
        const MetricConfig cfg{rng.uniform(0.1, 2.0), kLpTol};
        const auto pool = location_pool(rng, d, 6, 2.0);
        const auto a = random_measure(rng, 4, pool);
        const auto b = random_measure(rng, 4, pool);
        const auto c = random_measure(rng, 4, pool);
        const double ab = kr_distance(a, b, cfg);
        const double ba = kr_distance(b, a, cfg);
        const double bc = kr_distance(b, c, cfg);
        const double ac = kr_distance(a, c, cfg);
        CHECK(std::abs(ab - ba) <= 2 * kLpTol * std::max(1.0, ab));
        CHECK(ac <= ab + bc + 2 * kLpTol * std::max(1.0, ac));
        CHECK(kr_distance(a, a, cfg) <= 2 * kLpTol);
        CHECK(ab >= 0.0);
    }
}

TEST_CASE("equal-mass single atoms cost pure transport") {
    Rng rng(29);
    for (int trial = 0; trial < 100; ++trial) {
        const double eps = rng.uniform(0.1, 2.0);
        const double z = rng.uniform(1.0, 2.0);
        const double zh = z + rng.uniform(-0.9, 0.9);
        // Both atoms at |z| ≥ 1 keep their mass under the weighting.
        if (std::abs(zh) < 1.0) continue;
        const double m = rng.uniform(0.1, 3.0);
        const double expected = m * std::pow(std::abs(z - zh), std::min(eps, 1.0));
        CHECK(kr_distance(atoms({{z, m}}), atoms({{zh, m}}), MetricConfig{eps, kLpTol}) ==
              doctest::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("integrand examples") {
    const Vector one = Vector::Constant(1, 1.0);
    CHECK(integrand_I(Vector::Zero(1), one, -1.0, 1.0) == 0.0);
    CHECK(integrand_I(one, one, -1.0, 1.0) == doctest::Approx(-0.5));
    CHECK(integrand_I(Vector::Constant(1, -0.5), one, -1.0, 1.0) == doctest::Approx(-1.0));
    CHECK(integrand_I(Vector::Constant(1, -0.5), one, 0.0, 1.0) ==
          doctest::Approx((std::log(0.5) + 0.5) / 0.5));
    CHECK_THROWS_AS(integrand_I(Vector::Constant(1, -1.0), one, -1.0, 1.0), DomainError);
    CHECK_THROWS_AS(integrand_I(Vector::Constant(1, -2.0), one, 0.5, 1.0), DomainError);
}

TEST_CASE("holder modulus") {
    const std::vector<Vector> xs{Vector::Constant(1, 1.0)};
    std::vector<std::pair<Vector, Vector>> pairs{{Vector::Constant(1, 1.0), Vector::Constant(1, -0.5)}};
    CHECK(holder_modulus(xs, pairs, -1.0, 1.0) == doctest::Approx(1.0 / 3.0));
    pairs.push_back({Vector::Constant(1, 0.3), Vector::Constant(1, 0.3)});
    CHECK(holder_modulus(xs, pairs, -1.0, 1.0) == doctest::Approx(1.0 / 3.0));

    Rng rng(31);
    std::vector<std::pair<Vector, Vector>> sample;
    double previous = 0.0;
    for (int round = 0; round < 4; ++round) {
        for (int k = 0; k < 20; ++k) sample.push_back({rng.vector(1, -0.4, 0.4), rng.vector(1, -0.4, 0.4)});
        const double m = holder_modulus(xs, sample, -1.0, 1.0);
        CHECK(m >= previous);
        CHECK(std::isfinite(m));
        previous = m;
    }
}

TEST_CASE("integral difference is bounded by modulus times distance") {
    Rng rng(37);
    for (int trial = 0; trial < 100; ++trial) {
        const double eps = rng.uniform(0.5, 2.0);
        const double p = rng.coin() ? -1.0 : 0.5;
        const auto pool = location_pool(rng, 1, 5, 0.4);
        const auto mu = random_measure(rng, 3, pool);
        const auto nu = random_measure(rng, 3, pool);
        const Vector x = rng.vector(1, -1.5, 1.5);
        auto integral = [&](const DiscreteLevyMeasure& m) {
            double s = 0.0;
            for (const auto& a : m.atoms()) {
                s += integrand_I(a.location, x, p, eps) * std::min(1.0, std::pow(a.location.norm(), 2.0 - eps)) *
                     a.intensity;
            }
            return s;
        };
        std::vector<std::pair<Vector, Vector>> pairs;
        for (const auto& z : pool) {
            for (const auto& zh : pool) pairs.push_back({z, zh});
        }
        const std::vector<Vector> xs{x};
        // ℐ is bounded by its sup on the pool, which caps the mass-difference part.
        double sup = 0.0;
        for (const auto& z : pool) sup = std::max(sup, std::abs(integrand_I(z, x, p, eps)));
        const double lip = std::max(holder_modulus(xs, pairs, p, eps), sup);
        const double gap = std::abs(integral(mu) - integral(nu));
        CHECK(gap <= lip * kr_distance(mu, nu, MetricConfig{eps, kLpTol}) + 1e-12);
    }
}
