#include <doctest.h>

#include <cmath>
#include <limits>

#include "distq/analysis.hpp"
#include "test_helpers.hpp"

using namespace distq;

TEST_CASE("contraction rate formula") {
    // lambda = 0 collapses to the one-step rate gamma^{1/p}
    for (double p : {1.0, 2.0, 3.0})
        CHECK(beta_p(0.9, 0.0, 1.3, p) == doctest::Approx(std::pow(0.9, 1.0 / p)));

    // on-policy: (gamma (1-lambda) / (1 - lambda gamma))^{1/p}
    for (double p : {1.0, 2.0}) {
        const double expected =
            std::pow(0.9 * (1.0 - 0.5) / (1.0 - 0.5 * 0.9), 1.0 / p);
        CHECK(beta_p(0.9, 0.5, 0.0, p) == doctest::Approx(expected).epsilon(1e-14));
    }

    CHECK(beta_p(0.9, 0.5, 0.2, 1.0) ==
          doctest::Approx(0.9 * 0.6 / 0.55).epsilon(1e-14));

    CHECK_THROWS_AS(beta_p(0.9, 1.0, 0.5, 2.0), std::domain_error);
    CHECK_NOTHROW(beta_p(0.9, 1.0, 0.5, 1.0));
    CHECK_THROWS_AS(beta_p(1.0, 0.5, 0.5, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(beta_p(0.9, 0.5, 2.5, 2.0), std::invalid_argument);
}

TEST_CASE("radii close the corresponding rate inequalities") {
    CHECK(radius_l1(0.9, 0.5) == doctest::Approx(0.1 / 0.45).epsilon(1e-14));
    CHECK(radius_l1(0.9, 0.0) == std::numeric_limits<double>::infinity());
    CHECK(radius_l2(0.9, 0.0) == std::numeric_limits<double>::infinity());
    CHECK(radius_alt(0.9) == doctest::Approx(0.1 / 1.8).epsilon(1e-14));

    // beta_1 < 1 iff eps < radius_l1 and beta_2 < 1 iff eps < radius_l2,
    // over a 20^3 grid of parameters
    for (int gi = 1; gi <= 20; ++gi) {
        const double gamma = gi / 21.0;
        for (int li = 1; li <= 20; ++li) {
            const double lambda = li / 21.0;
            for (int ei = 0; ei < 20; ++ei) {
                const double eps = 2.0 * ei / 19.0;
                const bool c1 = beta_p(gamma, lambda, eps, 1.0) < 1.0;
                const bool c2 = beta_p(gamma, lambda, eps, 2.0) < 1.0;
                if (std::abs(eps - radius_l1(gamma, lambda)) > 1e-9)
                    CHECK(c1 == (eps < radius_l1(gamma, lambda)));
                if (std::abs(eps - radius_l2(gamma, lambda)) > 1e-9)
                    CHECK(c2 == (eps < radius_l2(gamma, lambda)));
            }
        }
    }
}

TEST_CASE("alternative operator bound dominates the worst-case rate") {
    for (int gi = 1; gi <= 20; ++gi) {
        const double gamma = gi / 21.0;
        for (int li = 1; li <= 20; ++li) {
            const double lambda = li / 21.0;
            CHECK(beta_alt(gamma, lambda) >= beta_p(gamma, lambda, 2.0, 1.0) - 1e-12);
            if (std::abs(lambda - radius_alt(gamma)) > 1e-9)
                CHECK((beta_alt(gamma, lambda) < 1.0) ==
                      (lambda < radius_alt(gamma)));
        }
    }
}

TEST_CASE("approximation error bound") {
    CHECK(approx_error_bound(0.0, 0.5) == 0.0);
    CHECK(approx_error_bound(0.3, 0.0) == doctest::Approx(0.3));
    CHECK(approx_error_bound(0.1, 0.6) == doctest::Approx(0.125).epsilon(1e-14));
    CHECK_THROWS_AS(approx_error_bound(0.1, 1.0), std::domain_error);
    CHECK_THROWS_AS(approx_error_bound(-0.1, 0.5), std::invalid_argument);
}

TEST_CASE("beta_1 strictly increases with off-policyness for positive lambda") {
    for (double gamma : {0.5, 0.9})
        for (double lambda : {0.2, 0.6, 0.9}) {
            double prev = beta_p(gamma, lambda, 0.0, 1.0);
            for (double eps = 0.1; eps <= 2.0; eps += 0.1) {
                const double cur = beta_p(gamma, lambda, eps, 1.0);
                CHECK(cur > prev);
                prev = cur;
            }
        }
}

TEST_CASE("contraction report") {
    const auto rep = make_contraction_report(0.9, 0.5, 0.2);
    CHECK(rep.beta_1 == doctest::Approx(0.9818181818).epsilon(1e-9));
    CHECK(rep.contractive_l1 == (rep.beta_1 < 1.0));
    CHECK(rep.contractive_l2 == (rep.beta_2 < 1.0));
    CHECK(rep.beta_1 >= 0.0);
    CHECK(rep.beta_2 >= 0.0);
}

TEST_CASE("random signed measures have unit mass and bounded negativity") {
    std::mt19937_64 rng(19);
    const auto grid = make_uniform_grid(-2.0, 2.0, 15);
    for (int trial = 0; trial < 100; ++trial) {
        const auto mu = random_signed_measure(grid, rng);
        CHECK(std::abs(mu.total_mass() - 1.0) < 1e-12);
        CHECK(mu.min_mass() >= -1.0);
    }
}

TEST_CASE("empirical contraction of the on-policy operator") {
    std::mt19937_64 rng(20);
    const TabularMdp mdp = random_mdp(151, 3, 3, 0.3, 0.9);
    const Policy pi = uniform_policy(mdp);
    const double ratio = empirical_contraction(
        mdp, pi, pi, TraceSpec::OffPolicyLambda(0.5), 60, rng);
    // eps = 0: sqrt(gamma (1-lambda) / (1-lambda gamma)) = sqrt(0.45/0.55)
    CHECK(ratio <= std::sqrt(0.45 / 0.55) + 1e-9);
}
