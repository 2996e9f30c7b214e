#include <doctest.h>

#include <cmath>

#include "distq/analysis.hpp"
#include "distq/engine.hpp"
#include "test_helpers.hpp"

using namespace distq;
using namespace distq::testing;

TEST_CASE("one-step evaluation contracts at sqrt(gamma) toward its target") {
    const TabularMdp mdp = random_mdp(201, 4, 3, 0.3, 0.9);
    const Policy mu = uniform_policy(mdp);
    RunConfig config;
    config.trace = TraceSpec::OneStep();
    config.m = 31;
    config.k_max = 60;
    const auto result = evaluate(mdp, mu, mu, config);
    for (std::size_t k = 3; k + 1 < result.logs.size(); ++k) {
        const double before = result.logs[k].sup_l2_to_oracle;
        const double after = result.logs[k + 1].sup_l2_to_oracle;
        if (before < 1e-11) break;
        CHECK(after <= std::sqrt(mdp.gamma) * before + 1e-9);
    }
}

TEST_CASE("on-policy lambda variants produce identical runs") {
    const TabularMdp mdp = random_mdp(211, 3, 4, 0.3, 0.9);
    const Policy mu = uniform_policy(mdp);
    RunConfig config;
    config.m = 15;
    config.k_max = 25;
    config.trace = TraceSpec::OffPolicyLambda(0.6);
    const auto off = evaluate(mdp, mu, mu, config);
    config.trace = TraceSpec::OnPolicyLambda(0.6);
    const auto on = evaluate(mdp, mu, mu, config);
    REQUIRE(off.logs.size() == on.logs.size());
    for (std::size_t k = 0; k < off.logs.size(); ++k) {
        CHECK(std::abs(off.logs[k].sup_l2_to_oracle - on.logs[k].sup_l2_to_oracle) <
              1e-10);
        CHECK(std::abs(off.logs[k].step_change - on.logs[k].step_change) < 1e-10);
    }
}

TEST_CASE("mass is conserved at every iteration") {
    std::mt19937_64 rng(3);
    const TabularMdp mdp = random_mdp(221, 5, 4, 0.2, 0.9);
    const Policy mu = uniform_policy(mdp);
    const Policy pi = mixed_deterministic_policy(5, 4, 0.4, rng);
    RunConfig config;
    config.trace = TraceSpec::OffPolicyLambda(0.5);
    config.m = 11;
    config.k_max = 40;
    const auto result = evaluate(mdp, pi, mu, config);
    for (const auto& row : result.logs) CHECK(row.total_mass_error < 1e-9);
}

TEST_CASE("step changes contract inside the radius") {
    std::mt19937_64 rng(4);
    const TabularMdp mdp = random_mdp(231, 4, 6, 0.25, 0.9);
    const Policy mu = uniform_policy(mdp);
    const double lambda = 0.2;
    const double eps = 0.8 * radius_l2(mdp.gamma, lambda);
    const Policy pi =
        mixed_deterministic_policy(4, 6, alpha_for_epsilon(eps, 6), rng);
    RunConfig config;
    config.trace = TraceSpec::OffPolicyLambda(lambda);
    config.m = 21;
    config.k_max = 50;
    const auto result = evaluate(mdp, pi, mu, config);
    const double beta2 = beta_p(mdp.gamma, lambda, policy_l1_distance(pi, mu), 2.0);
    REQUIRE(beta2 < 1.0);
    for (std::size_t k = 2; k + 1 < result.logs.size(); ++k) {
        const double cur = result.logs[k].step_change;
        const double next = result.logs[k + 1].step_change;
        if (cur < 1e-12) break;
        CHECK(next <= beta2 * cur + 1e-9);
    }
}

TEST_CASE("runs are deterministic given the config") {
    const TabularMdp mdp = random_mdp(241, 4, 4, 0.3, 0.9);
    const Policy mu = uniform_policy(mdp);
    RunConfig config;
    config.mode = RunConfig::Mode::control;
    config.trace = TraceSpec::Retrace(1.0);
    config.m = 11;
    config.k_max = 30;
    config.seed = 77;
    config.oracle_n_traj = 200;
    const auto a = control(mdp, mu, config);
    const auto b = control(mdp, mu, config);
    REQUIRE(a.logs.size() == b.logs.size());
    for (std::size_t k = 0; k < a.logs.size(); ++k) {
        CHECK(a.logs[k].sup_l2_to_oracle == b.logs[k].sup_l2_to_oracle);
        CHECK(a.logs[k].pointwise_l2_at_x0a0 == b.logs[k].pointwise_l2_at_x0a0);
        CHECK(a.logs[k].min_mass_overall == b.logs[k].min_mass_overall);
    }
}

TEST_CASE("control with alpha zero reduces to evaluating the behavior policy") {
    const TabularMdp mdp = random_mdp(251, 3, 5, 0.3, 0.9);
    const Policy mu = uniform_policy(mdp);
    RunConfig config;
    config.trace = TraceSpec::OffPolicyLambda(0.4);
    config.m = 13;
    config.k_max = 25;
    config.alpha = 0.0;
    config.seed = 5;
    const auto ctrl = control(mdp, mu, config);

    RunConfig eval_config = config;
    eval_config.mode = RunConfig::Mode::evaluate;
    eval_config.alpha = 1.0;
    const auto eval = evaluate(mdp, mu, mu, eval_config);
    CHECK(sup_lp_distance(ctrl.final_eta, eval.final_eta, 2.0) < 1e-12);
    for (const auto& row : ctrl.logs) CHECK(row.target_policy_epsilon == 0.0);
}

TEST_CASE("converged evaluation lands within the approximation bound") {
    std::mt19937_64 rng(6);
    const TabularMdp mdp = random_mdp(261, 4, 4, 0.3, 0.9);
    const Policy mu = uniform_policy(mdp);
    const double lambda = 0.2;
    const double eps = 0.5 * radius_l2(mdp.gamma, lambda);
    const Policy pi =
        mixed_deterministic_policy(4, 4, alpha_for_epsilon(eps, 4), rng);
    RunConfig config;
    config.trace = TraceSpec::OffPolicyLambda(lambda);
    config.m = 201;
    config.k_max = 300;
    config.stop_tol = 1e-11;
    const auto result = evaluate(mdp, pi, mu, config);
    // against the same-grid dp target the realized fixed point is very close
    CHECK(result.logs.back().sup_l2_to_oracle < 10.0 * result.grid->spacing());
}

TEST_CASE("figure trace starts as a distribution and exposes every iterate") {
    const TabularMdp mdp = random_mdp(271, 4, 5, 0.25, 0.9);
    const Policy mu = uniform_policy(mdp);
    RunConfig config;
    config.trace = TraceSpec::OffPolicyLambda(0.3);
    config.m = 11;
    config.k_max = 20;
    const auto trace = figure1_trace(mdp, mu, mu, config);
    REQUIRE(trace.masses_per_k.size() == 21);
    double min0 = 1.0;
    for (double v : trace.masses_per_k[0]) min0 = std::min(min0, v);
    CHECK(min0 >= 0.0); // uniform initialization is a distribution
    for (const auto& masses : trace.masses_per_k) {
        double total = 0.0;
        for (double v : masses) total += v;
        CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("narrow grids are rejected unless explicitly allowed") {
    const TabularMdp mdp = random_mdp(281, 3, 3, 0.3, 0.9);
    RunConfig config;
    config.m = 11;
    config.v_min = -0.5;
    config.v_max = 0.5; // far narrower than the return range
    CHECK_THROWS_AS(run_grid(mdp, config), std::invalid_argument);
    config.allow_narrow_grid = true;
    CHECK_NOTHROW(run_grid(mdp, config));
}

TEST_CASE("iteration logs serialize to the pinned csv schema") {
    const TabularMdp mdp = random_mdp(291, 2, 2, 0.4, 0.8);
    const Policy mu = uniform_policy(mdp);
    RunConfig config;
    config.m = 9;
    config.k_max = 3;
    const auto result = evaluate(mdp, mu, mu, config);
    const std::string csv = logs_to_csv(result.logs);
    CHECK(csv.find("k,sup_l2,pt_l2,min_mass,mass_err,step_change,policy_eps") !=
          std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') ==
          static_cast<long>(result.logs.size()) + 2);
}
