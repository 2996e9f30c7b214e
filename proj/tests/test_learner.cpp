#include <doctest.h>

#include <cmath>

#include "distq/learner.hpp"
#include "distq/rng.hpp"
#include "test_helpers.hpp"

using namespace distq;
using namespace distq::testing;

namespace {

LearnerParams random_params(int ns, int na, GridPtr grid, std::uint64_t seed) {
    LearnerParams params(ns, na, std::move(grid));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (auto& v : params.logits) v = unit(rng);
    return params;
}

double weight_sum(const std::vector<BackupTerm>& terms) {
    double s = 0.0;
    for (const auto& t : terms) s += t.weight;
    return s;
}

// test-side loss: sum_t w_t * crossentropy(q_t, softmax(logits_row))
double segment_loss(const std::vector<BackupTerm>& terms,
                    const std::vector<double>& logits_row) {
    const std::size_t m = logits_row.size();
    double hi = logits_row[0];
    for (double v : logits_row) hi = std::max(hi, v);
    double z = 0.0;
    for (double v : logits_row) z += std::exp(v - hi);
    double loss = 0.0;
    for (const auto& term : terms) {
        double ce = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double logp = logits_row[i] - hi - std::log(z);
            ce -= term.masses[i] * logp;
        }
        loss += term.weight * ce;
    }
    return loss;
}

} // namespace

TEST_CASE("one-step segments recover the c51 target") {
    const TabularMdp chain = single_chain(1.0, 0.5);
    const auto grid = make_uniform_grid(0.0, 4.0, 17);
    const LearnerParams target = random_params(1, 1, grid, 5);
    auto rng = make_rng(1);
    const auto seg = sample_segment(chain, uniform_policy(chain), 0, 0, 1, rng);
    const auto terms = backup_terms(seg, TraceSpec::OffPolicyLambda(0.7),
                                    uniform_policy(chain), target, chain.gamma);
    REQUIRE(terms.size() == 1);
    CHECK(terms[0].weight == 1.0);

    // same thing computed through the exact operator on the 1-state chain
    ReturnFunction eta(grid, 1, 1);
    eta.at(0, 0) = SignedMeasure(grid, target.probs(0, 0));
    const auto expect = apply_operator(chain, uniform_policy(chain),
                                       uniform_policy(chain), TraceSpec::OneStep(), eta);
    for (std::size_t i = 0; i < grid->size(); ++i)
        CHECK(terms[0].masses[i] ==
              doctest::Approx(expect.at(0, 0).masses()[i]).epsilon(1e-12));
}

TEST_CASE("hand-checked weights for a two-step segment") {
    // lambda = 0.5, uniform mu over two actions, pi greedy on action 0
    const double lambda = 0.5;
    const auto grid = make_uniform_grid(-1.0, 1.0, 5);
    const LearnerParams target = random_params(2, 2, grid, 9);
    Policy pi{2, 2, {1.0, 0.0, 1.0, 0.0}};

    TrajectorySegment seg;
    seg.steps.resize(2);
    seg.steps[0] = {0, 0, 0.1, {0.5, 0.5}};
    seg.steps[1] = {1, 1, -0.2, {0.5, 0.5}};
    seg.next_state = 0;

    const auto terms =
        backup_terms(seg, TraceSpec::OffPolicyLambda(lambda), pi, target, 0.9);
    REQUIRE(terms.size() == 4);
    // t = 1, all actions b: pi(b|X_1) - lambda mu(b|X_1)
    CHECK(terms[0].weight == doctest::Approx(1.0 - 0.25));
    CHECK(terms[1].weight == doctest::Approx(0.0 - 0.25));
    // closure at t = 2: lambda * pi(b|X_2)
    CHECK(terms[2].weight == doctest::Approx(0.5));
    CHECK(terms[3].weight == doctest::Approx(0.0));
    CHECK(weight_sum(terms) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("constant-trace weights always telescope to one") {
    const TabularMdp mdp = random_mdp(301, 4, 3, 0.3, 0.9);
    const Policy mu = uniform_policy(mdp);
    std::mt19937_64 policy_rng(7);
    const Policy pi = mixed_deterministic_policy(4, 3, 0.8, policy_rng);
    const auto grid = default_grid_for(mdp, 21);
    const LearnerParams target = random_params(4, 3, grid, 11);
    auto rng = make_rng(2);
    for (int trial = 0; trial < 40; ++trial) {
        const auto seg = sample_segment(mdp, mu, trial % 4, trial % 3, 5, rng);
        for (double lambda : {0.0, 0.3, 0.8, 1.0}) {
            const auto terms = backup_terms(seg, TraceSpec::OffPolicyLambda(lambda), pi,
                                            target, mdp.gamma);
            CHECK(std::abs(weight_sum(terms) - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("retrace weights stay nonnegative, qlambda weights go negative") {
    const TabularMdp mdp = random_mdp(311, 3, 4, 0.3, 0.9);
    const Policy mu = uniform_policy(mdp);
    std::mt19937_64 policy_rng(8);
    const Policy pi = mixed_deterministic_policy(3, 4, 1.0, policy_rng); // greedy
    const auto grid = default_grid_for(mdp, 15);
    const LearnerParams target = random_params(3, 4, grid, 13);
    auto rng = make_rng(3);
    bool negative_seen = false;
    for (int trial = 0; trial < 30; ++trial) {
        const auto seg = sample_segment(mdp, mu, trial % 3, trial % 4, 4, rng);
        for (double c_bar : {1.0, 2.0}) {
            const auto terms =
                backup_terms(seg, TraceSpec::Retrace(c_bar), pi, target, mdp.gamma);
            for (const auto& t : terms) CHECK(t.weight >= -1e-15);
        }
        const auto q_terms = backup_terms(seg, TraceSpec::OffPolicyLambda(0.6), pi,
                                          target, mdp.gamma);
        for (const auto& t : q_terms) negative_seen = negative_seen || t.weight < -1e-6;
    }
    CHECK(negative_seen);

    // every term measure is itself a proper distribution
    const auto seg = sample_segment(mdp, mu, 0, 0, 4, rng);
    for (const auto& t :
         backup_terms(seg, TraceSpec::OffPolicyLambda(0.5), pi, target, mdp.gamma)) {
        double total = 0.0, lo = 1.0;
        for (double v : t.masses) {
            total += v;
            lo = std::min(lo, v);
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(lo >= -1e-12);
    }
}

TEST_CASE("analytic gradient matches central finite differences") {
    const TabularMdp mdp = random_mdp(321, 3, 2, 0.4, 0.85);
    const Policy mu = uniform_policy(mdp);
    const Policy pi = uniform_policy(mdp);
    const auto grid = default_grid_for(mdp, 9);
    LearnerParams params = random_params(3, 2, grid, 17);
    const LearnerParams target = random_params(3, 2, grid, 19);
    auto rng = make_rng(4);
    const auto seg = sample_segment(mdp, mu, 1, 0, 3, rng);
    const auto terms =
        backup_terms(seg, TraceSpec::OffPolicyLambda(0.5), pi, target, mdp.gamma);

    const int x = seg.steps[0].state, a = seg.steps[0].action;
    const std::size_t m = grid->size();
    std::vector<double> row(params.logits_row(x, a), params.logits_row(x, a) + m);

    // analytic: (sum_t w_t) p - sum_t w_t q_t
    const auto p = params.probs(x, a);
    const auto assembled = assemble_target(terms, m);
    std::vector<double> analytic(m);
    const double wsum = weight_sum(terms);
    for (std::size_t i = 0; i < m; ++i) analytic[i] = wsum * p[i] - assembled[i];

    const double h = 1e-6;
    for (std::size_t i = 0; i < m; ++i) {
        auto hi_row = row, lo_row = row;
        hi_row[i] += h;
        lo_row[i] -= h;
        const double fd = (segment_loss(terms, hi_row) - segment_loss(terms, lo_row)) /
                          (2.0 * h);
        CHECK(analytic[i] == doctest::Approx(fd).epsilon(1e-6));
    }

    // stationarity: a single unit-weight term equal to the prediction
    std::vector<BackupTerm> self = {{1.0, p}};
    const auto self_assembled = assemble_target(self, m);
    for (std::size_t i = 0; i < m; ++i)
        CHECK(std::abs(1.0 * p[i] - self_assembled[i]) < 1e-15);
}

TEST_CASE("gradient of a weighted sum is the weighted sum of gradients") {
    const auto grid = make_uniform_grid(-1.0, 1.0, 7);
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t m = grid->size();
    LearnerParams params = random_params(1, 1, grid, 23);
    const auto p = params.probs(0, 0);

    std::vector<BackupTerm> terms;
    for (int t = 0; t < 5; ++t) {
        BackupTerm term;
        term.weight = unit(rng) - 0.4;
        term.masses.resize(m);
        double total = 0.0;
        for (auto& v : term.masses) {
            v = unit(rng);
            total += v;
        }
        for (auto& v : term.masses) v /= total;
        terms.push_back(std::move(term));
    }
    std::vector<double> combined(m, 0.0);
    for (const auto& term : terms)
        for (std::size_t i = 0; i < m; ++i)
            combined[i] += term.weight * (p[i] - term.masses[i]);
    const auto assembled = assemble_target(terms, m);
    const double wsum = weight_sum(terms);
    for (std::size_t i = 0; i < m; ++i)
        CHECK(combined[i] == doctest::Approx(wsum * p[i] - assembled[i]).epsilon(1e-12));
}

TEST_CASE("sampled targets are unbiased for the exact operator") {
    const TabularMdp mdp = random_mdp(331, 3, 3, 0.4, 0.8);
    const Policy mu = uniform_policy(mdp);
    std::mt19937_64 policy_rng(11);
    const Policy pi = mixed_deterministic_policy(3, 3, 0.6, policy_rng);
    const auto grid = default_grid_for(mdp, 21);
    const LearnerParams target = random_params(3, 3, grid, 29);

    // exact operator applied to the measures the learner bootstraps from
    ReturnFunction eta(grid, 3, 3);
    for (int x = 0; x < 3; ++x)
        for (int a = 0; a < 3; ++a)
            eta.at(x, a) = SignedMeasure(grid, target.probs(x, a));
    const double lambda = 0.5;
    const auto exact =
        apply_operator(mdp, pi, mu, TraceSpec::OffPolicyLambda(lambda), eta);

    const int n_segments = 20000, seg_len = 40;
    auto rng = make_rng(5);
    std::vector<double> mean(grid->size(), 0.0);
    for (int i = 0; i < n_segments; ++i) {
        const auto seg = sample_segment(mdp, mu, 0, 0, seg_len, rng);
        const auto terms = backup_terms(seg, TraceSpec::OffPolicyLambda(lambda), pi,
                                        target, mdp.gamma);
        const auto assembled = assemble_target(terms, grid->size());
        for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += assembled[j];
    }
    for (auto& v : mean) v /= n_segments;
    const double dist =
        lp_distance(SignedMeasure(grid, mean), exact.at(0, 0), 2.0);
    CHECK(dist < 0.02); // ~3 standard errors at this sample size
}

TEST_CASE("training fits a zero-reward problem") {
    TabularMdp mdp = zero_reward_mdp(341, 3, 2, 0.9);
    LearnerConfig config;
    config.total_steps = 4000;
    config.m = 21;
    config.log_every = 1000;
    const auto result = train(mdp, config);
    CHECK(result.final_sup_q_error < 0.05);
}

TEST_CASE("training is deterministic given the seed") {
    const TabularMdp mdp = random_mdp(351, 3, 2, 0.3, 0.9);
    LearnerConfig config;
    config.total_steps = 2000;
    config.m = 15;
    config.seed = 3;
    const auto a = train(mdp, config);
    const auto b = train(mdp, config);
    CHECK(a.params.logits == b.params.logits);
    CHECK(a.final_sup_q_error == b.final_sup_q_error);
}

TEST_CASE("training log serializes to the pinned schema") {
    TabularMdp mdp = zero_reward_mdp(361, 2, 2, 0.8);
    LearnerConfig config;
    config.total_steps = 500;
    config.m = 11;
    config.log_every = 100;
    const auto result = train(mdp, config);
    const std::string csv = train_log_to_csv(result.log);
    CHECK(csv.find("step,epsilon,sup_q_error,greedy_accuracy,"
                   "mean_min_mass_of_targets") != std::string::npos);
}
