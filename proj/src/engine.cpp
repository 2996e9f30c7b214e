#include "distq/engine.hpp"

#include <cmath>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "distq/rng.hpp"
#include "distq/serialize.hpp"

namespace distq {

GridPtr run_grid(const TabularMdp& mdp, const RunConfig& config) {
    double lo = config.v_min, hi = config.v_max;
    const bool given = std::isfinite(lo) && std::isfinite(hi);
    if (!given) return default_grid_for(mdp, config.m);
    if (!config.allow_narrow_grid &&
        (lo > mdp.return_min() || hi < mdp.return_max()))
        throw std::invalid_argument(
            "run_grid: grid does not cover the MDP return range "
            "(pass allow_narrow_grid to override)");
    return make_uniform_grid(lo, hi, config.m);
}

namespace {

QFunction induced_q(const ReturnFunction& eta) {
    QFunction q(eta.n_states(), eta.n_actions());
    for (int x = 0; x < eta.n_states(); ++x)
        for (int a = 0; a < eta.n_actions(); ++a)
            q.at(x, a) = eta.at(x, a).mean();
    return q;
}

struct OracleBundle {
    ReturnFunction eta;
};

// evaluation target: projected DP fixed point (default) or MC returns of pi
OracleBundle make_eval_oracle(const TabularMdp& mdp, const Policy& pi,
                              const GridPtr& grid, const RunConfig& config) {
    if (config.mc_oracle) {
        auto rng = make_rng(config.seed, 0x0eac1eull);
        return {mc_return_oracle(mdp, pi, grid, config.oracle_n_traj, 0, rng)};
    }
    return {eta_pi_dp(mdp, pi, grid, config.dp_oracle_tol)};
}

// control target: optimal policy from expected value iteration, then MC
OracleBundle make_control_oracle(const TabularMdp& mdp, const GridPtr& grid,
                                 const RunConfig& config) {
    const Policy pi_star = greedy_policy(optimal_q(mdp));
    auto rng = make_rng(config.seed, 0x0eac1eull);
    return {mc_return_oracle(mdp, pi_star, grid, config.oracle_n_traj, 0, rng)};
}

IterationLog log_state(int k, const ReturnFunction& eta, const ReturnFunction& oracle,
                       double step_change, double eps, const RunConfig& config) {
    IterationLog row;
    row.k = k;
    row.sup_l2_to_oracle = sup_lp_distance(eta, oracle, 2.0);
    row.pointwise_l2_at_x0a0 =
        lp_distance(eta.at(config.tracked_x, config.tracked_a),
                    oracle.at(config.tracked_x, config.tracked_a), 2.0);
    row.min_mass_overall = eta.min_mass();
    row.total_mass_error = eta.max_unit_mass_error();
    row.step_change = step_change;
    row.target_policy_epsilon = eps;
    return row;
}

struct LoopHooks {
    std::vector<std::vector<double>>* tracked_masses = nullptr;
    const ReturnFunction* oracle_override = nullptr;
};

RunResult run_loop(const TabularMdp& mdp, const Policy* fixed_pi, const Policy& mu,
                   const RunConfig& config, const LoopHooks& hooks = {}) {
    mdp.validate();
    mu.validate();
    if (config.k_max < 1) throw std::invalid_argument("run: k_max must be >= 1");
    if (config.alpha < 0.0 || config.alpha > 1.0)
        throw std::invalid_argument("run: alpha must be in [0,1]");
    if (config.tracked_x < 0 || config.tracked_x >= mdp.n_states ||
        config.tracked_a < 0 || config.tracked_a >= mdp.n_actions)
        throw std::invalid_argument("run: tracked (x,a) out of range");

    const GridPtr grid = run_grid(mdp, config);
    const bool is_control = config.mode == RunConfig::Mode::control;
    OracleBundle oracle;
    if (hooks.oracle_override) {
        if (!same_grid(hooks.oracle_override->grid_ptr(), grid))
            throw std::invalid_argument("run: oracle grid mismatch");
        oracle.eta = *hooks.oracle_override;
    } else {
        oracle = is_control ? make_control_oracle(mdp, grid, config)
                            : make_eval_oracle(mdp, *fixed_pi, grid, config);
    }

    ReturnFunction eta = ReturnFunction::uniform(grid, mdp.n_states, mdp.n_actions);
    RunResult result;
    result.grid = grid;

    auto target_policy = [&](const ReturnFunction& cur) -> Policy {
        if (!is_control) return *fixed_pi;
        return mix_policies(config.alpha, greedy_policy(induced_q(cur)), mu);
    };

    Policy pi = target_policy(eta);
    result.logs.push_back(
        log_state(0, eta, oracle.eta, 0.0, policy_l1_distance(pi, mu), config));
    if (hooks.tracked_masses)
        hooks.tracked_masses->push_back(
            eta.at(config.tracked_x, config.tracked_a).masses());

    double worst_clip = 0.0;
    for (int k = 1; k <= config.k_max; ++k) {
        ApplyStats stats;
        ReturnFunction next;
        try {
            next = apply_operator(mdp, pi, mu, config.trace, eta, config.solver, &stats);
        } catch (const std::exception& e) {
            throw std::runtime_error("run: operator failed at iteration " +
                                     std::to_string(k) + ": " + e.what());
        }
        worst_clip = std::max(worst_clip, stats.clipped_mass);
        const double change = sup_lp_distance(next, eta, 2.0);
        eta = std::move(next);
        pi = target_policy(eta);
        result.logs.push_back(
            log_state(k, eta, oracle.eta, change, policy_l1_distance(pi, mu), config));
        if (hooks.tracked_masses)
            hooks.tracked_masses->push_back(
                eta.at(config.tracked_x, config.tracked_a).masses());
        if (config.stop_tol > 0.0 && change < config.stop_tol) break;
    }
    if (worst_clip > 1e-6 && !config.quiet)
        std::cerr << "[distq] warning: pushforward clipped mass up to " << worst_clip
                  << " in one application; grid may be too narrow\n";

    result.final_eta = std::move(eta);
    result.oracle = std::move(oracle.eta);
    return result;
}

} // namespace

RunResult evaluate(const TabularMdp& mdp, const Policy& pi, const Policy& mu,
                   const RunConfig& config, const ReturnFunction* oracle_override) {
    if (config.mode == RunConfig::Mode::control)
        throw std::invalid_argument("evaluate: config.mode must be evaluate");
    pi.validate();
    LoopHooks hooks;
    hooks.oracle_override = oracle_override;
    return run_loop(mdp, &pi, mu, config, hooks);
}

RunResult control(const TabularMdp& mdp, const Policy& mu, const RunConfig& config,
                  const ReturnFunction* oracle_override) {
    RunConfig c = config;
    c.mode = RunConfig::Mode::control;
    LoopHooks hooks;
    hooks.oracle_override = oracle_override;
    return run_loop(mdp, nullptr, mu, c, hooks);
}

Figure1Trace figure1_trace(const TabularMdp& mdp, const Policy& pi, const Policy& mu,
                           const RunConfig& config) {
    Figure1Trace trace;
    LoopHooks hooks;
    hooks.tracked_masses = &trace.masses_per_k;
    RunConfig c = config;
    c.mode = RunConfig::Mode::evaluate;
    pi.validate();
    RunResult result = run_loop(mdp, &pi, mu, c, hooks);
    trace.logs = std::move(result.logs);
    trace.grid = result.grid;
    return trace;
}

std::string logs_to_csv(const std::vector<IterationLog>& logs) {
    std::ostringstream out;
    out << "# distq run csv v1\n";
    out << "k,sup_l2,pt_l2,min_mass,mass_err,step_change,policy_eps\n";
    for (const auto& row : logs)
        out << row.k << ',' << format_double(row.sup_l2_to_oracle) << ','
            << format_double(row.pointwise_l2_at_x0a0) << ','
            << format_double(row.min_mass_overall) << ','
            << format_double(row.total_mass_error) << ','
            << format_double(row.step_change) << ','
            << format_double(row.target_policy_epsilon) << '\n';
    return out.str();
}

} // namespace distq
