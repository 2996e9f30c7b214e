#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "distq/grid.hpp"
#include "distq/mdp.hpp"
#include "distq/operators.hpp"

namespace distq {

/// Everything the tabular experiments plot, one row per iteration.
struct IterationLog {
    int k = 0;
    double sup_l2_to_oracle = 0.0;
    double pointwise_l2_at_x0a0 = 0.0;
    double min_mass_overall = 0.0;
    double total_mass_error = 0.0;
    double step_change = 0.0;
    double target_policy_epsilon = 0.0;
};

struct RunConfig {
    enum class Mode { evaluate, control };
    Mode mode = Mode::evaluate;
    TraceSpec trace = TraceSpec::OneStep();

    // grid: m atoms over [v_min, v_max]; NaN bounds select the MDP return
    // range. A narrower grid is rejected unless allow_narrow_grid is set.
    int m = 10;
    double v_min = std::numeric_limits<double>::quiet_NaN();
    double v_max = std::numeric_limits<double>::quiet_NaN();
    bool allow_narrow_grid = false;

    int k_max = 100;
    double stop_tol = 0.0; // 0: always run to k_max
    double alpha = 1.0;    // control target mixing; 1 = pure greedy

    // oracle: evaluate defaults to the projected DP fixed point, control to
    // Monte-Carlo returns of the optimal policy projected onto the grid.
    bool mc_oracle = false; // force the MC oracle for evaluate as well
    int oracle_n_traj = 2000;
    double dp_oracle_tol = 1e-10;

    std::uint64_t seed = 0;
    int tracked_x = 0;
    int tracked_a = 0;

    SolverOptions solver;
    bool quiet = false; // suppress clipped-mass warnings
};

struct RunResult {
    std::vector<IterationLog> logs; // k = 0 .. k_max
    ReturnFunction final_eta;
    ReturnFunction oracle;
    GridPtr grid;
};

GridPtr run_grid(const TabularMdp& mdp, const RunConfig& config);

/// eta_{k+1} = Pi_c O eta_k from the uniform initial iterate, with fixed
/// target pi and behavior mu; logs distances against the oracle eta^pi.
/// A precomputed oracle (same grid) may be passed to share work across runs.
RunResult evaluate(const TabularMdp& mdp, const Policy& pi, const Policy& mu,
                   const RunConfig& config,
                   const ReturnFunction* oracle_override = nullptr);

/// At every step the target is pi_k = alpha*greedy(Q_{eta_k}) + (1-alpha)*mu;
/// distances are measured against the optimal-policy return oracle.
RunResult control(const TabularMdp& mdp, const Policy& mu, const RunConfig& config,
                  const ReturnFunction* oracle_override = nullptr);

struct Figure1Trace {
    std::vector<std::vector<double>> masses_per_k; // tracked entry, k = 0..k_max
    std::vector<IterationLog> logs;
    GridPtr grid;
};

/// Full mass vector of one tracked (x,a) at every iteration of an
/// evaluation run; feeds the bar-panel figure.
Figure1Trace figure1_trace(const TabularMdp& mdp, const Policy& pi, const Policy& mu,
                           const RunConfig& config);

/// CSV with schema comment: k,sup_l2,pt_l2,min_mass,mass_err,step_change,policy_eps
std::string logs_to_csv(const std::vector<IterationLog>& logs);

} // namespace distq
