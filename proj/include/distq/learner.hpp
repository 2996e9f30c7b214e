#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "distq/grid.hpp"
#include "distq/mdp.hpp"
#include "distq/operators.hpp"

namespace distq {

/// Softmax-parameterized categorical measures per (x,a); the prediction is
/// always a proper distribution regardless of the logits.
struct LearnerParams {
    int n_states = 0;
    int n_actions = 0;
    GridPtr grid;
    std::vector<double> logits; // [x][a][atom]

    LearnerParams() = default;
    LearnerParams(int ns, int na, GridPtr grid);

    std::size_t atom_count() const { return grid->size(); }
    double* logits_row(int x, int a) {
        return logits.data() +
               (static_cast<std::size_t>(x) * n_actions + a) * grid->size();
    }
    const double* logits_row(int x, int a) const {
        return logits.data() +
               (static_cast<std::size_t>(x) * n_actions + a) * grid->size();
    }

    std::vector<double> probs(int x, int a) const;
    double q(int x, int a) const;
    QFunction q_function() const;
};

/// One weighted summand of a sampled back-up target. The weight may be
/// negative; the measure itself is a proper distribution on the grid.
struct BackupTerm {
    double weight = 0.0;
    std::vector<double> masses;
};

/// Target-policy probabilities at a visited step; lets training mix the
/// greedy policy with each transition's stored behavior snapshot.
using PolicyAtStep = std::function<std::vector<double>(int state, const double* mu_probs)>;

/// Signed-weight decomposition of the n-step-truncated back-up along one
/// sampled segment: for t = 1..n-1 and every action b,
///   w_{t,b} = c_{1:t-1} (pi(b|X_t) - c(X_t,b) mu_t(b)),
/// plus the bootstrap closure w_{n,b} = c_{1:n-1} pi(b|X_n); measures are
/// pushforwards of the target-parameter predictions by (G_{0:t-1}, gamma^t),
/// projected onto the grid. For constant traces the weights sum to 1
/// exactly; Retrace weights are nonnegative and sum to 1 in expectation.
std::vector<BackupTerm> backup_terms(const TrajectorySegment& segment,
                                     const TraceSpec& trace, const Policy& pi,
                                     const LearnerParams& target_params, double gamma);

/// As above with a per-step target policy (used for target mixing).
std::vector<BackupTerm> backup_terms(const TrajectorySegment& segment,
                                     const TraceSpec& trace, const PolicyAtStep& pi_at,
                                     const LearnerParams& target_params, double gamma);

/// sum_t w_t * q_t; the assembled signed target measure.
std::vector<double> assemble_target(const std::vector<BackupTerm>& terms, std::size_t m);

/// Per-segment gradient wrt the start pair's logits:
/// sum_t w_t (p - q_t) from the per-term cross-entropy; plain gradient
/// descent with rate kappa, averaged over the batch.
void gradient_step(LearnerParams& params, const LearnerParams& target_params,
                   const std::vector<TrajectorySegment>& batch, const TraceSpec& trace,
                   const Policy& pi, double gamma, double kappa);

/// Target-mixing variant: pi_t = alpha*greedy(Q_params) + (1-alpha)*mu_t.
void gradient_step_mixed(LearnerParams& params, const LearnerParams& target_params,
                         const std::vector<TrajectorySegment>& batch,
                         const TraceSpec& trace, double alpha, double gamma,
                         double kappa);

struct LearnerConfig {
    double lambda = 0.4;
    double alpha = 0.6;  // target mixing
    double kappa = 1.0;  // learning rate (batch-averaged tabular updates)
    double tau = 0.05;   // Polyak target rate
    int n = 3;           // segment length
    // a small replay keeps the stored behavior snapshots close to the
    // current policy, which keeps the mixed target near-greedy late on
    int replay_capacity = 500;
    int batch_size = 16;
    double eps_max = 1.0;
    double eps_min = 0.01;
    double eval_epsilon = 0.001;
    int total_steps = 50000;
    int warmup_steps = 200;
    int log_every = 500;
    int m = 61;
    std::uint64_t seed = 0;
    TraceSpec trace() const { return TraceSpec::OffPolicyLambda(lambda); }
};

struct TrainLogRow {
    int step = 0;
    double epsilon = 0.0;
    double sup_q_error = 0.0;
    double greedy_accuracy = 0.0;
    double mean_min_mass_of_targets = 0.0;
};

struct TrainResult {
    LearnerParams params;
    std::vector<TrainLogRow> log;
    double final_sup_q_error = 0.0;
    double final_greedy_accuracy = 0.0;
    double eval_epsilon_return = 0.0; // mean Q under the eps=0.001 policy
    GridPtr grid;
};

/// Acts epsilon-greedy on the induced Q (linearly annealed), stores
/// transitions with behavior snapshots in a ring replay, trains on
/// contiguous length-n segments, Polyak-tracks the target parameters.
TrainResult train(const TabularMdp& mdp, const LearnerConfig& config);

/// CSV: step,epsilon,sup_q_error,greedy_accuracy,mean_min_mass_of_targets
std::string train_log_to_csv(const std::vector<TrainLogRow>& log);

} // namespace distq
