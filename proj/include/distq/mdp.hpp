#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "distq/grid.hpp"

namespace distq {

/// Finite MDP with deterministic per-(state,action) rewards and a dense
/// transition tensor. Immutable after construction.
struct TabularMdp {
    int n_states = 0;
    int n_actions = 0;
    double gamma = 0.0;
    std::vector<double> transition; // [x][a][x'], rows sum to 1
    std::vector<double> reward;     // [x][a]

    double p(int x, int a, int y) const {
        return transition[(static_cast<std::size_t>(x) * n_actions + a) * n_states + y];
    }
    double r(int x, int a) const {
        return reward[static_cast<std::size_t>(x) * n_actions + a];
    }
    std::span<const double> next_state_row(int x, int a) const {
        return {transition.data() + (static_cast<std::size_t>(x) * n_actions + a) * n_states,
                static_cast<std::size_t>(n_states)};
    }

    double min_reward() const;
    double max_reward() const;
    double return_min() const { return min_reward() / (1.0 - gamma); }
    double return_max() const { return max_reward() / (1.0 - gamma); }

    /// Throws when rows do not sum to 1 (1e-12), probabilities are negative,
    /// rewards are non-finite, or gamma is outside [0,1).
    void validate() const;
};

/// Transition rows ~ Dirichlet(rate,...,rate) via normalized Gamma draws,
/// rewards ~ N(0,1) fixed per (x,a). Deterministic given the seed.
TabularMdp random_mdp(std::uint64_t seed, int n_states, int n_actions,
                      double dirichlet_rate, double gamma);

/// Uniform grid covering [R_min/(1-gamma), R_max/(1-gamma)].
/// Degenerate all-zero-reward MDPs get a unit pad so the grid is valid.
GridPtr default_grid_for(const TabularMdp& mdp, std::size_t m);

struct Policy {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> probs; // [x][a], rows sum to 1

    double p(int x, int a) const {
        return probs[static_cast<std::size_t>(x) * n_actions + a];
    }
    std::span<const double> row(int x) const {
        return {probs.data() + static_cast<std::size_t>(x) * n_actions,
                static_cast<std::size_t>(n_actions)};
    }
    void validate() const;
};

struct QFunction {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> values; // [x][a]

    QFunction() = default;
    QFunction(int ns, int na)
        : n_states(ns), n_actions(na),
          values(static_cast<std::size_t>(ns) * na, 0.0) {}

    double& at(int x, int a) { return values[static_cast<std::size_t>(x) * n_actions + a]; }
    double at(int x, int a) const { return values[static_cast<std::size_t>(x) * n_actions + a]; }
};

Policy uniform_policy(int n_states, int n_actions);
Policy uniform_policy(const TabularMdp& mdp);

/// Mass 1 on argmax_a Q(x,a); ties broken by lowest action index.
Policy greedy_policy(const QFunction& q);
Policy epsilon_greedy(const QFunction& q, double epsilon);

/// alpha * g + (1 - alpha) * mu, rowwise.
Policy mix_policies(double alpha, const Policy& g, const Policy& mu);

/// max_x sum_a |pi(a|x) - mu(a|x)|; the off-policyness epsilon.
double policy_l1_distance(const Policy& pi, const Policy& mu);

struct Step {
    int state = 0;
    int action = 0;
    double reward = 0.0;
    std::vector<double> behavior_probs; // behavior snapshot at `state`
};

struct TrajectorySegment {
    std::vector<Step> steps; // length n >= 1
    int next_state = 0;      // X_n
};

/// Samples n steps under mu starting from the forced pair (x0, a0),
/// recording mu's action probabilities at each visited state.
TrajectorySegment sample_segment(const TabularMdp& mdp, const Policy& mu,
                                 int x0, int a0, int n, std::mt19937_64& rng);

/// Smallest horizon T with gamma^T * max|r| / (1-gamma) below
/// tail_tol * grid span.
int mc_horizon(const TabularMdp& mdp, const AtomGrid& grid, double tail_tol = 1e-4);

/// Empirical return distribution per (x,a): n_traj truncated returns
/// sum_{t<T} gamma^t R_t under pi, projected onto the grid.
/// horizon == 0 selects mc_horizon() automatically.
ReturnFunction mc_return_oracle(const TabularMdp& mdp, const Policy& pi, GridPtr grid,
                                int n_traj, int horizon, std::mt19937_64& rng,
                                double tail_tol = 1e-4);

/// Iterates eta <- Pi_c T^pi eta from the uniform grid measure until the
/// sup-l2 change drops below tol; the projected categorical evaluation
/// target. Throws if max_iter is exceeded.
ReturnFunction eta_pi_dp(const TabularMdp& mdp, const Policy& pi, GridPtr grid,
                         double tol, int max_iter = 100000);

/// Q^pi by direct linear solve of (I - gamma P^pi) Q = r.
QFunction exact_q(const TabularMdp& mdp, const Policy& pi);

/// Q* by value iteration on the expected MDP.
QFunction optimal_q(const TabularMdp& mdp, double tol = 1e-10, int max_iter = 1000000);

} // namespace distq
