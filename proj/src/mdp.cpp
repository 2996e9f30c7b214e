#include "distq/mdp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "backup_detail.hpp"

namespace distq {

double TabularMdp::min_reward() const {
    return *std::min_element(reward.begin(), reward.end());
}

double TabularMdp::max_reward() const {
    return *std::max_element(reward.begin(), reward.end());
}

void TabularMdp::validate() const {
    if (n_states <= 0 || n_actions <= 0)
        throw std::invalid_argument("TabularMdp: non-positive shape");
    if (!(gamma >= 0.0) || gamma >= 1.0)
        throw std::invalid_argument("TabularMdp: gamma must be in [0,1)");
    if (transition.size() != static_cast<std::size_t>(n_states) * n_actions * n_states ||
        reward.size() != static_cast<std::size_t>(n_states) * n_actions)
        throw std::invalid_argument("TabularMdp: tensor size mismatch");
    for (double v : reward)
        if (!std::isfinite(v)) throw std::invalid_argument("TabularMdp: non-finite reward");
    for (int x = 0; x < n_states; ++x) {
        for (int a = 0; a < n_actions; ++a) {
            double s = 0.0;
            for (int y = 0; y < n_states; ++y) {
                const double v = p(x, a, y);
                if (v < 0.0)
                    throw std::invalid_argument("TabularMdp: negative transition probability");
                s += v;
            }
            if (std::abs(s - 1.0) > 1e-12)
                throw std::invalid_argument("TabularMdp: transition row does not sum to 1");
        }
    }
}

TabularMdp random_mdp(std::uint64_t seed, int n_states, int n_actions,
                      double dirichlet_rate, double gamma) {
    if (n_states <= 0 || n_actions <= 0)
        throw std::invalid_argument("random_mdp: non-positive shape");
    if (!(dirichlet_rate > 0.0))
        throw std::invalid_argument("random_mdp: dirichlet_rate must be > 0");
    if (!(gamma >= 0.0) || gamma >= 1.0)
        throw std::invalid_argument("random_mdp: gamma must be in [0,1)");

    std::mt19937_64 rng(seed);
    std::gamma_distribution<double> gamma_draw(dirichlet_rate, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    TabularMdp mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.gamma = gamma;
    mdp.transition.resize(static_cast<std::size_t>(n_states) * n_actions * n_states);
    mdp.reward.resize(static_cast<std::size_t>(n_states) * n_actions);

    for (int x = 0; x < n_states; ++x) {
        for (int a = 0; a < n_actions; ++a) {
            double* row = mdp.transition.data() +
                          (static_cast<std::size_t>(x) * n_actions + a) * n_states;
            double sum = 0.0;
            do {
                sum = 0.0;
                for (int y = 0; y < n_states; ++y) {
                    row[y] = gamma_draw(rng);
                    sum += row[y];
                }
            } while (!(sum > 0.0)); // guards against full underflow at tiny rates
            for (int y = 0; y < n_states; ++y) row[y] /= sum;
            // renormalize exactly so validate()'s 1e-12 check is safe
            double s2 = 0.0;
            for (int y = 0; y < n_states; ++y) s2 += row[y];
            for (int y = 0; y < n_states; ++y) row[y] /= s2;
        }
    }
    for (int x = 0; x < n_states; ++x)
        for (int a = 0; a < n_actions; ++a)
            mdp.reward[static_cast<std::size_t>(x) * n_actions + a] = normal(rng);
    return mdp;
}

GridPtr default_grid_for(const TabularMdp& mdp, std::size_t m) {
    double lo = mdp.return_min();
    double hi = mdp.return_max();
    if (!(lo < hi)) {
        lo -= 1.0;
        hi += 1.0;
    }
    return make_uniform_grid(lo, hi, m);
}

void Policy::validate() const {
    if (probs.size() != static_cast<std::size_t>(n_states) * n_actions)
        throw std::invalid_argument("Policy: size mismatch");
    for (int x = 0; x < n_states; ++x) {
        double s = 0.0;
        for (int a = 0; a < n_actions; ++a) {
            if (p(x, a) < 0.0) throw std::invalid_argument("Policy: negative probability");
            s += p(x, a);
        }
        if (std::abs(s - 1.0) > 1e-12)
            throw std::invalid_argument("Policy: row does not sum to 1");
    }
}

Policy uniform_policy(int n_states, int n_actions) {
    Policy pi{n_states, n_actions,
              std::vector<double>(static_cast<std::size_t>(n_states) * n_actions,
                                  1.0 / n_actions)};
    return pi;
}

Policy uniform_policy(const TabularMdp& mdp) {
    return uniform_policy(mdp.n_states, mdp.n_actions);
}

Policy greedy_policy(const QFunction& q) {
    Policy pi{q.n_states, q.n_actions,
              std::vector<double>(static_cast<std::size_t>(q.n_states) * q.n_actions, 0.0)};
    for (int x = 0; x < q.n_states; ++x) {
        int best = 0;
        for (int a = 1; a < q.n_actions; ++a)
            if (q.at(x, a) > q.at(x, best)) best = a;
        pi.probs[static_cast<std::size_t>(x) * q.n_actions + best] = 1.0;
    }
    return pi;
}

Policy epsilon_greedy(const QFunction& q, double epsilon) {
    if (epsilon < 0.0 || epsilon > 1.0)
        throw std::invalid_argument("epsilon_greedy: epsilon must be in [0,1]");
    return mix_policies(1.0 - epsilon, greedy_policy(q),
                        uniform_policy(q.n_states, q.n_actions));
}

Policy mix_policies(double alpha, const Policy& g, const Policy& mu) {
    if (alpha < 0.0 || alpha > 1.0)
        throw std::invalid_argument("mix_policies: alpha must be in [0,1]");
    if (g.n_states != mu.n_states || g.n_actions != mu.n_actions)
        throw std::invalid_argument("mix_policies: shape mismatch");
    Policy out{g.n_states, g.n_actions, std::vector<double>(g.probs.size())};
    for (std::size_t i = 0; i < g.probs.size(); ++i)
        out.probs[i] = alpha * g.probs[i] + (1.0 - alpha) * mu.probs[i];
    return out;
}

double policy_l1_distance(const Policy& pi, const Policy& mu) {
    if (pi.n_states != mu.n_states || pi.n_actions != mu.n_actions)
        throw std::invalid_argument("policy_l1_distance: shape mismatch");
    double worst = 0.0;
    for (int x = 0; x < pi.n_states; ++x) {
        double s = 0.0;
        for (int a = 0; a < pi.n_actions; ++a)
            s += std::abs(pi.p(x, a) - mu.p(x, a));
        worst = std::max(worst, s);
    }
    return worst;
}

namespace {

int sample_index(std::span<const double> probs, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

} // namespace

TrajectorySegment sample_segment(const TabularMdp& mdp, const Policy& mu,
                                 int x0, int a0, int n, std::mt19937_64& rng) {
    if (n < 1) throw std::invalid_argument("sample_segment: n must be >= 1");
    if (x0 < 0 || x0 >= mdp.n_states || a0 < 0 || a0 >= mdp.n_actions)
        throw std::invalid_argument("sample_segment: start pair out of range");
    TrajectorySegment seg;
    seg.steps.reserve(n);
    int x = x0;
    int a = a0;
    for (int t = 0; t < n; ++t) {
        Step step;
        step.state = x;
        step.action = a;
        step.reward = mdp.r(x, a);
        step.behavior_probs.assign(mu.row(x).begin(), mu.row(x).end());
        seg.steps.push_back(std::move(step));
        x = sample_index(mdp.next_state_row(seg.steps.back().state, a), rng);
        if (t + 1 < n) a = sample_index(mu.row(x), rng);
    }
    seg.next_state = x;
    return seg;
}

int mc_horizon(const TabularMdp& mdp, const AtomGrid& grid, double tail_tol) {
    const double max_abs_r =
        std::max(std::abs(mdp.min_reward()), std::abs(mdp.max_reward()));
    const double target = tail_tol * grid.span();
    if (max_abs_r == 0.0 || mdp.gamma == 0.0) return 1;
    double tail = max_abs_r / (1.0 - mdp.gamma);
    int horizon = 1;
    while (tail * std::pow(mdp.gamma, horizon) >= target && horizon < 100000)
        ++horizon;
    return horizon;
}

ReturnFunction mc_return_oracle(const TabularMdp& mdp, const Policy& pi, GridPtr grid,
                                int n_traj, int horizon, std::mt19937_64& rng,
                                double tail_tol) {
    if (n_traj < 1) throw std::invalid_argument("mc_return_oracle: n_traj must be >= 1");
    if (horizon <= 0) horizon = mc_horizon(mdp, *grid, tail_tol);
    ReturnFunction out(grid, mdp.n_states, mdp.n_actions);
    const double w = 1.0 / static_cast<double>(n_traj);
    ParticleSet particles(static_cast<std::size_t>(n_traj));
    for (int x0 = 0; x0 < mdp.n_states; ++x0) {
        for (int a0 = 0; a0 < mdp.n_actions; ++a0) {
            for (int k = 0; k < n_traj; ++k) {
                double g = 0.0, disc = 1.0;
                int x = x0, a = a0;
                for (int t = 0; t < horizon; ++t) {
                    g += disc * mdp.r(x, a);
                    disc *= mdp.gamma;
                    x = sample_index(mdp.next_state_row(x, a), rng);
                    a = sample_index(pi.row(x), rng);
                }
                particles[k] = {g, w};
            }
            out.at(x0, a0) = project(grid, particles);
        }
    }
    return out;
}

ReturnFunction eta_pi_dp(const TabularMdp& mdp, const Policy& pi, GridPtr grid,
                         double tol, int max_iter) {
    if (!(tol > 0.0)) throw std::invalid_argument("eta_pi_dp: tol must be > 0");
    const auto pushes = detail::make_pushforwards(mdp, grid, mdp.gamma);
    ReturnFunction eta = ReturnFunction::uniform(grid, mdp.n_states, mdp.n_actions);
    for (int k = 0; k < max_iter; ++k) {
        ReturnFunction next = detail::one_step_backup(mdp, pi, eta, pushes);
        const double change = sup_lp_distance(next, eta, 2.0);
        eta = std::move(next);
        if (change < tol) return eta;
    }
    throw std::runtime_error("eta_pi_dp: no convergence within iteration cap");
}

QFunction exact_q(const TabularMdp& mdp, const Policy& pi) {
    const int n = mdp.n_states * mdp.n_actions;
    Eigen::MatrixXd sys = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd rhs(n);
    for (int x = 0; x < mdp.n_states; ++x) {
        for (int a = 0; a < mdp.n_actions; ++a) {
            const int row = x * mdp.n_actions + a;
            rhs(row) = mdp.r(x, a);
            for (int y = 0; y < mdp.n_states; ++y)
                for (int b = 0; b < mdp.n_actions; ++b)
                    sys(row, y * mdp.n_actions + b) -=
                        mdp.gamma * mdp.p(x, a, y) * pi.p(y, b);
        }
    }
    const Eigen::VectorXd q = sys.partialPivLu().solve(rhs);
    QFunction out(mdp.n_states, mdp.n_actions);
    for (int i = 0; i < n; ++i) out.values[i] = q(i);
    return out;
}

QFunction optimal_q(const TabularMdp& mdp, double tol, int max_iter) {
    QFunction q(mdp.n_states, mdp.n_actions);
    std::vector<double> v(mdp.n_states, 0.0);
    for (int k = 0; k < max_iter; ++k) {
        double change = 0.0;
        for (int x = 0; x < mdp.n_states; ++x) {
            for (int a = 0; a < mdp.n_actions; ++a) {
                double backup = mdp.r(x, a);
                const auto row = mdp.next_state_row(x, a);
                for (int y = 0; y < mdp.n_states; ++y)
                    backup += mdp.gamma * row[y] * v[y];
                change = std::max(change, std::abs(backup - q.at(x, a)));
                q.at(x, a) = backup;
            }
        }
        for (int x = 0; x < mdp.n_states; ++x) {
            double best = q.at(x, 0);
            for (int a = 1; a < mdp.n_actions; ++a) best = std::max(best, q.at(x, a));
            v[x] = best;
        }
        if (change < tol) return q;
    }
    throw std::runtime_error("optimal_q: no convergence within iteration cap");
}

} // namespace distq
