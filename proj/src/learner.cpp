#include "distq/learner.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "distq/rng.hpp"
#include "distq/serialize.hpp"

namespace distq {

LearnerParams::LearnerParams(int ns, int na, GridPtr grid_)
    : n_states(ns), n_actions(na), grid(std::move(grid_)),
      logits(static_cast<std::size_t>(ns) * na * grid->size(), 0.0) {}

std::vector<double> LearnerParams::probs(int x, int a) const {
    const std::size_t m = grid->size();
    const double* row = logits_row(x, a);
    double hi = row[0];
    for (std::size_t i = 1; i < m; ++i) hi = std::max(hi, row[i]);
    std::vector<double> p(m);
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        p[i] = std::exp(row[i] - hi);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}

double LearnerParams::q(int x, int a) const {
    const auto p = probs(x, a);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * (*grid)[i];
    return s;
}

QFunction LearnerParams::q_function() const {
    QFunction q(n_states, n_actions);
    for (int x = 0; x < n_states; ++x)
        for (int a = 0; a < n_actions; ++a) q.at(x, a) = this->q(x, a);
    return q;
}

namespace {

double step_trace(const TraceSpec& trace, double pi_b, double mu_b) {
    switch (trace.kind) {
        case TraceSpec::Kind::on_policy_lambda:
        case TraceSpec::Kind::off_policy_lambda:
        case TraceSpec::Kind::peng:
        case TraceSpec::Kind::alt_lambda:
            return trace.lambda;
        case TraceSpec::Kind::retrace:
            if (mu_b == 0.0) {
                if (pi_b > 0.0)
                    throw SupportViolation(
                        "backup_terms: pi(b|x) > 0 where mu(b|x) = 0");
                return 0.0;
            }
            return std::min(trace.c_bar, pi_b / mu_b);
        default:
            throw std::invalid_argument("backup_terms: variant has no per-step trace");
    }
}

std::vector<BackupTerm> backup_terms_impl(const TrajectorySegment& segment,
                                          const TraceSpec& trace,
                                          const PolicyAtStep& pi_at,
                                          const LearnerParams& target, double gamma) {
    if (segment.steps.empty())
        throw std::invalid_argument("backup_terms: empty segment");
    const int n = static_cast<int>(segment.steps.size());
    const int na = target.n_actions;
    std::vector<BackupTerm> terms;
    terms.reserve(static_cast<std::size_t>(n) * na);

    double trace_prod = 1.0; // c_{1:t-1} along the sampled actions
    double g = segment.steps[0].reward;
    double disc = gamma; // gamma^t

    for (int t = 1; t < n; ++t) {
        const Step& step = segment.steps[t];
        const auto pi_row = pi_at(step.state, step.behavior_probs.data());
        const Pushforward push(target.grid, g, disc);
        for (int b = 0; b < na; ++b) {
            const double c_b = step_trace(trace, pi_row[b], step.behavior_probs[b]);
            BackupTerm term;
            term.weight = trace_prod * (pi_row[b] - c_b * step.behavior_probs[b]);
            term.masses = push.apply(target.probs(step.state, b));
            terms.push_back(std::move(term));
        }
        trace_prod *=
            step_trace(trace, pi_row[step.action], step.behavior_probs[step.action]);
        g += disc * step.reward;
        disc *= gamma;
    }

    // bootstrap closure at X_n: the full pi-mixture, no subtraction
    const int xn = segment.next_state;
    const auto pi_row = pi_at(xn, nullptr);
    const Pushforward push(target.grid, g, disc);
    for (int b = 0; b < na; ++b) {
        BackupTerm term;
        term.weight = trace_prod * pi_row[b];
        term.masses = push.apply(target.probs(xn, b));
        terms.push_back(std::move(term));
    }
    return terms;
}

// greedy action of the online parameters, ties to the lowest index
int greedy_action(const LearnerParams& params, int state) {
    int best = 0;
    double best_q = params.q(state, 0);
    for (int a = 1; a < params.n_actions; ++a) {
        const double qa = params.q(state, a);
        if (qa > best_q) {
            best_q = qa;
            best = a;
        }
    }
    return best;
}

// Accumulates sum_t w_t (p - q_t) into the start pair's logit rows.
// Returns the mean over the batch of the assembled target's min mass.
double gradient_step_impl(LearnerParams& params, const LearnerParams& target,
                          const std::vector<TrajectorySegment>& batch,
                          const TraceSpec& trace, const PolicyAtStep& pi_at,
                          double gamma, double kappa) {
    if (batch.empty()) throw std::invalid_argument("gradient_step: empty batch");
    const std::size_t m = params.grid->size();
    std::vector<double> grad(params.logits.size(), 0.0);
    double min_mass_acc = 0.0;
    for (const auto& segment : batch) {
        const auto terms = backup_terms_impl(segment, trace, pi_at, target, gamma);
        const int x = segment.steps[0].state;
        const int a = segment.steps[0].action;
        const auto p = params.probs(x, a);
        double* grow = grad.data() +
                       (static_cast<std::size_t>(x) * params.n_actions + a) * m;
        double weight_sum = 0.0;
        std::vector<double> assembled(m, 0.0);
        for (const auto& term : terms) {
            weight_sum += term.weight;
            for (std::size_t i = 0; i < m; ++i)
                assembled[i] += term.weight * term.masses[i];
        }
        // sum_t w_t (p - q_t) = (sum w) p - sum w q
        for (std::size_t i = 0; i < m; ++i)
            grow[i] += weight_sum * p[i] - assembled[i];
        min_mass_acc += *std::min_element(assembled.begin(), assembled.end());
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < params.logits.size(); ++i)
        params.logits[i] -= kappa * inv * grad[i];
    return min_mass_acc * inv;
}

PolicyAtStep fixed_policy_provider(const Policy& pi) {
    return [&pi](int state, const double*) {
        return std::vector<double>(pi.row(state).begin(), pi.row(state).end());
    };
}

} // namespace

std::vector<BackupTerm> backup_terms(const TrajectorySegment& segment,
                                     const TraceSpec& trace, const Policy& pi,
                                     const LearnerParams& target_params, double gamma) {
    return backup_terms_impl(segment, trace, fixed_policy_provider(pi), target_params,
                             gamma);
}

std::vector<BackupTerm> backup_terms(const TrajectorySegment& segment,
                                     const TraceSpec& trace, const PolicyAtStep& pi_at,
                                     const LearnerParams& target_params, double gamma) {
    return backup_terms_impl(segment, trace, pi_at, target_params, gamma);
}

std::vector<double> assemble_target(const std::vector<BackupTerm>& terms, std::size_t m) {
    std::vector<double> out(m, 0.0);
    for (const auto& term : terms)
        for (std::size_t i = 0; i < m; ++i) out[i] += term.weight * term.masses[i];
    return out;
}

void gradient_step(LearnerParams& params, const LearnerParams& target_params,
                   const std::vector<TrajectorySegment>& batch, const TraceSpec& trace,
                   const Policy& pi, double gamma, double kappa) {
    gradient_step_impl(params, target_params, batch, trace, fixed_policy_provider(pi),
                       gamma, kappa);
}

void gradient_step_mixed(LearnerParams& params, const LearnerParams& target_params,
                         const std::vector<TrajectorySegment>& batch,
                         const TraceSpec& trace, double alpha, double gamma,
                         double kappa) {
    PolicyAtStep pi_at = [&params, alpha](int state, const double* mu_probs) {
        std::vector<double> row(params.n_actions, 0.0);
        const int g = greedy_action(params, state);
        if (mu_probs) {
            for (int b = 0; b < params.n_actions; ++b)
                row[b] = (1.0 - alpha) * mu_probs[b];
            row[g] += alpha;
        } else {
            // bootstrap state has no stored snapshot; fall back to greedy
            // mixed with uniform
            for (int b = 0; b < params.n_actions; ++b)
                row[b] = (1.0 - alpha) / params.n_actions;
            row[g] += alpha;
        }
        return row;
    };
    gradient_step_impl(params, target_params, batch, trace, pi_at, gamma, kappa);
}

TrainResult train(const TabularMdp& mdp, const LearnerConfig& config) {
    mdp.validate();
    if (config.n < 1) throw std::invalid_argument("train: n must be >= 1");
    if (config.batch_size < 1 || config.replay_capacity < config.n + 1)
        throw std::invalid_argument("train: bad replay configuration");

    const GridPtr grid = default_grid_for(mdp, config.m);
    LearnerParams params(mdp.n_states, mdp.n_actions, grid);
    LearnerParams target = params;
    const TraceSpec trace = config.trace();
    const QFunction q_star = optimal_q(mdp);
    const Policy pi_star = greedy_policy(q_star);

    auto rng = make_rng(config.seed, 0x7ea12ull);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<Step> replay(static_cast<std::size_t>(config.replay_capacity));
    long long written = 0; // stream position

    TrainResult result;
    result.grid = grid;

    auto metrics = [&](int step, double eps, double mean_min_mass) {
        TrainLogRow row;
        row.step = step;
        row.epsilon = eps;
        double sup_err = 0.0;
        int hits = 0;
        const QFunction q_theta = params.q_function();
        for (int x = 0; x < mdp.n_states; ++x) {
            int best = 0;
            for (int a = 0; a < mdp.n_actions; ++a) {
                sup_err = std::max(sup_err, std::abs(q_theta.at(x, a) - q_star.at(x, a)));
                if (q_theta.at(x, a) > q_theta.at(x, best)) best = a;
            }
            int best_star = 0;
            for (int a = 1; a < mdp.n_actions; ++a)
                if (q_star.at(x, a) > q_star.at(x, best_star)) best_star = a;
            if (best == best_star) ++hits;
        }
        row.sup_q_error = sup_err;
        row.greedy_accuracy = static_cast<double>(hits) / mdp.n_states;
        row.mean_min_mass_of_targets = mean_min_mass;
        return row;
    };

    int x = static_cast<int>(rng() % static_cast<std::uint64_t>(mdp.n_states));
    double last_mean_min_mass = 0.0;

    for (int step = 0; step < config.total_steps; ++step) {
        const double frac =
            config.total_steps > 1
                ? static_cast<double>(step) / static_cast<double>(config.total_steps - 1)
                : 1.0;
        const double eps = config.eps_max + frac * (config.eps_min - config.eps_max);

        // epsilon-greedy behavior snapshot at the current state
        std::vector<double> behavior(mdp.n_actions, eps / mdp.n_actions);
        behavior[greedy_action(params, x)] += 1.0 - eps;
        double u = unit(rng), acc = 0.0;
        int action = mdp.n_actions - 1;
        for (int b = 0; b < mdp.n_actions; ++b) {
            acc += behavior[b];
            if (u < acc) {
                action = b;
                break;
            }
        }

        Step s;
        s.state = x;
        s.action = action;
        s.reward = mdp.r(x, action);
        s.behavior_probs = behavior;
        replay[static_cast<std::size_t>(written % config.replay_capacity)] = std::move(s);
        ++written;

        // next state
        const auto row = mdp.next_state_row(x, action);
        u = unit(rng);
        acc = 0.0;
        x = mdp.n_states - 1;
        for (int y = 0; y < mdp.n_states; ++y) {
            acc += row[y];
            if (u < acc) {
                x = y;
                break;
            }
        }

        if (written > std::max<long long>(config.warmup_steps, config.n + 1)) {
            const long long lo = std::max<long long>(0, written - config.replay_capacity);
            const long long hi = written - 1 - config.n; // start of a full slice
            if (hi >= lo) {
                std::vector<TrajectorySegment> batch(config.batch_size);
                std::uniform_int_distribution<long long> pick(lo, hi);
                for (auto& seg : batch) {
                    const long long i0 = pick(rng);
                    seg.steps.assign(config.n, Step{});
                    for (int t = 0; t < config.n; ++t)
                        seg.steps[t] =
                            replay[static_cast<std::size_t>((i0 + t) % config.replay_capacity)];
                    seg.next_state =
                        replay[static_cast<std::size_t>((i0 + config.n) % config.replay_capacity)]
                            .state;
                }
                last_mean_min_mass = gradient_step_impl(
                    params, target, batch, trace,
                    /*pi_at built inside gradient_step_mixed*/
                    [&params, &config](int state, const double* mu_probs) {
                        std::vector<double> prow(params.n_actions, 0.0);
                        const int g = greedy_action(params, state);
                        if (mu_probs)
                            for (int b = 0; b < params.n_actions; ++b)
                                prow[b] = (1.0 - config.alpha) * mu_probs[b];
                        else
                            for (int b = 0; b < params.n_actions; ++b)
                                prow[b] = (1.0 - config.alpha) / params.n_actions;
                        prow[g] += config.alpha;
                        return prow;
                    },
                    mdp.gamma, config.kappa);
                for (std::size_t i = 0; i < params.logits.size(); ++i)
                    target.logits[i] =
                        (1.0 - config.tau) * target.logits[i] + config.tau * params.logits[i];
            }
        }

        if (step % config.log_every == 0 || step + 1 == config.total_steps)
            result.log.push_back(metrics(step, eps, last_mean_min_mass));
    }

    result.final_sup_q_error = result.log.back().sup_q_error;
    result.final_greedy_accuracy = result.log.back().greedy_accuracy;

    // evaluation-time policy keeps a small exploration floor
    {
        const Policy pi_eval = epsilon_greedy(params.q_function(), config.eval_epsilon);
        const QFunction q_eval = exact_q(mdp, pi_eval);
        double mean_q = 0.0;
        for (int s0 = 0; s0 < mdp.n_states; ++s0) {
            double v = 0.0;
            for (int a = 0; a < mdp.n_actions; ++a)
                v += pi_eval.p(s0, a) * q_eval.at(s0, a);
            mean_q += v;
        }
        result.eval_epsilon_return = mean_q / mdp.n_states;
        (void)pi_star;
    }

    result.params = std::move(params);
    return result;
}

std::string train_log_to_csv(const std::vector<TrainLogRow>& log) {
    std::ostringstream out;
    out << "# distq training csv v1\n";
    out << "step,epsilon,sup_q_error,greedy_accuracy,mean_min_mass_of_targets\n";
    for (const auto& row : log)
        out << row.step << ',' << format_double(row.epsilon) << ','
            << format_double(row.sup_q_error) << ','
            << format_double(row.greedy_accuracy) << ','
            << format_double(row.mean_min_mass_of_targets) << '\n';
    return out.str();
}

} // namespace distq
