#include "distq/operators.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "backup_detail.hpp"

namespace distq {

TraceSpec TraceSpec::NStep(int n) {
    if (n < 1) throw std::invalid_argument("TraceSpec::NStep: n must be >= 1");
    return {Kind::n_step, 0.0, 1.0, n};
}

TraceSpec TraceSpec::OnPolicyLambda(double lambda) {
    if (lambda < 0.0 || lambda > 1.0)
        throw std::invalid_argument("TraceSpec: lambda must be in [0,1]");
    return {Kind::on_policy_lambda, lambda, 1.0, 1};
}

TraceSpec TraceSpec::OffPolicyLambda(double lambda) {
    if (lambda < 0.0 || lambda > 1.0)
        throw std::invalid_argument("TraceSpec: lambda must be in [0,1]");
    return {Kind::off_policy_lambda, lambda, 1.0, 1};
}

TraceSpec TraceSpec::Retrace(double c_bar) {
    if (!(c_bar > 0.0)) throw std::invalid_argument("TraceSpec: c_bar must be > 0");
    return {Kind::retrace, 0.0, c_bar, 1};
}

TraceSpec TraceSpec::Peng(double lambda) {
    if (lambda < 0.0 || lambda > 1.0)
        throw std::invalid_argument("TraceSpec: lambda must be in [0,1]");
    return {Kind::peng, lambda, 1.0, 1};
}

TraceSpec TraceSpec::AltLambda(double lambda) {
    if (lambda < 0.0 || lambda > 1.0)
        throw std::invalid_argument("TraceSpec: lambda must be in [0,1]");
    return {Kind::alt_lambda, lambda, 1.0, 1};
}

std::string TraceSpec::name() const {
    switch (kind) {
        case Kind::one_step: return "one-step";
        case Kind::n_step: return "n-step";
        case Kind::on_policy_lambda: return "onpolicy-lambda";
        case Kind::off_policy_lambda: return "qlambda";
        case Kind::retrace: return "retrace";
        case Kind::peng: return "peng";
        case Kind::alt_lambda: return "alt-lambda";
    }
    return "?";
}

double TraceSpec::parameter() const {
    switch (kind) {
        case Kind::one_step: return 0.0;
        case Kind::n_step: return static_cast<double>(n);
        case Kind::retrace: return c_bar;
        default: return lambda;
    }
}

double trace_coefficient(const TraceSpec& trace, const Policy& pi, const Policy& mu,
                         int x, int b) {
    switch (trace.kind) {
        case TraceSpec::Kind::on_policy_lambda:
        case TraceSpec::Kind::off_policy_lambda:
        case TraceSpec::Kind::peng:
        case TraceSpec::Kind::alt_lambda:
            return trace.lambda;
        case TraceSpec::Kind::retrace: {
            const double pp = pi.p(x, b);
            const double pm = mu.p(x, b);
            if (pm == 0.0) {
                if (pp > 0.0)
                    throw SupportViolation(
                        "trace_coefficient: pi(b|x) > 0 where mu(b|x) = 0");
                return 0.0;
            }
            return std::min(trace.c_bar, pp / pm);
        }
        default:
            throw std::invalid_argument(
                "trace_coefficient: variant has no per-step trace");
    }
}

ReturnFunction td_measure(const TabularMdp& mdp, const Policy& pi,
                          const ReturnFunction& eta) {
    if (eta.n_states() != mdp.n_states || eta.n_actions() != mdp.n_actions)
        throw std::invalid_argument("td_measure: shape mismatch");
    const auto pushes = detail::make_pushforwards(mdp, eta.grid_ptr(), mdp.gamma);
    ReturnFunction delta = detail::one_step_backup(mdp, pi, eta, pushes);
    for (std::size_t i = 0; i < delta.entries(); ++i) {
        auto& d = delta.entry(i).masses();
        const auto& e = eta.entry(i).masses();
        for (std::size_t j = 0; j < d.size(); ++j) d[j] -= e[j];
    }
    return delta;
}

namespace {

using MeasureStack = std::vector<std::vector<double>>; // one mass vector per slot

// X(x,a) = base(x,a)
//        + scale * M_{x,a}( sum_{x'} P(x'|x,a) [ inject(x')
//                                              + sum_b w(x',b) X(x',b) ] )
// Every operator variant is an instance: base/inject/w/scale as below.
struct RecursionProblem {
    const TabularMdp* mdp = nullptr;
    const std::vector<Pushforward>* pushes = nullptr; // per (x,a)
    const ReturnFunction* base = nullptr;             // nullptr => zero
    const MeasureStack* inject = nullptr;             // per state, nullptr => zero
    std::vector<double> weight;                       // per (y,b), >= 0
    double scale = 1.0;
    std::size_t m = 0;

    double weight_mass_bound() const {
        double worst = 0.0;
        for (int y = 0; y < mdp->n_states; ++y) {
            double s = 0.0;
            for (int b = 0; b < mdp->n_actions; ++b)
                s += weight[static_cast<std::size_t>(y) * mdp->n_actions + b];
            worst = std::max(worst, s);
        }
        return scale * worst;
    }
};

// inner(y) = inject(y) + sum_b w(y,b) X(y,b)
void inner_stack(const RecursionProblem& pr, const ReturnFunction& x, MeasureStack& out) {
    const int ns = pr.mdp->n_states, na = pr.mdp->n_actions;
    for (int y = 0; y < ns; ++y) {
        auto& dst = out[y];
        if (pr.inject)
            dst = (*pr.inject)[y];
        else
            std::fill(dst.begin(), dst.end(), 0.0);
        for (int b = 0; b < na; ++b) {
            const double w = pr.weight[static_cast<std::size_t>(y) * na + b];
            if (w == 0.0) continue;
            const auto& src = x.at(y, b).masses();
            for (std::size_t i = 0; i < pr.m; ++i) dst[i] += w * src[i];
        }
    }
}

// out(x,a) = base(x,a) + scale*M_{x,a}(sum_{x'} P inner(x')); returns worst clip.
double assemble_output(const RecursionProblem& pr, const MeasureStack& inner,
                       ReturnFunction& out) {
    const int ns = pr.mdp->n_states, na = pr.mdp->n_actions;
    std::vector<double> blend(pr.m);
    double clip = 0.0;
    for (int x = 0; x < ns; ++x) {
        for (int a = 0; a < na; ++a) {
            std::fill(blend.begin(), blend.end(), 0.0);
            const auto row = pr.mdp->next_state_row(x, a);
            for (int y = 0; y < ns; ++y) {
                const double w = row[y];
                if (w == 0.0) continue;
                for (std::size_t i = 0; i < pr.m; ++i) blend[i] += w * inner[y][i];
            }
            const auto& push = (*pr.pushes)[static_cast<std::size_t>(x) * na + a];
            clip = std::max(clip, push.clipped_mass(blend));
            auto& dst = out.at(x, a).masses();
            if (pr.base) {
                dst = pr.base->at(x, a).masses();
                push.accumulate(blend, dst, pr.scale);
            } else {
                push.apply_into(blend, dst);
                if (pr.scale != 1.0)
                    for (auto& v : dst) v *= pr.scale;
            }
        }
    }
    return clip;
}

ReturnFunction solve_iterate(const RecursionProblem& pr, const GridPtr& grid,
                             const ReturnFunction& start, const SolverOptions& opts,
                             ApplyStats* stats) {
    const int ns = pr.mdp->n_states, na = pr.mdp->n_actions;
    ReturnFunction x = start;
    ReturnFunction next(grid, ns, na);
    MeasureStack inner(ns, std::vector<double>(pr.m));
    double clip = 0.0;
    for (int k = 1; k <= opts.max_depth; ++k) {
        inner_stack(pr, x, inner);
        clip = std::max(clip, assemble_output(pr, inner, next));
        const double change = sup_lp_distance(next, x, 2.0);
        std::swap(x, next);
        if (change < opts.tolerance) {
            if (stats) {
                stats->iterations = k;
                stats->residual = change;
                stats->clipped_mass = std::max(stats->clipped_mass, clip);
                stats->used_linear_solve = false;
            }
            return x;
        }
    }
    throw std::runtime_error(
        "apply_operator: correction iteration did not converge within max_depth");
}

ReturnFunction solve_linear(const RecursionProblem& pr, const GridPtr& grid,
                            ApplyStats* stats) {
    const int ns = pr.mdp->n_states, na = pr.mdp->n_actions;
    const std::size_t m = pr.m;
    const Eigen::Index dim = static_cast<Eigen::Index>(ns) * m;

    // Y(y) = rhs0(y) + scale * sum_b w(y,b) M_{y,b}(sum_{x'} P(x'|y,b) Y(x'))
    // with rhs0 = inject + sum_b w * base; then one assembly pass gives X.
    Eigen::MatrixXd sys = Eigen::MatrixXd::Identity(dim, dim);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);

    for (int y = 0; y < ns; ++y) {
        const Eigen::Index row0 = static_cast<Eigen::Index>(y) * m;
        if (pr.inject)
            for (std::size_t i = 0; i < m; ++i) rhs(row0 + i) += (*pr.inject)[y][i];
        for (int b = 0; b < na; ++b) {
            const double w = pr.weight[static_cast<std::size_t>(y) * na + b];
            if (w == 0.0) continue;
            if (pr.base) {
                const auto& bm = pr.base->at(y, b).masses();
                for (std::size_t i = 0; i < m; ++i) rhs(row0 + i) += w * bm[i];
            }
            const auto& push = (*pr.pushes)[static_cast<std::size_t>(y) * na + b];
            const auto prow = pr.mdp->next_state_row(y, b);
            for (int xp = 0; xp < ns; ++xp) {
                const double coef = pr.scale * w * prow[xp];
                if (coef == 0.0) continue;
                const Eigen::Index col0 = static_cast<Eigen::Index>(xp) * m;
                for (std::size_t j = 0; j < m; ++j) {
                    const int lo = push.lower_index(j);
                    const double wl = push.lower_weight(j);
                    sys(row0 + lo, col0 + j) -= coef * wl;
                    if (wl != 1.0) sys(row0 + lo + 1, col0 + j) -= coef * (1.0 - wl);
                }
            }
        }
    }

    const Eigen::VectorXd sol = sys.partialPivLu().solve(rhs);
    MeasureStack inner(ns, std::vector<double>(m));
    for (int y = 0; y < ns; ++y)
        for (std::size_t i = 0; i < m; ++i)
            inner[y][i] = sol(static_cast<Eigen::Index>(y) * m + i);

    ReturnFunction out(grid, ns, na);
    const double clip = assemble_output(pr, inner, out);

    if (stats) {
        // one extra sweep measures the true fixed-point residual
        ReturnFunction check(grid, ns, na);
        MeasureStack inner2(ns, std::vector<double>(m));
        inner_stack(pr, out, inner2);
        assemble_output(pr, inner2, check);
        stats->iterations = 0;
        stats->residual = sup_lp_distance(check, out, 2.0);
        stats->clipped_mass = std::max(stats->clipped_mass, clip);
        stats->used_linear_solve = true;
    }
    return out;
}

ReturnFunction solve_recursion(const RecursionProblem& pr, const GridPtr& grid,
                               const ReturnFunction& iterate_start,
                               const SolverOptions& opts, ApplyStats* stats) {
    const double q = pr.weight_mass_bound();
    const std::size_t unknowns = static_cast<std::size_t>(pr.mdp->n_states) *
                                 pr.mdp->n_actions * pr.m;
    bool linear = false;
    switch (opts.mode) {
        case SolverOptions::Mode::linear_solve:
            linear = true;
            break;
        case SolverOptions::Mode::iterate:
            linear = false;
            break;
        case SolverOptions::Mode::automatic:
            linear = unknowns <= 50000;
            break;
    }
    // (I - B) turns singular as the trace mass reaches 1; the iteration still
    // converges through the gamma width shrinkage, so fall back.
    if (linear && q >= 1.0 - 1e-9) linear = false;
    if (linear) return solve_linear(pr, grid, stats);
    return solve_iterate(pr, grid, iterate_start, opts, stats);
}

ReturnFunction add(const ReturnFunction& eta, const ReturnFunction& d) {
    ReturnFunction out = eta;
    for (std::size_t i = 0; i < out.entries(); ++i) {
        auto& dst = out.entry(i).masses();
        const auto& src = d.entry(i).masses();
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
    return out;
}

} // namespace

ReturnFunction apply_operator(const TabularMdp& mdp, const Policy& pi, const Policy& mu,
                              const TraceSpec& trace, const ReturnFunction& eta,
                              const SolverOptions& opts, ApplyStats* stats) {
    if (eta.n_states() != mdp.n_states || eta.n_actions() != mdp.n_actions)
        throw std::invalid_argument("apply_operator: eta shape mismatch");
    if (pi.n_states != mdp.n_states || pi.n_actions != mdp.n_actions ||
        mu.n_states != mdp.n_states || mu.n_actions != mdp.n_actions)
        throw std::invalid_argument("apply_operator: policy shape mismatch");
    if (!(opts.tolerance > 0.0))
        throw std::invalid_argument("apply_operator: tolerance must be > 0");
    if (stats) *stats = {};

    const GridPtr grid = eta.grid_ptr();
    const std::size_t m = grid->size();
    const int ns = mdp.n_states, na = mdp.n_actions;

    if (trace.kind == TraceSpec::Kind::one_step || trace.kind == TraceSpec::Kind::n_step) {
        const auto pushes = detail::make_pushforwards(mdp, grid, mdp.gamma);
        const int steps = trace.kind == TraceSpec::Kind::one_step ? 1 : trace.n;
        ReturnFunction out = eta;
        for (int k = 0; k < steps; ++k)
            out = detail::one_step_backup(mdp, pi, out, pushes);
        if (stats) stats->iterations = steps;
        return out;
    }

    // Behavior shaping the expectation: the on-policy variant replaces mu by pi.
    const Policy& behavior =
        trace.kind == TraceSpec::Kind::on_policy_lambda ? pi : mu;

    RecursionProblem pr;
    pr.mdp = &mdp;
    pr.m = m;
    pr.weight.resize(static_cast<std::size_t>(ns) * na);

    if (trace.kind == TraceSpec::Kind::peng) {
        const auto pushes = detail::make_pushforwards(mdp, grid, mdp.gamma);
        pr.pushes = &pushes;
        pr.scale = 1.0;
        for (int y = 0; y < ns; ++y)
            for (int b = 0; b < na; ++b)
                pr.weight[static_cast<std::size_t>(y) * na + b] =
                    trace.lambda * behavior.p(y, b);
        MeasureStack inject(ns, std::vector<double>(m, 0.0));
        for (int y = 0; y < ns; ++y)
            for (int b = 0; b < na; ++b) {
                const double w = (1.0 - trace.lambda) * pi.p(y, b);
                if (w == 0.0) continue;
                const auto& src = eta.at(y, b).masses();
                for (std::size_t i = 0; i < m; ++i) inject[y][i] += w * src[i];
            }
        pr.inject = &inject;
        return solve_recursion(pr, grid, eta, opts, stats);
    }

    // trace family and the slope-1 variant work on the TD correction
    ReturnFunction delta = td_measure(mdp, pi, eta);

    if (trace.kind == TraceSpec::Kind::alt_lambda) {
        const auto pushes_one = detail::make_pushforwards(mdp, grid, 1.0);
        pr.pushes = &pushes_one;
        pr.base = &delta;
        pr.scale = mdp.gamma * trace.lambda;
        for (int y = 0; y < ns; ++y)
            for (int b = 0; b < na; ++b)
                pr.weight[static_cast<std::size_t>(y) * na + b] = behavior.p(y, b);
        ReturnFunction corr = solve_recursion(pr, grid, delta, opts, stats);
        return add(eta, corr);
    }

    // on_policy_lambda / off_policy_lambda / retrace
    const auto pushes = detail::make_pushforwards(mdp, grid, mdp.gamma);
    pr.pushes = &pushes;
    pr.base = &delta;
    pr.scale = 1.0;
    for (int y = 0; y < ns; ++y)
        for (int b = 0; b < na; ++b)
            pr.weight[static_cast<std::size_t>(y) * na + b] =
                behavior.p(y, b) * trace_coefficient(trace, pi, behavior, y, b);
    ReturnFunction corr = solve_recursion(pr, grid, delta, opts, stats);
    return add(eta, corr);
}

} // namespace distq
