#pragma once

#include <stdexcept>
#include <string>

#include "distq/grid.hpp"
#include "distq/mdp.hpp"

namespace distq {

/// Which distributional operator / trace coefficient to apply.
struct TraceSpec {
    enum class Kind {
        one_step,          // T^pi
        n_step,            // T^pi unrolled n times, projected each step
        on_policy_lambda,  // T_lambda^pi  (expectation under pi)
        off_policy_lambda, // A_lambda^{pi,mu}, constant trace lambda
        retrace,           // R^{pi,mu}, trace min(c_bar, pi/mu)
        peng,              // P_lambda^{pi,mu}, uncorrected geometric mixture
        alt_lambda,        // slope-1 variant with gamma*lambda height decay
    };

    Kind kind = Kind::one_step;
    double lambda = 0.0; // in [0,1]
    double c_bar = 1.0;  // > 0
    int n = 1;           // >= 1

    static TraceSpec OneStep() { return {Kind::one_step, 0.0, 1.0, 1}; }
    static TraceSpec NStep(int n);
    static TraceSpec OnPolicyLambda(double lambda);
    static TraceSpec OffPolicyLambda(double lambda);
    static TraceSpec Retrace(double c_bar);
    static TraceSpec Peng(double lambda);
    static TraceSpec AltLambda(double lambda);

    std::string name() const;
    /// The hyperparameter shown in reports (lambda, c_bar or n).
    double parameter() const;
};

struct SolverOptions {
    enum class Mode { automatic, iterate, linear_solve };
    Mode mode = Mode::automatic;
    double tolerance = 1e-10;
    int max_depth = 10000;
};

/// Diagnostics from one operator application.
struct ApplyStats {
    int iterations = 0;        // 0 for direct solves
    double residual = 0.0;     // sup-l2 fixed-point residual of the correction
    double clipped_mass = 0.0; // worst per-pushforward clipped |mass|
    bool used_linear_solve = false;
};

/// Raised when mu(b|x) = 0 but pi(b|x) > 0 under an IS-based trace.
class SupportViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Per-step trace coefficient c(x,b). Constant-lambda variants return
/// lambda; Retrace returns min(c_bar, pi(b|x)/mu(b|x)) with 0/0 = 0.
double trace_coefficient(const TraceSpec& trace, const Policy& pi, const Policy& mu,
                         int x, int b);

/// Distributional one-step TD error table:
/// Delta(x,a) = Pi_c T^pi eta (x,a) - eta(x,a); each entry has total mass 0.
ReturnFunction td_measure(const TabularMdp& mdp, const Policy& pi,
                          const ReturnFunction& eta);

/// Applies the chosen operator exactly (expectation form), composed with the
/// categorical projection at every pushforward. The trace family solves the
/// telescoped correction
///   D(x,a) = Delta(x,a)
///          + M_{r(x,a),gamma} sum_{x'} P(x'|x,a) sum_b mu(b|x') c(x',b) D(x',b)
/// and returns eta + D; Peng and the slope-1 variant solve their analogous
/// linear recursions. Direct solve and fixed-point iteration agree within
/// tolerance; `automatic` picks the direct solve for up to 5e4 unknowns
/// when the trace mass is bounded away from 1.
ReturnFunction apply_operator(const TabularMdp& mdp, const Policy& pi, const Policy& mu,
                              const TraceSpec& trace, const ReturnFunction& eta,
                              const SolverOptions& opts = {}, ApplyStats* stats = nullptr);

/// Alias of apply_operator: the projection is interleaved by construction,
/// so experiment code reads eta_{k+1} = Pi_c O eta_k.
inline ReturnFunction apply_projected_recursion_step(
    const TabularMdp& mdp, const Policy& pi, const Policy& mu, const TraceSpec& trace,
    const ReturnFunction& eta, const SolverOptions& opts = {}, ApplyStats* stats = nullptr) {
    return apply_operator(mdp, pi, mu, trace, eta, opts, stats);
}

} // namespace distq
