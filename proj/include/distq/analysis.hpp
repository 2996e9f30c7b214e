#pragma once

#include <cstdint>
#include <random>

#include "distq/grid.hpp"
#include "distq/mdp.hpp"
#include "distq/operators.hpp"

namespace distq {

/// Contraction rate of the off-policy lambda operator under sup-l_p:
/// gamma^{1/p} (1 - lambda + lambda*eps) /
///   ((1-lambda)^{(p-1)/p} (1 - lambda*gamma)^{1/p}).
/// lambda = 1 with p > 1 is a domain error.
double beta_p(double gamma, double lambda, double epsilon, double p);

/// Off-policyness threshold (1-gamma)/(lambda*gamma) below which beta_1 < 1.
/// lambda = 0 returns +infinity (always contractive).
double radius_l1(double gamma, double lambda);

/// Threshold lambda^{-1} (sqrt((1-lambda)(1/gamma - lambda)) + lambda - 1)
/// below which beta_2 < 1. lambda = 0 returns +infinity.
double radius_l2(double gamma, double lambda);

/// Contraction bound gamma(1+lambda)/(1-gamma*lambda) of the slope-1 variant.
double beta_alt(double gamma, double lambda);

/// lambda threshold (1-gamma)/(2*gamma) below which beta_alt < 1.
double radius_alt(double gamma);

/// d_proj / sqrt(1 - beta2^2); requires beta2 < 1.
double approx_error_bound(double d_proj, double beta2);

struct ContractionReport {
    double gamma = 0.0;
    double lambda = 0.0;
    double epsilon = 0.0;
    double beta_1 = 0.0;
    double beta_2 = 0.0;
    double radius_l1 = 0.0;
    double radius_l2 = 0.0;
    bool contractive_l1 = false;
    bool contractive_l2 = false;
    double beta_alt = 0.0;
    double radius_alt = 0.0;
};

ContractionReport make_contraction_report(double gamma, double lambda, double epsilon);

/// Unit-mass mass vector with each atom bounded below by -1: a random proper
/// distribution plus a zero-sum perturbation with entries in [-0.5, 0.5].
SignedMeasure random_signed_measure(GridPtr grid, std::mt19937_64& rng);
ReturnFunction random_signed_return_function(GridPtr grid, int n_states, int n_actions,
                                             std::mt19937_64& rng);

/// max over random signed pairs of
/// sup-l2(O eta1, O eta2) / sup-l2(eta1, eta2).
double empirical_contraction(const TabularMdp& mdp, const Policy& pi, const Policy& mu,
                             const TraceSpec& trace, int n_pairs, std::mt19937_64& rng,
                             GridPtr grid = nullptr);

} // namespace distq
