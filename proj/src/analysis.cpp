#include "distq/analysis.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace distq {

namespace {

void check_gamma(double gamma) {
    if (!(gamma >= 0.0) || gamma >= 1.0)
        throw std::invalid_argument("analysis: gamma must be in [0,1)");
}

} // namespace

double beta_p(double gamma, double lambda, double epsilon, double p) {
    check_gamma(gamma);
    if (lambda < 0.0 || lambda > 1.0)
        throw std::invalid_argument("beta_p: lambda must be in [0,1]");
    if (epsilon < 0.0 || epsilon > 2.0)
        throw std::invalid_argument("beta_p: epsilon must be in [0,2]");
    if (!(p >= 1.0)) throw std::invalid_argument("beta_p: p must be >= 1");
    if (lambda == 1.0 && p > 1.0)
        throw std::domain_error("beta_p: undefined at lambda = 1 for p > 1");
    const double num = std::pow(gamma, 1.0 / p) * (1.0 - lambda + lambda * epsilon);
    const double den = std::pow(1.0 - lambda, (p - 1.0) / p) *
                       std::pow(1.0 - lambda * gamma, 1.0 / p);
    return num / den;
}

double radius_l1(double gamma, double lambda) {
    check_gamma(gamma);
    if (lambda < 0.0 || lambda > 1.0)
        throw std::invalid_argument("radius_l1: lambda must be in [0,1]");
    if (lambda == 0.0) return std::numeric_limits<double>::infinity();
    return (1.0 - gamma) / (lambda * gamma);
}

double radius_l2(double gamma, double lambda) {
    if (!(gamma > 0.0) || gamma >= 1.0)
        throw std::invalid_argument("radius_l2: gamma must be in (0,1)");
    if (lambda < 0.0 || lambda > 1.0)
        throw std::invalid_argument("radius_l2: lambda must be in [0,1]");
    if (lambda == 0.0) return std::numeric_limits<double>::infinity();
    return (std::sqrt((1.0 - lambda) * (1.0 / gamma - lambda)) + lambda - 1.0) / lambda;
}

double beta_alt(double gamma, double lambda) {
    check_gamma(gamma);
    if (lambda < 0.0 || lambda > 1.0)
        throw std::invalid_argument("beta_alt: lambda must be in [0,1]");
    return gamma * (1.0 + lambda) / (1.0 - gamma * lambda);
}

double radius_alt(double gamma) {
    if (!(gamma > 0.0) || gamma >= 1.0)
        throw std::invalid_argument("radius_alt: gamma must be in (0,1)");
    return (1.0 - gamma) / (2.0 * gamma);
}

double approx_error_bound(double d_proj, double beta2) {
    if (d_proj < 0.0)
        throw std::invalid_argument("approx_error_bound: d_proj must be >= 0");
    if (!(beta2 >= 0.0) || beta2 >= 1.0)
        throw std::domain_error("approx_error_bound: requires beta2 in [0,1)");
    return d_proj / std::sqrt(1.0 - beta2 * beta2);
}

ContractionReport make_contraction_report(double gamma, double lambda, double epsilon) {
    ContractionReport rep;
    rep.gamma = gamma;
    rep.lambda = lambda;
    rep.epsilon = epsilon;
    rep.beta_1 = beta_p(gamma, lambda, epsilon, 1.0);
    rep.beta_2 = lambda == 1.0 ? std::numeric_limits<double>::infinity()
                               : beta_p(gamma, lambda, epsilon, 2.0);
    rep.radius_l1 = radius_l1(gamma, lambda);
    rep.radius_l2 = radius_l2(gamma, lambda);
    rep.contractive_l1 = rep.beta_1 < 1.0;
    rep.contractive_l2 = rep.beta_2 < 1.0;
    rep.beta_alt = beta_alt(gamma, lambda);
    rep.radius_alt = radius_alt(gamma);
    return rep;
}

SignedMeasure random_signed_measure(GridPtr grid, std::mt19937_64& rng) {
    const std::size_t m = grid->size();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> half(-0.5, 0.5);
    std::vector<double> masses(m);
    double sum = 0.0;
    for (auto& v : masses) {
        v = unit(rng);
        sum += v;
    }
    for (auto& v : masses) v /= sum;
    // zero-sum perturbation keeps total mass 1 and each atom >= -1
    std::vector<double> noise(m);
    double mean = 0.0;
    for (auto& v : noise) {
        v = half(rng);
        mean += v;
    }
    mean /= static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) masses[i] += noise[i] - mean;
    return SignedMeasure(std::move(grid), std::move(masses));
}

ReturnFunction random_signed_return_function(GridPtr grid, int n_states, int n_actions,
                                             std::mt19937_64& rng) {
    ReturnFunction out(grid, n_states, n_actions);
    for (std::size_t i = 0; i < out.entries(); ++i)
        out.entry(i) = random_signed_measure(grid, rng);
    return out;
}

double empirical_contraction(const TabularMdp& mdp, const Policy& pi, const Policy& mu,
                             const TraceSpec& trace, int n_pairs, std::mt19937_64& rng,
                             GridPtr grid) {
    if (n_pairs < 1)
        throw std::invalid_argument("empirical_contraction: n_pairs must be >= 1");
    if (!grid) grid = default_grid_for(mdp, 21);
    double worst = 0.0;
    for (int k = 0; k < n_pairs; ++k) {
        const ReturnFunction eta1 =
            random_signed_return_function(grid, mdp.n_states, mdp.n_actions, rng);
        const ReturnFunction eta2 =
            random_signed_return_function(grid, mdp.n_states, mdp.n_actions, rng);
        const double before = sup_lp_distance(eta1, eta2, 2.0);
        if (before == 0.0) continue;
        const ReturnFunction out1 = apply_operator(mdp, pi, mu, trace, eta1);
        const ReturnFunction out2 = apply_operator(mdp, pi, mu, trace, eta2);
        worst = std::max(worst, sup_lp_distance(out1, out2, 2.0) / before);
    }
    return worst;
}

} // namespace distq
