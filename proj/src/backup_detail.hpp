#pragma once

#include <vector>

#include "distq/grid.hpp"
#include "distq/mdp.hpp"

namespace distq::detail {

/// Pushforwards M_{r(x,a),slope} for every (x,a), indexed x*n_actions + a.
std::vector<Pushforward> make_pushforwards(const TabularMdp& mdp, const GridPtr& grid,
                                           double slope);

/// One projected distributional Bellman backup:
/// out(x,a) = M_{r(x,a),gamma} sum_{x'} P(x'|x,a) sum_b pi(b|x') eta(x',b).
ReturnFunction one_step_backup(const TabularMdp& mdp, const Policy& pi,
                               const ReturnFunction& eta,
                               const std::vector<Pushforward>& pushes);

} // namespace distq::detail
