#include "backup_detail.hpp"

#include <algorithm>

namespace distq::detail {

std::vector<Pushforward> make_pushforwards(const TabularMdp& mdp, const GridPtr& grid,
                                           double slope) {
    std::vector<Pushforward> pushes;
    pushes.reserve(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions);
    for (int x = 0; x < mdp.n_states; ++x)
        for (int a = 0; a < mdp.n_actions; ++a)
            pushes.emplace_back(grid, mdp.r(x, a), slope);
    return pushes;
}

ReturnFunction one_step_backup(const TabularMdp& mdp, const Policy& pi,
                               const ReturnFunction& eta,
                               const std::vector<Pushforward>& pushes) {
    const std::size_t m = eta.grid().size();
    const int ns = mdp.n_states, na = mdp.n_actions;
    ReturnFunction out(eta.grid_ptr(), ns, na);
    std::vector<std::vector<double>> mixed(ns, std::vector<double>(m, 0.0));
    for (int y = 0; y < ns; ++y)
        for (int b = 0; b < na; ++b) {
            const double w = pi.p(y, b);
            if (w == 0.0) continue;
            const auto& src = eta.at(y, b).masses();
            for (std::size_t i = 0; i < m; ++i) mixed[y][i] += w * src[i];
        }
    std::vector<double> blend(m);
    for (int x = 0; x < ns; ++x) {
        for (int a = 0; a < na; ++a) {
            std::fill(blend.begin(), blend.end(), 0.0);
            const auto row = mdp.next_state_row(x, a);
            for (int y = 0; y < ns; ++y) {
                const double w = row[y];
                if (w == 0.0) continue;
                for (std::size_t i = 0; i < m; ++i) blend[i] += w * mixed[y][i];
            }
            pushes[static_cast<std::size_t>(x) * na + a].apply_into(
                blend, out.at(x, a).masses());
        }
    }
    return out;
}

} // namespace distq::detail
