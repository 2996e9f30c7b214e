#include "distq/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace distq {

AtomGrid::AtomGrid(std::vector<double> atoms) : atoms_(std::move(atoms)) {
    if (atoms_.size() < 2)
        throw std::invalid_argument("AtomGrid: need at least 2 atoms");
    for (double z : atoms_)
        if (!std::isfinite(z))
            throw std::invalid_argument("AtomGrid: atoms must be finite");
    dz_ = atoms_[1] - atoms_[0];
    if (dz_ <= 0.0)
        throw std::invalid_argument("AtomGrid: atoms must be strictly increasing");
    const double scale = std::max(std::abs(atoms_.front()), std::abs(atoms_.back()));
    for (std::size_t i = 1; i + 1 < atoms_.size(); ++i) {
        const double step = atoms_[i + 1] - atoms_[i];
        if (step <= 0.0)
            throw std::invalid_argument("AtomGrid: atoms must be strictly increasing");
        if (std::abs(step - dz_) > 1e-12 * std::max(1.0, scale))
            throw std::invalid_argument("AtomGrid: non-uniform spacing rejected");
    }
}

AtomGrid AtomGrid::uniform(double v_min, double v_max, std::size_t m) {
    if (m < 2)
        throw std::invalid_argument("AtomGrid::uniform: m must be >= 2");
    if (!(v_min < v_max))
        throw std::invalid_argument("AtomGrid::uniform: v_min must be < v_max");
    std::vector<double> atoms(m);
    const double step = (v_max - v_min) / static_cast<double>(m - 1);
    for (std::size_t i = 0; i < m; ++i)
        atoms[i] = v_min + static_cast<double>(i) * step;
    atoms.back() = v_max;
    return AtomGrid(std::move(atoms));
}

bool same_grid(const GridPtr& a, const GridPtr& b) {
    if (!a || !b) return false;
    return a == b || *a == *b;
}

SignedMeasure::SignedMeasure(GridPtr grid, std::vector<double> masses)
    : grid_(std::move(grid)), masses_(std::move(masses)) {
    if (!grid_)
        throw std::invalid_argument("SignedMeasure: null grid");
    if (masses_.size() != grid_->size())
        throw std::invalid_argument("SignedMeasure: mass vector size mismatch");
}

SignedMeasure SignedMeasure::zero(GridPtr grid) {
    std::vector<double> m(grid->size(), 0.0);
    return SignedMeasure(std::move(grid), std::move(m));
}

SignedMeasure SignedMeasure::uniform(GridPtr grid) {
    std::vector<double> m(grid->size(), 1.0 / static_cast<double>(grid->size()));
    return SignedMeasure(std::move(grid), std::move(m));
}

SignedMeasure SignedMeasure::dirac(GridPtr grid, std::size_t atom_index) {
    if (atom_index >= grid->size())
        throw std::invalid_argument("SignedMeasure::dirac: atom index out of range");
    std::vector<double> m(grid->size(), 0.0);
    m[atom_index] = 1.0;
    return SignedMeasure(std::move(grid), std::move(m));
}

double SignedMeasure::mean() const {
    double s = 0.0;
    for (std::size_t i = 0; i < masses_.size(); ++i)
        s += masses_[i] * (*grid_)[i];
    return s;
}

double SignedMeasure::total_mass() const {
    double s = 0.0;
    for (double v : masses_) s += v;
    return s;
}

double SignedMeasure::min_mass() const {
    double lo = std::numeric_limits<double>::infinity();
    for (double v : masses_) lo = std::min(lo, v);
    return lo;
}

ParticleSet SignedMeasure::particles() const {
    ParticleSet out(masses_.size());
    for (std::size_t i = 0; i < masses_.size(); ++i)
        out[i] = {(*grid_)[i], masses_[i]};
    return out;
}

namespace {

// Locate the cell with atoms[lo] <= y < atoms[lo+1]; exact atom hits give
// frac == 0 so masses land on their own atom bit-for-bit.
inline void locate(const AtomGrid& g, double y, int& lo, double& w_lo, bool& clipped) {
    const int m = static_cast<int>(g.size());
    clipped = false;
    if (y <= g.min()) {
        lo = 0;
        w_lo = 1.0;
        clipped = y < g.min();
        return;
    }
    if (y >= g.max()) {
        lo = m - 1;
        w_lo = 1.0;
        clipped = y > g.max();
        return;
    }
    int j = static_cast<int>(std::floor((y - g.min()) / g.spacing()));
    j = std::clamp(j, 0, m - 2);
    while (j + 1 < m - 1 && y >= g[j + 1]) ++j;
    while (j > 0 && y < g[j]) --j;
    if (y == g[j]) {
        lo = j;
        w_lo = 1.0;
        return;
    }
    lo = j;
    w_lo = (g[j + 1] - y) / g.spacing();
}

} // namespace

SignedMeasure project(GridPtr grid, const ParticleSet& particles) {
    SignedMeasure out = SignedMeasure::zero(grid);
    auto& masses = out.masses();
    const AtomGrid& g = *grid;
    for (const auto& [y, w] : particles) {
        if (!std::isfinite(y) || !std::isfinite(w))
            throw std::invalid_argument("project: non-finite particle");
        int lo;
        double w_lo;
        bool clipped;
        locate(g, y, lo, w_lo, clipped);
        if (w_lo == 1.0) {
            masses[lo] += w;
        } else {
            const double to_lo = w * w_lo;
            masses[lo] += to_lo;
            masses[lo + 1] += w - to_lo; // exact mass conservation
        }
    }
    return out;
}

Pushforward::Pushforward(GridPtr grid, double shift, double slope) : grid_(std::move(grid)) {
    if (!(slope > 0.0) || slope > 1.0)
        throw std::invalid_argument("Pushforward: slope must be in (0, 1]");
    if (!std::isfinite(shift))
        throw std::invalid_argument("Pushforward: shift must be finite");
    const AtomGrid& g = *grid_;
    const std::size_t m = g.size();
    lo_.resize(m);
    w_lo_.resize(m);
    clipped_.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double y = shift + slope * g[i];
        int lo;
        double w_lo;
        bool clipped;
        locate(g, y, lo, w_lo, clipped);
        lo_[i] = lo;
        w_lo_[i] = w_lo;
        clipped_[i] = clipped;
        any_clipped_ = any_clipped_ || clipped;
    }
}

void Pushforward::apply_into(std::span<const double> in, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    accumulate(in, out, 1.0);
}

void Pushforward::accumulate(std::span<const double> in, std::span<double> out,
                             double scale) const {
    const std::size_t m = lo_.size();
    for (std::size_t i = 0; i < m; ++i) {
        const double v = scale * in[i];
        if (v == 0.0) continue;
        if (w_lo_[i] == 1.0) {
            out[lo_[i]] += v;
        } else {
            const double to_lo = v * w_lo_[i];
            out[lo_[i]] += to_lo;
            out[lo_[i] + 1] += v - to_lo;
        }
    }
}

std::vector<double> Pushforward::apply(const std::vector<double>& in) const {
    std::vector<double> out(in.size(), 0.0);
    apply_into(in, out);
    return out;
}

SignedMeasure Pushforward::apply(const SignedMeasure& mu) const {
    if (!same_grid(mu.grid_ptr(), grid_))
        throw std::invalid_argument("Pushforward::apply: grid mismatch");
    return SignedMeasure(grid_, apply(mu.masses()));
}

double Pushforward::clipped_mass(std::span<const double> in) const {
    if (!any_clipped_) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < lo_.size(); ++i)
        if (clipped_[i]) s += std::abs(in[i]);
    return s;
}

std::vector<std::vector<double>> Pushforward::dense() const {
    const std::size_t m = lo_.size();
    std::vector<std::vector<double>> mat(m, std::vector<double>(m, 0.0));
    std::vector<double> unit(m, 0.0), col(m);
    for (std::size_t j = 0; j < m; ++j) {
        unit[j] = 1.0;
        apply_into(unit, col);
        unit[j] = 0.0;
        for (std::size_t i = 0; i < m; ++i) mat[i][j] = col[i];
    }
    return mat;
}

double lp_distance(const SignedMeasure& a, const SignedMeasure& b, double p) {
    if (!same_grid(a.grid_ptr(), b.grid_ptr()))
        throw std::invalid_argument("lp_distance: grid mismatch");
    if (!(p >= 1.0))
        throw std::invalid_argument("lp_distance: p must be >= 1");
    const AtomGrid& g = a.grid();
    const std::size_t m = g.size();
    const double dz = g.spacing();
    double fa = 0.0, fb = 0.0, acc = 0.0;
    for (std::size_t i = 0; i + 1 < m; ++i) {
        fa += a.masses()[i];
        fb += b.masses()[i];
        const double d = std::abs(fa - fb);
        if (p == 2.0)
            acc += d * d * dz;
        else if (p == 1.0)
            acc += d * dz;
        else
            acc += std::pow(d, p) * dz;
    }
    if (p == 2.0) return std::sqrt(acc);
    if (p == 1.0) return acc;
    return std::pow(acc, 1.0 / p);
}

double particle_lp_distance(const ParticleSet& a, const ParticleSet& b, double p) {
    if (!(p >= 1.0))
        throw std::invalid_argument("particle_lp_distance: p must be >= 1");
    // events: +weight into F_a, -weight into F_a - F_b
    std::vector<std::pair<double, double>> events;
    events.reserve(a.size() + b.size());
    for (const auto& [z, w] : a) events.emplace_back(z, w);
    for (const auto& [z, w] : b) events.emplace_back(z, -w);
    std::sort(events.begin(), events.end(),
              [](const auto& u, const auto& v) { return u.first < v.first; });
    double diff = 0.0, acc = 0.0;
    for (std::size_t i = 0; i < events.size(); ++i) {
        diff += events[i].second;
        if (i + 1 < events.size()) {
            const double len = events[i + 1].first - events[i].first;
            if (len > 0.0) {
                const double d = std::abs(diff);
                acc += (p == 2.0 ? d * d : std::pow(d, p)) * len;
            }
        }
    }
    if (std::abs(diff) > 1e-9)
        throw std::invalid_argument("particle_lp_distance: total masses differ");
    if (p == 2.0) return std::sqrt(acc);
    return std::pow(acc, 1.0 / p);
}

ReturnFunction::ReturnFunction(GridPtr grid, int n_states, int n_actions)
    : grid_(std::move(grid)), n_states_(n_states), n_actions_(n_actions) {
    if (n_states_ <= 0 || n_actions_ <= 0)
        throw std::invalid_argument("ReturnFunction: non-positive shape");
    table_.assign(static_cast<std::size_t>(n_states_) * n_actions_,
                  SignedMeasure::zero(grid_));
}

ReturnFunction ReturnFunction::uniform(GridPtr grid, int n_states, int n_actions) {
    ReturnFunction out(grid, n_states, n_actions);
    for (std::size_t i = 0; i < out.entries(); ++i)
        out.entry(i) = SignedMeasure::uniform(out.grid_ptr());
    return out;
}

double ReturnFunction::max_unit_mass_error() const {
    double worst = 0.0;
    for (const auto& mu : table_)
        worst = std::max(worst, std::abs(mu.total_mass() - 1.0));
    return worst;
}

double ReturnFunction::min_mass() const {
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& mu : table_) lo = std::min(lo, mu.min_mass());
    return lo;
}

double sup_lp_distance(const ReturnFunction& a, const ReturnFunction& b, double p) {
    if (a.n_states() != b.n_states() || a.n_actions() != b.n_actions())
        throw std::invalid_argument("sup_lp_distance: shape mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.entries(); ++i)
        worst = std::max(worst, lp_distance(a.entry(i), b.entry(i), p));
    return worst;
}

} // namespace distq
