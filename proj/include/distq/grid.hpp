#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace distq {

/// Fixed, strictly increasing, uniformly spaced support points for
/// categorical (signed) measures. Immutable after construction.
class AtomGrid {
public:
    AtomGrid() = default;

    /// Validates m >= 2, strict monotonicity and uniform spacing
    /// (1e-12 relative tolerance). Non-uniform grids are rejected.
    explicit AtomGrid(std::vector<double> atoms);

    /// atoms[i] = v_min + i * (v_max - v_min) / (m - 1).
    static AtomGrid uniform(double v_min, double v_max, std::size_t m);

    std::size_t size() const { return atoms_.size(); }
    double operator[](std::size_t i) const { return atoms_[i]; }
    const std::vector<double>& atoms() const { return atoms_; }
    double spacing() const { return dz_; }
    double min() const { return atoms_.front(); }
    double max() const { return atoms_.back(); }
    double span() const { return atoms_.back() - atoms_.front(); }

    friend bool operator==(const AtomGrid& a, const AtomGrid& b) {
        return a.atoms_ == b.atoms_;
    }

private:
    std::vector<double> atoms_;
    double dz_ = 0.0;
};

using GridPtr = std::shared_ptr<const AtomGrid>;

inline GridPtr make_uniform_grid(double v_min, double v_max, std::size_t m) {
    return std::make_shared<const AtomGrid>(AtomGrid::uniform(v_min, v_max, m));
}

/// True when two measures may be compared / combined:
/// same object or equal atom vectors.
bool same_grid(const GridPtr& a, const GridPtr& b);

struct WeightedParticle {
    double position = 0.0;
    double weight = 0.0;
};

/// Finite weighted particle set; positions may lie off-grid or outside the
/// grid range. Intermediate form before categorical projection.
using ParticleSet = std::vector<WeightedParticle>;

/// Mass vector over an AtomGrid. Entries may be negative. Elements of the
/// unit-total-mass space satisfy |total_mass() - 1| <= 1e-9; zero-total-mass
/// measures (TD errors) use the same type.
class SignedMeasure {
public:
    SignedMeasure() = default;
    SignedMeasure(GridPtr grid, std::vector<double> masses);

    static SignedMeasure zero(GridPtr grid);
    static SignedMeasure uniform(GridPtr grid);
    static SignedMeasure dirac(GridPtr grid, std::size_t atom_index);

    const AtomGrid& grid() const { return *grid_; }
    const GridPtr& grid_ptr() const { return grid_; }
    std::vector<double>& masses() { return masses_; }
    const std::vector<double>& masses() const { return masses_; }
    std::size_t size() const { return masses_.size(); }

    double mean() const;
    double total_mass() const;
    double min_mass() const;
    bool is_distribution(double tol = 1e-12) const { return min_mass() >= -tol; }

    /// The measure as (atom, mass) particles.
    ParticleSet particles() const;

private:
    GridPtr grid_;
    std::vector<double> masses_;
};

/// Categorical projection Pi_c: l2-optimal mapping of a finite signed
/// measure onto the grid. Each particle splits linearly between its two
/// bracketing atoms; out-of-range positions clip to the nearest boundary
/// atom. Linear in the weights and preserves total mass.
/// Rejects NaN / infinite positions or weights.
SignedMeasure project(GridPtr grid, const ParticleSet& particles);

/// The grid-to-grid linear map (b_{shift,slope})_# followed by Pi_c.
/// Column i is the projection of a unit particle at shift + slope*atoms[i];
/// every column sums to 1 exactly. Stored sparsely (<= 2 entries/column).
class Pushforward {
public:
    /// slope must lie in (0, 1].
    Pushforward(GridPtr grid, double shift, double slope);

    std::size_t size() const { return lo_.size(); }

    /// out = M * in (overwrites out). Spans must have grid size.
    void apply_into(std::span<const double> in, std::span<double> out) const;

    /// out += scale * M * in.
    void accumulate(std::span<const double> in, std::span<double> out,
                    double scale = 1.0) const;

    std::vector<double> apply(const std::vector<double>& in) const;
    SignedMeasure apply(const SignedMeasure& mu) const;

    /// Sum of |in_i| over columns whose pushed position left the grid range.
    double clipped_mass(std::span<const double> in) const;
    bool any_clipped() const { return any_clipped_; }

    /// Sparse column structure: column j sends lower_weight(j) to
    /// lower_index(j) and the remainder to lower_index(j)+1.
    int lower_index(std::size_t col) const { return lo_[col]; }
    double lower_weight(std::size_t col) const { return w_lo_[col]; }

    /// Dense m x m matrix, dense()[row][col]; for tests and bindings.
    std::vector<std::vector<double>> dense() const;

private:
    GridPtr grid_;
    std::vector<int> lo_;         // lower atom index per column
    std::vector<double> w_lo_;    // mass fraction to lo_; 1 - w to lo_+1
    std::vector<bool> clipped_;
    bool any_clipped_ = false;
};

/// l_p distance between the step CDFs of two measures on the same grid:
/// (sum_{i<m-1} |F_a(z_i) - F_b(z_i)|^p * dz)^(1/p). Exact for grid
/// measures with equal total mass. Rejects grid mismatch.
double lp_distance(const SignedMeasure& a, const SignedMeasure& b, double p);

/// Same integral evaluated on arbitrary particle sets (supports need not
/// coincide); used as an independent route when comparing measures across
/// grids. Total masses must agree, otherwise the tail integral diverges.
double particle_lp_distance(const ParticleSet& a, const ParticleSet& b, double p);

/// Table mapping each (state, action) to a SignedMeasure on one shared grid.
class ReturnFunction {
public:
    ReturnFunction() = default;
    ReturnFunction(GridPtr grid, int n_states, int n_actions);

    static ReturnFunction uniform(GridPtr grid, int n_states, int n_actions);

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }
    const GridPtr& grid_ptr() const { return grid_; }
    const AtomGrid& grid() const { return *grid_; }

    SignedMeasure& at(int x, int a) { return table_[index(x, a)]; }
    const SignedMeasure& at(int x, int a) const { return table_[index(x, a)]; }

    std::size_t entries() const { return table_.size(); }
    SignedMeasure& entry(std::size_t i) { return table_[i]; }
    const SignedMeasure& entry(std::size_t i) const { return table_[i]; }

    /// max over (x,a) of |total_mass - 1|.
    double max_unit_mass_error() const;
    /// min over (x,a) and atoms of mass.
    double min_mass() const;

private:
    std::size_t index(int x, int a) const {
        return static_cast<std::size_t>(x) * n_actions_ + a;
    }
    GridPtr grid_;
    int n_states_ = 0;
    int n_actions_ = 0;
    std::vector<SignedMeasure> table_;
};

/// max over (x,a) of lp_distance. Rejects shape or grid mismatch.
double sup_lp_distance(const ReturnFunction& a, const ReturnFunction& b, double p);

} // namespace distq
