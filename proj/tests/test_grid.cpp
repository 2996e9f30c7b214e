#include <doctest.h>

#include <cmath>
#include <random>

#include "distq/grid.hpp"
#include "distq/serialize.hpp"
#include "test_helpers.hpp"

using namespace distq;

namespace {

ParticleSet random_particles(std::mt19937_64& rng, double lo, double hi, int n,
                             bool unit_mass) {
    std::uniform_real_distribution<double> pos(lo, hi);
    std::uniform_real_distribution<double> w(0.01, 1.0);
    ParticleSet out(n);
    double total = 0.0;
    for (auto& p : out) {
        p.position = pos(rng);
        p.weight = w(rng);
        total += p.weight;
    }
    if (unit_mass)
        for (auto& p : out) p.weight /= total;
    return out;
}

// independent route for the two-atom split: minimize the particle-CDF l2
// distance over the mass fraction by golden-section search
double best_two_atom_split(double y, double z_lo, double z_hi) {
    auto dist = [&](double s) {
        return particle_lp_distance({{y, 1.0}}, {{z_lo, s}, {z_hi, 1.0 - s}}, 2.0);
    };
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = 0.0, b = 1.0;
    double c = b - phi * (b - a), d = a + phi * (b - a);
    for (int i = 0; i < 80; ++i) {
        if (dist(c) < dist(d))
            b = d;
        else
            a = c;
        c = b - phi * (b - a);
        d = a + phi * (b - a);
    }
    return (a + b) / 2.0;
}

} // namespace

TEST_CASE("uniform grid construction") {
    const auto g2 = AtomGrid::uniform(0.0, 1.0, 2);
    CHECK(g2.atoms() == std::vector<double>{0.0, 1.0});

    const auto g51 = AtomGrid::uniform(-10.0, 10.0, 51);
    CHECK(g51.size() == 51);
    CHECK(g51[0] == -10.0);
    CHECK(g51[50] == 10.0);
    CHECK(g51.spacing() == doctest::Approx(0.4).epsilon(1e-14));
    CHECK(g51[1] == doctest::Approx(-9.6).epsilon(1e-14));

    const auto g3 = AtomGrid::uniform(0.0, 2.0, 3);
    CHECK(g3.atoms() == std::vector<double>{0.0, 1.0, 2.0});

    CHECK_THROWS_AS(AtomGrid::uniform(0.0, 1.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(AtomGrid::uniform(1.0, 1.0, 5), std::invalid_argument);
    CHECK_THROWS_AS(AtomGrid::uniform(2.0, 1.0, 5), std::invalid_argument);
    // non-uniform spacing rejected at construction
    CHECK_THROWS_AS(AtomGrid({0.0, 1.0, 2.0, 4.0}), std::invalid_argument);
    CHECK_THROWS_AS(AtomGrid({0.0, 0.0, 1.0}), std::invalid_argument);
}

TEST_CASE("projection splits a particle over its bracketing atoms") {
    const auto grid = make_uniform_grid(0.0, 2.0, 3);

    // the l2-optimal split found independently by golden-section search
    const double s = best_two_atom_split(0.3, 0.0, 1.0);
    CHECK(s == doctest::Approx(0.7).epsilon(1e-8));

    const auto proj = project(grid, {{0.3, 1.0}});
    CHECK(proj.masses()[0] == doctest::Approx(0.7).epsilon(1e-14));
    CHECK(proj.masses()[1] == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(proj.masses()[2] == 0.0);

    const auto clipped = project(grid, {{-5.0, 1.0}});
    CHECK(clipped.masses() == std::vector<double>{1.0, 0.0, 0.0});

    const auto signed_set = project(grid, {{0.5, 1.5}, {1.5, -0.5}});
    CHECK(signed_set.masses()[0] == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(signed_set.masses()[1] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(signed_set.masses()[2] == doctest::Approx(-0.25).epsilon(1e-14));
    CHECK(signed_set.total_mass() == doctest::Approx(1.0).epsilon(1e-14));

    CHECK_THROWS_AS(project(grid, {{std::nan(""), 1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(
        project(grid, {{std::numeric_limits<double>::infinity(), 1.0}}),
        std::invalid_argument);
}

TEST_CASE("projection is linear and mass preserving") {
    std::mt19937_64 rng(11);
    const auto grid = make_uniform_grid(-3.0, 3.0, 13);
    for (int trial = 0; trial < 50; ++trial) {
        const auto u = random_particles(rng, -4.0, 4.0, 6, false);
        const auto v = random_particles(rng, -4.0, 4.0, 4, false);
        const double a = -1.3, b = 0.7;
        ParticleSet combined;
        for (auto p : u) {
            p.weight *= a;
            combined.push_back(p);
        }
        for (auto p : v) {
            p.weight *= b;
            combined.push_back(p);
        }
        const auto lhs = project(grid, combined);
        const auto pu = project(grid, u);
        const auto pv = project(grid, v);
        double total_in = 0.0;
        for (const auto& p : combined) total_in += p.weight;
        CHECK(lhs.total_mass() == doctest::Approx(total_in).epsilon(1e-12));
        for (std::size_t i = 0; i < lhs.size(); ++i)
            CHECK(lhs.masses()[i] ==
                  doctest::Approx(a * pu.masses()[i] + b * pv.masses()[i])
                      .epsilon(1e-12));
    }
}

TEST_CASE("projection is non-expansive in l2 inside the grid range") {
    std::mt19937_64 rng(7);
    const auto grid = make_uniform_grid(-2.0, 2.0, 9);
    for (int trial = 0; trial < 50; ++trial) {
        const auto u = random_particles(rng, -2.0, 2.0, 5, true);
        const auto v = random_particles(rng, -2.0, 2.0, 7, true);
        const double before = particle_lp_distance(u, v, 2.0);
        const double after = lp_distance(project(grid, u), project(grid, v), 2.0);
        CHECK(after <= before + 1e-12);
    }
}

TEST_CASE("projection is idempotent on grid measures, bit for bit") {
    std::mt19937_64 rng(23);
    const auto grid = make_uniform_grid(-1.7, 2.9, 24);
    auto mu = random_signed_measure(grid, rng);
    const auto again = project(grid, mu.particles());
    CHECK(again.masses() == mu.masses());
}

TEST_CASE("pushforward matrix structure") {
    const auto g3 = make_uniform_grid(0.0, 2.0, 3);
    const Pushforward identity(g3, 0.0, 1.0);
    const auto dense = identity.dense();
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(dense[i][j] == (i == j ? 1.0 : 0.0));

    const auto g2 = make_uniform_grid(0.0, 1.0, 2);
    const Pushforward clip(g2, 2.0, 0.9);
    const auto pushed = clip.apply(SignedMeasure::dirac(g2, 1));
    CHECK(pushed.masses() == std::vector<double>{0.0, 1.0});
    CHECK(clip.any_clipped());

    const Pushforward half(g3, 0.5, 0.5);
    const auto split = half.apply(SignedMeasure::dirac(g3, 2));
    CHECK(split.masses()[0] == 0.0);
    CHECK(split.masses()[1] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(split.masses()[2] == doctest::Approx(0.5).epsilon(1e-14));

    CHECK_THROWS_AS(Pushforward(g3, 0.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(Pushforward(g3, 0.0, 1.1), std::invalid_argument);

    // every column sums to 1 exactly, for arbitrary shift/slope
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> shift(-4.0, 4.0);
    std::uniform_real_distribution<double> slope(0.05, 1.0);
    const auto grid = make_uniform_grid(-2.0, 2.0, 11);
    for (int trial = 0; trial < 30; ++trial) {
        const Pushforward push(grid, shift(rng), slope(rng));
        const auto dense_m = push.dense();
        for (std::size_t j = 0; j < grid->size(); ++j) {
            double col = 0.0;
            for (std::size_t i = 0; i < grid->size(); ++i) col += dense_m[i][j];
            CHECK(col == 1.0);
        }
    }
}

TEST_CASE("lp distance closed form") {
    const auto g2 = make_uniform_grid(0.0, 1.0, 2);
    const auto d0 = SignedMeasure::dirac(g2, 0);
    const auto d1 = SignedMeasure::dirac(g2, 1);
    CHECK(lp_distance(d0, d0, 2.0) == 0.0);
    CHECK(lp_distance(d0, d1, 2.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(lp_distance(d0, d1, 1.0) == doctest::Approx(1.0).epsilon(1e-14));

    const auto g3 = make_uniform_grid(0.0, 2.0, 3);
    const auto a = SignedMeasure(g3, {1.0, 0.0, 0.0});
    const auto b = SignedMeasure(g3, {0.0, 0.0, 1.0});
    CHECK(lp_distance(a, b, 1.0) == doctest::Approx(2.0).epsilon(1e-14));

    const auto other = make_uniform_grid(0.0, 2.0, 5);
    CHECK_THROWS_AS(lp_distance(a, SignedMeasure::dirac(other, 0), 2.0),
                    std::invalid_argument);
}

TEST_CASE("grid distance agrees with the general particle route") {
    std::mt19937_64 rng(41);
    const auto grid = make_uniform_grid(-2.0, 2.0, 17);
    for (int trial = 0; trial < 40; ++trial) {
        const auto a = random_signed_measure(grid, rng);
        const auto b = random_signed_measure(grid, rng);
        for (double p : {1.0, 2.0}) {
            const double fast = lp_distance(a, b, p);
            const double slow = particle_lp_distance(a.particles(), b.particles(), p);
            CHECK(fast == doctest::Approx(slow).epsilon(1e-10));
        }
    }
}

TEST_CASE("lp distance is a metric on unit-mass measures") {
    std::mt19937_64 rng(5);
    const auto grid = make_uniform_grid(-1.0, 1.0, 9);
    for (int trial = 0; trial < 60; ++trial) {
        const auto a = random_signed_measure(grid, rng);
        const auto b = random_signed_measure(grid, rng);
        const auto c = random_signed_measure(grid, rng);
        for (double p : {1.0, 2.0}) {
            CHECK(lp_distance(a, b, p) == doctest::Approx(lp_distance(b, a, p)));
            CHECK(lp_distance(a, c, p) <=
                  lp_distance(a, b, p) + lp_distance(b, c, p) + 1e-9);
        }
    }
}

TEST_CASE("summary statistics") {
    const auto g = make_uniform_grid(0.0, 2.0, 2);
    CHECK(SignedMeasure(g, {0.5, 0.5}).mean() == doctest::Approx(1.0));

    const auto g01 = make_uniform_grid(0.0, 1.0, 2);
    const SignedMeasure signed_m(g01, {1.25, -0.25});
    CHECK(signed_m.total_mass() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(signed_m.min_mass() == doctest::Approx(-0.25));
    CHECK_FALSE(signed_m.is_distribution());

    CHECK(SignedMeasure::dirac(g01, 0).mean() == 0.0);
    CHECK(SignedMeasure::dirac(g01, 0).is_distribution());
}

TEST_CASE("sup distance over a table") {
    const auto grid = make_uniform_grid(0.0, 1.0, 5);
    ReturnFunction h1(grid, 1, 2), h2(grid, 1, 2);
    h1.at(0, 0) = SignedMeasure::dirac(grid, 0);
    h2.at(0, 0) = SignedMeasure::dirac(grid, 0);
    h1.at(0, 1) = SignedMeasure::dirac(grid, 1);
    h2.at(0, 1) = SignedMeasure::dirac(grid, 3);
    CHECK(sup_lp_distance(h1, h1, 2.0) == 0.0);
    CHECK(sup_lp_distance(h1, h2, 2.0) ==
          doctest::Approx(lp_distance(h1.at(0, 1), h2.at(0, 1), 2.0)));

    ReturnFunction wrong(grid, 2, 2);
    CHECK_THROWS_AS(sup_lp_distance(h1, wrong, 2.0), std::invalid_argument);
}

TEST_CASE("return function round trips exactly through csv and json") {
    std::mt19937_64 rng(67);
    const auto grid = make_uniform_grid(-1.3, 0.9, 7);
    ReturnFunction rf(grid, 2, 3);
    for (std::size_t i = 0; i < rf.entries(); ++i)
        rf.entry(i) = random_signed_measure(grid, rng);

    const auto from_csv = return_function_from_csv(return_function_to_csv(rf));
    REQUIRE(from_csv.n_states() == rf.n_states());
    for (std::size_t i = 0; i < rf.entries(); ++i)
        CHECK(from_csv.entry(i).masses() == rf.entry(i).masses());
    CHECK(from_csv.grid().atoms() == rf.grid().atoms());

    const auto from_json = return_function_from_json(return_function_to_json(rf));
    for (std::size_t i = 0; i < rf.entries(); ++i)
        CHECK(from_json.entry(i).masses() == rf.entry(i).masses());
}
