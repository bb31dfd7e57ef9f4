#include "helpers.hpp"

#include "lipcalc/lipschitz.hpp"
#include "lipcalc/oracles.hpp"

#include <cmath>

using namespace lipcalc;
using namespace testing_support;

namespace {

ScalarField square(const SpacePtr& sp) {
    return ScalarField::from_function(sp, [&](index_t i) {
        const double x = sp->coords()(static_cast<Eigen::Index>(i), 0);
        return x * x;
    });
}

}  // namespace

TEST_CASE("global Lipschitz constants by pair enumeration") {
    const auto g = grid1d(0.1);
    CHECK(global_lip(ScalarField::constant(g, 4.0)) == 0);
    CHECK(global_lip(ScalarField::coordinate(g, 0)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(global_lip(square(g)) == doctest::Approx(1.9).epsilon(1e-12));
}

TEST_CASE("pointwise slope profiles") {
    const auto g = grid1d(0.01);
    const auto x = ScalarField::coordinate(g, 0);
    const auto p = pointwise_lip_profile(x, 50, {0.2, 0.1, 0.05, 0.02});
    for (double s : p.slopes) CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(p.upper == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(p.lower == doctest::Approx(1.0).epsilon(1e-9));

    // x^2 at the right end: slope (1 - (1-r)^2)/r = 2 - r
    const auto q = pointwise_lip_profile(square(g), 100, {0.08, 0.04, 0.02});
    for (std::size_t k = 0; k < q.scales.size(); ++k) CHECK(q.slopes[k] == doctest::Approx(2 - q.scales[k]).epsilon(1e-6));

    // distance to a point has slope exactly 1 there
    const auto d = ScalarField::distance_to(g, 30);
    for (double s : pointwise_lip_profile(d, 30, {0.1, 0.05}).slopes) CHECK(s == doctest::Approx(1.0).epsilon(1e-12));

    // scales below the nearest-neighbor distance are dropped
    const auto e = pointwise_lip_profile(x, 50, {0.05, 0.001});
    CHECK(e.dropped_scales == std::vector<double>{0.001});
    CHECK(p.upper <= global_lip(x) + 1e-12);
}

TEST_CASE("Lip-lip ratio conventions and a sawtooth") {
    const auto g = grid1d(0.01);
    CHECK(liplip_ratio(ScalarField::constant(g, 2.0), 40, {0.1, 0.05}) == 1.0);
    // Triangle wave of amplitude 0.01 and period 0.04: at a peak the slope over
    // radius 0.02 is (0.01)/0.02 and over radius 0.04 is 0 net change, giving
    // max slope 0.5 at r=0.02 and 0.25 at r=0.04.
    const auto saw = ScalarField::from_function(g, [&](index_t i) {
        const double t = std::fmod(static_cast<double>(i), 4.0);
        return 0.01 * (t <= 2 ? t / 2 : (4 - t) / 2);
    });
    const auto p = pointwise_lip_profile(saw, 42, {0.0400001, 0.0200001});
    CHECK(p.slopes[0] == doctest::Approx(0.01 / 0.0400001));
    CHECK(p.slopes[1] == doctest::Approx(0.01 / 0.0200001));
    CHECK(liplip_ratio(saw, 42, {0.0400001, 0.0200001}) == doctest::Approx(0.0400001 / 0.0200001).epsilon(1e-12));
}

TEST_CASE("McShane extension matches on the subset and keeps the constant") {
    const auto g = grid1d(0.1);
    const auto ext = mcshane_extend(g, {0, 10}, {0.0, 1.0});
    for (index_t i = 0; i < g->size(); ++i) CHECK(ext[i] == doctest::Approx(g->coords()(static_cast<Eigen::Index>(i), 0)).epsilon(1e-12));

    const auto c = generate_space(SpaceSpec::middle_thirds(6));
    index_t lo = 0, hi = 0;
    for (index_t i = 0; i < c->size(); ++i) {
        if (c->coords()(static_cast<Eigen::Index>(i), 0) < c->coords()(static_cast<Eigen::Index>(lo), 0)) lo = i;
        if (c->coords()(static_cast<Eigen::Index>(i), 0) > c->coords()(static_cast<Eigen::Index>(hi), 0)) hi = i;
    }
    const auto ce = mcshane_extend(c, {lo, hi}, {0.0, 1.0});
    CHECK(ce[lo] == 0.0);
    CHECK(ce[hi] == 1.0);
    // the endpoints sit 1 - 3^-6 apart, which fixes the slope of the extension
    const double l = 1 / c->distance(lo, hi);
    CHECK(l == doctest::Approx(1 / (1 - std::pow(3.0, -6))).epsilon(1e-14));
    for (index_t i = 0; i < c->size(); ++i)
        CHECK(ce[i] == doctest::Approx(std::min(l * c->distance(i, lo), 1 + l * c->distance(i, hi))).epsilon(1e-14));
    CHECK(global_lip(ce) <= l * (1 + 1e-12));

    std::mt19937_64 rng(11);
    for (int t = 0; t < 20; ++t) {
        const auto sp = random_space(rng, 40);
        std::vector<index_t> a{0, 3, 7, 20, 33};
        std::vector<double> v{0.3, -1.0, 2.0, 0.0, 0.5};
        const double la = subset_lip(*sp, a, v);
        const auto e = mcshane_extend(sp, a, v);
        for (std::size_t k = 0; k < a.size(); ++k) CHECK(e[a[k]] == v[k]);
        CHECK(global_lip(e) <= la * (1 + 1e-12));
    }
}

TEST_CASE("weak-* check") {
    const auto g = grid1d(0.05);
    const auto f = ScalarField::coordinate(g, 0);
    CHECK(weakstar_check({f, f, f}, f, 1.0).converges);
    std::vector<ScalarField> seq;
    for (int m = 1; m <= 2000; m *= 2) seq.push_back(f.affine(1.0, 1.0 / m / 1e6));
    CHECK(weakstar_check(seq, f, 1.0, 1e-8).converges);
    // sawtooth of slope m: L(f_m) = m breaks any fixed budget
    std::vector<ScalarField> saw;
    for (int m = 1; m <= 8; ++m)
        saw.push_back(ScalarField::from_function(g, [&, m](index_t i) { return (i % 2) * 0.05 * m; }));
    const auto v = weakstar_check(saw, ScalarField::constant(g, 0.0), 2.0);
    CHECK_FALSE(v.converges);
    CHECK_FALSE(v.lip_bounded);
    CHECK(v.sup_lip == doctest::Approx(8.0));
}

TEST_CASE("Hajlasz gradients") {
    const auto path = generate_space(SpaceSpec::path_graph(3));
    CHECK(hajlasz_gradient(ScalarField::constant(path, 1.0), 2).norm == 0);

    const auto two = generate_space(SpaceSpec::path_graph(2));
    const ScalarField jump(two, {0.0, 1.0});
    const auto inf = hajlasz_gradient(jump, kInf);
    CHECK(inf.norm == 0.5);
    CHECK(inf.g == std::vector<double>{0.5, 0.5});

    // u = (0,1,2) on the unit path with mu = 1/3 each: g = 1/2 everywhere, norm 1/2.
    const ScalarField ramp(path, {0.0, 1.0, 2.0});
    const auto h = hajlasz_gradient(ramp, 2);
    CHECK(h.norm == doctest::Approx(0.5).epsilon(1e-10));
    for (double gv : h.g) CHECK(gv == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(hajlasz_p2_oracle(ramp) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(hajlasz_grid_oracle(ramp, 2, 0.01, 1.0) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(hajlasz_violation(ramp, h.g) <= 1e-9);

    std::mt19937_64 rng(5);
    for (int t = 0; t < 10; ++t) {
        const auto sp = random_space(rng, 5);
        std::vector<double> v(5);
        for (auto& x : v) x = std::uniform_real_distribution<double>(-1, 1)(rng);
        const ScalarField u(sp, v);
        CHECK(hajlasz_gradient(u, kInf).norm == hajlasz_inf_oracle(u));
        CHECK(hajlasz_gradient(u, 2).norm == doctest::Approx(hajlasz_p2_oracle(u)).epsilon(1e-9));
    }
    // p = 3 against a grid search: the grid optimum is feasible, so it bounds
    // the solver from above, and it is within one grid cell of the true optimum
    for (int t = 0; t < 5; ++t) {
        const auto sp = random_space(rng, 3);
        std::vector<double> v(3);
        for (auto& x : v) x = std::uniform_real_distribution<double>(-1, 1)(rng);
        const ScalarField u(sp, v);
        const auto p3 = hajlasz_gradient(u, 3);
        CHECK(hajlasz_violation(u, p3.g) <= 1e-9);
        const double upper = 1.05 * *std::max_element(p3.g.begin(), p3.g.end()) + 0.01;
        const double grid = hajlasz_grid_oracle(u, 3, upper / 200, upper);
        CHECK(p3.norm <= grid + 1e-12);
        CHECK(p3.norm >= grid - 3 * upper / 200);
    }
}

TEST_CASE("Hajlasz solver reports non-convergence") {
    std::mt19937_64 rng(8);
    const auto sp = random_space(rng, 6);
    const auto u = ScalarField::from_function(sp, [](index_t i) { return std::sin(static_cast<double>(i)); });
    HajlaszOptions opts;
    opts.max_iters = 1;
    opts.tol = 1e-15;
    CHECK_THROWS_AS(hajlasz_gradient(u, 2, opts), HajlaszNonConvergence);
}

TEST_CASE("polynomial chain rule") {
    const auto g = grid1d(0.01);
    const std::vector<ScalarField> f{ScalarField::coordinate(g, 0)};
    const Polynomial sq{{{{2}, 1.0}}};
    const auto chk = poly_chain_rule_check(f, 50, sq, {0.04, 0.02, 0.01});
    CHECK(chk.bound == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(chk.composite_lip == doctest::Approx(1.04).epsilon(1e-9));
    CHECK_FALSE(chk.violation);

    const std::vector<ScalarField> c{ScalarField::constant(g, 0.3)};
    const Polynomial cube{{{{3}, 1.0}}};
    const auto cc = poly_chain_rule_check(c, 20, cube, {0.04, 0.02});
    CHECK(cc.composite_lip == 0);
    CHECK_FALSE(cc.violation);

    const Polynomial p{{{{2, 0}, 1.0}, {{1, 1}, 1.0}}};
    CHECK(p({1.0, 2.0}) == 3.0);
    CHECK(p.gradient({1.0, 2.0}) == std::vector<double>{4.0, 1.0});
    const nlohmann::json j = p;
    CHECK(j.get<Polynomial>()({0.5, -1.0}) == p({0.5, -1.0}));
}
