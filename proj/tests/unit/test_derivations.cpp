#include "helpers.hpp"

#include "lipcalc/derivations.hpp"

#include <cmath>
#include <filesystem>

using namespace lipcalc;
using namespace testing_support;

namespace {

ScalarField ambient(const SpacePtr& sp, double (*fn)(double, double)) {
    return ScalarField::from_function(sp, [&](index_t i) {
        const auto r = static_cast<Eigen::Index>(i);
        return fn(sp->coords()(r, 0), sp->coords().cols() > 1 ? sp->coords()(r, 1) : 0.0);
    });
}

}  // namespace

TEST_CASE("forward difference stencils") {
    const double h = 0.125;
    const auto g = grid1d(h);
    const auto d = build_stencil(g, StencilScheme::coordinate_axis(0, 1), h);
    CHECK(d.stencil(0).size() == 1);
    CHECK(d.stencil(0)[0].neighbor == 1);
    CHECK(d.stencil(0)[0].weight == 8.0);
    // boundary point falls back to the backward neighbor
    CHECK(d.stencil(8)[0].neighbor == 7);
    CHECK(d.stencil(8)[0].weight == -8.0);
    for (double v : d.apply(ScalarField::constant(g, 3.0))) CHECK(v == 0.0);
    for (double v : d.apply(ScalarField::coordinate(g, 0))) CHECK(v == 1.0);
    for (index_t x = 0; x < g->size(); ++x) CHECK(d.normalization(x) == 1.0);
}

TEST_CASE("stencils must stay inside the support") {
    const auto g = grid1d(0.25);
    std::vector<std::vector<StencilEntry>> st(g->size());
    st[0].push_back({3, 1.0});
    CHECK_THROWS_AS(StencilDerivation(g, 0.5, st), Error);
}

TEST_CASE("Leibniz defect") {
    const auto g = grid1d(0.125);
    const auto d = build_stencil(g, StencilScheme::coordinate_axis(0, 1), 0.125);
    const auto x = ScalarField::coordinate(g, 0);
    CHECK(leibniz_defect(d, x, x).defect[0] == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(leibniz_defect(d, ScalarField::constant(g, 2.0), x).sup == 0);

    // snowflaked line: weight 1/d^s, defect h^2 / h^s
    const auto sf = generate_space(SpaceSpec::snowflake(SpaceSpec::euclidean_grid({0.0}, {1.0}, 0.0625), 0.5));
    const auto ds = build_stencil(sf, StencilScheme::coordinate_axis(0, 1), 0.25 * (1 + 1e-9));
    const auto xs = ScalarField::coordinate(sf, 0);
    CHECK(leibniz_defect(ds, xs, xs).defect[0] == doctest::Approx(std::pow(0.0625, 1.5)).epsilon(1e-12));
}

TEST_CASE("Jacobi matrices of coordinate stencils") {
    const double h = 0.125;
    const auto g = grid2d(h);
    std::vector<StencilDerivation> ds{build_stencil(g, StencilScheme::coordinate_axis(0, 2), h),
                                      build_stencil(g, StencilScheme::coordinate_axis(1, 2), h)};
    const auto jf = jacobi_matrix(ds, {ScalarField::coordinate(g, 0), ScalarField::coordinate(g, 1)});
    CHECK(jf.rows() == 2);
    CHECK(jf.cols() == 2);
    for (const auto& m : jf.matrices) CHECK(m == Mat::Identity(2, 2));
    const auto rr = pointwise_rank(jf, *g, 1e-8);
    CHECK(rr.essential_rank == 2);

    std::vector<StencilDerivation> dup{ds[0], ds[0]};
    CHECK(pointwise_rank(jacobi_matrix(dup, {ScalarField::coordinate(g, 0), ScalarField::coordinate(g, 1)}), *g, 1e-8)
              .essential_rank == 1);

    std::vector<StencilDerivation> zero{StencilDerivation(g, h, std::vector<std::vector<StencilEntry>>(g->size()))};
    const auto jz = jacobi_matrix(zero, {ScalarField::coordinate(g, 0)});
    for (const auto& m : jz.matrices) CHECK(m(0, 0) == 0.0);
}

TEST_CASE("rank scaling invariance") {
    const double h = 0.0625;
    const auto g = grid2d(h);
    std::vector<StencilDerivation> ds{build_stencil(g, StencilScheme::coordinate_axis(0, 2), h),
                                      build_stencil(g, StencilScheme::coordinate_axis(1, 2), h)};
    const std::vector<ScalarField> gens{ambient(g, [](double a, double b) { return a * a + b; }),
                                        ambient(g, [](double a, double b) { return std::sin(a) * b; })};
    const auto base = pointwise_rank(jacobi_matrix(ds, gens), *g, 1e-3);
    std::vector<double> lambda(g->size());
    for (index_t i = 0; i < g->size(); ++i) lambda[i] = 1.0 + static_cast<double>(i % 5);
    std::vector<StencilDerivation> sc{ds[0].scaled(lambda), ds[1]};
    const auto other = pointwise_rank(jacobi_matrix(sc, gens), *g, 1e-3);
    CHECK(base.rank == other.rank);
}

TEST_CASE("three stencils in the plane have a small third singular value") {
    const double h = 1.0 / 32;
    const auto g = grid2d(h);
    Vec diag(2);
    diag << 1, 1;
    std::vector<StencilDerivation> ds{build_stencil(g, StencilScheme::coordinate_axis(0, 2), h * (1 + 1e-9)),
                                      build_stencil(g, StencilScheme::coordinate_axis(1, 2), h * (1 + 1e-9)),
                                      build_stencil(g, StencilScheme::along(diag), std::sqrt(2.0) * h * (1 + 1e-9))};
    const std::vector<ScalarField> gens{ScalarField::coordinate(g, 0), ScalarField::coordinate(g, 1),
                                        ambient(g, [](double a, double b) { return std::hypot(a + 1, b + 1); })};
    const auto rr = pointwise_rank(jacobi_matrix(ds, gens), *g, 10 * h);
    CHECK(rr.essential_rank == 2);
    CHECK(rr.max_tail_ratio(2) <= 10 * h);
}

TEST_CASE("adjugate and orthogonalization") {
    Mat a(2, 2);
    a << 1, 2, 3, 4;
    Mat adj(2, 2);
    adj << 4, -2, -3, 1;
    CHECK((adjugate(a) - adj).norm() == 0);

    JacobiField jf;
    jf.derivations = {"d1", "d2"};
    jf.generators = {"g1", "g2"};
    jf.matrices = {Mat::Identity(2, 2), a, (Mat(2, 2) << 1, 2, 2, 4).finished()};
    const auto ob = orthogonalize(jf);
    CHECK(ob.coefficients[0] == Mat::Identity(2, 2));
    CHECK(ob.orthogonalized[0] == Mat::Identity(2, 2));
    CHECK(ob.det[1] == doctest::Approx(-2.0));
    CHECK((ob.orthogonalized[1] + 2 * Mat::Identity(2, 2)).norm() <= 1e-12);
    CHECK(ob.degenerate == std::vector<index_t>{2});
    CHECK(ob.subsets[2].empty());

    std::mt19937_64 rng(4);
    std::normal_distribution<double> n01;
    for (int m = 1; m <= 4; ++m) {
        Mat r(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) r(i, j) = n01(rng);
        CHECK((adjugate(r) * r - r.determinant() * Mat::Identity(m, m)).norm() <= 1e-9 * std::abs(r.determinant()) * m);
    }
}

TEST_CASE("change of variables") {
    Mat dg(1, 2);
    dg << 2, 3;
    const auto cv = change_of_variables(dg);
    Mat t(2, 2);
    t << 1, 0, -3, 2;
    CHECK(cv.t == t);
    CHECK(cv.transformed(0, 0) == 2);
    CHECK(cv.transformed(0, 1) == 0);

    Mat sq = 3 * Mat::Identity(2, 2);
    CHECK(change_of_variables(sq).t == Mat::Identity(2, 2));

    Mat zero_tail(1, 3);
    zero_tail << 5, 0, 0;
    const auto z = change_of_variables(zero_tail);
    CHECK(z.t(1, 1) == 5);
    CHECK(z.t(2, 2) == 5);
    CHECK(z.t(1, 0) == 0);

    Mat bad(2, 3);
    bad << 1, 1, 0, 0, 1, 0;
    CHECK_THROWS_AS(change_of_variables(bad), Error);
}

TEST_CASE("pushforward along a collapsing map") {
    // fiber {a, b} -> 0 with mu = (1, 3), c -> 1; pi = (0, 1) so pi o xi = (0, 0, 1)
    const auto sp = points({{0.0}, {1.0}, {2.0}}, {1.0, 3.0, 1.0});
    std::vector<std::vector<StencilEntry>> st(3);
    st[0].push_back({2, 4.0});
    const StencilDerivation d(sp, 2.0, st);
    const auto pf = pushforward(d, {0, 0, 1}, 2, {{0.0, 1.0}}, {{1.0, 1.0}, {2.0, -1.0}});
    CHECK(pf.measure == std::vector<double>{4.0, 1.0});
    CHECK(pf.derivation[0][0] == 1.0);
    CHECK(pf.max_residual <= 1e-12);

    const auto same = pushforward(d, {0, 1, 2}, 3, {{0.5, -1.0, 2.0}}, {{1.0, 1.0, 1.0}});
    CHECK(same.measure == sp->weights());
    CHECK(same.derivation[0][0] == d.apply_at(ScalarField(sp, {0.5, -1.0, 2.0}), 0));

    const auto one = pushforward(d, {0, 0, 0}, 1, {{7.0}}, {{1.0}});
    CHECK(one.derivation[0][0] == 0.0);
}

TEST_CASE("chain rule field") {
    const auto g = grid2d(0.125);
    std::vector<StencilDerivation> ds{build_stencil(g, StencilScheme::coordinate_axis(0, 2), 0.125),
                                      build_stencil(g, StencilScheme::coordinate_axis(1, 2), 0.125)};
    const auto lin = ambient(g, [](double a, double b) { return 3 * a - 2 * b; });
    const auto cf = chain_rule_field(ds, lin);
    for (const auto& v : cf.v) {
        CHECK(v[0] == doctest::Approx(3.0).epsilon(1e-12));
        CHECK(v[1] == doctest::Approx(-2.0).epsilon(1e-12));
    }
    for (const auto& v : chain_rule_field(ds, ScalarField::constant(g, 1.0)).v) CHECK(v.norm() == 0);
    const auto prod = ambient(g, [](double a, double b) { return a * b; });
    const auto cp = chain_rule_field(ds, prod);
    for (index_t i = 0; i < g->size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        CHECK(std::abs(cp.v[i][0] - g->coords()(r, 1)) <= 0.125 + 1e-12);
        CHECK(std::abs(cp.v[i][1] - g->coords()(r, 0)) <= 0.125 + 1e-12);
    }
}

TEST_CASE("rank bound experiment on grids") {
    const auto g = grid2d(1.0 / 32);
    std::vector<Vec> dirs;
    for (auto [a, b] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) dirs.push_back((Vec(2) << a, b).finished());
    const std::vector<ScalarField> gens{ScalarField::coordinate(g, 0), ScalarField::coordinate(g, 1),
                                        ambient(g, [](double a, double b) { return std::hypot(a + 0.5, b + 0.5); })};
    const auto rows = rank_bound_experiment(g, {1.0 / 32 * (1 + 1e-9), 1.0 / 16 * (1 + 1e-9)}, gens, dirs, index_t{2});
    for (const auto& r : rows) {
        CHECK(r.essential_rank == 2);
        CHECK(r.tail_ratio <= 10 * r.h);
        CHECK(r.within_bound);
    }

    // snowflaked line: the identity's difference quotient decays like h^(1-s)
    const auto sf = generate_space(SpaceSpec::snowflake(SpaceSpec::euclidean_grid({0.0}, {1.0}, 1.0 / 64), 0.5));
    const auto d = build_stencil(sf, StencilScheme::coordinate_axis(0, 1), 0.125 * (1 + 1e-9));
    double m = 0;
    for (double v : d.apply(ScalarField::coordinate(sf, 0))) m = std::max(m, std::abs(v));
    CHECK(m == doctest::Approx(0.125).epsilon(1e-9));
}

TEST_CASE("stencil CSV round-trip") {
    const auto g = grid1d(0.25);
    const auto d = build_stencil(g, StencilScheme::nearest_neighbor(), 0.25 * (1 + 1e-9));
    const auto path = (std::filesystem::temp_directory_path() / "lipcalc_stencil.csv").string();
    write_stencil_csv(d, path);
    const auto back = read_stencil_csv(g, path, 0.25 * (1 + 1e-9));
    for (index_t x = 0; x < g->size(); ++x) {
        REQUIRE(back.stencil(x).size() == d.stencil(x).size());
        CHECK(back.stencil(x)[0].neighbor == d.stencil(x)[0].neighbor);
        CHECK(back.stencil(x)[0].weight == d.stencil(x)[0].weight);
    }
}
