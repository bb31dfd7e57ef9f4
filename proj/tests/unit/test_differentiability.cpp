#include "helpers.hpp"

#include "lipcalc/differentiability.hpp"

#include <cmath>

using namespace lipcalc;
using namespace testing_support;

namespace {

std::vector<index_t> all_points(const MetricSpace& s) {
    std::vector<index_t> v(s.size());
    for (index_t i = 0; i < s.size(); ++i) v[i] = i;
    return v;
}

ScalarField ambient(const SpacePtr& sp, double (*fn)(double, double)) {
    return ScalarField::from_function(sp, [&](index_t i) {
        const auto r = static_cast<Eigen::Index>(i);
        return fn(sp->coords()(r, 0), sp->coords().cols() > 1 ? sp->coords()(r, 1) : 0.0);
    });
}

}  // namespace

TEST_CASE("residual profiles") {
    const auto g = grid1d(0.01);
    const Chart chart(g, all_points(*g), {ScalarField::coordinate(g, 0)});
    const auto x = ScalarField::coordinate(g, 0);
    const auto lin = x.affine(3.0, 1.0);
    const auto p = residual_profile(lin, chart, Vec::Constant(1, 3.0), 50, {0.1, 0.05, 0.02});
    for (double r : p.residuals) CHECK(r <= 1e-12);
    CHECK(p.differentiable);

    const auto sq = ambient(g, [](double a, double) { return a * a; });
    const auto q = residual_profile(sq, chart, Vec::Constant(1, 1.0), 50, {0.1, 0.05, 0.02});
    for (std::size_t k = 0; k < q.scales.size(); ++k) CHECK(q.residuals[k] <= q.scales[k] + 1e-12);
    CHECK(q.differentiable);

    const auto wrong = residual_profile(lin, chart, Vec::Zero(1), 50, {0.1, 0.05, 0.02});
    for (double r : wrong.residuals) CHECK(r == doctest::Approx(3.0));
    CHECK_FALSE(wrong.differentiable);
}

TEST_CASE("least-squares differentials") {
    const auto g = grid2d(0.05);
    const Chart chart(g, all_points(*g), {ScalarField::coordinate(g, 0), ScalarField::coordinate(g, 1)});
    const auto lin = ambient(g, [](double a, double b) { return 2 * a - 5 * b + 1; });
    for (index_t x : {0u, 100u, 220u}) {
        const Vec df = estimate_differential(lin, chart, x, 0.15);
        CHECK(df[0] == doctest::Approx(2.0).epsilon(1e-10));
        CHECK(df[1] == doctest::Approx(-5.0).epsilon(1e-10));
    }
    const auto f = ambient(g, [](double a, double b) { return a * a + a * b; });
    const index_t mid = 220;  // (0.5, 0.5)
    const Vec df = estimate_differential(f, chart, mid, 0.1);
    CHECK(df[0] == doctest::Approx(1.5).epsilon(1e-10));
    CHECK(df[1] == doctest::Approx(0.5).epsilon(1e-10));

    const Chart dup(g, all_points(*g), {ScalarField::coordinate(g, 0), ScalarField::coordinate(g, 0)});
    try {
        estimate_differential(lin, dup, mid, 0.1);
        FAIL("expected DegenerateChart");
    } catch (const DegenerateChart& e) {
        const Vec d = e.direction().normalized();
        CHECK(std::abs(d[0] + d[1]) <= 1e-9);
    }
    CHECK_THROWS_AS(estimate_differential(lin, chart, mid, 0.01), Error);

    const auto field = estimate_differential_field(lin, chart, 0.1);
    CHECK(field.degenerate.empty());
    CHECK(field.df.size() == g->size());
}

TEST_CASE("Lip-derivation ratio") {
    const double h = 0.01;
    const auto g = grid1d(h);
    const std::vector<StencilDerivation> basis{build_stencil(g, StencilScheme::coordinate_axis(0, 1), h * (1 + 1e-9))};
    const auto consts = lipderiv_check({ScalarField::constant(g, 1.0)}, basis, {0.04, 0.02}, 1.5);
    for (double k : consts.khat) CHECK(k == 1.0);

    const auto x = ScalarField::coordinate(g, 0);
    const auto fam = lipderiv_check({x, x.affine(2, 0), ambient(g, [](double a, double) { return a * a; })}, basis,
                                    {0.04, 0.02, 0.01 * (1 + 1e-9)}, 1.5);
    for (index_t i = 10; i <= 90; ++i) CHECK(fam.khat[i] <= 1 + 10 * 0.04);

    // oscillation below the stencil scale: Lip > 0 but df = 0
    const auto saw = ScalarField::from_function(g, [](index_t i) { return (i % 2) * 0.01; });
    const std::vector<StencilDerivation> coarse{build_stencil(g, StencilScheme::coordinate_axis(0, 1), 0.02 * (1 + 1e-9))};
    const auto s = lipderiv_check({saw}, coarse, {0.04, 0.02 * (1 + 1e-9)}, 1.5);
    CHECK_FALSE(s.infinite.empty());
}

TEST_CASE("chart lower constants") {
    const auto g = grid2d(0.05);
    const std::vector<double> scales{0.2, 0.1, 0.05 * (1 + 1e-9)};
    const Chart iso(g, all_points(*g), {ScalarField::coordinate(g, 0), ScalarField::coordinate(g, 1)});
    const auto k = chart_lower_constant(iso, 220, scales);
    CHECK(k.k >= 1 / std::sqrt(2.0) - 1e-9);
    CHECK(k.k <= 1 + 1e-9);
    CHECK_FALSE(k.degenerate);

    const auto x1 = ScalarField::coordinate(g, 0);
    const Chart dep(g, all_points(*g), {x1, x1.affine(2, 0)});
    const auto d = chart_lower_constant(dep, 220, scales);
    CHECK(d.degenerate);
    const Vec c = d.direction.normalized();
    CHECK(std::abs(std::abs(c[0]) - 2 / std::sqrt(5.0)) <= 1e-9);
    CHECK(std::abs(std::abs(c[1]) - 1 / std::sqrt(5.0)) <= 1e-9);

    const auto line = grid1d(0.05);
    const Chart l(line, all_points(*line), {ScalarField::coordinate(line, 0)});
    CHECK(chart_lower_constant(l, 10, {0.2, 0.1}).k == doctest::Approx(1.0));
    CHECK(sphere_directions(2, 200).size() >= 200);
}

TEST_CASE("dyadic subchart partition") {
    const auto one = subchart_partition({0, 1, 2}, {0.6, 0.6, 0.6});
    REQUIRE(one.size() == 1);
    CHECK(one[0].k == 0);
    CHECK(one[0].constant == 2.0);

    const auto three = subchart_partition({0, 1, 2}, {0.6, 0.3, 0.2});
    REQUIRE(three.size() == 3);
    for (const auto& s : three) {
        REQUIRE(s.points.size() == 1);
        CHECK(s.points[0] == static_cast<index_t>(s.k));
    }
    CHECK(subchart_partition({}, {}).empty());
}

TEST_CASE("charts from JSON") {
    const auto g = grid2d(0.25);
    const auto chart = chart_from_json(g, nlohmann::json::parse(R"({"points": "all",
        "coordinates": [{"kind": "coordinate", "index": 1}, {"kind": "distance", "base": "0"}]})"));
    CHECK(chart.dim() == 2);
    CHECK(chart.points().size() == g->size());
    CHECK(chart.lip() >= 1.0);
    CHECK_THROWS_AS(chart_from_json(g, nlohmann::json::parse(R"({"coordinates": [{"kind": "bogus"}]})")), Error);
}
