#include "helpers.hpp"

#include "lipcalc/nets.hpp"

#include <cmath>

using namespace lipcalc;
using namespace testing_support;

TEST_CASE("greedy scan net on a unit grid") {
    const auto g = grid1d(0.1);
    const auto n = build_net(*g, 0.25);
    CHECK(n.points == std::vector<index_t>{0, 3, 6, 9});
    CHECK(n.covering_radius == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(n.separation >= 0.25);
    CHECK(n.constant == 1.0);

    const auto all = build_net(*g, 0.05);
    CHECK(all.points.size() == g->size());
    CHECK(all.covering_radius == 0);

    const auto one = generate_space(SpaceSpec::path_graph(1));
    CHECK(build_net(*one, 3.0).points == std::vector<index_t>{0});
}

TEST_CASE("net contract holds for every strategy and seed") {
    std::mt19937_64 rng(21);
    for (int t = 0; t < 20; ++t) {
        const auto sp = random_space(rng, 80);
        for (auto strat : {NetStrategy::GreedyScan, NetStrategy::FarthestPoint}) {
            const double eps = 0.05 + 0.02 * t;
            const auto n = build_net(*sp, eps, strat, static_cast<std::uint64_t>(t));
            CHECK(n.separation >= eps);
            CHECK(n.covering_radius <= eps);
            for (index_t x = 0; x < sp->size(); ++x) CHECK(sp->distance(x, n.points[n.nearest[x]]) <= n.covering_radius);
        }
    }
    CHECK(parse_net_strategy("farthest_point") == NetStrategy::FarthestPoint);
    CHECK_THROWS_AS(parse_net_strategy("nope"), Error);
}

TEST_CASE("a requested first point leads the net") {
    const auto g = grid1d(0.1);
    const auto n = build_net(*g, 0.25, NetStrategy::GreedyScan, 0, index_t{5});
    CHECK(n.points.front() == 5);
    CHECK(n.separation >= 0.25);
}

TEST_CASE("piecewise-distance approximation") {
    const auto g = grid1d(0.1);
    const auto u = ScalarField::coordinate(g, 0);
    const auto n = build_net(*g, 0.5);
    REQUIRE(n.points == std::vector<index_t>{0, 5, 10});
    const auto a = piecewise_distance_approx(u, n);
    CHECK(a[3] == doctest::Approx(0.3).epsilon(1e-12));

    const auto c = ScalarField::constant(g, 2.5);
    const auto pc = piecewise_distance_approx(c, n);
    for (double v : pc.values()) CHECK(v == 2.5);
    const auto every = piecewise_distance_approx(u, build_net(*g, 0.01));
    for (index_t i = 0; i < g->size(); ++i) CHECK(every[i] == u[i]);
}

TEST_CASE("Kuhn simplex location") {
    const KuhnTriangulation line{1, 0};
    const auto s1 = locate_simplex(Vec::Constant(1, 0.25), line);
    REQUIRE(s1.vertices.size() == 2);
    CHECK(s1.vertices[0] == LatticePoint{0});
    CHECK(s1.vertices[1] == LatticePoint{1});
    CHECK(s1.barycentric[0] == doctest::Approx(0.75));
    CHECK(s1.barycentric[1] == doctest::Approx(0.25));

    const KuhnTriangulation plane{2, 0};
    Vec z(2);
    z << 0.7, 0.2;
    const auto s2 = locate_simplex(z, plane);
    CHECK(s2.vertices == std::vector<LatticePoint>{{0, 0}, {1, 0}, {1, 1}});
    CHECK(s2.barycentric[0] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(s2.barycentric[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s2.barycentric[2] == doctest::Approx(0.2).epsilon(1e-12));

    Vec v(2);
    v << 1.0, 2.0;
    const auto s3 = locate_simplex(v, plane);
    CHECK(s3.barycentric[0] == doctest::Approx(1.0));

    // barycentric coordinates reproduce the query point at a finer level
    const KuhnTriangulation fine{3, 2};
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int t = 0; t < 200; ++t) {
        Vec q(3);
        for (int k = 0; k < 3; ++k) q[k] = u(rng);
        const auto s = locate_simplex(q, fine);
        Vec back = Vec::Zero(3);
        double total = 0;
        for (std::size_t i = 0; i < s.vertices.size(); ++i) {
            for (int k = 0; k < 3; ++k) back[k] += s.barycentric[i] * static_cast<double>(s.vertices[i][k]) * fine.scale();
            total += s.barycentric[i];
            CHECK(s.barycentric[i] >= -1e-12);
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        CHECK((back - q).norm() <= 1e-12);
    }
}

TEST_CASE("piecewise-linear extension") {
    const KuhnTriangulation tri{2, 0};
    LatticeField affine, constant;
    for (long long i = 0; i <= 2; ++i)
        for (long long j = 0; j <= 2; ++j) {
            affine[{i, j}] = 2.0 * i - 3.0 * j + 1.0;
            constant[{i, j}] = 4.0;
        }
    std::vector<Vec> qs;
    for (double a : {0.1, 0.5, 1.3, 1.9})
        for (double b : {0.2, 0.7, 1.6}) {
            Vec q(2);
            q << a, b;
            qs.push_back(q);
        }
    const auto pa = pl_extend(affine, tri, qs);
    for (std::size_t k = 0; k < qs.size(); ++k) {
        CHECK(pa.values[k] == doctest::Approx(2 * qs[k][0] - 3 * qs[k][1] + 1).epsilon(1e-12));
        CHECK(pa.gradients[k][0] == doctest::Approx(2.0));
        CHECK(pa.gradients[k][1] == doctest::Approx(-3.0));
    }
    CHECK(pa.max_gradient_norm == doctest::Approx(std::sqrt(13.0)));
    CHECK(pa.max_gradient_norm >= pa.vertex_lip - 1e-12);

    const auto pc = pl_extend(constant, tri, qs);
    CHECK(pc.max_gradient_norm == 0);
    for (double v : pc.values) CHECK(v == 4.0);

    Vec far(2);
    far << 5.5, 5.5;
    CHECK_THROWS_AS(pl_extend(affine, tri, {far}), Error);
}

TEST_CASE("affine piece on a simplex") {
    Vec a = Vec::Zero(2), b(2), c(2);
    b << 1, 0;
    c << 0, 1;
    const auto p = affine_on_simplex({a, b, c}, {0, 1, 1});
    CHECK(p.gradient[0] == doctest::Approx(1.0));
    CHECK(p.gradient[1] == doctest::Approx(1.0));
    CHECK(p.gradient.norm() == doctest::Approx(std::sqrt(2.0)));
    Vec mid(2);
    mid << 1.0 / 3, 1.0 / 3;
    CHECK(p(mid) == doctest::Approx(2.0 / 3));
}
