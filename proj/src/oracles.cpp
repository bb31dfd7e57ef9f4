#include "lipcalc/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace lipcalc {

namespace {

struct Constraint {
    index_t a, b;  // b == a for the nonnegativity constraint g_a >= 0
    double rhs;
};

std::vector<Constraint> constraints(const ScalarField& u) {
    const MetricSpace& s = *u.space();
    std::vector<Constraint> cs;
    for (index_t x = 0; x < s.size(); ++x)
        for (index_t y = x + 1; y < s.size(); ++y) cs.push_back({x, y, std::abs(u[x] - u[y]) / s.distance(x, y)});
    for (index_t x = 0; x < s.size(); ++x) cs.push_back({x, x, 0.0});
    return cs;
}

double lhs(const Constraint& c, const Vec& g) {
    return c.a == c.b ? g[static_cast<Eigen::Index>(c.a)] : g[static_cast<Eigen::Index>(c.a)] + g[static_cast<Eigen::Index>(c.b)];
}

}  // namespace

double hajlasz_p2_oracle(const ScalarField& u) {
    const MetricSpace& s = *u.space();
    const auto n = static_cast<Eigen::Index>(s.size());
    const auto cs = constraints(u);
    Vec dinv(n);
    for (Eigen::Index x = 0; x < n; ++x) dinv[x] = 1.0 / s.weight(static_cast<index_t>(x));

    double best = kInf;
    std::vector<index_t> active;
    auto evaluate = [&]() {
        const auto k = static_cast<Eigen::Index>(active.size());
        Vec g = Vec::Zero(n);
        if (k) {
            Mat a = Mat::Zero(k, n);
            Vec r(k);
            for (Eigen::Index i = 0; i < k; ++i) {
                const auto& c = cs[active[static_cast<index_t>(i)]];
                a(i, static_cast<Eigen::Index>(c.a)) = 1;
                a(i, static_cast<Eigen::Index>(c.b)) = 1;
                r[i] = c.rhs;
            }
            // Stationarity: D g = A^T lambda with D = diag(mu); then A D^-1 A^T lambda = r.
            const Mat gram = a * dinv.asDiagonal() * a.transpose();
            Eigen::FullPivLU<Mat> lu(gram);
            if (lu.rank() < k) return;
            g = dinv.asDiagonal() * a.transpose() * lu.solve(r);
        }
        for (const auto& c : cs)
            if (lhs(c, g) < c.rhs - 1e-12 * std::max(1.0, c.rhs)) return;
        double f = 0;
        for (Eigen::Index x = 0; x < n; ++x) f += s.weight(static_cast<index_t>(x)) * g[x] * g[x];
        best = std::min(best, std::sqrt(f));
    };
    std::function<void(index_t)> recurse = [&](index_t start) {
        evaluate();
        if (static_cast<Eigen::Index>(active.size()) == n) return;
        for (index_t i = start; i < cs.size(); ++i) {
            active.push_back(i);
            recurse(i + 1);
            active.pop_back();
        }
    };
    recurse(0);
    return best;
}

double hajlasz_inf_oracle(const ScalarField& u) {
    const auto cs = constraints(u);
    std::vector<double> levels{0.0};
    for (const auto& c : cs) levels.push_back(c.rhs / 2);
    std::sort(levels.begin(), levels.end());
    const auto n = static_cast<Eigen::Index>(u.size());
    for (double t : levels) {
        const Vec g = Vec::Constant(n, t);
        bool ok = true;
        for (const auto& c : cs) ok = ok && lhs(c, g) >= c.rhs;
        if (ok) return t;
    }
    return levels.back();
}

double hajlasz_grid_oracle(const ScalarField& u, double p, double step, double upper) {
    const MetricSpace& s = *u.space();
    const index_t n = s.size();
    const auto cs = constraints(u);
    const auto steps = static_cast<index_t>(std::floor(upper / step + 1e-9)) + 1;
    std::vector<index_t> k(n, 0);
    Vec g = Vec::Zero(static_cast<Eigen::Index>(n));
    double best = kInf;
    while (true) {
        for (index_t i = 0; i < n; ++i) g[static_cast<Eigen::Index>(i)] = static_cast<double>(k[i]) * step;
        bool ok = true;
        for (const auto& c : cs) ok = ok && lhs(c, g) >= c.rhs - 1e-12;
        if (ok) {
            std::vector<double> gv(g.data(), g.data() + n);
            best = std::min(best, hajlasz_norm(s, gv, p));
        }
        index_t i = 0;
        while (i < n && ++k[i] == steps) k[i++] = 0;
        if (i == n) break;
    }
    return best;
}

}  // namespace lipcalc
