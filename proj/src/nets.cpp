#include "lipcalc/nets.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace lipcalc {

NetStrategy parse_net_strategy(const std::string& name) {
    if (name == "greedy_scan" || name == "greedy") return NetStrategy::GreedyScan;
    if (name == "farthest_point" || name == "farthest") return NetStrategy::FarthestPoint;
    throw Error("unknown net strategy '" + name + "' (expected greedy_scan or farthest_point)");
}

std::string to_string(NetStrategy s) { return s == NetStrategy::GreedyScan ? "greedy_scan" : "farthest_point"; }

namespace {

std::vector<index_t> scan_order(index_t n, std::uint64_t seed, std::optional<index_t> first) {
    std::vector<index_t> order(n);
    std::iota(order.begin(), order.end(), index_t{0});
    if (seed != 0) {
        std::mt19937_64 rng(seed);
        for (index_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    }
    if (first) {
        auto it = std::find(order.begin(), order.end(), *first);
        std::rotate(order.begin(), it, it + 1);
    }
    return order;
}

void measure(const MetricSpace& space, EpsilonNet& net) {
    const index_t n = space.size();
    net.separation = kInf;
    for (index_t a = 0; a < net.points.size(); ++a) {
        const auto row = space.row(net.points[a]);
        for (index_t b = a + 1; b < net.points.size(); ++b) net.separation = std::min(net.separation, row[net.points[b]]);
    }
    net.nearest.assign(n, 0);
    std::vector<double> best(n, kInf);
    for (index_t a = 0; a < net.points.size(); ++a) {
        const auto row = space.row(net.points[a]);
        for (index_t x = 0; x < n; ++x)
            if (row[x] < best[x]) {
                best[x] = row[x];
                net.nearest[x] = a;
            }
    }
    net.covering_radius = *std::max_element(best.begin(), best.end());
    net.constant = std::max(1.0, net.covering_radius / net.epsilon);
}

}  // namespace

EpsilonNet build_net(const MetricSpace& space, double epsilon, NetStrategy strategy, std::uint64_t seed,
                     std::optional<index_t> first) {
    if (!(epsilon > 0)) throw Error("build_net: epsilon must be positive");
    const index_t n = space.size();
    if (first && *first >= n) throw Error("build_net: start point out of range");
    EpsilonNet net;
    net.epsilon = epsilon;
    const auto order = scan_order(n, seed, first);

    if (strategy == NetStrategy::GreedyScan) {
        // dist[x] = distance from x to the current net, kept exact as points are added.
        std::vector<double> dist(n, kInf);
        for (index_t x : order) {
            if (dist[x] < epsilon) continue;
            net.points.push_back(x);
            const auto row = space.row(x);
            for (index_t y = 0; y < n; ++y) dist[y] = std::min(dist[y], row[y]);
        }
    } else {
        std::vector<double> dist(n, kInf);
        index_t next = order.front();
        while (true) {
            net.points.push_back(next);
            const auto row = space.row(next);
            double far = -1;
            for (index_t k = 0; k < n; ++k) {
                const index_t y = order[k];
                dist[y] = std::min(dist[y], row[y]);
                if (dist[y] > far) {
                    far = dist[y];
                    next = y;
                }
            }
            if (far < epsilon) break;
        }
    }
    measure(space, net);
    return net;
}

ScalarField piecewise_distance_approx(const ScalarField& u, const EpsilonNet& net) {
    std::vector<double> vals(net.points.size());
    for (index_t k = 0; k < vals.size(); ++k) vals[k] = u[net.points[k]];
    // u <= [u]_eps holds exactly in real arithmetic; the rounded minimum can dip
    // one ulp below u, so restore the bound.
    const auto ext = mcshane_extend(u.space(), net.points, vals, global_lip(u));
    std::vector<double> out(ext.values());
    for (index_t x = 0; x < out.size(); ++x) out[x] = std::max(out[x], u[x]);
    return ScalarField(u.space(), std::move(out));
}

// ---------------------------------------------------------------------------

double KuhnTriangulation::scale() const { return std::ldexp(1.0, -level); }

SimplexLocation locate_simplex(const Vec& z, const KuhnTriangulation& tri) {
    const index_t N = tri.dim;
    if (static_cast<index_t>(z.size()) != N) throw Error("locate_simplex: dimension mismatch");
    const double h = tri.scale();
    LatticePoint base(N);
    std::vector<double> frac(N);
    for (index_t i = 0; i < N; ++i) {
        if (!std::isfinite(z[i])) throw Error("locate_simplex: non-finite coordinate");
        const double t = z[i] / h;
        const double fl = std::floor(t);
        base[i] = static_cast<long long>(fl);
        frac[i] = t - fl;
    }
    SimplexLocation loc;
    loc.order.resize(N);
    std::iota(loc.order.begin(), loc.order.end(), index_t{0});
    std::stable_sort(loc.order.begin(), loc.order.end(), [&](index_t a, index_t b) { return frac[a] > frac[b]; });

    loc.vertices.push_back(base);
    loc.barycentric.push_back(N ? 1.0 - frac[loc.order[0]] : 1.0);
    for (index_t k = 0; k < N; ++k) {
        LatticePoint v = loc.vertices.back();
        ++v[loc.order[k]];
        loc.vertices.push_back(std::move(v));
        const double next = k + 1 < N ? frac[loc.order[k + 1]] : 0.0;
        loc.barycentric.push_back(frac[loc.order[k]] - next);
    }
    return loc;
}

namespace {

double lattice_value(const LatticeField& f, const LatticePoint& v) {
    auto it = f.find(v);
    if (it == f.end()) {
        std::string s = "(";
        for (index_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
        throw Error("pl_extend: missing value at lattice vertex " + s + ")");
    }
    return it->second;
}

// Gradient of the affine piece on the simplex with edge path `order` from `base`.
Vec path_gradient(const LatticeField& f, LatticePoint v, const std::vector<index_t>& order, double h) {
    Vec g = Vec::Zero(static_cast<Eigen::Index>(v.size()));
    double prev = lattice_value(f, v);
    for (index_t c : order) {
        ++v[c];
        const double cur = lattice_value(f, v);
        g[static_cast<Eigen::Index>(c)] = (cur - prev) / h;
        prev = cur;
    }
    return g;
}

}  // namespace

PlExtension pl_extend(const LatticeField& f, const KuhnTriangulation& tri, const std::vector<Vec>& queries) {
    const index_t N = tri.dim;
    const double h = tri.scale();
    for (const auto& [v, val] : f)
        if (v.size() != N) throw Error("pl_extend: lattice vertex of wrong dimension");

    PlExtension out;
    for (const auto& z : queries) {
        const auto loc = locate_simplex(z, tri);
        double val = 0;
        bool all_present = true;
        for (index_t k = 0; k <= N; ++k) {
            if (!f.count(loc.vertices[k])) {
                all_present = false;
                if (loc.barycentric[k] == 0.0) continue;  // query on a face of a boundary simplex
            }
            val += loc.barycentric[k] * lattice_value(f, loc.vertices[k]);
        }
        out.values.push_back(val);
        // Queries on the outer boundary touch a simplex with missing corners; no gradient there.
        out.gradients.push_back(all_present ? path_gradient(f, loc.vertices.front(), loc.order, h) : Vec());
    }

    // Every simplex of every lattice cube whose 2^N corners all carry values.
    std::vector<index_t> perm(N);
    for (const auto& [base, val] : f) {
        bool complete = true;
        for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << N) && complete; ++mask) {
            LatticePoint c = base;
            for (index_t i = 0; i < N; ++i)
                if (mask >> i & 1) ++c[i];
            complete = f.count(c) > 0;
        }
        if (!complete) continue;
        std::iota(perm.begin(), perm.end(), index_t{0});
        do {
            out.max_gradient_norm = std::max(out.max_gradient_norm, path_gradient(f, base, perm, h).norm());
        } while (std::next_permutation(perm.begin(), perm.end()));
    }

    for (auto a = f.begin(); a != f.end(); ++a)
        for (auto b = std::next(a); b != f.end(); ++b) {
            double d2 = 0;
            for (index_t i = 0; i < N; ++i) {
                const double t = static_cast<double>(a->first[i] - b->first[i]) * h;
                d2 += t * t;
            }
            out.vertex_lip = std::max(out.vertex_lip, std::abs(a->second - b->second) / std::sqrt(d2));
        }
    out.ratio = safe_ratio(out.max_gradient_norm, out.vertex_lip);
    return out;
}

AffinePiece affine_on_simplex(const std::vector<Vec>& vertices, const std::vector<double>& values) {
    if (vertices.empty() || vertices.size() != values.size()) throw Error("affine_on_simplex: size mismatch");
    const auto N = vertices.front().size();
    if (static_cast<Eigen::Index>(vertices.size()) != N + 1) throw Error("affine_on_simplex: need N+1 vertices in R^N");
    Mat E(N, N);
    Vec r(N);
    for (Eigen::Index k = 0; k < N; ++k) {
        E.row(k) = (vertices[k + 1] - vertices[0]).transpose();
        r[k] = values[k + 1] - values[0];
    }
    Eigen::FullPivLU<Mat> lu(E);
    if (!lu.isInvertible()) throw Error("affine_on_simplex: degenerate simplex");
    AffinePiece a;
    a.gradient = lu.solve(r);
    a.offset = values[0] - a.gradient.dot(vertices[0]);
    return a;
}

}  // namespace lipcalc
