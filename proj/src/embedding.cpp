#include "lipcalc/embedding.hpp"

#include "lipcalc/io.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace lipcalc {

std::vector<index_t> net_coloring(const MetricSpace& space, const EpsilonNet& net, double rho) {
    if (!(rho >= 1)) throw Error("net_coloring: separation factor must be >= 1");
    const index_t m = net.points.size();
    const double sep = rho * net.epsilon;
    std::vector<index_t> color(m, 0);
    std::vector<char> used;
    for (index_t a = 0; a < m; ++a) {
        const auto row = space.row(net.points[a]);
        used.assign(a + 1, 0);
        for (index_t b = 0; b < a; ++b)
            if (row[net.points[b]] <= sep) used[color[b]] = 1;
        index_t c = 0;
        while (used[c]) ++c;
        color[a] = c;
    }
    return color;
}

DistortionAudit distortion_audit(const MetricSpace& space, const Mat& images, double s, index_t exhaustive_limit,
                                 std::uint64_t sampled_pairs, std::uint64_t seed) {
    const index_t n = space.size();
    if (static_cast<index_t>(images.rows()) != n) throw Error("distortion_audit: one image row per point required");
    DistortionAudit out;
    out.k_low = kInf;
    auto visit = [&](index_t x, index_t y) {
        const double r = (images.row(y) - images.row(x)).norm() / std::pow(space.distance(x, y), s);
        if (r < out.k_low) {
            out.k_low = r;
            out.argmin = {x, y};
        }
        if (r > out.k_up) {
            out.k_up = r;
            out.argmax = {x, y};
        }
        ++out.pairs;
    };
    if (n < 2) {
        out.k_low = out.k_up = 1;
        return out;
    }
    if (n <= exhaustive_limit) {
        for (index_t x = 0; x < n; ++x)
            for (index_t y = x + 1; y < n; ++y) visit(x, y);
    } else {
        out.sampled = true;
        std::mt19937_64 rng(seed);
        for (std::uint64_t k = 0; k < sampled_pairs; ++k) {
            const index_t x = rng() % n, y = rng() % n;
            if (x != y) visit(std::min(x, y), std::max(x, y));
        }
    }
    return out;
}

EmbeddingResult assouad_embed(const MetricSpace& space, double s, index_t scale_count, std::uint64_t seed) {
    if (!(s > 0 && s < 1)) throw Error("assouad_embed: s must lie in (0, 1)");
    const index_t n = space.size();
    EmbeddingResult out;
    out.s = s;
    out.block = static_cast<index_t>(std::ceil(6.0 / std::min(s, 1.0 - s) - 1e-12));
    if (n < 2) {
        out.dim = 1;
        out.images = Mat::Zero(static_cast<Eigen::Index>(n), 1);
        out.audit = distortion_audit(space, out.images, s);
        return out;
    }
    const double diam = space.diameter(), dmin = space.min_distance();
    // Every pair distance d has a scale with d / eps in [4, 8) inside this range.
    int k = static_cast<int>(std::ceil(-std::log2(diam / 4)));
    while (std::ldexp(1.0, -k) > diam / 4) ++k;
    while (std::ldexp(1.0, -(k - 1)) <= diam / 4) --k;
    while (true) {
        const double eps = std::ldexp(1.0, -k++);
        out.scales.push_back(eps);
        if (eps <= dmin / 8 || (scale_count && out.scales.size() == scale_count)) break;
    }

    struct Layer {
        EpsilonNet net;
        std::vector<index_t> color;
    };
    std::vector<Layer> layers;
    index_t max_colors = 1;
    for (double eps : out.scales) {
        Layer l{build_net(space, eps, NetStrategy::GreedyScan, seed), {}};
        l.color = net_coloring(space, l.net, out.rho);
        const index_t c = l.color.empty() ? 1 : *std::max_element(l.color.begin(), l.color.end()) + 1;
        out.colors.push_back(c);
        max_colors = std::max(max_colors, c);
        layers.push_back(std::move(l));
    }
    out.dim = max_colors * out.block;
    out.images = Mat::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(out.dim));
    for (index_t li = 0; li < layers.size(); ++li) {
        const double eps = out.scales[li];
        const double amp = std::pow(eps, s - 1);
        const index_t base = (li % out.block) * max_colors;
        const auto& net = layers[li].net;
        for (index_t a = 0; a < net.points.size(); ++a) {
            const auto row = space.row(net.points[a]);
            const auto col = static_cast<Eigen::Index>(base + layers[li].color[a]);
            for (index_t x = 0; x < n; ++x)
                if (row[x] < 2 * eps) out.images(static_cast<Eigen::Index>(x), col) += amp * (2 * eps - row[x]);
        }
    }
    out.audit = distortion_audit(space, out.images, s);
    return out;
}

CompositeApproximation composite_approximation(const ScalarField& u, const EmbeddingResult& emb, double epsilon,
                                               index_t x0) {
    const SpacePtr& sp = u.space();
    const MetricSpace& X = *sp;
    const index_t n = X.size();
    if (x0 >= n) throw Error("composite_approximation: x0 out of range");
    if (!(epsilon > 0)) throw Error("composite_approximation: epsilon must be positive");
    if (static_cast<index_t>(emb.images.rows()) != n) throw Error("composite_approximation: embedding is for another space");

    CompositeApproximation out(ScalarField::constant(sp, 0.0));
    out.epsilon = epsilon;
    out.center = x0;
    const auto row0 = X.row(x0);
    for (index_t x = 0; x < n; ++x) {
        if (row0[x] <= epsilon * (1 + 1e-12)) out.inner.push_back(x);
        else if (row0[x] > 2 * epsilon * (1 + 1e-12)) out.outer.push_back(x);
    }
    if (out.inner.empty()) throw Error("composite_approximation: empty ball");

    const EpsilonNet net = build_net(X, epsilon, NetStrategy::GreedyScan, 0, x0);
    const index_t dim = emb.dim;

    // [zeta]_eps, componentwise piecewise-distance approximation of zeta restricted to the net.
    Mat zeta_eps(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    for (index_t c = 0; c < dim; ++c) {
        std::vector<double> vals(net.points.size());
        for (index_t k = 0; k < vals.size(); ++k) vals[k] = emb.images(static_cast<Eigen::Index>(net.points[k]), static_cast<Eigen::Index>(c));
        const ScalarField zc = mcshane_extend(sp, net.points, vals);
        for (index_t x = 0; x < n; ++x) zeta_eps(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(c)) = zc[x];
    }

    // [u o zeta^-1]_{B_eps}: piecewise-distance approximation in R^n over zeta(B_eps intersect net).
    std::vector<index_t> anchors;
    for (index_t p : net.points)
        if (row0[p] <= epsilon * (1 + 1e-12)) anchors.push_back(p);
    double lv = 0;
    for (index_t a = 0; a < anchors.size(); ++a)
        for (index_t b = a + 1; b < anchors.size(); ++b) {
            const double dz = (emb.images.row(anchors[a]) - emb.images.row(anchors[b])).norm();
            if (dz > 0) lv = std::max(lv, std::abs(u[anchors[a]] - u[anchors[b]]) / dz);
        }
    auto v = [&](const Vec& z) {
        double best = kInf;
        for (index_t p : anchors) best = std::min(best, u[p] + lv * (z - emb.images.row(p).transpose()).norm());
        return best;
    };

    std::vector<index_t> domain;
    std::vector<double> values;
    for (index_t x : out.inner) {
        domain.push_back(x);
        values.push_back(v(zeta_eps.row(x).transpose()));
    }
    for (index_t x : out.outer) {
        domain.push_back(x);
        values.push_back(u[x]);
    }
    out.field = mcshane_extend(sp, domain, values);
    out.lip = global_lip(out.field);
    out.lip_u = global_lip(u);
    for (index_t x = 0; x < n; ++x) out.sup_error = std::max(out.sup_error, std::abs(out.field[x] - u[x]));

    const double s = emb.s;
    out.k = std::max({emb.audit.k_up, emb.audit.k_low > 0 ? 1.0 / emb.audit.k_low : kInf, 1.0});
    out.k_prime = out.lip_u * std::pow(out.k, 1.0 / s) * std::pow(2 * epsilon, 1 - s) * std::sqrt(static_cast<double>(dim)) *
                  out.k * std::pow(epsilon, s - 1);
    out.bound = out.lip_u + out.k_prime;
    out.within_bound = out.lip <= out.bound * (1 + 1e-12);
    return out;
}

void write_embedding_csv(const EmbeddingResult& e, const MetricSpace& space, const std::string& path) {
    io::CsvTable rows;
    std::vector<std::string> head{"point_id"};
    for (index_t c = 0; c < e.dim; ++c) head.push_back("z" + std::to_string(c));
    rows.push_back(std::move(head));
    for (index_t x = 0; x < space.size(); ++x) {
        std::vector<std::string> r{space.id(x)};
        for (index_t c = 0; c < e.dim; ++c) r.push_back(format_double(e.images(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(c))));
        rows.push_back(std::move(r));
    }
    io::write_csv(path, rows);
}

}  // namespace lipcalc
