#include "lipcalc/differentiability.hpp"

#include "lipcalc/io.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace lipcalc {

namespace {
constexpr double kTieSlack = 1e-12;
inline bool within(double d, double r) { return d <= r * (1.0 + kTieSlack); }

double nearest_distance(const MetricSpace& s, index_t x) {
    const auto row = s.row(x);
    double nn = kInf;
    for (index_t y = 0; y < s.size(); ++y)
        if (y != x) nn = std::min(nn, row[y]);
    return nn;
}
}  // namespace

Chart::Chart(SpacePtr space, std::vector<index_t> points, std::vector<ScalarField> coords)
    : space_(std::move(space)), points_(std::move(points)), member_(space_->size(), false), coords_(std::move(coords)) {
    for (index_t p : points_) {
        if (p >= space_->size()) throw Error("chart point out of range");
        member_[p] = true;
    }
    for (const auto& c : coords_)
        if (!same_space(*c.space(), *space_)) throw Error("chart coordinate lives on another space");
    const index_t n = space_->size();
    for (index_t x = 0; x < n; ++x) {
        const auto row = space_->row(x);
        for (index_t y = x + 1; y < n; ++y) {
            double s = 0;
            for (const auto& c : coords_) s += (c[y] - c[x]) * (c[y] - c[x]);
            lip_ = std::max(lip_, std::sqrt(s) / row[y]);
        }
    }
}

Vec Chart::at(index_t x) const {
    Vec v(static_cast<Eigen::Index>(coords_.size()));
    for (index_t k = 0; k < coords_.size(); ++k) v[static_cast<Eigen::Index>(k)] = coords_[k][x];
    return v;
}

bool Chart::contains(index_t x) const { return x < member_.size() && member_[x]; }

Chart chart_from_json(SpacePtr space, const nlohmann::json& j) {
    std::vector<index_t> points;
    const auto& pj = j.contains("points") ? j.at("points") : nlohmann::json("all");
    if (pj.is_string() && pj.get<std::string>() == "all") {
        for (index_t i = 0; i < space->size(); ++i) points.push_back(i);
    } else {
        for (const auto& id : pj) points.push_back(space->index_of(id.is_string() ? id.get<std::string>() : id.dump()));
    }
    std::vector<ScalarField> coords;
    for (const auto& c : j.at("coordinates")) {
        const auto kind = c.at("kind").get<std::string>();
        if (kind == "coordinate") {
            coords.push_back(ScalarField::coordinate(space, c.at("index").get<index_t>()));
        } else if (kind == "distance") {
            const auto& b = c.at("base");
            coords.push_back(ScalarField::distance_to(space, space->index_of(b.is_string() ? b.get<std::string>() : b.dump())));
        } else if (kind == "csv") {
            coords.push_back(read_field_csv(space, c.at("path").get<std::string>()));
        } else {
            throw Error("unknown chart coordinate kind '" + kind + "'");
        }
    }
    return Chart(std::move(space), std::move(points), std::move(coords));
}

// ---------------------------------------------------------------------------

ResidualProfile residual_profile(const ScalarField& f, const Chart& chart, const Vec& df, index_t x,
                                 const std::vector<double>& scales, double lip_f) {
    const MetricSpace& s = *chart.space();
    if (!chart.contains(x)) throw Error("residual_profile: point is not in the chart");
    if (df.size() != static_cast<Eigen::Index>(chart.dim())) throw Error("residual_profile: differential has wrong length");
    const double nn = nearest_distance(s, x);
    ResidualProfile out;
    for (double r : scales) (within(nn, r) ? out.scales : out.dropped_scales).push_back(r);
    out.residuals.assign(out.scales.size(), 0.0);
    const auto row = s.row(x);
    const Vec xi_x = chart.at(x);
    for (index_t y = 0; y < s.size(); ++y) {
        const double e = std::abs(f[y] - f[x] - df.dot(chart.at(y) - xi_x));
        for (std::size_t k = 0; k < out.scales.size(); ++k)
            if (within(row[y], out.scales[k])) out.residuals[k] = std::max(out.residuals[k], e / out.scales[k]);
    }
    const double lip = lip_f < 0 ? global_lip(f) : lip_f;
    out.threshold = 0.05 * lip;
    if (!out.residuals.empty()) {
        // rounding in f(y) - f(x) is amplified by 1/r, so compare with slack relative to L(f)
        const std::size_t m = out.residuals.size();
        bool monotone = true;
        for (std::size_t k = m >= 3 ? m - 2 : 1; k < m; ++k)
            monotone = monotone && out.residuals[k] <= out.residuals[k - 1] + 1e-12 * lip;
        out.differentiable = out.residuals.back() <= out.threshold && monotone;
    }
    return out;
}

Vec estimate_differential(const ScalarField& f, const Chart& chart, index_t x, double r) {
    const MetricSpace& s = *chart.space();
    const index_t n = chart.dim();
    if (n == 0) return Vec();
    const auto row = s.row(x);
    std::vector<index_t> ball;
    for (index_t y = 0; y < s.size(); ++y)
        if (y != x && within(row[y], r)) ball.push_back(y);
    if (ball.size() < n)
        throw DegenerateChart("estimate_differential: ball around '" + s.id(x) + "' holds " +
                                  std::to_string(ball.size() + 1) + " points, need at least " + std::to_string(n + 1),
                              Vec::Zero(static_cast<Eigen::Index>(n)));
    Mat a(ball.size(), n);
    Vec b(ball.size());
    const Vec xi_x = chart.at(x);
    for (index_t k = 0; k < ball.size(); ++k) {
        a.row(k) = (chart.at(ball[k]) - xi_x).transpose();
        b[k] = f[ball[k]] - f[x];
    }
    Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec sv = svd.singularValues();
    if (!(sv[0] > 0) || sv[n - 1] <= 1e-10 * sv[0]) {
        const Vec dir = svd.matrixV().col(n - 1);
        std::string d = "(";
        for (Eigen::Index i = 0; i < dir.size(); ++i) d += (i ? ", " : "") + format_double(dir[i]);
        throw DegenerateChart("estimate_differential: coordinate differences near '" + s.id(x) +
                                  "' do not span R^" + std::to_string(n) + "; degenerate direction " + d + ")",
                              dir);
    }
    return svd.solve(b);
}

DifferentialField estimate_differential_field(const ScalarField& f, const Chart& chart, double r) {
    DifferentialField out;
    out.scale = r;
    for (index_t x : chart.points()) {
        try {
            out.df.push_back(estimate_differential(f, chart, x, r));
            out.points.push_back(x);
        } catch (const DegenerateChart&) {
            out.degenerate.push_back(x);
        }
    }
    return out;
}

void write_differential_csv(const DifferentialField& d, const MetricSpace& space, const std::string& path) {
    io::CsvTable rows{{"point", "component", "value"}};
    for (index_t k = 0; k < d.points.size(); ++k)
        for (Eigen::Index c = 0; c < d.df[k].size(); ++c)
            rows.push_back({space.id(d.points[k]), std::to_string(c), format_double(d.df[k][c])});
    io::write_csv(path, rows);
}

// ---------------------------------------------------------------------------

LipDerivStats lipderiv_check(const std::vector<ScalarField>& family, const std::vector<StencilDerivation>& basis,
                             const std::vector<double>& scales, double budget) {
    if (family.empty()) throw Error("lipderiv_check: empty function family");
    if (basis.empty()) throw Error("lipderiv_check: empty derivation basis");
    const MetricSpace& s = *family.front().space();
    const index_t n = s.size();
    LipDerivStats out;
    out.budget = budget;
    out.khat.assign(n, 1.0);
    for (const auto& f : family) {
        std::vector<std::vector<double>> d;
        for (const auto& b : basis) d.push_back(b.apply(f));
        std::vector<double> kf(n, 1.0);
        parallel_chunks(n, [&](index_t lo, index_t hi, index_t) {
            for (index_t x = lo; x < hi; ++x) {
                double dn = 0;
                for (const auto& col : d) dn += col[x] * col[x];
                dn = std::sqrt(dn);
                const double lip = pointwise_lip_profile(f, x, scales).upper;
                // Both sides relative to the field scale so rounding noise on constants reads as 0.
                const double zero = 1e-12 * std::max(1.0, std::abs(f[x]));
                kf[x] = std::max(safe_ratio(dn, lip, zero), safe_ratio(lip, dn, zero));
            }
        });
        for (index_t x = 0; x < n; ++x) out.khat[x] = std::max(out.khat[x], kf[x]);
    }
    double within_mass = 0;
    for (index_t x = 0; x < n; ++x) {
        if (std::isinf(out.khat[x])) out.infinite.push_back(x);
        if (out.khat[x] <= budget) within_mass += s.weight(x);
    }
    out.fraction_within = within_mass / s.total_mass();
    return out;
}

// ---------------------------------------------------------------------------

namespace {

double radical_inverse(index_t i, unsigned base) {
    double inv = 1.0 / base, f = inv, r = 0;
    while (i) {
        r += f * static_cast<double>(i % base);
        i /= base;
        f *= inv;
    }
    return r;
}

constexpr unsigned kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71};

}  // namespace

std::vector<Vec> sphere_directions(index_t n, index_t count) {
    std::vector<Vec> out;
    if (n == 0) return out;
    if (n == 1) {
        out.push_back(Vec::Ones(1));
        return out;
    }
    if (n == 2) {
        // c and -c give the same Lip[c.xi], so half the circle suffices.
        for (index_t k = 0; k < count; ++k) {
            const double t = std::numbers::pi * static_cast<double>(k) / static_cast<double>(count);
            Vec v(2);
            v << std::cos(t), std::sin(t);
            out.push_back(v);
        }
        return out;
    }
    const index_t pairs = (n + 1) / 2;
    if (2 * pairs > std::size(kPrimes)) throw Error("sphere_directions: dimension too large");
    for (index_t k = 1; out.size() < count; ++k) {
        Vec v(static_cast<Eigen::Index>(n));
        for (index_t p = 0; p < pairs; ++p) {
            const double u1 = radical_inverse(k, kPrimes[2 * p]), u2 = radical_inverse(k, kPrimes[2 * p + 1]);
            const double rad = std::sqrt(-2.0 * std::log(std::max(u1, 1e-300)));
            const double ang = 2 * std::numbers::pi * u2;
            v[static_cast<Eigen::Index>(2 * p)] = rad * std::cos(ang);
            if (2 * p + 1 < n) v[static_cast<Eigen::Index>(2 * p + 1)] = rad * std::sin(ang);
        }
        const double nv = v.norm();
        if (nv > 0) out.push_back(v / nv);
    }
    return out;
}

ChartLowerConstant chart_lower_constant(const Chart& chart, index_t x, const std::vector<double>& scales,
                                        const std::vector<Vec>& extra_directions) {
    const index_t n = chart.dim();
    if (n == 0) throw Error("chart_lower_constant: chart dimension must be at least 1");
    if (scales.empty()) throw Error("chart_lower_constant: no scales");
    const MetricSpace& s = *chart.space();
    std::vector<Vec> dirs = sphere_directions(n, n == 1 ? 1 : 100 * n);
    for (const auto& v : extra_directions) {
        if (v.size() != static_cast<Eigen::Index>(n) || !(v.norm() > 0)) throw Error("chart_lower_constant: bad direction");
        dirs.push_back(v / v.norm());
    }

    const auto row = s.row(x);
    const double rmax = *std::max_element(scales.begin(), scales.end());
    const Vec xi_x = chart.at(x);
    std::vector<index_t> ball;
    for (index_t y = 0; y < s.size(); ++y)
        if (y != x && within(row[y], rmax)) ball.push_back(y);
    if (ball.size() >= 1) {
        Mat diff(ball.size(), n);
        for (index_t k = 0; k < ball.size(); ++k) diff.row(k) = (chart.at(ball[k]) - xi_x).transpose() / row[ball[k]];
        Eigen::JacobiSVD<Mat> svd(diff, Eigen::ComputeFullV);
        dirs.push_back(svd.matrixV().col(static_cast<Eigen::Index>(n) - 1));
    }

    ChartLowerConstant out;
    out.k = kInf;
    out.samples = dirs.size();
    for (const auto& c : dirs) {
        std::vector<double> vals(s.size(), 0.0);
        for (index_t k = 0; k < n; ++k)
            for (index_t y = 0; y < s.size(); ++y) vals[y] += c[static_cast<Eigen::Index>(k)] * chart.coords()[k][y];
        const double l = pointwise_lip_profile(ScalarField(chart.space(), std::move(vals)), x, scales).upper;
        if (l < out.k) {
            out.k = l;
            out.direction = c;
        }
    }
    out.degenerate = out.k < 1e-6 * chart.lip();
    return out;
}

std::vector<Subchart> subchart_partition(const std::vector<index_t>& points, const std::vector<double>& k_values) {
    if (points.size() != k_values.size()) throw Error("subchart_partition: size mismatch");
    std::map<int, std::vector<index_t>> bins;
    for (index_t i = 0; i < points.size(); ++i) {
        const double k = k_values[i];
        if (!(k > 0) || !std::isfinite(k)) continue;
        int e = 0;
        std::frexp(k, &e);  // k = m 2^e with m in [1/2, 1)
        bins[-e].push_back(points[i]);
    }
    std::vector<Subchart> out;
    for (auto& [k, pts] : bins) out.push_back({k, std::ldexp(1.0, k + 1), std::move(pts)});
    return out;
}

}  // namespace lipcalc
