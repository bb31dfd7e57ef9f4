#include "lipcalc/metric_space.hpp"

#include "lipcalc/io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace lipcalc {

namespace {

// Closed balls include points whose distance exceeds r by rounding only.
constexpr double kTieSlack = 1e-12;

inline bool within(double d, double r) { return d <= r * (1.0 + kTieSlack); }

std::vector<std::string> index_ids(index_t n) {
    std::vector<std::string> ids(n);
    for (index_t i = 0; i < n; ++i) ids[i] = std::to_string(i);
    return ids;
}

std::vector<double> uniform_weights(index_t n) { return std::vector<double>(n, 1.0 / static_cast<double>(n)); }

}  // namespace

// ---------------------------------------------------------------------------
// MetricSpace

MetricSpace::MetricSpace(std::vector<std::string> ids, std::vector<double> weights, const Mat& distances)
    : ids_(std::move(ids)), weights_(std::move(weights)) {
    const index_t n = ids_.size();
    if (n == 0) throw Error("metric space needs at least one point");
    if (distances.rows() != static_cast<Eigen::Index>(n) || distances.cols() != static_cast<Eigen::Index>(n))
        throw Error("distance matrix shape does not match point count");
    validate_weights();
    auto dense = std::make_shared<std::vector<double>>(n * n);
    const double scale = distances.cwiseAbs().maxCoeff();
    for (index_t i = 0; i < n; ++i) {
        if (distances(i, i) != 0.0) throw Error("d(x,x) must be 0 at point " + ids_[i]);
        for (index_t j = i + 1; j < n; ++j) {
            const double a = distances(i, j), b = distances(j, i);
            if (!std::isfinite(a) || !std::isfinite(b)) throw Error("non-finite distance");
            if (std::abs(a - b) > 1e-12 * scale) throw Error("distance matrix is not symmetric at (" + ids_[i] + "," + ids_[j] + ")");
            const double d = 0.5 * (a + b);
            if (!(d > 0)) throw Error("distinct points " + ids_[i] + "," + ids_[j] + " at distance 0");
            (*dense)[i * n + j] = d;
            (*dense)[j * n + i] = d;
        }
    }
    dense_ = std::move(dense);
    for (index_t i = 0; i < n; ++i) {
        if (!index_.emplace(ids_[i], i).second) throw Error("duplicate point id " + ids_[i]);
    }
}

MetricSpace::MetricSpace(FromCoords, std::vector<std::string> ids, std::vector<double> weights, Mat coords, double exponent)
    : ids_(std::move(ids)), weights_(std::move(weights)), coords_(std::move(coords)), exponent_(exponent) {
    const index_t n = ids_.size();
    if (n == 0) throw Error("metric space needs at least one point");
    if (coords_->rows() != static_cast<Eigen::Index>(n)) throw Error("coordinate rows do not match point count");
    if (!(exponent_ > 0 && exponent_ <= 1)) throw Error("metric exponent must lie in (0, 1]");
    if (!coords_->allFinite()) throw Error("non-finite coordinates");
    validate_weights();
    for (index_t i = 0; i < n; ++i) {
        if (!index_.emplace(ids_[i], i).second) throw Error("duplicate point id " + ids_[i]);
    }
    // Coincident points would give d(x,y) = 0 for x != y.
    std::vector<index_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const Mat& c = *coords_;
    std::sort(order.begin(), order.end(), [&](index_t a, index_t b) {
        for (Eigen::Index k = 0; k < c.cols(); ++k) {
            if (c(a, k) != c(b, k)) return c(a, k) < c(b, k);
        }
        return a < b;
    });
    for (index_t k = 1; k < n; ++k) {
        if ((c.row(order[k]) - c.row(order[k - 1])).squaredNorm() == 0.0)
            throw Error("coincident points " + ids_[order[k - 1]] + " and " + ids_[order[k]]);
    }
    if (n < kDenseLimit) {
        auto dense = std::make_shared<std::vector<double>>(n * n, 0.0);
        for (index_t i = 0; i < n; ++i) {
            for (index_t j = i + 1; j < n; ++j) {
                const double d = oracle(i, j);
                (*dense)[i * n + j] = d;
                (*dense)[j * n + i] = d;
            }
        }
        dense_ = std::move(dense);
    }
}

void MetricSpace::validate_weights() const {
    if (weights_.size() != ids_.size()) throw Error("weight count does not match point count");
    for (index_t i = 0; i < weights_.size(); ++i) {
        if (!(weights_[i] > 0) || !std::isfinite(weights_[i])) throw Error("weights must be positive and finite (point " + ids_[i] + ")");
    }
}

index_t MetricSpace::index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw Error("unknown point id '" + id + "'");
    return it->second;
}

double MetricSpace::total_mass() const { return std::accumulate(weights_.begin(), weights_.end(), 0.0); }

double MetricSpace::oracle(index_t i, index_t j) const {
    if (i == j) return 0.0;
    const double e = ((*coords_).row(i) - (*coords_).row(j)).norm();
    return exponent_ == 1.0 ? e : std::pow(e, exponent_);
}

double MetricSpace::distance(index_t i, index_t j) const {
    if (dense_) return (*dense_)[i * size() + j];
    return oracle(i, j);
}

DistanceRow MetricSpace::row(index_t i) const {
    const index_t n = size();
    if (i >= n) throw Error("point index out of range");
    if (dense_) return {dense_, std::span<const double>(dense_->data() + i * n, n)};
    {
        std::lock_guard<std::mutex> lock(cache_mutex_);
        auto it = cache_.find(i);
        if (it != cache_.end()) {
            lru_.splice(lru_.begin(), lru_, it->second.second);
            const auto& ptr = it->second.first;
            return {ptr, std::span<const double>(ptr->data(), n)};
        }
    }
    auto values = std::make_shared<std::vector<double>>(n);
    for (index_t j = 0; j < n; ++j) (*values)[j] = oracle(i, j);
    std::shared_ptr<const std::vector<double>> ptr = values;
    std::lock_guard<std::mutex> lock(cache_mutex_);
    if (cache_.find(i) == cache_.end()) {
        lru_.push_front(i);
        cache_.emplace(i, std::make_pair(ptr, lru_.begin()));
        if (cache_.size() > kRowCacheCapacity) {
            cache_.erase(lru_.back());
            lru_.pop_back();
        }
    }
    return {ptr, std::span<const double>(ptr->data(), n)};
}

const Mat& MetricSpace::coords() const {
    if (!coords_) throw Error("space has no ambient coordinates");
    return *coords_;
}

void MetricSpace::compute_extent() const {
    std::call_once(extent_once_, [this] {
        const index_t n = size();
        if (n < 2) {
            min_distance_ = 0;
            diameter_ = 0;
            return;
        }
        std::vector<double> mins(16, kInf), maxs(16, 0.0);
        parallel_chunks(n, [&](index_t b, index_t e, index_t c) {
            for (index_t i = b; i < e; ++i) {
                const auto r = row(i);
                for (index_t j = i + 1; j < n; ++j) {
                    mins[c] = std::min(mins[c], r[j]);
                    maxs[c] = std::max(maxs[c], r[j]);
                }
            }
        });
        min_distance_ = *std::min_element(mins.begin(), mins.end());
        diameter_ = *std::max_element(maxs.begin(), maxs.end());
    });
}

double MetricSpace::min_distance() const {
    compute_extent();
    return min_distance_;
}

double MetricSpace::diameter() const {
    compute_extent();
    return diameter_;
}

SpacePtr MetricSpace::with_weights(std::vector<double> weights) const {
    if (coords_) {
        auto out = std::make_shared<MetricSpace>(from_coords, ids_, std::move(weights), *coords_, exponent_);
        out->overlap_warning = overlap_warning;
        return out;
    }
    const index_t n = size();
    Mat d(n, n);
    for (index_t i = 0; i < n; ++i)
        for (index_t j = 0; j < n; ++j) d(i, j) = distance(i, j);
    auto out = std::make_shared<MetricSpace>(ids_, std::move(weights), d);
    out->overlap_warning = overlap_warning;
    return out;
}

SpacePtr MetricSpace::snowflake(double s) const {
    if (!(s > 0 && s < 1)) throw Error("snowflake exponent must lie in (0, 1)");
    if (coords_) {
        auto out = std::make_shared<MetricSpace>(from_coords, ids_, weights_, *coords_, exponent_ * s);
        out->overlap_warning = overlap_warning;
        return out;
    }
    const index_t n = size();
    Mat d(n, n);
    for (index_t i = 0; i < n; ++i)
        for (index_t j = 0; j < n; ++j) d(i, j) = std::pow(distance(i, j), s);
    auto out = std::make_shared<MetricSpace>(ids_, weights_, d);
    out->overlap_warning = overlap_warning;
    return out;
}

// ---------------------------------------------------------------------------
// Balls

BallIndex::BallIndex(SpacePtr space, double max_radius)
    : space_(std::move(space)), max_radius_(max_radius) {
    const index_t n = space_->size();
    lists_.resize(n);
    prefix_mass_.resize(n);
    parallel_chunks(n, [&](index_t b, index_t e, index_t) {
        for (index_t x = b; x < e; ++x) {
            const auto r = space_->row(x);
            auto& list = lists_[x];
            for (index_t y = 0; y < n; ++y) {
                if (within(r[y], max_radius_)) list.emplace_back(r[y], y);
            }
            std::sort(list.begin(), list.end());
            auto& pm = prefix_mass_[x];
            pm.resize(list.size());
            double acc = 0;
            for (index_t k = 0; k < list.size(); ++k) {
                acc += space_->weight(list[k].second);
                pm[k] = acc;
            }
        }
    });
}

std::vector<index_t> BallIndex::ball(index_t x, double r) const {
    if (x >= lists_.size()) throw Error("point index out of range");
    if (r < 0) throw Error("ball radius must be >= 0");
    if (r > max_radius_) return lipcalc::ball(*space_, x, r);
    const auto& list = lists_[x];
    std::vector<index_t> out;
    for (const auto& [d, y] : list) {
        if (!within(d, r)) break;
        out.push_back(y);
    }
    std::sort(out.begin(), out.end());
    return out;
}

double BallIndex::ball_mass(index_t x, double r) const {
    if (x >= lists_.size()) throw Error("point index out of range");
    if (r > max_radius_) {
        double m = 0;
        for (index_t y : lipcalc::ball(*space_, x, r)) m += space_->weight(y);
        return m;
    }
    const auto& list = lists_[x];
    auto it = std::upper_bound(list.begin(), list.end(), r * (1.0 + kTieSlack),
                               [](double v, const std::pair<double, index_t>& p) { return v < p.first; });
    const auto k = static_cast<index_t>(it - list.begin());
    return k == 0 ? 0.0 : prefix_mass_[x][k - 1];
}

std::vector<index_t> ball(const MetricSpace& space, index_t x, double r) {
    if (x >= space.size()) throw Error("point index out of range");
    if (r < 0) throw Error("ball radius must be >= 0");
    const auto row = space.row(x);
    std::vector<index_t> out;
    for (index_t y = 0; y < space.size(); ++y) {
        if (y == x || within(row[y], r)) out.push_back(y);
    }
    return out;
}

std::vector<index_t> ball(const MetricSpace& space, const std::string& x, double r) {
    return ball(space, space.index_of(x), r);
}

// ---------------------------------------------------------------------------
// Doubling and density

DoublingStats doubling_stats(const MetricSpace& space, const std::vector<double>& radii) {
    if (radii.empty()) throw Error("doubling_stats: empty radius list");
    for (std::size_t k = 0; k < radii.size(); ++k) {
        if (!(radii[k] > 0)) throw Error("doubling_stats: radii must be positive");
        if (k && radii[k] < radii[k - 1]) throw Error("doubling_stats: radii must be sorted ascending");
    }
    const index_t n = space.size();
    const double dmin = n > 1 ? space.min_distance() : 0.0;
    const index_t nr = radii.size();
    constexpr index_t kChunks = 16;
    std::vector<std::vector<double>> best(kChunks, std::vector<double>(nr, 0.0));
    std::vector<std::vector<index_t>> arg(kChunks, std::vector<index_t>(nr, 0));
    parallel_chunks(n, [&](index_t b, index_t e, index_t c) {
        std::vector<std::pair<double, double>> dm(n);
        std::vector<double> prefix(n);
        for (index_t x = b; x < e; ++x) {
            const auto row = space.row(x);
            for (index_t y = 0; y < n; ++y) dm[y] = {row[y], space.weight(y)};
            std::sort(dm.begin(), dm.end());
            double acc = 0;
            for (index_t k = 0; k < n; ++k) prefix[k] = (acc += dm[k].second);
            auto mass = [&](double r) {
                const double lim = r * (1.0 + kTieSlack);
                auto it = std::upper_bound(dm.begin(), dm.end(), lim,
                                           [](double v, const std::pair<double, double>& p) { return v < p.first; });
                return prefix[static_cast<index_t>(it - dm.begin()) - 1];
            };
            for (index_t k = 0; k < nr; ++k) {
                const double kappa = mass(2 * radii[k]) / mass(radii[k]);
                if (kappa > best[c][k]) {
                    best[c][k] = kappa;
                    arg[c][k] = x;
                }
            }
        }
    }, kChunks);
    DoublingStats out;
    out.kappa = 1.0;
    for (index_t k = 0; k < nr; ++k) {
        RadiusDoubling rd;
        rd.radius = radii[k];
        rd.kappa = 0;
        for (index_t c = 0; c < kChunks; ++c) {
            if (best[c][k] > rd.kappa) {
                rd.kappa = best[c][k];
                rd.argmax = arg[c][k];
            }
        }
        rd.excluded = n > 1 && radii[k] * (1.0 + kTieSlack) < dmin;
        if (!rd.excluded) out.kappa = std::max(out.kappa, rd.kappa);
        out.per_radius.push_back(rd);
    }
    out.exponent = std::log2(out.kappa);
    return out;
}

DensityProfile lebesgue_density_profile(const MetricSpace& space, const std::vector<double>& f,
                                        const std::vector<double>& radii) {
    const index_t n = space.size();
    if (f.size() != n) throw Error("field size does not match point count");
    for (double v : f)
        if (!std::isfinite(v)) throw Error("field values must be finite");
    for (double r : radii)
        if (!(r > 0)) throw Error("radii must be positive");
    DensityProfile out;
    out.radii = radii;
    out.averages.resize(n, radii.size());
    out.deviations.resize(n, radii.size());
    parallel_chunks(n, [&](index_t b, index_t e, index_t) {
        for (index_t x = b; x < e; ++x) {
            const auto row = space.row(x);
            for (index_t k = 0; k < radii.size(); ++k) {
                double m = 0, s = 0;
                for (index_t y = 0; y < n; ++y) {
                    if (y == x || within(row[y], radii[k])) {
                        m += space.weight(y);
                        s += space.weight(y) * f[y];
                    }
                }
                out.averages(x, k) = s / m;
                out.deviations(x, k) = std::abs(s / m - f[x]);
            }
        }
    });
    return out;
}

MetricAudit audit_metric(const MetricSpace& space, index_t exhaustive_limit, std::uint64_t sampled_triples,
                         std::uint64_t seed) {
    const index_t n = space.size();
    MetricAudit audit;
    auto check = [&](index_t x, index_t y, index_t z, MetricAudit& a) {
        const double dxz = space.distance(x, z);
        const double excess = dxz - space.distance(x, y) - space.distance(y, z);
        ++a.triples_checked;
        if (excess > 0) {
            const double rel = excess / dxz;
            if (rel > a.worst_excess) {
                a.worst_excess = rel;
                a.worst_triple = {x, y, z};
            }
        }
    };
    if (n <= exhaustive_limit) {
        constexpr index_t kChunks = 16;
        std::vector<MetricAudit> parts(kChunks);
        parallel_chunks(n, [&](index_t b, index_t e, index_t c) {
            for (index_t x = b; x < e; ++x)
                for (index_t z = x + 1; z < n; ++z)
                    for (index_t y = 0; y < n; ++y)
                        if (y != x && y != z) check(x, y, z, parts[c]);
        }, kChunks);
        for (const auto& p : parts) {
            audit.triples_checked += p.triples_checked;
            if (p.worst_excess > audit.worst_excess) {
                audit.worst_excess = p.worst_excess;
                audit.worst_triple = p.worst_triple;
            }
        }
    } else {
        audit.exhaustive = false;
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<index_t> pick(0, n - 1);
        for (std::uint64_t t = 0; t < sampled_triples; ++t) {
            const index_t x = pick(rng), y = pick(rng), z = pick(rng);
            if (x == z) continue;
            check(x, y, z, audit);
        }
    }
    audit.ok = audit.worst_excess <= 1e-9;
    return audit;
}

// ---------------------------------------------------------------------------
// Specs

SpaceSpec SpaceSpec::euclidean_grid(std::vector<double> lower, std::vector<double> upper, double step) {
    SpaceSpec s;
    s.kind = Kind::EuclideanGrid;
    s.lower = std::move(lower);
    s.upper = std::move(upper);
    s.step = step;
    return s;
}

SpaceSpec SpaceSpec::path_graph(index_t count, double edge_length) {
    SpaceSpec s;
    s.kind = Kind::PathGraph;
    s.count = count;
    s.edge_length = edge_length;
    return s;
}

SpaceSpec SpaceSpec::snowflake(SpaceSpec base, double exponent) {
    SpaceSpec s;
    s.kind = Kind::Snowflake;
    s.base = std::make_shared<SpaceSpec>(std::move(base));
    s.exponent = exponent;
    return s;
}

SpaceSpec SpaceSpec::cantor_ifs(std::vector<Similitude> maps, int depth, std::vector<double> probabilities) {
    SpaceSpec s;
    s.kind = Kind::CantorIfs;
    s.maps = std::move(maps);
    s.depth = depth;
    s.probabilities = std::move(probabilities);
    return s;
}

SpaceSpec SpaceSpec::middle_thirds(int depth) {
    Similitude left{1.0 / 3.0, Mat(), Vec::Constant(1, 0.0)};
    Similitude right{1.0 / 3.0, Mat(), Vec::Constant(1, 2.0 / 3.0)};
    return cantor_ifs({left, right}, depth);
}

SpaceSpec SpaceSpec::sierpinski_carpet(int depth) {
    SpaceSpec s;
    s.kind = Kind::SierpinskiCarpet;
    s.depth = depth;
    return s;
}

SpaceSpec SpaceSpec::random_points(index_t n, index_t dim, std::uint64_t seed) {
    SpaceSpec s;
    s.kind = Kind::RandomPoints;
    s.points = n;
    s.dim = dim;
    s.seed = seed;
    return s;
}

SpaceSpec SpaceSpec::imported(std::string distances_csv, std::string weights_csv) {
    SpaceSpec s;
    s.kind = Kind::Imported;
    s.distances_csv = std::move(distances_csv);
    s.weights_csv = std::move(weights_csv);
    return s;
}

namespace {

std::vector<Similitude> carpet_maps() {
    std::vector<Similitude> maps;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            if (i == 1 && j == 1) continue;
            Vec v(2);
            v << i / 3.0, j / 3.0;
            maps.push_back({1.0 / 3.0, Mat(), v});
        }
    }
    return maps;
}

void validate_maps(const std::vector<Similitude>& maps, const std::vector<double>& probabilities) {
    if (maps.empty()) throw Error("IFS needs at least one similitude");
    const auto dim = maps.front().translation.size();
    if (dim == 0) throw Error("IFS translation vectors must be nonempty");
    for (const auto& m : maps) {
        if (!(m.ratio > 0 && m.ratio < 1)) throw Error("IFS ratios must lie in (0, 1)");
        if (m.translation.size() != dim) throw Error("IFS translations must share one dimension");
        if (m.rotation.size() != 0) {
            if (m.rotation.rows() != dim || m.rotation.cols() != dim) throw Error("IFS rotation has wrong shape");
            const Mat err = m.rotation.transpose() * m.rotation - Mat::Identity(dim, dim);
            if (err.cwiseAbs().maxCoeff() > 1e-9) throw Error("IFS rotation must be orthogonal");
        }
    }
    if (!probabilities.empty()) {
        if (probabilities.size() != maps.size()) throw Error("IFS probabilities must match the map count");
        double s = 0;
        for (double p : probabilities) {
            if (!(p > 0)) throw Error("IFS probabilities must be positive");
            s += p;
        }
        if (std::abs(s - 1) > 1e-12) throw Error("IFS probabilities must sum to 1");
    }
}

SpacePtr generate_ifs(const std::vector<Similitude>& maps, int depth, const std::vector<double>& probabilities) {
    validate_maps(maps, probabilities);
    const auto dim = maps.front().translation.size();
    const index_t nmaps = maps.size();
    std::vector<double> p = probabilities;
    if (p.empty()) p.assign(nmaps, 1.0 / static_cast<double>(nmaps));

    // Level k holds S_{w1} o ... o S_{wk}(0) for every address word, in lexicographic order.
    std::vector<Vec> pts{Vec::Zero(dim)};
    std::vector<double> w{1.0};
    std::vector<index_t> piece{0};
    for (int level = 0; level < depth; ++level) {
        std::vector<Vec> next;
        std::vector<double> nw;
        std::vector<index_t> npiece;
        next.reserve(pts.size() * nmaps);
        for (index_t j = 0; j < nmaps; ++j) {
            const auto& m = maps[j];
            for (index_t k = 0; k < pts.size(); ++k) {
                Vec img = m.rotation.size() ? Vec(m.rotation * pts[k]) : pts[k];
                next.push_back(m.ratio * img + m.translation);
                nw.push_back(p[j] * w[k]);
                npiece.push_back(j);
            }
        }
        pts = std::move(next);
        w = std::move(nw);
        piece = std::move(npiece);
    }
    const index_t n = pts.size();
    Mat coords(n, dim);
    for (index_t i = 0; i < n; ++i) coords.row(i) = pts[i].transpose();
    auto space = std::make_shared<MetricSpace>(from_coords, index_ids(n), w, coords);

    // Desk-scale disjointness check of the first-level pieces S_j(K).
    if (depth >= 1 && nmaps >= 2) {
        double inter = kInf, intra = 0;
        for (index_t i = 0; i < n; ++i) {
            double nn_same = kInf;
            for (index_t k = 0; k < n; ++k) {
                if (k == i) continue;
                const double d = space->distance(i, k);
                if (piece[k] == piece[i]) nn_same = std::min(nn_same, d);
                else inter = std::min(inter, d);
            }
            if (std::isfinite(nn_same)) intra = std::max(intra, nn_same);
        }
        auto mutable_space = std::const_pointer_cast<MetricSpace>(space);
        mutable_space->overlap_warning = inter <= 1e-12 || (intra > 0 && inter <= intra * (1 + 1e-9));
    }
    return space;
}

}  // namespace

void SpaceSpec::validate() const {
    switch (kind) {
        case Kind::EuclideanGrid:
            if (lower.empty() || lower.size() != upper.size()) throw Error("grid bounds must be nonempty and of equal dimension");
            if (!(step > 0)) throw Error("grid step must be positive");
            for (std::size_t k = 0; k < lower.size(); ++k)
                if (upper[k] < lower[k]) throw Error("grid upper bound below lower bound");
            break;
        case Kind::PathGraph:
            if (count == 0) throw Error("path graph needs at least one vertex");
            if (!(edge_length > 0)) throw Error("path edge length must be positive");
            break;
        case Kind::Snowflake:
            if (!base) throw Error("snowflake needs a base space");
            if (!(exponent > 0 && exponent < 1)) throw Error("snowflake exponent must lie in (0, 1)");
            base->validate();
            break;
        case Kind::CantorIfs:
            if (depth < 0) throw Error("IFS depth must be >= 0");
            validate_maps(maps, probabilities);
            break;
        case Kind::SierpinskiCarpet:
            if (depth < 0) throw Error("IFS depth must be >= 0");
            break;
        case Kind::RandomPoints:
            if (points == 0 || dim == 0) throw Error("random_points needs n >= 1 and dim >= 1");
            break;
        case Kind::Imported:
            if (distances_csv.empty()) throw Error("imported space needs a distance CSV path");
            break;
    }
}

SpacePtr generate_space(const SpaceSpec& spec) {
    spec.validate();
    switch (spec.kind) {
        case SpaceSpec::Kind::EuclideanGrid: {
            const std::size_t dim = spec.lower.size();
            std::vector<index_t> counts(dim);
            index_t n = 1;
            for (std::size_t k = 0; k < dim; ++k) {
                counts[k] = static_cast<index_t>(std::floor((spec.upper[k] - spec.lower[k]) / spec.step + 1e-9)) + 1;
                n *= counts[k];
            }
            Mat coords(n, dim);
            for (index_t i = 0; i < n; ++i) {
                index_t rem = i;
                for (std::size_t k = dim; k-- > 0;) {
                    coords(i, k) = spec.lower[k] + static_cast<double>(rem % counts[k]) * spec.step;
                    rem /= counts[k];
                }
            }
            return std::make_shared<MetricSpace>(from_coords, index_ids(n), uniform_weights(n), coords);
        }
        case SpaceSpec::Kind::PathGraph: {
            Mat coords(spec.count, 1);
            for (index_t i = 0; i < spec.count; ++i) coords(i, 0) = static_cast<double>(i) * spec.edge_length;
            return std::make_shared<MetricSpace>(from_coords, index_ids(spec.count), uniform_weights(spec.count), coords);
        }
        case SpaceSpec::Kind::Snowflake:
            return generate_space(*spec.base)->snowflake(spec.exponent);
        case SpaceSpec::Kind::CantorIfs:
            return generate_ifs(spec.maps, spec.depth, spec.probabilities);
        case SpaceSpec::Kind::SierpinskiCarpet:
            return generate_ifs(carpet_maps(), spec.depth, {});
        case SpaceSpec::Kind::RandomPoints: {
            std::mt19937_64 rng(spec.seed);
            std::uniform_real_distribution<double> u(0.0, 1.0);
            Mat coords(spec.points, spec.dim);
            for (index_t i = 0; i < spec.points; ++i)
                for (index_t k = 0; k < spec.dim; ++k) coords(i, k) = u(rng);
            return std::make_shared<MetricSpace>(from_coords, index_ids(spec.points), uniform_weights(spec.points), coords);
        }
        case SpaceSpec::Kind::Imported:
            return import_space_csv(spec.distances_csv, spec.weights_csv);
    }
    throw Error("unknown space kind");
}

// ---------------------------------------------------------------------------
// JSON

namespace {

const char* kind_name(SpaceSpec::Kind k) {
    switch (k) {
        case SpaceSpec::Kind::EuclideanGrid: return "euclidean_grid";
        case SpaceSpec::Kind::PathGraph: return "path_graph";
        case SpaceSpec::Kind::Snowflake: return "snowflake";
        case SpaceSpec::Kind::CantorIfs: return "cantor_ifs";
        case SpaceSpec::Kind::SierpinskiCarpet: return "sierpinski_carpet";
        case SpaceSpec::Kind::RandomPoints: return "random_points";
        case SpaceSpec::Kind::Imported: return "imported";
    }
    return "?";
}

}  // namespace

void to_json(nlohmann::json& j, const SpaceSpec& s) {
    j = nlohmann::json{{"kind", kind_name(s.kind)}};
    switch (s.kind) {
        case SpaceSpec::Kind::EuclideanGrid:
            j["lower"] = s.lower;
            j["upper"] = s.upper;
            j["step"] = s.step;
            break;
        case SpaceSpec::Kind::PathGraph:
            j["count"] = s.count;
            j["edge_length"] = s.edge_length;
            break;
        case SpaceSpec::Kind::Snowflake:
            j["base"] = *s.base;
            j["s"] = s.exponent;
            break;
        case SpaceSpec::Kind::CantorIfs: {
            auto maps = nlohmann::json::array();
            for (const auto& m : s.maps) {
                nlohmann::json jm{{"ratio", m.ratio},
                                  {"translation", std::vector<double>(m.translation.data(), m.translation.data() + m.translation.size())}};
                if (m.rotation.size()) {
                    auto rows = nlohmann::json::array();
                    for (Eigen::Index r = 0; r < m.rotation.rows(); ++r) {
                        std::vector<double> row(m.rotation.cols());
                        for (Eigen::Index c = 0; c < m.rotation.cols(); ++c) row[c] = m.rotation(r, c);
                        rows.push_back(row);
                    }
                    jm["rotation"] = rows;
                }
                maps.push_back(jm);
            }
            j["maps"] = maps;
            j["depth"] = s.depth;
            if (!s.probabilities.empty()) j["probabilities"] = s.probabilities;
            break;
        }
        case SpaceSpec::Kind::SierpinskiCarpet:
            j["depth"] = s.depth;
            break;
        case SpaceSpec::Kind::RandomPoints:
            j["n"] = s.points;
            j["dim"] = s.dim;
            j["seed"] = s.seed;
            break;
        case SpaceSpec::Kind::Imported:
            j["distances"] = s.distances_csv;
            if (!s.weights_csv.empty()) j["weights"] = s.weights_csv;
            break;
    }
}

void from_json(const nlohmann::json& j, SpaceSpec& s) {
    const std::string kind = j.at("kind").get<std::string>();
    s = SpaceSpec{};
    if (kind == "euclidean_grid") {
        s.kind = SpaceSpec::Kind::EuclideanGrid;
        s.lower = j.at("lower").get<std::vector<double>>();
        s.upper = j.at("upper").get<std::vector<double>>();
        s.step = j.at("step").get<double>();
    } else if (kind == "path_graph") {
        s.kind = SpaceSpec::Kind::PathGraph;
        s.count = j.at("count").get<index_t>();
        s.edge_length = j.value("edge_length", 1.0);
    } else if (kind == "snowflake") {
        s.kind = SpaceSpec::Kind::Snowflake;
        s.base = std::make_shared<SpaceSpec>(j.at("base").get<SpaceSpec>());
        s.exponent = j.at("s").get<double>();
    } else if (kind == "cantor_ifs") {
        s.kind = SpaceSpec::Kind::CantorIfs;
        if (j.value("preset", std::string()) == "middle_thirds") {
            s = SpaceSpec::middle_thirds(j.at("depth").get<int>());
            return;
        }
        for (const auto& jm : j.at("maps")) {
            Similitude m;
            m.ratio = jm.at("ratio").get<double>();
            const auto t = jm.at("translation").get<std::vector<double>>();
            m.translation = Eigen::Map<const Vec>(t.data(), static_cast<Eigen::Index>(t.size()));
            if (jm.contains("rotation")) {
                const auto rows = jm.at("rotation").get<std::vector<std::vector<double>>>();
                m.rotation.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
                for (std::size_t r = 0; r < rows.size(); ++r) {
                    if (rows[r].size() != rows.size()) throw Error("IFS rotation must be square");
                    for (std::size_t c = 0; c < rows.size(); ++c) m.rotation(r, c) = rows[r][c];
                }
            }
            s.maps.push_back(m);
        }
        s.depth = j.at("depth").get<int>();
        s.probabilities = j.value("probabilities", std::vector<double>{});
    } else if (kind == "sierpinski_carpet") {
        s.kind = SpaceSpec::Kind::SierpinskiCarpet;
        s.depth = j.at("depth").get<int>();
    } else if (kind == "random_points") {
        s.kind = SpaceSpec::Kind::RandomPoints;
        s.points = j.at("n").get<index_t>();
        s.dim = j.value("dim", index_t{1});
        s.seed = j.value("seed", std::uint64_t{0});
    } else if (kind == "imported") {
        s.kind = SpaceSpec::Kind::Imported;
        s.distances_csv = j.at("distances").get<std::string>();
        s.weights_csv = j.value("weights", std::string());
    } else {
        throw Error("unknown space kind '" + kind + "'");
    }
}

// ---------------------------------------------------------------------------
// CSV

SpacePtr import_space_csv(const std::string& distances_csv, const std::string& weights_csv) {
    const auto table = io::read_csv(distances_csv);
    if (table.size() < 2) throw Error("distance CSV needs a header row and at least one body row");
    std::vector<std::string> ids = table[0];
    const index_t n = ids.size();
    // Tolerate an "id" corner cell when the body carries row labels.
    const bool labelled = table[1].size() == n + 1 || (table[1].size() == n && !io::is_number(table[1][0]) && n > 0);
    if (labelled && table[1].size() == n) {
        ids.erase(ids.begin());
    }
    const index_t m = ids.size();
    if (table.size() != m + 1) throw Error("distance CSV body must have one row per id");
    Mat d(m, m);
    for (index_t i = 0; i < m; ++i) {
        const auto& row = table[i + 1];
        const index_t off = labelled ? 1 : 0;
        if (row.size() != m + off) throw Error("distance CSV row " + std::to_string(i + 1) + " has the wrong length");
        if (labelled && row[0] != ids[i]) throw Error("distance CSV row label '" + row[0] + "' does not match header");
        for (index_t k = 0; k < m; ++k) d(i, k) = io::parse_double(row[k + off]);
    }
    std::vector<double> w(m, 1.0 / static_cast<double>(m));
    if (!weights_csv.empty()) {
        const auto wt = io::read_csv(weights_csv);
        std::unordered_map<std::string, index_t> pos;
        for (index_t i = 0; i < m; ++i) pos[ids[i]] = i;
        std::vector<bool> seen(m, false);
        for (std::size_t r = 0; r < wt.size(); ++r) {
            if (wt[r].size() != 2) throw Error("weights CSV rows must be point_id,weight");
            if (r == 0 && !io::is_number(wt[r][1])) continue;
            auto it = pos.find(wt[r][0]);
            if (it == pos.end()) throw Error("unknown point id '" + wt[r][0] + "' in weights CSV");
            w[it->second] = io::parse_double(wt[r][1]);
            seen[it->second] = true;
        }
        for (index_t i = 0; i < m; ++i)
            if (!seen[i]) throw Error("weights CSV is missing point '" + ids[i] + "'");
    }
    return std::make_shared<MetricSpace>(ids, w, d);
}

void export_distances_csv(const MetricSpace& space, const std::string& path) {
    io::CsvTable rows;
    rows.push_back(space.ids());
    for (index_t i = 0; i < space.size(); ++i) {
        const auto r = space.row(i);
        std::vector<std::string> row(space.size());
        for (index_t j = 0; j < space.size(); ++j) row[j] = format_double(r[j]);
        rows.push_back(std::move(row));
    }
    io::write_csv(path, rows);
}

void export_weights_csv(const MetricSpace& space, const std::string& path) {
    io::CsvTable rows{{"point_id", "weight"}};
    for (index_t i = 0; i < space.size(); ++i) rows.push_back({space.id(i), format_double(space.weight(i))});
    io::write_csv(path, rows);
}

}  // namespace lipcalc
