#pragma once

#include "lipcalc/common.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace lipcalc {

/// One row of the distance matrix; keeps cached oracle rows alive while in use.
struct DistanceRow {
    std::shared_ptr<const std::vector<double>> owner;
    std::span<const double> values;

    double operator[](index_t j) const { return values[j]; }
    index_t size() const { return values.size(); }
};

/// Tag selecting the ambient-coordinate constructor.
struct FromCoords {};
inline constexpr FromCoords from_coords{};

/// Finite metric measure space: opaque point ids, a metric and a positive
/// measure. Distances are held densely below kDenseLimit points and computed
/// on demand from ambient coordinates (with an LRU row cache) above it.
/// Immutable after construction; all const members are safe for concurrent use.
class MetricSpace {
public:
    static constexpr index_t kDenseLimit = 4000;
    static constexpr index_t kRowCacheCapacity = 256;

    /// Space given by an explicit distance matrix (imported data).
    MetricSpace(std::vector<std::string> ids, std::vector<double> weights, const Mat& distances);

    /// Space sampled from R^dim with metric |x - y|^exponent (exponent 1 is Euclidean).
    MetricSpace(FromCoords, std::vector<std::string> ids, std::vector<double> weights, Mat coords,
                double exponent = 1.0);

    index_t size() const { return ids_.size(); }
    const std::vector<std::string>& ids() const { return ids_; }
    const std::string& id(index_t i) const { return ids_.at(i); }
    /// Throws Error for unknown ids.
    index_t index_of(const std::string& id) const;

    const std::vector<double>& weights() const { return weights_; }
    double weight(index_t i) const { return weights_[i]; }
    double total_mass() const;

    double distance(index_t i, index_t j) const;
    DistanceRow row(index_t i) const;
    bool is_dense() const { return static_cast<bool>(dense_); }

    bool has_coords() const { return coords_.has_value(); }
    /// n x dim ambient coordinates; throws if the space has none.
    const Mat& coords() const;
    /// Exponent applied to the base metric (1 unless snowflaked).
    double exponent() const { return exponent_; }

    double min_distance() const;
    double diameter() const;

    /// Same points and metric, new measure.
    std::shared_ptr<const MetricSpace> with_weights(std::vector<double> weights) const;
    /// Same points and measure, metric d^s.
    std::shared_ptr<const MetricSpace> snowflake(double s) const;

    /// Set by generators that detect overlapping IFS pieces.
    bool overlap_warning = false;

private:
    void validate_weights() const;
    void compute_extent() const;
    double oracle(index_t i, index_t j) const;

    std::vector<std::string> ids_;
    std::vector<double> weights_;
    std::unordered_map<std::string, index_t> index_;
    std::optional<Mat> coords_;
    double exponent_ = 1.0;
    std::shared_ptr<const std::vector<double>> dense_;

    mutable std::mutex cache_mutex_;
    mutable std::list<index_t> lru_;
    mutable std::unordered_map<index_t, std::pair<std::shared_ptr<const std::vector<double>>,
                                                  std::list<index_t>::iterator>>
        cache_;
    mutable std::once_flag extent_once_;
    mutable double min_distance_ = 0.0;
    mutable double diameter_ = 0.0;
};

using SpacePtr = std::shared_ptr<const MetricSpace>;

/// Per-point neighbor lists sorted by distance, truncated at max_radius.
class BallIndex {
public:
    explicit BallIndex(SpacePtr space, double max_radius = kInf);

    /// Closed ball B(x, r); radii above max_radius fall back to a full scan.
    std::vector<index_t> ball(index_t x, double r) const;
    double ball_mass(index_t x, double r) const;
    /// Neighbors of x (including x) sorted by distance, ties by index.
    const std::vector<std::pair<double, index_t>>& neighbors(index_t x) const { return lists_[x]; }
    double max_radius() const { return max_radius_; }
    const MetricSpace& space() const { return *space_; }

private:
    SpacePtr space_;
    double max_radius_;
    std::vector<std::vector<std::pair<double, index_t>>> lists_;
    std::vector<std::vector<double>> prefix_mass_;
};

/// Closed ball {y : d(x, y) <= r}.
std::vector<index_t> ball(const MetricSpace& space, index_t x, double r);
std::vector<index_t> ball(const MetricSpace& space, const std::string& x, double r);

struct RadiusDoubling {
    double radius = 0;
    double kappa = 1;       ///< max_x mu(B(x,2r)) / mu(B(x,r))
    index_t argmax = 0;     ///< center attaining kappa
    bool excluded = false;  ///< radius below the minimum pairwise distance
};

struct DoublingStats {
    std::vector<RadiusDoubling> per_radius;
    double kappa = 1;  ///< max over non-excluded radii
    double exponent = 0;  ///< log2(kappa)
};

DoublingStats doubling_stats(const MetricSpace& space, const std::vector<double>& radii);

/// Ball averages A_r f(x) and deviations |A_r f(x) - f(x)|, rows = points, cols = radii.
struct DensityProfile {
    std::vector<double> radii;
    Mat averages;
    Mat deviations;
};

DensityProfile lebesgue_density_profile(const MetricSpace& space, const std::vector<double>& f,
                                        const std::vector<double>& radii);

struct MetricAudit {
    bool ok = true;
    bool exhaustive = true;
    std::uint64_t triples_checked = 0;
    double worst_excess = 0;  ///< max of d(x,z) - d(x,y) - d(y,z), relative to d(x,z)
    std::array<index_t, 3> worst_triple{0, 0, 0};
};

/// Triangle-inequality audit at 1e-9 relative; exhaustive up to exhaustive_limit
/// points, otherwise sampled_triples random triples.
MetricAudit audit_metric(const MetricSpace& space, index_t exhaustive_limit = 2000,
                         std::uint64_t sampled_triples = 1000000, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Space generators

struct Similitude {
    double ratio = 0.5;   ///< lambda_j in (0, 1)
    Mat rotation;         ///< R_j, orthogonal dim x dim; empty means identity
    Vec translation;      ///< v_j
};

struct SpaceSpec {
    enum class Kind { EuclideanGrid, PathGraph, Snowflake, CantorIfs, SierpinskiCarpet, RandomPoints, Imported };
    Kind kind = Kind::EuclideanGrid;

    // euclidean_grid: axis-aligned lattice lower + k*step <= upper in every coordinate
    std::vector<double> lower{0.0};
    std::vector<double> upper{1.0};
    double step = 0.1;

    // path_graph
    index_t count = 2;
    double edge_length = 1.0;

    // snowflake
    std::shared_ptr<SpaceSpec> base;
    double exponent = 0.5;

    // cantor_ifs / sierpinski_carpet
    std::vector<Similitude> maps;
    std::vector<double> probabilities;  ///< branch masses; empty means uniform
    int depth = 0;

    // random_points
    index_t points = 0;
    index_t dim = 1;
    std::uint64_t seed = 0;

    // imported
    std::string distances_csv;
    std::string weights_csv;

    static SpaceSpec euclidean_grid(std::vector<double> lower, std::vector<double> upper, double step);
    static SpaceSpec path_graph(index_t count, double edge_length = 1.0);
    static SpaceSpec snowflake(SpaceSpec base, double s);
    static SpaceSpec cantor_ifs(std::vector<Similitude> maps, int depth, std::vector<double> probabilities = {});
    /// Middle-thirds Cantor set: S_0(x) = x/3, S_1(x) = x/3 + 2/3.
    static SpaceSpec middle_thirds(int depth);
    static SpaceSpec sierpinski_carpet(int depth);
    static SpaceSpec random_points(index_t n, index_t dim, std::uint64_t seed);
    static SpaceSpec imported(std::string distances_csv, std::string weights_csv = {});

    /// Throws Error on ratios outside (0,1), exponents outside (0,1), negative depth, etc.
    void validate() const;
};

void to_json(nlohmann::json& j, const SpaceSpec& spec);
void from_json(const nlohmann::json& j, SpaceSpec& spec);

/// Deterministic for a fixed spec (and seed).
SpacePtr generate_space(const SpaceSpec& spec);

// ---------------------------------------------------------------------------
// CSV interchange

/// Distance CSV: header row of ids, then one row of distances per point. A
/// leading id column in the body is accepted on import.
SpacePtr import_space_csv(const std::string& distances_csv, const std::string& weights_csv = {});
void export_distances_csv(const MetricSpace& space, const std::string& path);
/// point_id,weight
void export_weights_csv(const MetricSpace& space, const std::string& path);

}  // namespace lipcalc
