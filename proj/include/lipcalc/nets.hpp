#pragma once

#include "lipcalc/lipschitz.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lipcalc {

enum class NetStrategy { GreedyScan, FarthestPoint };

NetStrategy parse_net_strategy(const std::string& name);
std::string to_string(NetStrategy s);

/// Maximal epsilon-separated subset with measured separation and covering radius.
struct EpsilonNet {
    std::vector<index_t> points;
    double epsilon = 0;
    double separation = kInf;    ///< min distance between distinct net points
    double covering_radius = 0;  ///< max over x of the distance to the nearest net point
    double constant = 1;         ///< C = max(1, covering_radius / epsilon)
    std::vector<index_t> nearest;  ///< per point, index into `points` of a nearest net point
};

/// greedy_scan walks the points in index order (seed 0) or a seeded shuffle;
/// farthest_point repeatedly adds the point farthest from the current net.
/// `first`, when given, is placed in the net before anything else.
EpsilonNet build_net(const MetricSpace& space, double epsilon, NetStrategy strategy = NetStrategy::GreedyScan,
                     std::uint64_t seed = 0, std::optional<index_t> first = std::nullopt);

/// [u]_eps(x) = min over net points x' of u(x') + L(u) d(x, x'), floored at u(x)
/// so that u <= [u]_eps survives rounding.
ScalarField piecewise_distance_approx(const ScalarField& u, const EpsilonNet& net);

// ---------------------------------------------------------------------------
// Kuhn triangulation of R^N at scale 2^-level

using LatticePoint = std::vector<long long>;
using LatticeField = std::map<LatticePoint, double>;

struct KuhnTriangulation {
    index_t dim = 1;
    int level = 0;
    double scale() const;
};

struct SimplexLocation {
    std::vector<LatticePoint> vertices;  ///< N+1 lattice vertices, base corner first
    std::vector<double> barycentric;     ///< same order as vertices
    std::vector<index_t> order;          ///< coordinate order of the edge path
};

/// Simplex of the Kuhn tiling containing z: the fractional parts of z / scale
/// sorted in decreasing order (stable in coordinate index) give the edge path.
SimplexLocation locate_simplex(const Vec& z, const KuhnTriangulation& tri);

struct PlExtension {
    std::vector<double> values;       ///< F at each query
    std::vector<Vec> gradients;       ///< gradient of the simplex holding each query (empty if it has missing corners)
    double max_gradient_norm = 0;     ///< over every simplex of every complete lattice cell
    double vertex_lip = 0;            ///< Lipschitz constant of f on the supplied vertices
    double ratio = 1;                 ///< max_gradient_norm / vertex_lip (0/0 = 1)
};

/// Piecewise-linear extension of lattice values over the Kuhn simplices.
/// Throws Error when a queried simplex has a vertex without a value.
PlExtension pl_extend(const LatticeField& f, const KuhnTriangulation& tri, const std::vector<Vec>& queries);

/// Affine function on an arbitrary nondegenerate N-simplex matching the given vertex values.
struct AffinePiece {
    Vec gradient;
    double offset = 0;
    double operator()(const Vec& z) const { return gradient.dot(z) + offset; }
};

AffinePiece affine_on_simplex(const std::vector<Vec>& vertices, const std::vector<double>& values);

}  // namespace lipcalc
