#pragma once

#include "lipcalc/nets.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lipcalc {

struct StencilEntry {
    index_t neighbor = 0;
    double weight = 0;
};

/// Local difference operator delta f(x) = sum_y w_{x,y} (f(y) - f(x)) with all
/// neighbors y in the closed ball B(x, h) minus x. Acts as 0 at points with an
/// empty stencil.
class StencilDerivation {
public:
    StencilDerivation(SpacePtr space, double h, std::vector<std::vector<StencilEntry>> stencils,
                      std::string label = {});

    const SpacePtr& space() const { return space_; }
    double support() const { return h_; }
    const std::string& label() const { return label_; }
    const std::vector<StencilEntry>& stencil(index_t x) const { return stencils_[x]; }
    index_t size() const { return stencils_.size(); }

    /// sum_y |w_{x,y}| d(x, y); |delta f(x)| <= L(f) times this.
    double normalization(index_t x) const;

    double apply_at(const ScalarField& f, index_t x) const;
    std::vector<double> apply(const ScalarField& f) const;

    /// lambda(x) * delta, lambda given per point.
    StencilDerivation scaled(const std::vector<double>& lambda) const;
    /// 1_S * delta for the indicator of `mask`.
    StencilDerivation restricted(const std::vector<bool>& mask) const;

private:
    SpacePtr space_;
    double h_;
    std::vector<std::vector<StencilEntry>> stencils_;
    std::string label_;
};

struct StencilScheme {
    enum class Kind { NearestNeighbor, NetDirection, Direction };
    Kind kind = Kind::Direction;
    Vec direction;                ///< Direction: ambient vector (need not be unit)
    const EpsilonNet* net = nullptr;  ///< NetDirection
    index_t rank = 0;                  ///< NetDirection: use the rank-th nearest net point

    static StencilScheme nearest_neighbor();
    static StencilScheme net_direction(const EpsilonNet& net, index_t rank = 0);
    static StencilScheme coordinate_axis(index_t axis, index_t dim);
    static StencilScheme along(Vec direction);
};

/// Single-neighbor stencils with weight 1/d(x, y).
///
/// Direction: y is the farthest point of B(x, h) with y - x a positive multiple
/// of the direction (ties to the lower index). When no such point exists the
/// backward neighbor along -direction is used with weight -1/d, so the
/// operator still approximates the same directional derivative at the
/// boundary. On a grid with h equal to the step this is the forward difference.
/// NearestNeighbor: y is the nearest other point within h.
/// NetDirection: y is the rank-th nearest net point other than x within h.
StencilDerivation build_stencil(SpacePtr space, const StencilScheme& scheme, double h);

struct LeibnizDefect {
    std::vector<double> defect;  ///< delta(fg) - f delta g - g delta f per point
    double sup = 0;
};

LeibnizDefect leibniz_defect(const StencilDerivation& d, const ScalarField& f, const ScalarField& g);

/// Per point an M x N matrix with entry (i, j) = delta_i g_j(x): one row per
/// derivation, one column per generator.
struct JacobiField {
    std::vector<Mat> matrices;
    std::vector<std::string> derivations;
    std::vector<std::string> generators;

    index_t rows() const { return derivations.size(); }
    index_t cols() const { return generators.size(); }
};

JacobiField jacobi_matrix(const std::vector<StencilDerivation>& derivs, const std::vector<ScalarField>& generators,
                          const std::vector<std::string>& generator_names = {});

/// max(1e-8, 10 h / diam).
double default_rank_tolerance(double h, double diameter);

struct RankResult {
    std::vector<index_t> rank;
    std::vector<Vec> singular_values;
    std::vector<std::vector<index_t>> generator_subset;  ///< pivot columns spanning the row space
    index_t essential_rank = 0;  ///< largest r held by more than `null_fraction` of the mass
    std::vector<double> mass_at_least;  ///< mass_at_least[r] = mu-fraction with rank >= r
    double max_tail_ratio(index_t k) const;  ///< max over points of sigma_{k+1} / sigma_1
};

/// Rank counts sigma_k > tol * sigma_1. The essential rank ignores sets of
/// relative measure at most null_fraction.
RankResult pointwise_rank(const JacobiField& jf, const MetricSpace& space, double tol, double null_fraction = 1e-3);

struct OrthogonalBasisResult {
    index_t m = 0, n = 0;
    std::vector<std::vector<index_t>> subsets;  ///< chosen generator columns per point; empty if degenerate
    std::vector<Mat> coefficients;              ///< adj(A): delta*_i = sum_k coeff(i,k) delta_k
    std::vector<Mat> orthogonalized;            ///< coefficients * A = det(A) I
    std::vector<double> det;
    std::map<std::vector<index_t>, std::vector<index_t>> blocks;
    std::vector<index_t> degenerate;
    double max_identity_error = 0;  ///< max |coeff*A - det I| / |det| over nondegenerate points
};

/// Adjugate via cofactors; adj(A) A = det(A) I.
Mat adjugate(const Mat& a);

/// For each point choose the M columns of the Jacobi matrix whose minor has
/// the largest |det| (exhaustive for N <= 12, column-pivoted QR above) and
/// replace the derivations by the adjugate combination. A point is
/// degenerate when |det| <= tol times the product of the minor's row norms.
OrthogonalBasisResult orthogonalize(const JacobiField& jf, double tol = 1e-10);

/// Derivations delta*_i as stencils on the given point block (other points get empty stencils).
std::vector<StencilDerivation> orthogonal_derivations(const std::vector<StencilDerivation>& derivs,
                                                      const OrthogonalBasisResult& ob);

struct ChangeOfVariables {
    Mat t;            ///< N x N, T_j(z) = sum_k t(j, k) z_k
    Mat transformed;  ///< dg T^T, i.e. delta_i (T_j o g)
    double residual = 0;  ///< max |transformed - delta_1 g_1 [I | 0]|
};

/// T_j = z_j for j <= M and T_j = delta_1 g_1 z_j - sum_{i<=M} delta_i g_j z_i
/// above M. Requires the leading M x M block of dg to be delta_1 g_1 times the
/// identity (relative tolerance `tol`) with delta_1 g_1 != 0.
ChangeOfVariables change_of_variables(const Mat& dg, double tol = 1e-9);

struct PushforwardResult {
    std::vector<double> measure;  ///< xi#mu on the target
    std::vector<std::vector<double>> derivation;  ///< per test function pi: (xi#delta) pi on the target
    std::vector<double> residuals;  ///< relative duality residual per (phi, pi) pair
    double max_residual = 0;
};

/// xi#mu(y) = mu(xi^-1(y)); (xi#delta) pi (y) = sum_fiber mu delta(pi o xi) / xi#mu(y),
/// 0 on empty fibers. Residuals compare sum_Y phi (xi#delta)pi xi#mu with
/// sum_X (phi o xi) delta(pi o xi) mu for every phi in phis and pi in pis.
PushforwardResult pushforward(const StencilDerivation& delta, const std::vector<index_t>& xi, index_t target_size,
                              const std::vector<std::vector<double>>& pis, const std::vector<std::vector<double>>& phis);

struct ChainRuleField {
    std::vector<Vec> v;        ///< per point; empty where skipped
    std::vector<double> residual;
    std::vector<index_t> skipped;
};

/// Solves delta_k f(x) = sum_i v^i(x) delta_k x_i(x) by least squares per point.
ChainRuleField chain_rule_field(const std::vector<StencilDerivation>& derivs, const ScalarField& f,
                                double tol = 1e-10);

struct RankScaleRow {
    double h = 0;
    index_t essential_rank = 0;
    double tail_ratio = 0;  ///< max sigma_{r+1}/sigma_1 past the essential rank
    double tolerance = 0;
    std::vector<double> generator_decay;  ///< max_x |delta g(x)| per generator, max over derivations
    bool within_bound = true;             ///< essential rank <= bound (when a bound is given)
};

/// For each support radius h builds the stencil set along `directions` and
/// tabulates the essential rank of the Jacobi field on `generators`.
std::vector<RankScaleRow> rank_bound_experiment(SpacePtr space, const std::vector<double>& scales,
                                                const std::vector<ScalarField>& generators,
                                                const std::vector<Vec>& directions,
                                                std::optional<index_t> rank_bound = std::nullopt);

// CSV: x_id,y_id,weight and point,i,j,value
void write_stencil_csv(const StencilDerivation& d, const std::string& path);
StencilDerivation read_stencil_csv(SpacePtr space, const std::string& path, double h = 0);
void write_jacobi_csv(const JacobiField& jf, const MetricSpace& space, const std::string& path);

}  // namespace lipcalc
