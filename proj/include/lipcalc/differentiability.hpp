#pragma once

#include "lipcalc/derivations.hpp"

#include <map>
#include <nlohmann/json.hpp>

namespace lipcalc {

/// Point subset Y with coordinate fields xi = (xi^1, ..., xi^n) defined on the whole space.
class Chart {
public:
    Chart(SpacePtr space, std::vector<index_t> points, std::vector<ScalarField> coords);

    const SpacePtr& space() const { return space_; }
    const std::vector<index_t>& points() const { return points_; }
    const std::vector<ScalarField>& coords() const { return coords_; }
    index_t dim() const { return coords_.size(); }
    /// Lipschitz constant of xi : X -> R^n with the Euclidean norm on R^n.
    double lip() const { return lip_; }
    Vec at(index_t x) const;
    bool contains(index_t x) const;

private:
    SpacePtr space_;
    std::vector<index_t> points_;
    std::vector<bool> member_;
    std::vector<ScalarField> coords_;
    double lip_ = 0;
};

/// Builds a chart from {"points": [ids] | "all", "coordinates": [...]} where a
/// coordinate is {"kind": "coordinate", "index": k}, {"kind": "distance", "base": id}
/// or {"kind": "csv", "path": file}.
Chart chart_from_json(SpacePtr space, const nlohmann::json& j);

struct ResidualProfile {
    std::vector<double> scales;
    std::vector<double> residuals;  ///< sup_{y in B(x,r)} |f(y) - f(x) - Df.(xi(y) - xi(x))| / r
    std::vector<double> dropped_scales;
    double threshold = 0;           ///< 0.05 L(f)
    bool differentiable = false;
};

/// Verdict: finest residual <= 0.05 L(f) and non-increasing over the last three scales.
/// Pass lip_f < 0 to have L(f) computed here.
ResidualProfile residual_profile(const ScalarField& f, const Chart& chart, const Vec& df, index_t x,
                                 const std::vector<double>& scales, double lip_f = -1);

/// Thrown when the coordinate differences in the ball do not span R^n.
class DegenerateChart : public Error {
public:
    DegenerateChart(const std::string& msg, Vec direction) : Error(msg), direction_(std::move(direction)) {}
    const Vec& direction() const { return direction_; }

private:
    Vec direction_;
};

/// Least-squares v minimizing sum over B(x, r) of (f(y) - f(x) - v.(xi(y) - xi(x)))^2.
Vec estimate_differential(const ScalarField& f, const Chart& chart, index_t x, double r);

struct DifferentialField {
    std::vector<index_t> points;
    std::vector<Vec> df;
    double scale = 0;
    std::vector<index_t> degenerate;  ///< chart points where estimation failed
};

DifferentialField estimate_differential_field(const ScalarField& f, const Chart& chart, double r);
void write_differential_csv(const DifferentialField& d, const MetricSpace& space, const std::string& path);

struct LipDerivStats {
    std::vector<double> khat;  ///< per point, max over the family
    double budget = 0;
    double fraction_within = 0;  ///< mu-fraction of points with khat <= budget
    std::vector<index_t> infinite;  ///< points where some f has Lip > 0 but df = 0
};

/// K(x) = max over f of max(|df(x)| / Lip[f](x), Lip[f](x) / |df(x)|) with 0/0 = 1,
/// where df(x) = (delta_1 f(x), ..., delta_M f(x)) and Lip is the scale-grid upper constant.
LipDerivStats lipderiv_check(const std::vector<ScalarField>& family, const std::vector<StencilDerivation>& basis,
                             const std::vector<double>& scales, double budget);

struct ChartLowerConstant {
    double k = 0;              ///< min over sampled unit c of Lip[c.xi](x)
    Vec direction;             ///< minimizing c
    bool degenerate = false;   ///< k < 1e-6 L(xi)
    index_t samples = 0;
};

/// Deterministic unit-sphere sample of at least 100 n directions (half circle
/// for n = 2, Halton with a Box-Muller map above), plus the smallest right
/// singular vector of the coordinate differences in the largest ball and any
/// extra directions supplied.
ChartLowerConstant chart_lower_constant(const Chart& chart, index_t x, const std::vector<double>& scales,
                                        const std::vector<Vec>& extra_directions = {});

std::vector<Vec> sphere_directions(index_t n, index_t count);

struct Subchart {
    int k = 0;                 ///< 2^-(k+1) <= K < 2^-k
    double constant = 0;       ///< 2^(k+1)
    std::vector<index_t> points;
};

/// Dyadic partition of the points by K value; points with K <= 0 or non-finite K are left out.
std::vector<Subchart> subchart_partition(const std::vector<index_t>& points, const std::vector<double>& k_values);

}  // namespace lipcalc
