#pragma once

#include "lipcalc/metric_space.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <string>
#include <vector>

namespace lipcalc {

/// One real value per point of a space.
class ScalarField {
public:
    ScalarField(SpacePtr space, std::vector<double> values);

    static ScalarField from_function(SpacePtr space, const std::function<double(index_t)>& fn);
    static ScalarField constant(SpacePtr space, double c);
    /// k-th ambient coordinate.
    static ScalarField coordinate(SpacePtr space, index_t k);
    /// d(x, base).
    static ScalarField distance_to(SpacePtr space, index_t base);

    const SpacePtr& space() const { return space_; }
    const std::vector<double>& values() const { return values_; }
    double operator[](index_t i) const { return values_[i]; }
    index_t size() const { return values_.size(); }

    ScalarField affine(double a, double b) const;
    ScalarField operator+(const ScalarField& o) const;
    ScalarField operator*(const ScalarField& o) const;

private:
    SpacePtr space_;
    std::vector<double> values_;
};

/// Same space object, or identical id lists.
bool same_space(const MetricSpace& a, const MetricSpace& b);

/// L(f) = max over pairs |f(y) - f(x)| / d(x, y); 0 for one point.
double global_lip(const ScalarField& f);
/// Lipschitz constant of values given on a subset of the space.
double subset_lip(const MetricSpace& space, const std::vector<index_t>& subset, const std::vector<double>& values);

/// Default geometric scale grid r_j = r0 * 2^-j, j = 0..count-1.
std::vector<double> geometric_scales(double r0, int count = 6);

struct LipProfile {
    index_t point = 0;
    std::vector<double> scales;          ///< retained scales, descending
    std::vector<double> slopes;          ///< sup_{y in B(x,r)} |f(y) - f(x)| / r
    std::vector<double> dropped_scales;  ///< below the nearest-neighbor distance of x
    double upper = 0;                    ///< max over scales (finite-grid limsup)
    double lower = 0;                    ///< min over scales (finite-grid liminf)
};

LipProfile pointwise_lip_profile(const ScalarField& f, index_t x, const std::vector<double>& scales);

/// upper / lower with 0/0 = 1 and positive/0 = +inf.
double liplip_ratio(const ScalarField& f, index_t x, const std::vector<double>& scales);

/// inf { f(a) + L(f|A) d(x, a) : a in A }, equal to f on A.
ScalarField mcshane_extend(SpacePtr space, const std::vector<index_t>& subset, const std::vector<double>& values);
/// Same with an explicit slope L (must be >= L(f|A) for the extension to agree with f on A).
ScalarField mcshane_extend(SpacePtr space, const std::vector<index_t>& subset, const std::vector<double>& values,
                           double slope);

struct WeakStarVerdict {
    bool converges = false;
    bool pointwise = false;       ///< tail deviation below tolerance
    bool lip_bounded = false;     ///< sup_m L(f_m) <= budget (1 + 1e-12)
    double tail_deviation = 0;    ///< max |f_last - f| over points
    double sup_lip = 0;
    std::vector<double> deviations;  ///< per sequence element
};

/// Pointwise convergence with a uniform Lipschitz bound, the sequential form
/// of weak-* convergence in Lip_b on separable spaces.
WeakStarVerdict weakstar_check(const std::vector<ScalarField>& sequence, const ScalarField& limit, double lip_budget,
                               double tolerance = 1e-8);

struct HajlaszGradient {
    double p = 2;
    std::vector<double> g;
    double norm = 0;
    index_t iterations = 0;
    double gap = 0;  ///< duality gap at exit (finite p)
};

struct HajlaszOptions {
    double tol = 1e-12;        ///< relative duality gap on sum mu g^p / p
    index_t max_iters = 100000;
};

class HajlaszNonConvergence : public Error {
public:
    HajlaszNonConvergence(const std::string& msg, HajlaszGradient best) : Error(msg), best_(std::move(best)) {}
    const HajlaszGradient& best() const { return best_; }

private:
    HajlaszGradient best_;
};

/// Minimal-norm g with |u(x) - u(y)| <= (g(x) + g(y)) d(x, y). p = +inf uses the
/// closed form; finite p runs dual coordinate ascent on the pair constraints.
HajlaszGradient hajlasz_gradient(const ScalarField& u, double p, const HajlaszOptions& opts = {});

/// (sum mu g^p)^(1/p), or max g for p = inf.
double hajlasz_norm(const MetricSpace& space, const std::vector<double>& g, double p);
/// Largest violation of the pair constraints (0 when feasible).
double hajlasz_violation(const ScalarField& u, const std::vector<double>& g);

struct Monomial {
    std::vector<int> exponents;
    double coeff = 1;
};

/// Real polynomial in n variables as a list of monomials.
struct Polynomial {
    std::vector<Monomial> terms;

    double operator()(const std::vector<double>& y) const;
    std::vector<double> gradient(const std::vector<double>& y) const;
    /// sum_i |d p / d y_i| with absolute coefficients, evaluated at |y|.
    double abs_gradient_bound(const std::vector<double>& y) const;
    index_t variables() const;
};

void to_json(nlohmann::json& j, const Polynomial& p);
void from_json(const nlohmann::json& j, Polynomial& p);

ScalarField compose(const Polynomial& p, const std::vector<ScalarField>& fields);

struct ChainRuleCheck {
    double composite_lip = 0;  ///< Lip^[p o f](x)
    double bound = 0;          ///< C(p, f(x)) * max_i Lip^[f_i](x)
    bool violation = false;    ///< composite exceeds bound by more than 10%
};

ChainRuleCheck poly_chain_rule_check(const std::vector<ScalarField>& fields, index_t x, const Polynomial& p,
                                     const std::vector<double>& scales);

// CSV: point_id,value
ScalarField read_field_csv(SpacePtr space, const std::string& path);
void write_field_csv(const ScalarField& f, const std::string& path);

}  // namespace lipcalc
