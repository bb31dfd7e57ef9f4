#pragma once

#include "lipcalc/lipschitz.hpp"

namespace lipcalc {

/// Exact minimum of (sum mu g^2)^(1/2) subject to g(x) + g(y) >= |u(x) - u(y)| / d(x, y)
/// and g >= 0, by enumerating active sets of at most n constraints and
/// solving each equality-constrained quadratic program. Exponential in n;
/// meant for spaces of at most 6-7 points.
double hajlasz_p2_oracle(const ScalarField& u);

/// Minimal max g for p = inf: scans the candidate levels c_xy / 2 in
/// increasing order and returns the first t for which some g with max g <= t
/// is feasible (checked with g = t everywhere).
double hajlasz_inf_oracle(const ScalarField& u);

/// Minimum over a uniform grid g in {0, step, ..., upper}^n of the p-norm of
/// feasible g. Coarse; used only to sanity-check tiny instances.
double hajlasz_grid_oracle(const ScalarField& u, double p, double step, double upper);

}  // namespace lipcalc
