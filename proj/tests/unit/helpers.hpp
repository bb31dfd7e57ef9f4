#pragma once

#include "lipcalc/metric_space.hpp"

#include <doctest.h>

#include <random>

namespace testing_support {

using namespace lipcalc;

inline SpacePtr grid1d(double step, double lo = 0.0, double hi = 1.0) {
    return generate_space(SpaceSpec::euclidean_grid({lo}, {hi}, step));
}

inline SpacePtr grid2d(double step) { return generate_space(SpaceSpec::euclidean_grid({0.0, 0.0}, {1.0, 1.0}, step)); }

inline SpacePtr points(const std::vector<std::vector<double>>& pts, std::vector<double> weights = {}) {
    const auto n = static_cast<Eigen::Index>(pts.size());
    const auto dim = static_cast<Eigen::Index>(pts.front().size());
    Mat c(n, dim);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < dim; ++k) c(i, k) = pts[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    std::vector<std::string> ids;
    for (Eigen::Index i = 0; i < n; ++i) ids.push_back(std::to_string(i));
    if (weights.empty()) weights.assign(pts.size(), 1.0 / static_cast<double>(pts.size()));
    return std::make_shared<MetricSpace>(from_coords, ids, weights, c);
}

/// Random planar sample with positive weights.
inline SpacePtr random_space(std::mt19937_64& rng, index_t n, index_t dim = 2) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::vector<double>> pts(n, std::vector<double>(dim));
    std::vector<double> w(n);
    for (index_t i = 0; i < n; ++i) {
        for (auto& v : pts[i]) v = u(rng);
        w[i] = 0.1 + u(rng);
    }
    return points(pts, w);
}

inline std::vector<index_t> sorted(std::vector<index_t> v) {
    std::sort(v.begin(), v.end());
    return v;
}

}  // namespace testing_support
