#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace lipcalc {

using index_t = std::size_t;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr const char* kVersion = "0.1.0";

/// Base error for invalid input and violated preconditions.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Worker count used by the pair and per-point sweeps. 0 means hardware concurrency.
void set_thread_count(unsigned n);
unsigned thread_count();

/// Runs body(begin, end, chunk) over [0, n) split into contiguous chunks.
/// Chunk boundaries depend only on n and the chunk count, so callers that
/// reduce per-chunk results in chunk order get bit-identical output for any
/// thread count.
void parallel_chunks(index_t n, const std::function<void(index_t, index_t, index_t)>& body,
                     index_t chunks = 16);

/// Ratio with the 0/0 = 1 and positive/0 = +inf conventions.
inline double safe_ratio(double num, double den, double zero_tol = 0.0) {
    const bool num_zero = num <= zero_tol;
    const bool den_zero = den <= zero_tol;
    if (num_zero && den_zero) return 1.0;
    if (den_zero) return kInf;
    return num / den;
}

/// Ordinary least-squares slope of y against x.
double regression_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Shortest round-trip decimal representation, used for every CSV/JSON number.
std::string format_double(double v);

}  // namespace lipcalc
