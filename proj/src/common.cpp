#include "lipcalc/common.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <thread>

namespace lipcalc {

namespace {
std::atomic<unsigned> g_threads{1};
}

void set_thread_count(unsigned n) {
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    g_threads.store(n);
}

unsigned thread_count() { return g_threads.load(); }

void parallel_chunks(index_t n, const std::function<void(index_t, index_t, index_t)>& body,
                     index_t chunks) {
    if (n == 0) return;
    chunks = std::max<index_t>(1, std::min(chunks, n));
    const index_t step = (n + chunks - 1) / chunks;
    chunks = (n + step - 1) / step;
    const unsigned workers = std::min<unsigned>(thread_count(), static_cast<unsigned>(chunks));
    if (workers <= 1) {
        for (index_t c = 0; c < chunks; ++c) body(c * step, std::min(n, (c + 1) * step), c);
        return;
    }
    std::atomic<index_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (index_t c = next++; c < chunks; c = next++) {
                body(c * step, std::min(n, (c + 1) * step), c);
            }
        });
    }
    for (auto& t : pool) t.join();
}

double regression_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw Error("regression_slope: need >= 2 paired samples");
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (sxx == 0) throw Error("regression_slope: degenerate abscissae");
    return sxy / sxx;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace lipcalc
