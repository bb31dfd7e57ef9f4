#pragma once

#include "lipcalc/nets.hpp"

#include <array>
#include <cstdint>

namespace lipcalc {

/// Greedy coloring of net points in net order: same-colored points are more
/// than rho * epsilon apart. Returns one color per net point.
std::vector<index_t> net_coloring(const MetricSpace& space, const EpsilonNet& net, double rho);

struct DistortionAudit {
    double k_low = 0;   ///< min |z(y) - z(x)| / d(x,y)^s
    double k_up = 0;    ///< max of the same ratio
    std::array<index_t, 2> argmin{0, 0};
    std::array<index_t, 2> argmax{0, 0};
    bool sampled = false;   ///< pairs sampled rather than swept
    std::uint64_t pairs = 0;
    double ratio() const { return safe_ratio(k_up, k_low); }
};

/// Exact pair sweep up to `exhaustive_limit` points, otherwise `sampled_pairs` seeded random pairs.
DistortionAudit distortion_audit(const MetricSpace& space, const Mat& images, double s,
                                 index_t exhaustive_limit = 2000, std::uint64_t sampled_pairs = 1000000,
                                 std::uint64_t seed = 0);

struct EmbeddingResult {
    index_t dim = 0;
    double s = 0.5;
    Mat images;                      ///< one row per point
    std::vector<double> scales;      ///< dyadic epsilon_k, coarse to fine
    std::vector<index_t> colors;     ///< color count per scale
    index_t block = 1;               ///< scale k uses coordinate block k mod block
    double rho = 12;
    DistortionAudit audit;
};

/// Multiscale Assouad embedding of (X, d^s) into R^n. Scale epsilon_k = 2^-k
/// runs from the first dyadic value at or below diam/4 down to at most
/// dmin/8 (`scale_count` > 0 keeps only that many scales from the coarse end).
/// Each scale gets an epsilon-net (scan order shuffled by `seed`), a coloring
/// with separation 12 epsilon, and tent bumps epsilon^(s-1) max(0, 2 epsilon - d)
/// per color. Scale k writes into block k mod B with B = ceil(6 / min(s, 1-s)),
/// so n = max colors * B.
EmbeddingResult assouad_embed(const MetricSpace& space, double s, index_t scale_count = 0, std::uint64_t seed = 0);

struct CompositeApproximation {
    explicit CompositeApproximation(ScalarField f) : field(std::move(f)) {}

    ScalarField field;           ///< McShane extension of u-tilde
    double epsilon = 0;
    index_t center = 0;
    std::vector<index_t> inner;  ///< B(x0, eps)
    std::vector<index_t> outer;  ///< X minus B(x0, 2 eps)
    double lip = 0;              ///< measured L of the extension
    double lip_u = 0;
    double k_prime = 0;          ///< L(u) K^(1/s) (2 eps)^(1-s) sqrt(n) K eps^(s-1)
    double bound = 0;            ///< L(u) + K'
    double sup_error = 0;        ///< max |u_eps - u|
    double k = 1;                ///< max(K_up, 1/K_low, 1) of the embedding
    bool within_bound = false;
};

/// Local composite approximation around x0: on B(x0, eps) the value is
/// [u o zeta^-1]_{B_eps} applied to [zeta]_eps, outside B(x0, 2 eps) it is u,
/// and the gap is filled by McShane extension.
CompositeApproximation composite_approximation(const ScalarField& u, const EmbeddingResult& emb, double epsilon,
                                               index_t x0);

void write_embedding_csv(const EmbeddingResult& e, const MetricSpace& space, const std::string& path);

}  // namespace lipcalc
