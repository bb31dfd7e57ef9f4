#include "lipcalc/derivations.hpp"

#include "lipcalc/io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lipcalc {

namespace {
constexpr double kTieSlack = 1e-12;
}

// ---------------------------------------------------------------------------
// StencilDerivation

StencilDerivation::StencilDerivation(SpacePtr space, double h, std::vector<std::vector<StencilEntry>> stencils,
                                     std::string label)
    : space_(std::move(space)), h_(h), stencils_(std::move(stencils)), label_(std::move(label)) {
    if (stencils_.size() != space_->size()) throw Error("stencil count does not match point count");
    for (index_t x = 0; x < stencils_.size(); ++x)
        for (const auto& e : stencils_[x]) {
            if (e.neighbor >= space_->size()) throw Error("stencil neighbor out of range");
            if (e.neighbor == x) throw Error("stencil may not reference its own center");
            if (!std::isfinite(e.weight)) throw Error("stencil weights must be finite");
            if (h_ > 0 && space_->distance(x, e.neighbor) > h_ * (1 + kTieSlack))
                throw Error("stencil neighbor outside the support radius");
        }
}

double StencilDerivation::normalization(index_t x) const {
    double s = 0;
    for (const auto& e : stencils_[x]) s += std::abs(e.weight) * space_->distance(x, e.neighbor);
    return s;
}

double StencilDerivation::apply_at(const ScalarField& f, index_t x) const {
    double s = 0;
    const double fx = f[x];
    for (const auto& e : stencils_[x]) s += e.weight * (f[e.neighbor] - fx);
    return s;
}

std::vector<double> StencilDerivation::apply(const ScalarField& f) const {
    if (!same_space(*f.space(), *space_)) throw Error("derivation and field live on different spaces");
    std::vector<double> out(stencils_.size());
    for (index_t x = 0; x < out.size(); ++x) out[x] = apply_at(f, x);
    return out;
}

StencilDerivation StencilDerivation::scaled(const std::vector<double>& lambda) const {
    if (lambda.size() != stencils_.size()) throw Error("scaling field has wrong length");
    auto st = stencils_;
    for (index_t x = 0; x < st.size(); ++x)
        for (auto& e : st[x]) e.weight *= lambda[x];
    return StencilDerivation(space_, h_, std::move(st), label_);
}

StencilDerivation StencilDerivation::restricted(const std::vector<bool>& mask) const {
    if (mask.size() != stencils_.size()) throw Error("mask has wrong length");
    auto st = stencils_;
    for (index_t x = 0; x < st.size(); ++x)
        if (!mask[x]) st[x].clear();
    return StencilDerivation(space_, h_, std::move(st), label_);
}

// ---------------------------------------------------------------------------
// Schemes

StencilScheme StencilScheme::nearest_neighbor() {
    StencilScheme s;
    s.kind = Kind::NearestNeighbor;
    return s;
}

StencilScheme StencilScheme::net_direction(const EpsilonNet& net, index_t rank) {
    StencilScheme s;
    s.kind = Kind::NetDirection;
    s.net = &net;
    s.rank = rank;
    return s;
}

StencilScheme StencilScheme::coordinate_axis(index_t axis, index_t dim) {
    if (axis >= dim) throw Error("coordinate axis out of range");
    Vec v = Vec::Zero(static_cast<Eigen::Index>(dim));
    v[static_cast<Eigen::Index>(axis)] = 1.0;
    return along(std::move(v));
}

StencilScheme StencilScheme::along(Vec direction) {
    if (!(direction.norm() > 0)) throw Error("stencil direction must be nonzero");
    StencilScheme s;
    s.kind = Kind::Direction;
    s.direction = std::move(direction);
    return s;
}

namespace {

// Farthest point y != x within radius h with y - x a positive multiple of v.
std::optional<index_t> aligned_neighbor(const MetricSpace& space, const Mat& coords, index_t x, const Vec& v,
                                        double h) {
    const double vn = v.norm();
    std::optional<index_t> best;
    double best_d = -1;
    const auto row = space.row(x);
    for (index_t y = 0; y < space.size(); ++y) {
        if (y == x || row[y] > h * (1 + kTieSlack) || row[y] <= best_d) continue;
        const Vec diff = coords.row(y) - coords.row(x);
        const double dn = diff.norm();
        if (diff.dot(v) >= (1 - 1e-9) * dn * vn) {
            best = y;
            best_d = row[y];
        }
    }
    return best;
}

std::string describe(const StencilScheme& s) {
    switch (s.kind) {
        case StencilScheme::Kind::NearestNeighbor: return "nearest_neighbor";
        case StencilScheme::Kind::NetDirection: return "net_direction_" + std::to_string(s.rank);
        case StencilScheme::Kind::Direction: {
            std::string out = "direction(";
            for (Eigen::Index i = 0; i < s.direction.size(); ++i) out += (i ? "," : "") + format_double(s.direction[i]);
            return out + ")";
        }
    }
    return {};
}

}  // namespace

StencilDerivation build_stencil(SpacePtr space, const StencilScheme& scheme, double h) {
    if (!(h > 0)) throw Error("build_stencil: support radius must be positive");
    const index_t n = space->size();
    std::vector<std::vector<StencilEntry>> st(n);

    switch (scheme.kind) {
        case StencilScheme::Kind::NearestNeighbor:
            for (index_t x = 0; x < n; ++x) {
                const auto row = space->row(x);
                index_t best = x;
                for (index_t y = 0; y < n; ++y)
                    if (y != x && row[y] <= h * (1 + kTieSlack) && (best == x || row[y] < row[best])) best = y;
                if (best != x) st[x].push_back({best, 1.0 / row[best]});
            }
            break;
        case StencilScheme::Kind::NetDirection: {
            if (!scheme.net) throw Error("net_direction scheme needs a net");
            for (index_t x = 0; x < n; ++x) {
                const auto row = space->row(x);
                std::vector<std::pair<double, index_t>> cand;
                for (index_t p : scheme.net->points)
                    if (p != x && row[p] <= h * (1 + kTieSlack)) cand.emplace_back(row[p], p);
                std::sort(cand.begin(), cand.end());
                if (scheme.rank < cand.size()) st[x].push_back({cand[scheme.rank].second, 1.0 / cand[scheme.rank].first});
            }
            break;
        }
        case StencilScheme::Kind::Direction: {
            const Mat& coords = space->coords();
            if (coords.cols() != scheme.direction.size()) throw Error("stencil direction has wrong dimension");
            for (index_t x = 0; x < n; ++x) {
                if (auto y = aligned_neighbor(*space, coords, x, scheme.direction, h)) {
                    st[x].push_back({*y, 1.0 / space->distance(x, *y)});
                } else if (auto b = aligned_neighbor(*space, coords, x, -scheme.direction, h)) {
                    st[x].push_back({*b, -1.0 / space->distance(x, *b)});
                }
            }
            break;
        }
    }
    return StencilDerivation(std::move(space), h, std::move(st), describe(scheme));
}

LeibnizDefect leibniz_defect(const StencilDerivation& d, const ScalarField& f, const ScalarField& g) {
    const auto df = d.apply(f), dg = d.apply(g), dfg = d.apply(f * g);
    LeibnizDefect out;
    out.defect.resize(df.size());
    for (index_t x = 0; x < df.size(); ++x) {
        out.defect[x] = dfg[x] - f[x] * dg[x] - g[x] * df[x];
        out.sup = std::max(out.sup, std::abs(out.defect[x]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Jacobi fields and rank

JacobiField jacobi_matrix(const std::vector<StencilDerivation>& derivs, const std::vector<ScalarField>& generators,
                          const std::vector<std::string>& generator_names) {
    if (derivs.empty() || generators.empty()) throw Error("jacobi_matrix: need at least one derivation and generator");
    const index_t M = derivs.size(), N = generators.size(), n = derivs.front().size();
    JacobiField jf;
    for (index_t i = 0; i < M; ++i) jf.derivations.push_back(derivs[i].label().empty() ? "d" + std::to_string(i) : derivs[i].label());
    for (index_t j = 0; j < N; ++j)
        jf.generators.push_back(j < generator_names.size() ? generator_names[j] : "g" + std::to_string(j));
    jf.matrices.assign(n, Mat::Zero(M, N));
    for (index_t i = 0; i < M; ++i)
        for (index_t j = 0; j < N; ++j) {
            const auto v = derivs[i].apply(generators[j]);
            for (index_t x = 0; x < n; ++x) jf.matrices[x](i, j) = v[x];
        }
    return jf;
}

double default_rank_tolerance(double h, double diameter) {
    return std::max(1e-8, diameter > 0 ? 10.0 * h / diameter : 0.0);
}

double RankResult::max_tail_ratio(index_t k) const {
    double r = 0;
    for (const auto& s : singular_values)
        if (static_cast<Eigen::Index>(k) < s.size() && s[0] > 0) r = std::max(r, s[k] / s[0]);
    return r;
}

RankResult pointwise_rank(const JacobiField& jf, const MetricSpace& space, double tol, double null_fraction) {
    if (!(tol > 0)) throw Error("pointwise_rank: tolerance must be positive");
    const index_t n = jf.matrices.size();
    if (n != space.size()) throw Error("pointwise_rank: Jacobi field and space differ in size");
    RankResult out;
    out.rank.resize(n);
    out.singular_values.resize(n);
    out.generator_subset.resize(n);
    const index_t kmax = std::min(jf.rows(), jf.cols());
    out.mass_at_least.assign(kmax + 1, 0.0);
    for (index_t x = 0; x < n; ++x) {
        const Mat& a = jf.matrices[x];
        Eigen::JacobiSVD<Mat> svd(a);
        const Vec s = svd.singularValues();
        index_t r = 0;
        if (s.size() && s[0] > 0)
            while (r < static_cast<index_t>(s.size()) && s[r] > tol * s[0]) ++r;
        out.rank[x] = r;
        out.singular_values[x] = s;
        if (r) {
            Eigen::ColPivHouseholderQR<Mat> qr(a);
            for (index_t k = 0; k < r; ++k) out.generator_subset[x].push_back(qr.colsPermutation().indices()[k]);
            std::sort(out.generator_subset[x].begin(), out.generator_subset[x].end());
        }
        for (index_t k = 0; k <= r; ++k) out.mass_at_least[k] += space.weight(x);
    }
    const double total = space.total_mass();
    for (double& m : out.mass_at_least) m /= total;
    for (index_t k = 1; k <= kmax; ++k)
        if (out.mass_at_least[k] > null_fraction) out.essential_rank = k;
    return out;
}

// ---------------------------------------------------------------------------
// Orthogonalization

Mat adjugate(const Mat& a) {
    const auto m = a.rows();
    if (a.cols() != m) throw Error("adjugate: matrix must be square");
    if (m == 1) return Mat::Ones(1, 1);
    Mat adj(m, m);
    Mat minor(m - 1, m - 1);
    for (Eigen::Index r = 0; r < m; ++r)
        for (Eigen::Index c = 0; c < m; ++c) {
            for (Eigen::Index i = 0, ii = 0; i < m; ++i) {
                if (i == r) continue;
                for (Eigen::Index j = 0, jj = 0; j < m; ++j) {
                    if (j == c) continue;
                    minor(ii, jj++) = a(i, j);
                }
                ++ii;
            }
            // cofactor C(r, c) goes to adj(c, r)
            adj(c, r) = ((r + c) % 2 ? -1.0 : 1.0) * minor.determinant();
        }
    return adj;
}

namespace {

std::vector<index_t> best_minor(const Mat& a, double& best_det) {
    const index_t M = a.rows(), N = a.cols();
    std::vector<index_t> best;
    best_det = 0;
    if (N <= 12) {
        std::vector<bool> pick(N, false);
        std::fill(pick.begin(), pick.begin() + M, true);
        do {
            std::vector<index_t> cols;
            for (index_t j = 0; j < N; ++j)
                if (pick[j]) cols.push_back(j);
            Mat sub(M, M);
            for (index_t k = 0; k < M; ++k) sub.col(k) = a.col(cols[k]);
            const double d = std::abs(sub.partialPivLu().determinant());
            if (best.empty() || d > best_det) {
                best_det = d;
                best = cols;
            }
        } while (std::prev_permutation(pick.begin(), pick.end()));
    } else {
        Eigen::ColPivHouseholderQR<Mat> qr(a);
        for (index_t k = 0; k < M; ++k) best.push_back(qr.colsPermutation().indices()[k]);
        std::sort(best.begin(), best.end());
        Mat sub(M, M);
        for (index_t k = 0; k < M; ++k) sub.col(k) = a.col(best[k]);
        best_det = std::abs(sub.partialPivLu().determinant());
    }
    return best;
}

}  // namespace

OrthogonalBasisResult orthogonalize(const JacobiField& jf, double tol) {
    const index_t M = jf.rows(), N = jf.cols();
    if (M > N) throw Error("orthogonalize: more derivations than generators; no M x M minor can be nonsingular");
    OrthogonalBasisResult out;
    out.m = M;
    out.n = N;
    const index_t n = jf.matrices.size();
    out.subsets.resize(n);
    out.coefficients.resize(n);
    out.orthogonalized.resize(n);
    out.det.assign(n, 0.0);
    for (index_t x = 0; x < n; ++x) {
        const Mat& a = jf.matrices[x];
        double absdet = 0;
        auto cols = best_minor(a, absdet);
        Mat sub(M, M);
        for (index_t k = 0; k < M; ++k) sub.col(k) = a.col(cols[k]);
        double scale = 1;
        for (index_t i = 0; i < M; ++i) scale *= sub.row(i).norm();
        if (!(absdet > tol * scale)) {
            out.degenerate.push_back(x);
            continue;
        }
        const double det = sub.partialPivLu().determinant();
        Mat adj = adjugate(sub);
        Mat orth = adj * sub;
        const double err = (orth - det * Mat::Identity(M, M)).cwiseAbs().maxCoeff() / std::abs(det);
        out.max_identity_error = std::max(out.max_identity_error, err);
        out.det[x] = det;
        out.coefficients[x] = std::move(adj);
        out.orthogonalized[x] = std::move(orth);
        out.blocks[cols].push_back(x);
        out.subsets[x] = std::move(cols);
    }
    return out;
}

std::vector<StencilDerivation> orthogonal_derivations(const std::vector<StencilDerivation>& derivs,
                                                      const OrthogonalBasisResult& ob) {
    if (derivs.size() != ob.m) throw Error("orthogonal_derivations: derivation count mismatch");
    const index_t n = ob.subsets.size();
    std::vector<StencilDerivation> out;
    for (index_t i = 0; i < ob.m; ++i) {
        std::vector<std::vector<StencilEntry>> st(n);
        double h = 0;
        for (const auto& d : derivs) h = std::max(h, d.support());
        for (index_t x = 0; x < n; ++x) {
            if (ob.subsets[x].empty()) continue;
            std::map<index_t, double> acc;
            for (index_t k = 0; k < ob.m; ++k)
                for (const auto& e : derivs[k].stencil(x)) acc[e.neighbor] += ob.coefficients[x](i, k) * e.weight;
            for (const auto& [y, w] : acc) st[x].push_back({y, w});
        }
        out.emplace_back(derivs.front().space(), h, std::move(st), "orth" + std::to_string(i));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Change of variables

ChangeOfVariables change_of_variables(const Mat& dg, double tol) {
    const auto M = dg.rows(), N = dg.cols();
    if (M < 1 || N < M) throw Error("change_of_variables: need 1 <= M <= N");
    const double a = dg(0, 0);
    const double scale = std::max(dg.cwiseAbs().maxCoeff(), 1e-300);
    if (a == 0.0 || std::abs(a) <= tol * scale)
        throw Error("change_of_variables: delta_1 g_1(x0) = 0, the leading minor is not orthogonalized");
    for (Eigen::Index i = 0; i < M; ++i)
        for (Eigen::Index j = 0; j < M; ++j) {
            const double want = i == j ? a : 0.0;
            if (std::abs(dg(i, j) - want) > tol * scale)
                throw Error("change_of_variables: leading M x M block is not delta_1 g_1 times the identity");
        }
    ChangeOfVariables out;
    out.t = Mat::Zero(N, N);
    for (Eigen::Index j = 0; j < M; ++j) out.t(j, j) = 1.0;
    for (Eigen::Index j = M; j < N; ++j) {
        out.t(j, j) = a;
        for (Eigen::Index i = 0; i < M; ++i) out.t(j, i) -= dg(i, j);
    }
    out.transformed = dg * out.t.transpose();
    Mat want = Mat::Zero(M, N);
    want.leftCols(M) = a * Mat::Identity(M, M);
    out.residual = (out.transformed - want).cwiseAbs().maxCoeff();
    return out;
}

// ---------------------------------------------------------------------------
// Pushforward

PushforwardResult pushforward(const StencilDerivation& delta, const std::vector<index_t>& xi, index_t target_size,
                              const std::vector<std::vector<double>>& pis,
                              const std::vector<std::vector<double>>& phis) {
    const MetricSpace& X = *delta.space();
    const index_t n = X.size();
    if (xi.size() != n) throw Error("pushforward: map must be defined on every point");
    for (index_t y : xi)
        if (y >= target_size) throw Error("pushforward: map value outside the target");
    PushforwardResult out;
    out.measure.assign(target_size, 0.0);
    for (index_t x = 0; x < n; ++x) out.measure[xi[x]] += X.weight(x);

    for (const auto& pi : pis) {
        if (pi.size() != target_size) throw Error("pushforward: test function has wrong length");
        std::vector<double> pull(n);
        for (index_t x = 0; x < n; ++x) pull[x] = pi[xi[x]];
        const auto dpull = delta.apply(ScalarField(delta.space(), pull));
        std::vector<double> push(target_size, 0.0);
        for (index_t x = 0; x < n; ++x) push[xi[x]] += X.weight(x) * dpull[x];
        for (index_t y = 0; y < target_size; ++y) push[y] = out.measure[y] > 0 ? push[y] / out.measure[y] : 0.0;

        for (const auto& phi : phis) {
            if (phi.size() != target_size) throw Error("pushforward: test function has wrong length");
            double lhs = 0, rhs = 0, mag = 0;
            for (index_t y = 0; y < target_size; ++y) {
                const double t = phi[y] * push[y] * out.measure[y];
                lhs += t;
            }
            for (index_t x = 0; x < n; ++x) {
                const double t = phi[xi[x]] * dpull[x] * X.weight(x);
                rhs += t;
                mag += std::abs(t);
            }
            const double r = std::abs(lhs - rhs) / std::max(mag, 1e-300);
            out.residuals.push_back(r);
            out.max_residual = std::max(out.max_residual, r);
        }
        out.derivation.push_back(std::move(push));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Chain rule on R^n samples

ChainRuleField chain_rule_field(const std::vector<StencilDerivation>& derivs, const ScalarField& f, double tol) {
    if (derivs.empty()) throw Error("chain_rule_field: no derivations");
    const SpacePtr& space = derivs.front().space();
    const index_t dim = space->coords().cols();
    std::vector<ScalarField> coords;
    for (index_t i = 0; i < dim; ++i) coords.push_back(ScalarField::coordinate(space, i));
    const JacobiField jc = jacobi_matrix(derivs, coords);
    std::vector<std::vector<double>> df;
    for (const auto& d : derivs) df.push_back(d.apply(f));

    ChainRuleField out;
    const index_t n = space->size(), M = derivs.size();
    out.v.resize(n);
    out.residual.assign(n, 0.0);
    for (index_t x = 0; x < n; ++x) {
        const Mat& c = jc.matrices[x];
        Vec b(M);
        for (index_t k = 0; k < M; ++k) b[k] = df[k][x];
        Eigen::ColPivHouseholderQR<Mat> qr(c);
        qr.setThreshold(tol);
        if (static_cast<index_t>(qr.rank()) < dim) {
            out.skipped.push_back(x);
            continue;
        }
        out.v[x] = qr.solve(b);
        out.residual[x] = (c * out.v[x] - b).norm();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Rank vs scale

std::vector<RankScaleRow> rank_bound_experiment(SpacePtr space, const std::vector<double>& scales,
                                                const std::vector<ScalarField>& generators,
                                                const std::vector<Vec>& directions,
                                                std::optional<index_t> rank_bound) {
    if (directions.size() < 2) throw Error("rank_bound_experiment: stencil budget must be at least 2");
    std::vector<RankScaleRow> rows;
    const double diam = space->diameter();
    for (double h : scales) {
        std::vector<StencilDerivation> derivs;
        for (const auto& v : directions) derivs.push_back(build_stencil(space, StencilScheme::along(v), h));
        const auto jf = jacobi_matrix(derivs, generators);
        RankScaleRow row;
        row.h = h;
        row.tolerance = default_rank_tolerance(h, diam);
        const auto rr = pointwise_rank(jf, *space, row.tolerance);
        row.essential_rank = rr.essential_rank;
        row.tail_ratio = rr.max_tail_ratio(rr.essential_rank);
        row.generator_decay.assign(generators.size(), 0.0);
        for (const auto& m : jf.matrices)
            for (index_t j = 0; j < generators.size(); ++j)
                row.generator_decay[j] = std::max(row.generator_decay[j], m.col(j).cwiseAbs().maxCoeff());
        if (rank_bound) row.within_bound = row.essential_rank <= *rank_bound;
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// CSV

void write_stencil_csv(const StencilDerivation& d, const std::string& path) {
    io::CsvTable rows{{"x_id", "y_id", "weight"}};
    const auto& s = *d.space();
    for (index_t x = 0; x < d.size(); ++x)
        for (const auto& e : d.stencil(x)) rows.push_back({s.id(x), s.id(e.neighbor), format_double(e.weight)});
    io::write_csv(path, rows);
}

StencilDerivation read_stencil_csv(SpacePtr space, const std::string& path, double h) {
    const auto table = io::read_csv(path);
    std::vector<std::vector<StencilEntry>> st(space->size());
    for (std::size_t r = 0; r < table.size(); ++r) {
        if (table[r].size() != 3) throw Error(path + ": rows must be x_id,y_id,weight");
        if (r == 0 && !io::is_number(table[r][2])) continue;
        st[space->index_of(table[r][0])].push_back({space->index_of(table[r][1]), io::parse_double(table[r][2])});
    }
    return StencilDerivation(std::move(space), h, std::move(st), path);
}

void write_jacobi_csv(const JacobiField& jf, const MetricSpace& space, const std::string& path) {
    io::CsvTable rows{{"point", "i", "j", "value"}};
    for (index_t x = 0; x < jf.matrices.size(); ++x)
        for (index_t i = 0; i < jf.rows(); ++i)
            for (index_t j = 0; j < jf.cols(); ++j)
                rows.push_back({space.id(x), std::to_string(i), std::to_string(j), format_double(jf.matrices[x](i, j))});
    io::write_csv(path, rows);
}

}  // namespace lipcalc
