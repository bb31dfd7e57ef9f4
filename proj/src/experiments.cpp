#include "lipcalc/experiments.hpp"

#include "lipcalc/differentiability.hpp"
#include "lipcalc/embedding.hpp"
#include "lipcalc/io.hpp"
#include "lipcalc/oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>

namespace lipcalc {

namespace fs = std::filesystem;
using nlohmann::json;

bool RunManifest::passed() const {
    return std::all_of(assertions.begin(), assertions.end(), [](const auto& a) { return a.passed; });
}

void to_json(json& j, const RunManifest& m) {
    j = json{{"experiment", m.experiment}, {"config", m.config}, {"seed", m.seed}, {"version", m.version},
             {"wall_clock_seconds", m.wall_clock_seconds}, {"passed", m.passed()}};
    j["outputs"] = json::array();
    for (const auto& o : m.outputs) j["outputs"].push_back({{"file", o.name}, {"bytes", o.bytes}, {"fnv1a64", o.checksum}});
    j["assertions"] = json::array();
    for (const auto& a : m.assertions) j["assertions"].push_back({{"name", a.name}, {"passed", a.passed}, {"detail", a.detail}});
}

void from_json(const json& j, RunManifest& m) {
    m.experiment = j.at("experiment").get<std::string>();
    m.config = j.at("config");
    m.seed = j.at("seed").get<std::uint64_t>();
    m.version = j.value("version", std::string());
    m.wall_clock_seconds = j.value("wall_clock_seconds", 0.0);
    m.outputs.clear();
    for (const auto& o : j.at("outputs"))
        m.outputs.push_back({o.at("file").get<std::string>(), o.value("bytes", std::uint64_t{0}), o.value("fnv1a64", std::string())});
    m.assertions.clear();
    for (const auto& a : j.value("assertions", json::array()))
        m.assertions.push_back({a.at("name").get<std::string>(), a.at("passed").get<bool>(), a.value("detail", std::string())});
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

// ---------------------------------------------------------------------------
// Run context

struct Context {
    json cfg;
    std::uint64_t seed = 0;
    std::string dir;
    std::vector<std::string> files;
    std::vector<AssertionResult> assertions;

    void table(const std::string& name, const io::CsvTable& rows) {
        io::write_csv((fs::path(dir) / name).string(), rows);
        files.push_back(name);
    }
    void check(const std::string& name, bool ok, const std::string& detail) { assertions.push_back({name, ok, detail}); }
};

std::string fd(double v) { return format_double(v); }

SpacePtr space_from(const json& j) { return generate_space(j.get<SpaceSpec>()); }

json middle_thirds_json(int depth) { return json{{"kind", "cantor_ifs"}, {"preset", "middle_thirds"}, {"depth", depth}}; }

json grid_json(std::vector<double> lo, std::vector<double> hi, double step) {
    return json{{"kind", "euclidean_grid"}, {"lower", lo}, {"upper", hi}, {"step", step}};
}

std::vector<double> powers(double base, int from, int to) {
    std::vector<double> out;
    for (int k = from; k <= to; ++k) out.push_back(std::pow(base, -k));
    return out;
}

double weighted_quantile(std::vector<std::pair<double, double>> vw, double q) {
    std::sort(vw.begin(), vw.end());
    double total = 0;
    for (const auto& p : vw) total += p.second;
    double acc = 0;
    for (const auto& p : vw) {
        acc += p.second;
        if (acc >= q * total * (1 - 1e-12)) return p.first;
    }
    return vw.empty() ? 0.0 : vw.back().first;
}

ScalarField ambient(const SpacePtr& sp, const std::function<double(const Vec&)>& fn) {
    const Mat& c = sp->coords();
    return ScalarField::from_function(sp, [&](index_t i) { return fn(c.row(static_cast<Eigen::Index>(i)).transpose()); });
}

// Smooth family on [0,1]^2 with gradients bounded away from zero.
std::vector<std::pair<std::string, ScalarField>> smooth_family_2d(const SpacePtr& sp) {
    return {
        {"x1", ambient(sp, [](const Vec& z) { return z[0]; })},
        {"x2", ambient(sp, [](const Vec& z) { return z[1]; })},
        {"x1+2x2", ambient(sp, [](const Vec& z) { return z[0] + 2 * z[1]; })},
        {"(1+x1)^2", ambient(sp, [](const Vec& z) { return (1 + z[0]) * (1 + z[0]); })},
        {"(1+x1)(2+x2)", ambient(sp, [](const Vec& z) { return (1 + z[0]) * (2 + z[1]); })},
        {"|z-(-1,-1)|", ambient(sp, [](const Vec& z) { return std::hypot(z[0] + 1, z[1] + 1); })},
    };
}

std::vector<std::pair<std::string, ScalarField>> smooth_family_1d(const SpacePtr& sp) {
    return {
        {"x", ambient(sp, [](const Vec& z) { return z[0]; })},
        {"2x", ambient(sp, [](const Vec& z) { return 2 * z[0]; })},
        {"(1+x)^2", ambient(sp, [](const Vec& z) { return (1 + z[0]) * (1 + z[0]); })},
    };
}

std::vector<double> scaled(const std::vector<double>& mult, double h) {
    std::vector<double> out;
    for (double m : mult) out.push_back(m * h * (1 + 1e-9));
    return out;
}

std::vector<StencilDerivation> coordinate_stencils(const SpacePtr& sp, double h) {
    const index_t dim = sp->coords().cols();
    std::vector<StencilDerivation> out;
    for (index_t i = 0; i < dim; ++i) out.push_back(build_stencil(sp, StencilScheme::coordinate_axis(i, dim), h));
    return out;
}

// ---------------------------------------------------------------------------
// E1 doubling sweep

void e1(Context& c) {
    const auto& cfg = c.cfg;
    io::CsvTable rows{{"space", "radius", "kappa", "argmax", "excluded"}};
    auto sweep = [&](const std::string& name, const SpacePtr& sp, std::vector<double> radii) {
        std::sort(radii.begin(), radii.end());
        const auto st = doubling_stats(*sp, radii);
        for (const auto& r : st.per_radius)
            rows.push_back({name, fd(r.radius), fd(r.kappa), sp->id(r.argmax), r.excluded ? "1" : "0"});
        return st;
    };
    const auto seg = space_from(cfg.at("segment"));
    const auto seg_st = sweep("segment", seg, cfg.at("segment_radii").get<std::vector<double>>());
    const auto cantor_spec = cfg.at("cantor").get<SpaceSpec>();
    const auto cantor = generate_space(cantor_spec);
    auto cantor_radii = cfg.at("cantor_radii").get<std::vector<double>>();
    std::sort(cantor_radii.begin(), cantor_radii.end());
    const auto can_st = sweep("cantor", cantor, cantor_radii);
    c.table("doubling.csv", rows);

    c.check("segment_kappa_below_2", seg_st.kappa < 2, "max kappa " + fd(seg_st.kappa));
    c.check("cantor_kappa_finite", std::isfinite(can_st.kappa) && can_st.kappa >= 1,
            "max kappa " + fd(can_st.kappa) + ", exponent " + fd(can_st.exponent));
    const auto expected = static_cast<index_t>(std::pow(2.0, cantor_spec.depth));
    c.check("cantor_point_count", cantor->size() == expected, std::to_string(cantor->size()) + " points");
    c.check("cantor_total_mass", std::abs(cantor->total_mass() - 1) <= 1e-12, "mass " + fd(cantor->total_mass()));
    std::vector<double> w3 = cantor->weights();
    for (double& w : w3) w *= 3;
    const auto scaled_st = doubling_stats(*cantor->with_weights(w3), cantor_radii);
    bool same = scaled_st.kappa == can_st.kappa;
    for (index_t k = 0; k < scaled_st.per_radius.size(); ++k)
        same = same && scaled_st.per_radius[k].kappa == can_st.per_radius[k].kappa;
    c.check("measure_scaling_invariance", same, "weights x3 leave every kappa unchanged");
}

// ---------------------------------------------------------------------------
// E2 Lip-lip statistics

void e2(Context& c) {
    const auto& cfg = c.cfg;
    const auto grid = space_from(cfg.at("grid"));
    const double h = grid->min_distance();
    const auto scales = scaled(cfg.at("scale_multipliers").get<std::vector<double>>(), h);
    io::CsvTable rows{{"space", "field", "point", "upper", "lower", "ratio"}};
    std::vector<std::pair<double, double>> vw;
    const auto family = smooth_family_2d(grid);
    for (const auto& [name, f] : family) {
        std::vector<LipProfile> prof(grid->size());
        parallel_chunks(grid->size(), [&](index_t b, index_t e, index_t) {
            for (index_t x = b; x < e; ++x) prof[x] = pointwise_lip_profile(f, x, scales);
        });
        for (index_t x = 0; x < grid->size(); ++x) {
            const double r = safe_ratio(prof[x].upper, prof[x].lower);
            rows.push_back({"grid", name, grid->id(x), fd(prof[x].upper), fd(prof[x].lower), fd(r)});
            vw.emplace_back(r, grid->weight(x) / static_cast<double>(family.size()));
        }
    }
    const auto cantor = space_from(cfg.at("cantor"));
    const auto cscales = cfg.at("cantor_scales").get<std::vector<double>>();
    std::vector<std::pair<std::string, ScalarField>> cfam{{"x", ScalarField::coordinate(cantor, 0)},
                                                          {"x^2", ambient(cantor, [](const Vec& z) { return z[0] * z[0]; })},
                                                          {"d(.,0)", ScalarField::distance_to(cantor, 0)}};
    // A power-of-two scale is exact in floating point, so the ratio must not move
    // at all; a general affine map only up to rounding of the shifted values.
    double max_invariance = 0;
    bool exact_scaling = true;
    std::vector<std::pair<double, double>> cvw;
    for (const auto& [name, f] : cfam) {
        const auto g = f.affine(-3.0, 0.25);
        const auto h2 = f.affine(-2.0, 0.0);
        for (index_t x = 0; x < cantor->size(); ++x) {
            const auto p = pointwise_lip_profile(f, x, cscales);
            const double r = safe_ratio(p.upper, p.lower);
            rows.push_back({"cantor", name, cantor->id(x), fd(p.upper), fd(p.lower), fd(r)});
            cvw.emplace_back(r, cantor->weight(x));
            const double rg = liplip_ratio(g, x, cscales);
            if (std::isfinite(r)) max_invariance = std::max(max_invariance, std::abs(rg - r) / r);
            exact_scaling = exact_scaling && liplip_ratio(h2, x, cscales) == r;
        }
    }
    c.table("liplip.csv", rows);
    const double q = cfg.at("quantile").get<double>(), budget = cfg.at("budget").get<double>();
    const double p99 = weighted_quantile(vw, q);
    c.table("liplip_summary.csv", {{"space", "quantile", "value"},
                                   {"grid", fd(q), fd(p99)},
                                   {"cantor", "0.5", fd(weighted_quantile(cvw, 0.5))},
                                   {"cantor", fd(q), fd(weighted_quantile(cvw, q))}});
    c.check("grid_liplip_quantile", p99 <= budget, "weighted quantile " + fd(p99) + " vs budget " + fd(budget));
    c.check("liplip_scaling_exact", exact_scaling, "ratio of -2 f equals ratio of f bit for bit");
    const double aff_tol = cfg.at("affine_tolerance").get<double>();
    c.check("liplip_affine_invariance", max_invariance <= aff_tol, "max relative change " + fd(max_invariance));
}

// ---------------------------------------------------------------------------
// E3 rank vs scale and derivation degeneration

void e3(Context& c) {
    const auto& cfg = c.cfg;
    const auto g2 = space_from(cfg.at("grid2d"));
    const double h2 = g2->min_distance();
    const auto scales2 = scaled(cfg.at("scale_multipliers").get<std::vector<double>>(), h2);
    std::vector<ScalarField> gens2{ScalarField::coordinate(g2, 0), ScalarField::coordinate(g2, 1),
                                   ambient(g2, [](const Vec& z) { return std::hypot(z[0] + 0.5, z[1] + 0.5); })};
    std::vector<Vec> dirs2;
    for (const auto& d : cfg.at("directions2d")) dirs2.push_back(Eigen::Map<const Vec>(d.get<std::vector<double>>().data(), 2));
    const auto r2 = rank_bound_experiment(g2, scales2, gens2, dirs2, index_t{2});

    const auto g1 = space_from(cfg.at("grid1d"));
    const double h1 = g1->min_distance();
    const auto scales1 = scaled(cfg.at("scale_multipliers").get<std::vector<double>>(), h1);
    std::vector<ScalarField> gens1{ScalarField::coordinate(g1, 0), ambient(g1, [](const Vec& z) { return z[0] * z[0]; }),
                                   ambient(g1, [](const Vec& z) { return std::abs(z[0] + 0.5); })};
    std::vector<Vec> dirs1{Vec::Constant(1, 1.0), Vec::Constant(1, -1.0)};
    const auto r1 = rank_bound_experiment(g1, scales1, gens1, dirs1, index_t{1});

    io::CsvTable rows{{"space", "h", "essential_rank", "tail_ratio", "tolerance"}};
    bool rank2_ok = true, tail_ok = true, rank1_ok = true;
    double worst_tail = 0;
    for (const auto& r : r2) {
        rows.push_back({"grid2d", fd(r.h), std::to_string(r.essential_rank), fd(r.tail_ratio), fd(r.tolerance)});
        rank2_ok = rank2_ok && r.essential_rank == 2;
        tail_ok = tail_ok && r.tail_ratio <= 10 * r.h;
        worst_tail = std::max(worst_tail, r.tail_ratio / r.h);
    }
    for (const auto& r : r1) {
        rows.push_back({"grid1d", fd(r.h), std::to_string(r.essential_rank), fd(r.tail_ratio), fd(r.tolerance)});
        rank1_ok = rank1_ok && r.essential_rank == 1;
    }
    c.table("rank_scale.csv", rows);
    c.check("grid2d_rank_2", rank2_ok, "essential rank 2 at every scale");
    c.check("grid2d_tail_below_10h", tail_ok, "max sigma3/sigma1 / h = " + fd(worst_tail));
    c.check("grid1d_rank_1", rank1_ok, "essential rank 1 at every scale");

    // Degeneration: max |delta_h(id)| on snowflaked 1D grids of step h.
    const auto steps = cfg.at("degeneration_steps").get<std::vector<double>>();
    io::CsvTable deg{{"s", "h", "max_delta_id"}};
    for (double s : cfg.at("snowflake_s").get<std::vector<double>>()) {
        std::vector<double> lx, ly;
        for (double h : steps) {
            auto base = SpaceSpec::euclidean_grid({0.0}, {1.0}, h);
            const auto sp = s < 1 ? generate_space(SpaceSpec::snowflake(base, s)) : generate_space(base);
            const auto d = build_stencil(sp, StencilScheme::coordinate_axis(0, 1), std::pow(h, s) * (1 + 1e-9));
            const auto v = d.apply(ScalarField::coordinate(sp, 0));
            double m = 0;
            for (double t : v) m = std::max(m, std::abs(t));
            deg.push_back({fd(s), fd(h), fd(m)});
            lx.push_back(std::log(h));
            ly.push_back(std::log(m));
        }
        const double slope = regression_slope(lx, ly);
        const double want = 1 - s, tol = s < 1 ? 0.1 : 0.05;
        c.check("degeneration_slope_s" + fd(s), std::abs(slope - want) <= tol,
                "slope " + fd(slope) + ", expected " + fd(want) + " +- " + fd(tol));
    }
    c.table("degeneration.csv", deg);
}

// ---------------------------------------------------------------------------
// E4 Assouad distortion and composite approximation

void e4(Context& c) {
    const auto& cfg = c.cfg;
    io::CsvTable rows{{"space", "s", "dim", "scales", "k_low", "k_up", "ratio"}};
    bool injective = true;
    std::map<std::pair<int, double>, double> ratio;
    for (int depth : cfg.at("cantor_depths").get<std::vector<int>>()) {
        const auto sp = generate_space(SpaceSpec::middle_thirds(depth));
        for (double s : cfg.at("s_values").get<std::vector<double>>()) {
            const auto e = assouad_embed(*sp, s, 0, c.seed);
            rows.push_back({"cantor_depth" + std::to_string(depth), fd(s), std::to_string(e.dim), std::to_string(e.scales.size()),
                            fd(e.audit.k_low), fd(e.audit.k_up), fd(e.audit.ratio())});
            injective = injective && e.audit.k_low > 0;
            ratio[{depth, s}] = e.audit.ratio();
        }
    }
    const auto path = generate_space(SpaceSpec::path_graph(cfg.at("path_points").get<index_t>()));
    const double ps = cfg.at("path_s").get<double>();
    const auto pe = assouad_embed(*path, ps, 0, c.seed);
    rows.push_back({"path" + std::to_string(path->size()), fd(ps), std::to_string(pe.dim), std::to_string(pe.scales.size()),
                    fd(pe.audit.k_low), fd(pe.audit.k_up), fd(pe.audit.ratio())});
    injective = injective && pe.audit.k_low > 0;
    c.table("distortion.csv", rows);
    c.check("embedding_injective", injective, "K_low > 0 on every generated space");

    const auto depths = cfg.at("cantor_depths").get<std::vector<int>>();
    const double ss = cfg.at("stability_s").get<double>(), stol = cfg.at("stability_tol").get<double>();
    if (depths.size() >= 2 && ratio.count({depths[0], ss}) && ratio.count({depths[1], ss})) {
        const double a = ratio[{depths[0], ss}], b = ratio[{depths[1], ss}];
        const double rel = std::abs(b - a) / a;
        c.check("distortion_depth_stability", std::isfinite(a) && std::isfinite(b) && rel <= stol,
                "ratio " + fd(a) + " -> " + fd(b) + " (relative change " + fd(rel) + ")");
    }

    // Composite approximation on a path.
    const auto cpath = generate_space(SpaceSpec::path_graph(cfg.at("composite_points").get<index_t>()));
    const double cs = cfg.at("composite_s").get<double>();
    const auto ce = assouad_embed(*cpath, cs, 0, c.seed);
    const auto u = ScalarField::coordinate(cpath, 0);
    const auto x0 = cfg.at("composite_center").get<index_t>();
    io::CsvTable comp{{"epsilon", "lip", "bound", "k_prime", "sup_error"}};
    bool bounded = true, monotone = true;
    double prev = kInf;
    for (double eps : cfg.at("composite_epsilons").get<std::vector<double>>()) {
        const auto ca = composite_approximation(u, ce, eps, x0);
        comp.push_back({fd(eps), fd(ca.lip), fd(ca.bound), fd(ca.k_prime), fd(ca.sup_error)});
        bounded = bounded && ca.within_bound;
        monotone = monotone && ca.sup_error <= 1.05 * prev + 1e-12;
        prev = ca.sup_error;
    }
    c.table("composite.csv", comp);
    c.check("composite_uniform_lipschitz", bounded, "L(u_eps) <= L(u) + K' at every epsilon");
    c.check("composite_error_monotone", monotone, "sup-error non-increasing (5% slack) as epsilon halves");
}

// ---------------------------------------------------------------------------
// E5 differentiability on R^2

void e5(Context& c) {
    const auto& cfg = c.cfg;
    const auto grid = space_from(cfg.at("grid"));
    const double h = grid->min_distance();
    const auto poly = cfg.at("polynomial").get<Polynomial>();
    const std::vector<ScalarField> coords{ScalarField::coordinate(grid, 0), ScalarField::coordinate(grid, 1)};
    const auto f = compose(poly, coords);
    std::vector<index_t> all(grid->size());
    for (index_t i = 0; i < all.size(); ++i) all[i] = i;
    const Chart chart(grid, all, coords);
    const auto radii = scaled(cfg.at("scale_multipliers").get<std::vector<double>>(), h);

    std::vector<double> max_err(radii.size(), 0.0);
    std::vector<std::vector<double>> errs(radii.size(), std::vector<double>(grid->size(), 0.0));
    parallel_chunks(grid->size(), [&](index_t b, index_t e, index_t) {
        for (index_t x = b; x < e; ++x) {
            const auto g = poly.gradient({coords[0][x], coords[1][x]});
            const Vec grad = Eigen::Map<const Vec>(g.data(), 2);
            for (index_t k = 0; k < radii.size(); ++k) errs[k][x] = (estimate_differential(f, chart, x, radii[k]) - grad).norm();
        }
    });
    io::CsvTable rows{{"r", "max_error", "mean_error", "max_error_over_r"}};
    std::vector<double> lr, le;
    double cmax = 0;
    for (index_t k = 0; k < radii.size(); ++k) {
        double mean = 0;
        for (double e : errs[k]) {
            max_err[k] = std::max(max_err[k], e);
            mean += e;
        }
        mean /= static_cast<double>(errs[k].size());
        rows.push_back({fd(radii[k]), fd(max_err[k]), fd(mean), fd(max_err[k] / radii[k])});
        lr.push_back(std::log(radii[k]));
        le.push_back(std::log(max_err[k]));
        cmax = std::max(cmax, max_err[k] / radii[k]);
    }
    c.table("differential_error.csv", rows);
    const double slope = regression_slope(lr, le);
    const auto win = cfg.at("slope_window").get<std::vector<double>>();
    c.check("df_error_slope", slope >= win[0] && slope <= win[1], "slope " + fd(slope));
    const double cb = cfg.at("error_constant").get<double>();
    c.check("df_error_linear_bound", cmax <= cb, "max error / r = " + fd(cmax) + " vs C = " + fd(cb));

    // Residual profile and verdict at the grid center.
    const index_t center = grid->size() / 2;
    const Vec df = estimate_differential(f, chart, center, radii.back());
    const auto prof = residual_profile(f, chart, df, center, radii);
    io::CsvTable res{{"r", "residual"}};
    for (index_t k = 0; k < prof.scales.size(); ++k) res.push_back({fd(prof.scales[k]), fd(prof.residuals[k])});
    c.table("residual_center.csv", res);
    c.check("center_differentiable", prof.differentiable,
            "finest residual " + fd(prof.residuals.empty() ? kInf : prof.residuals.back()) + " vs " + fd(prof.threshold));

    // Lip-derivation sanity on 1D and 2D grids with coordinate stencils.
    io::CsvTable kt{{"space", "budget", "fraction_within", "infinite_points"}};
    const double budget = cfg.at("lipderiv_budget").get<double>(), mass = cfg.at("lipderiv_mass").get<double>();
    const auto mult = cfg.at("lipderiv_scale_multipliers").get<std::vector<double>>();
    for (const std::string key : {"lipderiv_grid1d", "lipderiv_grid2d"}) {
        const auto sp = space_from(cfg.at(key));
        const double hs = sp->min_distance();
        const auto fam = sp->coords().cols() == 1 ? smooth_family_1d(sp) : smooth_family_2d(sp);
        std::vector<ScalarField> fields;
        for (const auto& p : fam) fields.push_back(p.second);
        const auto st = lipderiv_check(fields, coordinate_stencils(sp, hs * (1 + 1e-9)), scaled(mult, hs), budget);
        kt.push_back({key, fd(budget), fd(st.fraction_within), std::to_string(st.infinite.size())});
        c.check(key + "_khat", st.fraction_within >= mass,
                "mass fraction with K <= " + fd(budget) + ": " + fd(st.fraction_within));
    }
    c.table("lipderiv.csv", kt);
}

// ---------------------------------------------------------------------------
// E6 Leibniz defect scaling

void e6(Context& c) {
    const auto& cfg = c.cfg;
    std::vector<std::pair<Polynomial, Polynomial>> pairs;
    for (const auto& p : cfg.at("pairs")) pairs.emplace_back(p.at(0).get<Polynomial>(), p.at(1).get<Polynomial>());
    io::CsvTable rows{{"h", "sup_defect", "constant_defect"}};
    std::vector<double> lx, ly;
    double const_defect = 0;
    for (double h : cfg.at("steps").get<std::vector<double>>()) {
        const auto sp = generate_space(SpaceSpec::euclidean_grid({0.0}, {1.0}, h));
        const auto d = build_stencil(sp, StencilScheme::coordinate_axis(0, 1), h * (1 + 1e-9));
        const std::vector<ScalarField> x{ScalarField::coordinate(sp, 0)};
        double sup = 0;
        for (const auto& [p, q] : pairs) sup = std::max(sup, leibniz_defect(d, compose(p, x), compose(q, x)).sup);
        const double cd = leibniz_defect(d, ScalarField::constant(sp, 3.5), compose(pairs.front().second, x)).sup;
        const_defect = std::max(const_defect, cd);
        rows.push_back({fd(h), fd(sup), fd(cd)});
        lx.push_back(std::log(h));
        ly.push_back(std::log(sup));
    }
    c.table("leibniz.csv", rows);
    const double slope = regression_slope(lx, ly);
    const auto win = cfg.at("slope_window").get<std::vector<double>>();
    c.check("leibniz_slope", slope >= win[0] && slope <= win[1], "slope " + fd(slope));
    c.check("leibniz_constant_zero", const_defect == 0.0, "max defect with a constant factor " + fd(const_defect));
}

// ---------------------------------------------------------------------------
// E7 Hajlasz gradients vs oracles

void e7(Context& c) {
    const auto& cfg = c.cfg;
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const auto count = cfg.at("instances").get<int>();
    const auto nmin = cfg.at("min_points").get<index_t>(), nmax = cfg.at("max_points").get<index_t>();
    const double p = cfg.at("p").get<double>(), tol = cfg.at("tolerance").get<double>();
    io::CsvTable rows{{"instance", "points", "p", "solver", "oracle", "difference", "violation"}};
    double worst = 0, worst_inf = 0, worst_viol = 0;
    for (int t = 0; t < count; ++t) {
        const index_t n = nmin + static_cast<index_t>(rng() % (nmax - nmin + 1));
        Mat pts(static_cast<Eigen::Index>(n), 2);
        std::vector<double> w(n), v(n);
        std::vector<std::string> ids;
        for (index_t i = 0; i < n; ++i) {
            pts(static_cast<Eigen::Index>(i), 0) = unif(rng);
            pts(static_cast<Eigen::Index>(i), 1) = unif(rng);
            w[i] = 0.2 + unif(rng);
            v[i] = 2 * unif(rng) - 1;
            ids.push_back("p" + std::to_string(i));
        }
        const auto sp = std::make_shared<MetricSpace>(from_coords, ids, w, pts);
        const ScalarField u(sp, v);
        const auto hg = hajlasz_gradient(u, p);
        const double oracle = hajlasz_p2_oracle(u);
        const double viol = std::max(0.0, hajlasz_violation(u, hg.g));
        worst = std::max(worst, std::abs(hg.norm - oracle));
        worst_viol = std::max(worst_viol, viol);
        rows.push_back({std::to_string(t), std::to_string(n), fd(p), fd(hg.norm), fd(oracle), fd(hg.norm - oracle), fd(viol)});
        const auto hi = hajlasz_gradient(u, kInf);
        const double oi = hajlasz_inf_oracle(u);
        worst_inf = std::max(worst_inf, std::abs(hi.norm - oi));
        rows.push_back({std::to_string(t), std::to_string(n), "inf", fd(hi.norm), fd(oi), fd(hi.norm - oi),
                        fd(std::max(0.0, hajlasz_violation(u, hi.g)))});
    }
    c.table("hajlasz.csv", rows);
    c.check("hajlasz_p_oracle", worst <= tol, "max |solver - oracle| = " + fd(worst));
    c.check("hajlasz_inf_closed_form", worst_inf == 0.0, "max |closed form - oracle| = " + fd(worst_inf));
    c.check("hajlasz_feasible", worst_viol <= 1e-9, "max constraint violation " + fd(worst_viol));
}

// ---------------------------------------------------------------------------
// Registry

struct Entry {
    ExperimentInfo info;
    std::function<void(Context&)> run;
};

json poly1(std::vector<std::pair<int, double>> terms) {
    json j = json::array();
    for (auto [e, c] : terms) j.push_back({{"exponents", {e}}, {"coeff", c}});
    return j;
}

const std::vector<Entry>& entries() {
    static const std::vector<Entry> list = [] {
        std::vector<Entry> v;
        v.push_back({{"E1", "Doubling sweep on an integer segment and a Cantor set",
                      {{"segment", {{"kind", "path_graph"}, {"count", 201}}},
                       {"segment_radii", {1, 2, 4, 8}},
                       {"cantor", middle_thirds_json(8)},
                       {"cantor_radii", powers(3, 1, 7)}}},
                     e1});
        v.push_back({{"E2", "Lip-lip statistics on a Euclidean grid and a Cantor set",
                      {{"grid", grid_json({0, 0}, {1, 1}, 0.025)},
                       {"scale_multipliers", {8, 4, 2, 1}},
                       {"cantor", middle_thirds_json(7)},
                       {"cantor_scales", powers(3, 1, 6)},
                       {"quantile", 0.99},
                       {"affine_tolerance", 1e-9},
                       {"budget", 1.5}}},
                     e2});
        v.push_back({{"E3", "Jacobi rank vs scale and derivation degeneration on snowflakes",
                      {{"grid2d", grid_json({0, 0}, {1, 1}, 1.0 / 48)},
                       {"grid1d", grid_json({0}, {1}, 1.0 / 64)},
                       {"scale_multipliers", {1, 2, 4}},
                       {"directions2d", {{1, 0}, {-1, 0}, {0, 1}, {0, -1}}},
                       {"degeneration_steps", powers(2, 4, 9)},
                       {"snowflake_s", {0.5, 0.7, 1.0}}}},
                     e3});
        v.push_back({{"E4", "Assouad distortion vs s and composite approximation",
                      {{"cantor_depths", {6, 7}},
                       {"s_values", {0.3, 0.5, 0.7}},
                       {"stability_s", 0.5},
                       {"stability_tol", 0.1},
                       {"path_points", 16},
                       {"path_s", 0.5},
                       {"composite_points", 64},
                       {"composite_s", 0.5},
                       {"composite_center", 32},
                       {"composite_epsilons", {16, 8, 4, 2, 1}}}},
                     e4});
        v.push_back({{"E5", "Differentials and residuals of a polynomial on a planar grid",
                      {{"grid", grid_json({0, 0}, {1, 1}, 0.01)},
                       {"polynomial", json::array({{{"exponents", {2, 0}}, {"coeff", 1}}, {{"exponents", {1, 1}}, {"coeff", 1}}})},
                       {"scale_multipliers", {16, 8, 4, 2, 1}},
                       {"slope_window", {0.8, 1.2}},
                       {"error_constant", 8.0},
                       {"lipderiv_grid1d", grid_json({0}, {1}, 0.01)},
                       {"lipderiv_grid2d", grid_json({0, 0}, {1, 1}, 0.025)},
                       {"lipderiv_scale_multipliers", {4, 2, 1}},
                       {"lipderiv_budget", 1.5},
                       {"lipderiv_mass", 0.99}}},
                     e5});
        v.push_back({{"E6", "Leibniz defect scaling of forward differences",
                      {{"steps", powers(2, 4, 9)},
                       {"pairs", json::array({json::array({poly1({{1, 1}}), poly1({{1, 1}})}),
                                              json::array({poly1({{2, 1}}), poly1({{1, 1}, {0, 1}})}),
                                              json::array({poly1({{3, 1}}), poly1({{2, 1}, {0, 1}})})})},
                       {"slope_window", {0.85, 1.15}}}},
                     e6});
        v.push_back({{"E7", "Hajlasz gradients against exact oracles",
                      {{"instances", 20}, {"min_points", 3}, {"max_points", 6}, {"p", 2.0}, {"tolerance", 1e-6}}},
                     e7});
        return v;
    }();
    return list;
}

}  // namespace

const std::vector<ExperimentInfo>& experiment_registry() {
    static const std::vector<ExperimentInfo> infos = [] {
        std::vector<ExperimentInfo> out;
        for (const auto& e : entries()) out.push_back(e.info);
        return out;
    }();
    return infos;
}

RunManifest run_experiment(const std::string& id, const json& overrides, std::uint64_t seed, const std::string& out_dir) {
    const Entry* entry = nullptr;
    for (const auto& e : entries())
        if (e.info.id == id) entry = &e;
    if (!entry) {
        std::string known;
        for (const auto& e : entries()) known += (known.empty() ? "" : ", ") + e.info.id;
        throw Error("unknown experiment '" + id + "'; registered: " + known);
    }
    Context c;
    c.cfg = entry->info.defaults;
    if (!overrides.is_null()) c.cfg.merge_patch(overrides);
    c.seed = seed;
    c.dir = out_dir;
    fs::create_directories(out_dir);

    const auto t0 = std::chrono::steady_clock::now();
    io::write_text((fs::path(out_dir) / "config.json").string(),
                   json{{"experiment", id}, {"config", c.cfg}, {"seed", seed}}.dump(2) + "\n");
    c.files.push_back("config.json");
    entry->run(c);
    const auto t1 = std::chrono::steady_clock::now();

    RunManifest m;
    m.experiment = id;
    m.config = c.cfg;
    m.seed = seed;
    m.version = kVersion;
    m.assertions = c.assertions;
    m.wall_clock_seconds = std::chrono::duration<double>(t1 - t0).count();
    for (const auto& f : c.files) {
        const auto bytes = io::read_text((fs::path(out_dir) / f).string());
        m.outputs.push_back({f, bytes.size(), fnv1a_hex(bytes)});
    }
    io::write_text((fs::path(out_dir) / "manifest.json").string(), json(m).dump(2) + "\n");
    return m;
}

ReplayReport replay(const std::string& manifest_path, const std::string& scratch_dir) {
    if (!fs::exists(manifest_path)) throw Error("replay: manifest not found: " + manifest_path);
    const RunManifest m = json::parse(io::read_text(manifest_path)).get<RunManifest>();
    const fs::path base = fs::path(manifest_path).parent_path();
    for (const auto& o : m.outputs)
        if (!fs::exists(base / o.name)) throw Error("replay: recorded output missing: " + (base / o.name).string());

    ReplayReport rep;
    rep.rerun = run_experiment(m.experiment, m.config, m.seed, scratch_dir);
    for (const auto& o : m.outputs) {
        const auto want = io::read_text((base / o.name).string());
        const fs::path got_path = fs::path(scratch_dir) / o.name;
        if (!fs::exists(got_path)) {
            rep.identical = false;
            rep.differences.push_back(o.name + ": not produced by the replay");
            continue;
        }
        const auto got = io::read_text(got_path.string());
        if (want == got) continue;
        rep.identical = false;
        std::size_t line = 1, i = 0;
        while (i < want.size() && i < got.size() && want[i] == got[i]) line += want[i++] == '\n';
        rep.differences.push_back(o.name + ": differs from line " + std::to_string(line) + " (" +
                                  std::to_string(want.size()) + " vs " + std::to_string(got.size()) + " bytes)");
    }
    return rep;
}

}  // namespace lipcalc
