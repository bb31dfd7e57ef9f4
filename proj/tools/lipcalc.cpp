#include "lipcalc/differentiability.hpp"
#include "lipcalc/embedding.hpp"
#include "lipcalc/experiments.hpp"
#include "lipcalc/io.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <iostream>
#include <algorithm>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lipcalc;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    unsigned threads = 0;
    double tol = -1;  // < 0: each command uses its own default
    std::string config;
};

/// Where a command gets its space: a JSON spec (file or inline) or distance/weight CSVs.
struct SpaceSource {
    std::string spec;
    std::string distances;
    std::string weights;

    void attach(CLI::App* app) {
        app->add_option("--space", spec, "space spec: JSON file or inline JSON");
        app->add_option("--distances", distances, "distance matrix CSV");
        app->add_option("--weights", weights, "point_id,weight CSV");
    }
};

json load_json(const std::string& text_or_path) {
    if (fs::exists(text_or_path)) return json::parse(io::read_text(text_or_path));
    return json::parse(text_or_path);
}

SpacePtr load_space(const SpaceSource& src, const Globals& g) {
    if (!src.distances.empty()) return import_space_csv(src.distances, src.weights);
    if (!src.spec.empty()) return generate_space(load_json(src.spec).get<SpaceSpec>());
    if (!g.config.empty()) {
        const auto cfg = load_json(g.config);
        return generate_space((cfg.contains("space") ? cfg.at("space") : cfg).get<SpaceSpec>());
    }
    throw Error("no space given: use --space, --distances or --config");
}

std::string out_path(const Globals& g, const std::string& name) { return (fs::path(g.out_dir) / name).string(); }

void emit(const Globals& g, const std::string& name, const json& j) {
    io::write_text(out_path(g, name), j.dump(2) + "\n");
    std::cout << j.dump(2) << "\n";
}

/// "coord:K", "dist:ID", "const:C" or a point_id,value CSV.
ScalarField load_field(const SpacePtr& sp, const std::string& spec) {
    const auto colon = spec.find(':');
    if (colon != std::string::npos && !fs::exists(spec)) {
        const auto kind = spec.substr(0, colon), arg = spec.substr(colon + 1);
        if (kind == "coord") return ScalarField::coordinate(sp, std::stoul(arg));
        if (kind == "dist") return ScalarField::distance_to(sp, sp->index_of(arg));
        if (kind == "const") return ScalarField::constant(sp, io::parse_double(arg));
    }
    return read_field_csv(sp, spec);
}

std::vector<index_t> load_ids(const SpacePtr& sp, const std::string& path) {
    std::vector<index_t> out;
    const auto rows = io::read_csv(path);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].empty()) continue;
        if (r == 0 && rows[r][0] == "point_id") continue;
        out.push_back(sp->index_of(rows[r][0]));
    }
    return out;
}

std::vector<double> scales_or_default(std::vector<double> scales, const MetricSpace& sp) {
    if (!scales.empty()) return scales;
    return geometric_scales(sp.diameter() / 4, 6);
}

json doubling_json(const DoublingStats& st, const MetricSpace& sp) {
    json rows = json::array();
    for (const auto& r : st.per_radius)
        rows.push_back({{"radius", r.radius}, {"kappa", r.kappa}, {"argmax", sp.id(r.argmax)}, {"excluded", r.excluded}});
    return {{"kappa", st.kappa}, {"exponent", st.exponent}, {"radii", rows}};
}

StencilScheme parse_scheme(const std::string& name, index_t axis, index_t dim, const EpsilonNet* net, index_t rank) {
    if (name == "axis") return StencilScheme::coordinate_axis(axis, dim);
    if (name == "nearest") return StencilScheme::nearest_neighbor();
    if (name == "net") return StencilScheme::net_direction(*net, rank);
    throw Error("unknown stencil scheme '" + name + "' (axis, nearest, net)");
}

std::vector<StencilDerivation> load_stencils(const SpacePtr& sp, const std::vector<std::string>& paths, double h) {
    std::vector<StencilDerivation> out;
    for (const auto& p : paths) out.push_back(read_stencil_csv(sp, p, h));
    return out;
}

std::vector<ScalarField> load_fields(const SpacePtr& sp, const std::vector<std::string>& specs) {
    std::vector<ScalarField> out;
    for (const auto& s : specs) out.push_back(load_field(sp, s));
    return out;
}

Mat read_embedding_csv(const MetricSpace& sp, const std::string& path) {
    const auto rows = io::read_csv(path);
    if (rows.size() < 2) throw Error(path + ": empty embedding");
    const auto cols = static_cast<Eigen::Index>(rows[0].size() - 1);
    Mat z = Mat::Zero(static_cast<Eigen::Index>(sp.size()), cols);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto i = static_cast<Eigen::Index>(sp.index_of(rows[r][0]));
        for (Eigen::Index c = 0; c < cols; ++c) z(i, c) = io::parse_double(rows[r][static_cast<std::size_t>(c + 1)]);
    }
    return z;
}

int report_assertions(const RunManifest& m) {
    for (const auto& a : m.assertions)
        std::cout << (a.passed ? "PASS " : "FAIL ") << m.experiment << "." << a.name << ": " << a.detail << "\n";
    return m.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lipschitz analysis toolkit for finite metric measure spaces"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "random seed")->capture_default_str();
    app.add_option("--out-dir", g.out_dir, "output directory")->capture_default_str();
    app.add_option("--threads", g.threads, "worker threads (0 = all cores)");
    app.add_option("--tol", g.tol, "numerical tolerance (command specific)");
    app.add_option("--config", g.config, "JSON config file");

    std::function<int()> action;

    // space --------------------------------------------------------------
    auto* space = app.add_subcommand("space", "generate or import metric measure spaces")->require_subcommand(1);
    SpaceSource gen_src;
    std::vector<double> gen_radii;
    auto* space_gen = space->add_subcommand("gen", "generate a space from a JSON spec");
    gen_src.attach(space_gen);
    space_gen->add_option("--radii", gen_radii, "radii for the doubling report");
    space_gen->callback([&] {
        action = [&] {
            const auto sp = load_space(gen_src, g);
            export_distances_csv(*sp, out_path(g, "distances.csv"));
            export_weights_csv(*sp, out_path(g, "weights.csv"));
            json j{{"points", sp->size()}, {"total_mass", sp->total_mass()}, {"min_distance", sp->min_distance()},
                   {"diameter", sp->diameter()}, {"overlap_warning", sp->overlap_warning}};
            if (!gen_radii.empty()) j["doubling"] = doubling_json(doubling_stats(*sp, gen_radii), *sp);
            emit(g, "space.json", j);
            return 0;
        };
    });
    SpaceSource imp_src;
    auto* space_imp = space->add_subcommand("import", "import distance/weight CSVs and audit the metric");
    imp_src.attach(space_imp);
    space_imp->callback([&] {
        action = [&] {
            if (imp_src.distances.empty()) throw Error("space import needs --distances");
            const auto sp = load_space(imp_src, g);
            const auto audit = audit_metric(*sp, 2000, 1000000, g.seed);
            emit(g, "audit.json",
                 {{"points", sp->size()}, {"total_mass", sp->total_mass()}, {"metric_ok", audit.ok},
                  {"exhaustive", audit.exhaustive}, {"triples", audit.triples_checked}, {"worst_excess", audit.worst_excess},
                  {"worst_triple", {sp->id(audit.worst_triple[0]), sp->id(audit.worst_triple[1]), sp->id(audit.worst_triple[2])}}});
            return audit.ok ? 0 : 1;
        };
    });

    // net ----------------------------------------------------------------
    auto* net = app.add_subcommand("net", "build an epsilon-net");
    SpaceSource net_src;
    net_src.attach(net);
    double net_eps = 0;
    std::string net_strategy = "greedy_scan";
    net->add_option("--eps", net_eps, "net scale")->required();
    net->add_option("--strategy", net_strategy, "greedy_scan | farthest_point")->capture_default_str();
    net->callback([&] {
        action = [&] {
            const auto sp = load_space(net_src, g);
            const auto n = build_net(*sp, net_eps, parse_net_strategy(net_strategy), g.seed);
            io::CsvTable rows{{"point_id", "nearest_net_point"}};
            for (index_t x = 0; x < sp->size(); ++x) rows.push_back({sp->id(x), sp->id(n.points[n.nearest[x]])});
            io::write_csv(out_path(g, "net.csv"), rows);
            json ids = json::array();
            for (auto p : n.points) ids.push_back(sp->id(p));
            emit(g, "net.json", {{"epsilon", n.epsilon}, {"size", n.points.size()}, {"separation", n.separation},
                                 {"covering_radius", n.covering_radius}, {"constant", n.constant}, {"points", ids}});
            return 0;
        };
    });

    // mcshane ------------------------------------------------------------
    auto* mcs = app.add_subcommand("mcshane", "McShane extension of a field given on a subset");
    SpaceSource mcs_src;
    mcs_src.attach(mcs);
    std::string mcs_field, mcs_subset;
    mcs->add_option("--field", mcs_field, "field CSV or coord:K / dist:ID")->required();
    mcs->add_option("--subset", mcs_subset, "CSV whose first column lists the subset ids")->required();
    mcs->callback([&] {
        action = [&] {
            const auto sp = load_space(mcs_src, g);
            const auto f = load_field(sp, mcs_field);
            const auto a = load_ids(sp, mcs_subset);
            std::vector<double> vals;
            for (auto i : a) vals.push_back(f[i]);
            const auto ext = mcshane_extend(sp, a, vals);
            write_field_csv(ext, out_path(g, "extension.csv"));
            emit(g, "mcshane.json", {{"subset_lip", subset_lip(*sp, a, vals)}, {"extension_lip", global_lip(ext)}});
            return 0;
        };
    });

    // lip ----------------------------------------------------------------
    auto* lip = app.add_subcommand("lip", "pointwise Lipschitz constants")->require_subcommand(1);
    SpaceSource lip_src;
    std::string lip_field, lip_point;
    std::vector<double> lip_scales;
    auto* lip_prof = lip->add_subcommand("profile", "slope profile at one point");
    lip_src.attach(lip_prof);
    lip_prof->add_option("--field", lip_field)->required();
    lip_prof->add_option("--point", lip_point)->required();
    lip_prof->add_option("--scales", lip_scales);
    lip_prof->callback([&] {
        action = [&] {
            const auto sp = load_space(lip_src, g);
            const auto p = pointwise_lip_profile(load_field(sp, lip_field), sp->index_of(lip_point),
                                                 scales_or_default(lip_scales, *sp));
            emit(g, "lip_profile.json", {{"point", lip_point}, {"scales", p.scales}, {"slopes", p.slopes},
                                         {"dropped_scales", p.dropped_scales}, {"upper", p.upper}, {"lower", p.lower}});
            return 0;
        };
    });
    SpaceSource ratio_src;
    std::string ratio_field;
    std::vector<double> ratio_scales;
    auto* lip_ratio = lip->add_subcommand("ratio", "Lip/lip ratio at every point");
    ratio_src.attach(lip_ratio);
    lip_ratio->add_option("--field", ratio_field)->required();
    lip_ratio->add_option("--scales", ratio_scales);
    lip_ratio->callback([&] {
        action = [&] {
            const auto sp = load_space(ratio_src, g);
            const auto f = load_field(sp, ratio_field);
            const auto scales = scales_or_default(ratio_scales, *sp);
            io::CsvTable rows{{"point_id", "upper", "lower", "ratio"}};
            for (index_t x = 0; x < sp->size(); ++x) {
                const auto p = pointwise_lip_profile(f, x, scales);
                rows.push_back({sp->id(x), format_double(p.upper), format_double(p.lower),
                                format_double(safe_ratio(p.upper, p.lower))});
            }
            io::write_csv(out_path(g, "liplip.csv"), rows);
            std::cout << "wrote " << out_path(g, "liplip.csv") << "\n";
            return 0;
        };
    });

    // hajlasz ------------------------------------------------------------
    auto* haj = app.add_subcommand("hajlasz", "minimal Hajlasz gradient");
    SpaceSource haj_src;
    haj_src.attach(haj);
    std::string haj_field, haj_p = "2";
    index_t haj_iters = 100000;
    haj->add_option("--field", haj_field)->required();
    haj->add_option("--p", haj_p, "exponent >= 1 or inf")->capture_default_str();
    haj->add_option("--max-iters", haj_iters)->capture_default_str();
    haj->callback([&] {
        action = [&] {
            const auto sp = load_space(haj_src, g);
            const auto u = load_field(sp, haj_field);
            HajlaszOptions opts;
            if (g.tol > 0) opts.tol = g.tol;
            opts.max_iters = haj_iters;
            const double p = io::parse_double(haj_p);
            HajlaszGradient hg;
            int code = 0;
            try {
                hg = hajlasz_gradient(u, p, opts);
            } catch (const HajlaszNonConvergence& e) {
                std::cerr << "warning: " << e.what() << "\n";
                hg = e.best();
                code = 1;
            }
            write_field_csv(ScalarField(sp, hg.g), out_path(g, "hajlasz.csv"));
            emit(g, "hajlasz.json", {{"p", haj_p}, {"norm", hg.norm}, {"iterations", hg.iterations}, {"gap", hg.gap},
                                     {"violation", hajlasz_violation(u, hg.g)}, {"converged", code == 0}});
            return code;
        };
    });

    // deriv --------------------------------------------------------------
    auto* deriv = app.add_subcommand("deriv", "derivations, Jacobi fields and pushforwards")->require_subcommand(1);
    SpaceSource der_src;
    std::string der_scheme = "axis";
    index_t der_axis = 0, der_rank = 0;
    double der_h = 0, der_net_eps = 0;
    std::vector<std::string> der_stencils, der_gens;
    auto* der_build = deriv->add_subcommand("build", "build a stencil derivation");
    der_src.attach(der_build);
    der_build->add_option("--scheme", der_scheme, "axis | nearest | net")->capture_default_str();
    der_build->add_option("--axis", der_axis)->capture_default_str();
    der_build->add_option("--support", der_h, "support radius")->required();
    der_build->add_option("--net-eps", der_net_eps, "net scale for the net scheme");
    der_build->add_option("--rank", der_rank, "net scheme: rank of the net neighbor");
    der_build->callback([&] {
        action = [&] {
            const auto sp = load_space(der_src, g);
            std::optional<EpsilonNet> n;
            if (der_scheme == "net") n = build_net(*sp, der_net_eps > 0 ? der_net_eps : der_h / 2, NetStrategy::GreedyScan, g.seed);
            const index_t dim = sp->has_coords() ? static_cast<index_t>(sp->coords().cols()) : 0;
            const auto d = build_stencil(sp, parse_scheme(der_scheme, der_axis, dim, n ? &*n : nullptr, der_rank), der_h);
            write_stencil_csv(d, out_path(g, "stencil.csv"));
            double worst = 0;
            for (index_t x = 0; x < d.size(); ++x) worst = std::max(worst, d.normalization(x));
            emit(g, "stencil.json", {{"h", der_h}, {"scheme", der_scheme}, {"max_normalization", worst}});
            return 0;
        };
    });
    auto add_jacobi_inputs = [&](CLI::App* sub) {
        der_src.attach(sub);
        sub->add_option("--stencils", der_stencils, "stencil CSVs, one per derivation")->required();
        sub->add_option("--generators", der_gens, "generator fields")->required();
        sub->add_option("--support", der_h, "support radius of the stencils");
    };
    auto* der_jac = deriv->add_subcommand("jacobi", "Jacobi matrix field");
    add_jacobi_inputs(der_jac);
    der_jac->callback([&] {
        action = [&] {
            const auto sp = load_space(der_src, g);
            const auto jf = jacobi_matrix(load_stencils(sp, der_stencils, der_h), load_fields(sp, der_gens), der_gens);
            write_jacobi_csv(jf, *sp, out_path(g, "jacobi.csv"));
            std::cout << "wrote " << out_path(g, "jacobi.csv") << "\n";
            return 0;
        };
    });
    auto* der_orth = deriv->add_subcommand("orthogonalize", "adjugate orthogonalization on generator blocks");
    add_jacobi_inputs(der_orth);
    der_orth->callback([&] {
        action = [&] {
            const auto sp = load_space(der_src, g);
            const auto jf = jacobi_matrix(load_stencils(sp, der_stencils, der_h), load_fields(sp, der_gens), der_gens);
            const auto ob = orthogonalize(jf, g.tol > 0 ? g.tol : 1e-10);
            io::CsvTable rows{{"point_id", "subset", "det"}};
            for (index_t x = 0; x < sp->size(); ++x) {
                std::string sub;
                for (auto j : ob.subsets[x]) sub += (sub.empty() ? "" : ";") + std::to_string(j);
                rows.push_back({sp->id(x), sub, format_double(ob.det[x])});
            }
            io::write_csv(out_path(g, "orthogonalize.csv"), rows);
            json blocks = json::array();
            for (const auto& [subset, pts] : ob.blocks) blocks.push_back({{"generators", subset}, {"points", pts.size()}});
            emit(g, "orthogonalize.json", {{"blocks", blocks}, {"degenerate", ob.degenerate.size()},
                                           {"max_identity_error", ob.max_identity_error}});
            return 0;
        };
    });
    std::string pf_map, pf_tests;
    auto* der_push = deriv->add_subcommand("pushforward", "pushforward of a derivation along a map to a finite set");
    der_src.attach(der_push);
    der_push->add_option("--stencil", der_stencils, "stencil CSV")->required()->expected(1);
    der_push->add_option("--map", pf_map, "CSV point_id,target (targets 0..m-1)")->required();
    der_push->add_option("--tests", pf_tests, "CSV target,f1,f2,... of test functions on the target")->required();
    der_push->callback([&] {
        action = [&] {
            const auto sp = load_space(der_src, g);
            const auto d = read_stencil_csv(sp, der_stencils.at(0), der_h);
            std::vector<index_t> xi(sp->size(), 0);
            index_t m = 0;
            for (const auto& row : io::read_csv(pf_map)) {
                if (!io::is_number(row.at(1))) continue;
                const auto t = static_cast<index_t>(io::parse_double(row[1]));
                xi[sp->index_of(row[0])] = t;
                m = std::max(m, t + 1);
            }
            std::vector<std::vector<double>> tests;
            for (const auto& row : io::read_csv(pf_tests)) {
                if (!io::is_number(row.at(0))) continue;
                const auto t = static_cast<index_t>(io::parse_double(row[0]));
                m = std::max(m, t + 1);
                if (tests.size() < row.size() - 1) tests.resize(row.size() - 1);
                for (std::size_t c = 1; c < row.size(); ++c) {
                    tests[c - 1].resize(std::max(tests[c - 1].size(), t + 1), 0.0);
                    tests[c - 1][t] = io::parse_double(row[c]);
                }
            }
            for (auto& t : tests) t.resize(m, 0.0);
            const auto pf = pushforward(d, xi, m, tests, tests);
            io::CsvTable rows{{"target", "measure"}};
            for (std::size_t k = 0; k < tests.size(); ++k) rows[0].push_back("delta_f" + std::to_string(k + 1));
            for (index_t y = 0; y < m; ++y) {
                rows.push_back({std::to_string(y), format_double(pf.measure[y])});
                for (const auto& col : pf.derivation) rows.back().push_back(format_double(col[y]));
            }
            io::write_csv(out_path(g, "pushforward.csv"), rows);
            emit(g, "pushforward.json", {{"targets", m}, {"max_residual", pf.max_residual}});
            return 0;
        };
    });
    auto* der_rankc = deriv->add_subcommand("rank", "pointwise rank of a Jacobi field");
    add_jacobi_inputs(der_rankc);
    der_rankc->callback([&] {
        action = [&] {
            const auto sp = load_space(der_src, g);
            const auto derivs = load_stencils(sp, der_stencils, der_h);
            const auto jf = jacobi_matrix(derivs, load_fields(sp, der_gens), der_gens);
            const double tol = g.tol > 0 ? g.tol : default_rank_tolerance(der_h > 0 ? der_h : sp->min_distance(), sp->diameter());
            const auto rr = pointwise_rank(jf, *sp, tol);
            io::CsvTable rows{{"point_id", "rank", "sigma_ratio_tail"}};
            for (index_t x = 0; x < sp->size(); ++x) {
                const auto& s = rr.singular_values[x];
                const double tail = (s.size() > 0 && rr.rank[x] < static_cast<index_t>(s.size()) && s[0] > 0)
                                        ? s[static_cast<Eigen::Index>(rr.rank[x])] / s[0] : 0.0;
                rows.push_back({sp->id(x), std::to_string(rr.rank[x]), format_double(tail)});
            }
            io::write_csv(out_path(g, "rank.csv"), rows);
            emit(g, "rank.json", {{"tolerance", tol}, {"essential_rank", rr.essential_rank}, {"mass_at_least", rr.mass_at_least}});
            return 0;
        };
    });

    // diff ---------------------------------------------------------------
    auto* diff = app.add_subcommand("diff", "charts and differentials")->require_subcommand(1);
    SpaceSource diff_src;
    std::string diff_field, diff_chart, diff_point;
    double diff_r = 0;
    std::vector<double> diff_scales;
    auto add_chart_inputs = [&](CLI::App* sub) {
        diff_src.attach(sub);
        sub->add_option("--field", diff_field)->required();
        sub->add_option("--chart", diff_chart, "chart JSON (file or inline)")->required();
    };
    auto* diff_est = diff->add_subcommand("estimate", "least-squares differential at every chart point");
    add_chart_inputs(diff_est);
    diff_est->add_option("--r", diff_r, "ball radius")->required();
    diff_est->callback([&] {
        action = [&] {
            const auto sp = load_space(diff_src, g);
            const auto chart = chart_from_json(sp, load_json(diff_chart));
            const auto d = estimate_differential_field(load_field(sp, diff_field), chart, diff_r);
            write_differential_csv(d, *sp, out_path(g, "differential.csv"));
            emit(g, "differential.json", {{"r", diff_r}, {"points", d.points.size()}, {"degenerate", d.degenerate.size()}});
            return 0;
        };
    });
    auto* diff_res = diff->add_subcommand("residual", "residual profile and differentiability verdict at a point");
    add_chart_inputs(diff_res);
    diff_res->add_option("--point", diff_point)->required();
    diff_res->add_option("--scales", diff_scales);
    diff_res->callback([&] {
        action = [&] {
            const auto sp = load_space(diff_src, g);
            const auto chart = chart_from_json(sp, load_json(diff_chart));
            const auto f = load_field(sp, diff_field);
            const index_t x = sp->index_of(diff_point);
            const auto scales = scales_or_default(diff_scales, *sp);
            const Vec df = estimate_differential(f, chart, x, *std::min_element(scales.begin(), scales.end()));
            const auto prof = residual_profile(f, chart, df, x, scales);
            emit(g, "residual.json", {{"point", diff_point}, {"df", std::vector<double>(df.data(), df.data() + df.size())},
                                      {"scales", prof.scales}, {"residuals", prof.residuals}, {"threshold", prof.threshold},
                                      {"differentiable", prof.differentiable}});
            return 0;
        };
    });
    std::vector<std::string> chk_family;
    auto* diff_chk = diff->add_subcommand("check", "Lip-derivation ratio K over a field family");
    diff_src.attach(diff_chk);
    diff_chk->add_option("--family", chk_family, "fields")->required();
    diff_chk->add_option("--stencils", der_stencils, "stencil CSVs")->required();
    diff_chk->add_option("--scales", diff_scales);
    double chk_budget = 1.5;
    diff_chk->add_option("--budget", chk_budget)->capture_default_str();
    diff_chk->callback([&] {
        action = [&] {
            const auto sp = load_space(diff_src, g);
            const auto st = lipderiv_check(load_fields(sp, chk_family), load_stencils(sp, der_stencils, 0),
                                           scales_or_default(diff_scales, *sp), chk_budget);
            io::CsvTable rows{{"point_id", "khat"}};
            for (index_t x = 0; x < sp->size(); ++x) rows.push_back({sp->id(x), format_double(st.khat[x])});
            io::write_csv(out_path(g, "khat.csv"), rows);
            emit(g, "lipderiv.json", {{"budget", st.budget}, {"fraction_within", st.fraction_within}, {"infinite", st.infinite.size()}});
            return 0;
        };
    });

    // embed / audit ------------------------------------------------------
    auto* embed = app.add_subcommand("embed", "Assouad embedding of the snowflaked space");
    SpaceSource emb_src;
    emb_src.attach(embed);
    double emb_s = 0.5;
    index_t emb_scales = 0;
    embed->add_option("--s", emb_s, "snowflake exponent in (0,1)")->capture_default_str();
    embed->add_option("--scales", emb_scales, "number of scales (0 = full range)")->capture_default_str();
    embed->callback([&] {
        action = [&] {
            const auto sp = load_space(emb_src, g);
            const auto e = assouad_embed(*sp, emb_s, emb_scales, g.seed);
            write_embedding_csv(e, *sp, out_path(g, "embedding.csv"));
            emit(g, "embedding.json", {{"s", e.s}, {"dim", e.dim}, {"scales", e.scales}, {"colors", e.colors}, {"block", e.block},
                                       {"rho", e.rho}, {"k_low", e.audit.k_low}, {"k_up", e.audit.k_up}, {"ratio", e.audit.ratio()},
                                       {"worst_low_pair", {sp->id(e.audit.argmin[0]), sp->id(e.audit.argmin[1])}},
                                       {"worst_up_pair", {sp->id(e.audit.argmax[0]), sp->id(e.audit.argmax[1])}}});
            return e.audit.k_low > 0 ? 0 : 1;
        };
    });
    auto* audit = app.add_subcommand("audit", "distortion audit of an embedding CSV");
    SpaceSource aud_src;
    aud_src.attach(audit);
    std::string aud_emb;
    double aud_s = 0.5;
    audit->add_option("--embedding", aud_emb, "CSV point_id,z0,...")->required();
    audit->add_option("--s", aud_s)->capture_default_str();
    audit->callback([&] {
        action = [&] {
            const auto sp = load_space(aud_src, g);
            const auto a = distortion_audit(*sp, read_embedding_csv(*sp, aud_emb), aud_s, 2000, 1000000, g.seed);
            emit(g, "audit.json", {{"s", aud_s}, {"k_low", a.k_low}, {"k_up", a.k_up}, {"ratio", a.ratio()}, {"sampled", a.sampled},
                                   {"pairs", a.pairs}, {"worst_low_pair", {sp->id(a.argmin[0]), sp->id(a.argmin[1])}},
                                   {"worst_up_pair", {sp->id(a.argmax[0]), sp->id(a.argmax[1])}}});
            return a.k_low > 0 ? 0 : 1;
        };
    });

    // exp ----------------------------------------------------------------
    auto* exp = app.add_subcommand("exp", "registered experiments")->require_subcommand(1);
    std::vector<std::string> exp_ids;
    std::string exp_set, exp_manifest, exp_scratch;
    auto* exp_run = exp->add_subcommand("run", "run experiments (all when no id is given)");
    exp_run->add_option("ids", exp_ids, "experiment ids");
    exp_run->add_option("--set", exp_set, "JSON overrides merged into the defaults");
    exp_run->callback([&] {
        action = [&] {
            json overrides;
            if (!exp_set.empty()) overrides = load_json(exp_set);
            else if (!g.config.empty()) overrides = load_json(g.config);
            if (exp_ids.empty())
                for (const auto& e : experiment_registry()) exp_ids.push_back(e.id);
            int code = 0;
            for (const auto& id : exp_ids) {
                const std::string dir = exp_ids.size() == 1 ? g.out_dir : out_path(g, id);
                json o = overrides.is_object() && overrides.contains(id) ? overrides.at(id) : overrides;
                const auto m = run_experiment(id, o, g.seed, dir);
                code = std::max(code, report_assertions(m));
                std::cout << id << ": " << (m.passed() ? "passed" : "FAILED") << " in " << format_double(m.wall_clock_seconds)
                          << " s -> " << dir << "\n";
            }
            return code;
        };
    });
    auto* exp_replay = exp->add_subcommand("replay", "re-run a manifest and compare outputs byte for byte");
    exp_replay->add_option("manifest", exp_manifest, "manifest.json path")->required();
    exp_replay->add_option("--scratch", exp_scratch, "directory for the re-run (default: <out-dir>/replay)");
    exp_replay->callback([&] {
        action = [&] {
            const auto rep = replay(exp_manifest, exp_scratch.empty() ? out_path(g, "replay") : exp_scratch);
            if (rep.identical) {
                std::cout << "identical\n";
                return 0;
            }
            for (const auto& d : rep.differences) std::cout << "DIFF " << d << "\n";
            return 1;
        };
    });
    auto* exp_list = exp->add_subcommand("list", "list registered experiments");
    exp_list->callback([&] {
        action = [&] {
            for (const auto& e : experiment_registry()) std::cout << e.id << "  " << e.title << "\n";
            return 0;
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    try {
        set_thread_count(g.threads);
        fs::create_directories(g.out_dir);
        return action ? action() : 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
