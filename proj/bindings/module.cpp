#include "lipcalc/differentiability.hpp"
#include "lipcalc/embedding.hpp"
#include "lipcalc/experiments.hpp"
#include "lipcalc/oracles.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace pybind11::literals;
using namespace lipcalc;
using nlohmann::json;

namespace {

// JSON crosses the boundary as text; the Python package wraps it in json.loads/dumps.
json parse(const std::string& text) { return text.empty() ? json() : json::parse(text); }

SpacePtr space_from_coords(const Mat& coords, std::vector<double> weights, std::vector<std::string> ids, double exponent) {
    const auto n = static_cast<index_t>(coords.rows());
    if (weights.empty()) weights.assign(n, 1.0 / static_cast<double>(n));
    if (ids.empty())
        for (index_t i = 0; i < n; ++i) ids.push_back(std::to_string(i));
    return std::make_shared<MetricSpace>(FromCoords{}, std::move(ids), std::move(weights), coords, exponent);
}

Mat distance_matrix(const MetricSpace& s) {
    const auto n = static_cast<Eigen::Index>(s.size());
    Mat d(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto row = s.row(static_cast<index_t>(i));
        for (Eigen::Index j = 0; j < n; ++j) d(i, j) = row[static_cast<index_t>(j)];
    }
    return d;
}

py::dict net_dict(const EpsilonNet& n) {
    return py::dict("points"_a = n.points, "epsilon"_a = n.epsilon, "separation"_a = n.separation,
                    "covering_radius"_a = n.covering_radius, "constant"_a = n.constant, "nearest"_a = n.nearest);
}

}  // namespace

PYBIND11_MODULE(_lipcalc, m) {
    m.doc() = "Lipschitz analysis on finite metric measure spaces";
    m.attr("__version__") = kVersion;
    py::register_exception<Error>(m, "Error", PyExc_ValueError);

    py::class_<MetricSpace, std::shared_ptr<MetricSpace>>(m, "MetricSpace")
        .def_property_readonly("size", &MetricSpace::size)
        .def_property_readonly("ids", &MetricSpace::ids)
        .def_property_readonly("weights", &MetricSpace::weights)
        .def_property_readonly("has_coords", &MetricSpace::has_coords)
        .def_property_readonly("coords", &MetricSpace::coords)
        .def_property_readonly("min_distance", &MetricSpace::min_distance)
        .def_property_readonly("diameter", &MetricSpace::diameter)
        .def_property_readonly("total_mass", &MetricSpace::total_mass)
        .def("distance", &MetricSpace::distance, "i"_a, "j"_a)
        .def("index_of", &MetricSpace::index_of, "id"_a)
        .def("distances", &distance_matrix)
        .def("__len__", &MetricSpace::size);

    // The class holds shared_ptr<MetricSpace>; the library hands out shared_ptr<const MetricSpace>.
    auto mutable_ptr = [](const SpacePtr& p) { return std::const_pointer_cast<MetricSpace>(p); };
    auto as_space = [](const std::shared_ptr<MetricSpace>& p) { return SpacePtr(p); };

    m.def("generate_space", [=](const std::string& spec) { return mutable_ptr(generate_space(parse(spec).get<SpaceSpec>())); },
          "spec_json"_a);
    m.def("space_from_coords",
          [=](const Mat& c, std::vector<double> w, std::vector<std::string> ids, double exponent) {
              return mutable_ptr(space_from_coords(c, std::move(w), std::move(ids), exponent));
          },
          "coords"_a, "weights"_a = std::vector<double>{}, "ids"_a = std::vector<std::string>{}, "exponent"_a = 1.0);
    m.def("space_from_distances",
          [=](const Mat& d, std::vector<double> w, std::vector<std::string> ids) {
              const auto n = static_cast<index_t>(d.rows());
              if (w.empty()) w.assign(n, 1.0 / static_cast<double>(n));
              if (ids.empty())
                  for (index_t i = 0; i < n; ++i) ids.push_back(std::to_string(i));
              return std::make_shared<MetricSpace>(std::move(ids), std::move(w), d);
          },
          "distances"_a, "weights"_a = std::vector<double>{}, "ids"_a = std::vector<std::string>{});

    m.def("ball", [=](const std::shared_ptr<MetricSpace>& s, index_t x, double r) { return ball(*s, x, r); }, "space"_a, "x"_a, "r"_a);
    m.def("doubling_stats",
          [](const std::shared_ptr<MetricSpace>& s, const std::vector<double>& radii) {
              const auto st = doubling_stats(*s, radii);
              py::list rows;
              for (const auto& r : st.per_radius)
                  rows.append(py::dict("radius"_a = r.radius, "kappa"_a = r.kappa, "argmax"_a = r.argmax, "excluded"_a = r.excluded));
              return py::dict("kappa"_a = st.kappa, "exponent"_a = st.exponent, "per_radius"_a = rows);
          },
          "space"_a, "radii"_a);

    m.def("global_lip", [=](const std::shared_ptr<MetricSpace>& s, std::vector<double> v) { return global_lip(ScalarField(as_space(s), std::move(v))); },
          "space"_a, "values"_a);
    m.def("mcshane_extend",
          [=](const std::shared_ptr<MetricSpace>& s, const std::vector<index_t>& subset, const std::vector<double>& values) {
              return mcshane_extend(as_space(s), subset, values).values();
          },
          "space"_a, "subset"_a, "values"_a);
    m.def("lip_profile",
          [=](const std::shared_ptr<MetricSpace>& s, std::vector<double> v, index_t x, const std::vector<double>& scales) {
              const auto p = pointwise_lip_profile(ScalarField(as_space(s), std::move(v)), x, scales);
              return py::dict("scales"_a = p.scales, "slopes"_a = p.slopes, "dropped_scales"_a = p.dropped_scales,
                              "upper"_a = p.upper, "lower"_a = p.lower);
          },
          "space"_a, "values"_a, "x"_a, "scales"_a);
    m.def("liplip_ratio",
          [=](const std::shared_ptr<MetricSpace>& s, std::vector<double> v, index_t x, const std::vector<double>& scales) {
              return liplip_ratio(ScalarField(as_space(s), std::move(v)), x, scales);
          },
          "space"_a, "values"_a, "x"_a, "scales"_a);
    m.def("hajlasz_gradient",
          [=](const std::shared_ptr<MetricSpace>& s, std::vector<double> v, double p, double tol, index_t max_iters) {
              HajlaszOptions o;
              o.tol = tol;
              o.max_iters = max_iters;
              const auto h = hajlasz_gradient(ScalarField(as_space(s), std::move(v)), p, o);
              return py::dict("g"_a = h.g, "norm"_a = h.norm, "iterations"_a = h.iterations, "gap"_a = h.gap);
          },
          "space"_a, "values"_a, "p"_a, "tol"_a = 1e-12, "max_iters"_a = index_t{100000});
    m.def("hajlasz_p2_oracle", [=](const std::shared_ptr<MetricSpace>& s, std::vector<double> v) { return hajlasz_p2_oracle(ScalarField(as_space(s), std::move(v))); },
          "space"_a, "values"_a);
    m.def("hajlasz_inf_oracle", [=](const std::shared_ptr<MetricSpace>& s, std::vector<double> v) { return hajlasz_inf_oracle(ScalarField(as_space(s), std::move(v))); },
          "space"_a, "values"_a);

    m.def("build_net",
          [](const std::shared_ptr<MetricSpace>& s, double eps, const std::string& strategy, std::uint64_t seed) {
              return net_dict(build_net(*s, eps, parse_net_strategy(strategy), seed));
          },
          "space"_a, "epsilon"_a, "strategy"_a = "greedy_scan", "seed"_a = 0);
    m.def("locate_simplex",
          [](const Vec& z, int level) {
              const auto loc = locate_simplex(z, KuhnTriangulation{static_cast<index_t>(z.size()), level});
              return py::dict("vertices"_a = loc.vertices, "barycentric"_a = loc.barycentric);
          },
          "z"_a, "level"_a = 0);

    m.def("adjugate", &adjugate, "a"_a);
    m.def("orthogonalize",
          [](const std::vector<Mat>& mats, double tol) {
              if (mats.empty()) throw Error("orthogonalize: no matrices");
              JacobiField jf;
              jf.matrices = mats;
              for (Eigen::Index i = 0; i < mats[0].rows(); ++i) jf.derivations.push_back("d" + std::to_string(i));
              for (Eigen::Index j = 0; j < mats[0].cols(); ++j) jf.generators.push_back("g" + std::to_string(j));
              const auto ob = orthogonalize(jf, tol);
              return py::dict("subsets"_a = ob.subsets, "det"_a = ob.det, "coefficients"_a = ob.coefficients,
                              "orthogonalized"_a = ob.orthogonalized, "degenerate"_a = ob.degenerate,
                              "block_count"_a = ob.blocks.size(), "max_identity_error"_a = ob.max_identity_error);
          },
          "matrices"_a, "tol"_a = 1e-10);
    m.def("change_of_variables",
          [](const Mat& dg, double tol) {
              const auto cv = change_of_variables(dg, tol);
              return py::dict("t"_a = cv.t, "transformed"_a = cv.transformed, "residual"_a = cv.residual);
          },
          "dg"_a, "tol"_a = 1e-9);

    m.def("assouad_embed",
          [](const std::shared_ptr<MetricSpace>& s, double sexp, index_t scales, std::uint64_t seed) {
              const auto e = assouad_embed(*s, sexp, scales, seed);
              return py::dict("dim"_a = e.dim, "images"_a = e.images, "scales"_a = e.scales, "block"_a = e.block,
                              "k_low"_a = e.audit.k_low, "k_up"_a = e.audit.k_up, "ratio"_a = e.audit.ratio());
          },
          "space"_a, "s"_a, "scale_count"_a = index_t{0}, "seed"_a = 0);
    m.def("distortion_audit",
          [](const std::shared_ptr<MetricSpace>& s, const Mat& images, double sexp) {
              const auto a = distortion_audit(*s, images, sexp);
              return py::dict("k_low"_a = a.k_low, "k_up"_a = a.k_up, "ratio"_a = a.ratio(), "pairs"_a = a.pairs);
          },
          "space"_a, "images"_a, "s"_a);

    m.def("experiment_ids", [] {
        std::vector<std::string> ids;
        for (const auto& e : experiment_registry()) ids.push_back(e.id);
        return ids;
    });
    m.def("run_experiment",
          [](const std::string& id, const std::string& overrides, std::uint64_t seed, const std::string& out_dir) {
              py::gil_scoped_release release;
              return json(run_experiment(id, parse(overrides), seed, out_dir)).dump();
          },
          "id"_a, "overrides_json"_a = "", "seed"_a = 0, "out_dir"_a);
    m.def("replay",
          [](const std::string& manifest, const std::string& scratch) {
              ReplayReport r;
              {
                  py::gil_scoped_release release;
                  r = replay(manifest, scratch);
              }
              return py::dict("identical"_a = r.identical, "differences"_a = r.differences);
          },
          "manifest"_a, "scratch_dir"_a);
    m.def("set_thread_count", &set_thread_count, "n"_a);
}
