#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>
#include <sstream>

#include "telemovr/bessel.hpp"
#include "telemovr/cli.hpp"
#include "telemovr/errors.hpp"
#include "telemovr/estimation.hpp"
#include "telemovr/evalmetrics.hpp"
#include "telemovr/inference.hpp"
#include "telemovr/io.hpp"
#include "telemovr/synth.hpp"

namespace py = pybind11;
using namespace telemovr;

namespace {

py::array_t<double> bearings_to_numpy(const BearingSeries& y) {
  py::array_t<double> out({y.num_steps(), y.num_towers()});
  auto a = out.mutable_unchecked<2>();
  for (int t = 0; t < y.num_steps(); ++t)
    for (int n = 0; n < y.num_towers(); ++n) a(t, n) = y.at(t, n);
  return out;
}

BearingSeries bearings_from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 2) throw DomainError("bearings: expected a 2-D array (T, N)");
  BearingSeries y(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)));
  auto a = arr.unchecked<2>();
  for (int t = 0; t < y.num_steps(); ++t)
    for (int n = 0; n < y.num_towers(); ++n)
      if (!std::isnan(a(t, n))) y.set(t, n, a(t, n));
  return y;
}

py::dict trace_to_dict(const FitTrace& tr) {
  py::list rows;
  for (const auto& r : tr.records) {
    py::dict d;
    d["iter"] = r.iter;
    d["elapsed_s"] = r.elapsed_s;
    d["objective"] = r.objective;
    d["step_len"] = r.step_len;
    d["grad_norm"] = r.grad_norm;
    d["params"] = r.params;
    rows.append(d);
  }
  py::dict out;
  out["records"] = rows;
  out["iterations"] = tr.iterations;
  out["elapsed_s"] = tr.elapsed_s;
  out["line_search_fallbacks"] = tr.line_search_fallbacks;
  out["bfgs_warnings"] = tr.bfgs_warnings;
  return out;
}

}  // namespace

PYBIND11_MODULE(_telemovr, m) {
  m.doc() = "Radio-telemetry movement models: grids, Gibbs transition kernels, von Mises bearings, EM and SG fitting";

  auto domain_error = py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<EstimationError>(m, "EstimationError", PyExc_RuntimeError);
  (void)domain_error;

  m.def("wrap_angle", &wrap_angle);
  m.def("bearing_to", [](std::pair<double, double> tower, std::pair<double, double> target) {
    return bearing_to(Point{tower.first, tower.second}, Point{target.first, target.second});
  });
  m.def("log_bessel_i0", &log_bessel_i0);
  m.def("bessel_ratio", &bessel_ratio);

  py::class_<GridSpec>(m, "GridSpec")
      .def(py::init<>())
      .def_property(
          "origin", [](const GridSpec& g) { return std::pair{g.origin.x, g.origin.y}; },
          [](GridSpec& g, std::pair<double, double> o) { g.origin = {o.first, o.second}; })
      .def_readwrite("cell_size", &GridSpec::cell_size)
      .def_readwrite("n_rows", &GridSpec::n_rows)
      .def_readwrite("n_cols", &GridSpec::n_cols)
      .def_readwrite("valid_mask", &GridSpec::valid_mask)
      .def_readwrite("move_radius", &GridSpec::move_radius);

  py::class_<Tower>(m, "Tower")
      .def(py::init([](int id, double x, double y) { return Tower{id, {x, y}}; }), py::arg("id"), py::arg("x"), py::arg("y"))
      .def_readwrite("id", &Tower::id)
      .def_property_readonly("position", [](const Tower& t) { return std::pair{t.position.x, t.position.y}; })
      .def("__repr__", [](const Tower& t) {
        std::ostringstream s;
        s << "Tower(id=" << t.id << ", x=" << t.position.x << ", y=" << t.position.y << ")";
        return s.str();
      });

  py::class_<Grid, std::shared_ptr<Grid>>(m, "Grid")
      .def(py::init<GridSpec>())
      .def_property_readonly("num_cells", &Grid::num_cells)
      .def_property_readonly("num_pairs", &Grid::num_pairs)
      .def_property_readonly("spec", &Grid::spec)
      .def("center", [](const Grid& g, CellId c) { const Point p = g.center(c); return std::pair{p.x, p.y}; })
      .def("neighborhood", [](const Grid& g, CellId c) { const auto n = g.neighborhood(c); return std::vector<CellId>(n.begin(), n.end()); })
      .def("locate", [](const Grid& g, double x, double y) { return g.locate({x, y}); })
      .def("cell_at", &Grid::cell_at);

  py::class_<FeatureDef>(m, "FeatureDef")
      .def(py::init([](const std::string& kind, std::string name, bool normalize) {
             FeatureDef f;
             f.kind = feature_kind_from_string(kind);
             f.name = std::move(name);
             f.normalize = normalize;
             return f;
           }),
           py::arg("kind"), py::arg("name") = "", py::arg("normalize") = false)
      .def_static("distance", &FeatureDef::distance, py::arg("name") = "distance", py::arg("normalize") = false)
      .def_property_readonly("kind", [](const FeatureDef& f) { return std::string(to_string(f.kind)); })
      .def_readwrite("name", &FeatureDef::name)
      .def_readwrite("normalize", &FeatureDef::normalize)
      .def_readwrite("raster", &FeatureDef::raster)
      .def_readwrite("table", &FeatureDef::table)
      .def_property(
          "points",
          [](const FeatureDef& f) {
            std::vector<std::pair<double, double>> out;
            for (const auto& p : f.points) out.emplace_back(p.x, p.y);
            return out;
          },
          [](FeatureDef& f, const std::vector<std::pair<double, double>>& pts) {
            f.points.clear();
            for (const auto& [x, y] : pts) f.points.push_back({x, y});
          });

  py::class_<FeatureSet, std::shared_ptr<FeatureSet>>(m, "FeatureSet")
      .def(py::init([](std::shared_ptr<Grid> g, std::vector<FeatureDef> defs) {
        return std::make_shared<FeatureSet>(std::move(g), std::move(defs));
      }))
      .def_property_readonly("size", &FeatureSet::size)
      .def("eval", &FeatureSet::eval)
      .def("normalization_scale", &FeatureSet::normalization_scale);

  py::class_<Model, std::shared_ptr<Model>>(m, "Model")
      .def(py::init([](std::shared_ptr<FeatureSet> fs, std::vector<Tower> towers) {
        return std::make_shared<Model>(std::move(fs), std::move(towers));
      }))
      .def_property_readonly("num_cells", &Model::num_cells)
      .def_property_readonly("num_features", &Model::num_features)
      .def_property_readonly("num_towers", &Model::num_towers)
      .def_property_readonly("num_zones", &Model::num_zones)
      .def_property_readonly("towers", &Model::towers)
      .def_property_readonly("grid", [](const Model& md) { return std::const_pointer_cast<Grid>(md.features().grid_ptr()); })
      .def_property_readonly("features", [](const Model& md) { return std::const_pointer_cast<FeatureSet>(md.features_ptr()); });

  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init<>())
      .def_static("zeros", &ModelParams::zeros, py::arg("num_zones"), py::arg("num_features"), py::arg("num_towers"),
                  py::arg("kappa0") = 0.0)
      .def_readwrite("num_zones", &ModelParams::num_zones)
      .def_readwrite("num_features", &ModelParams::num_features)
      .def_readwrite("lam", &ModelParams::lambda)
      .def_readwrite("mu", &ModelParams::mu)
      .def_readwrite("kappa", &ModelParams::kappa)
      .def("to_dict", [](const ModelParams& p) { return py::module_::import("json").attr("loads")(io::params_to_json(p).dump()); })
      .def_static("from_dict", [](const py::dict& d) {
        return io::params_from_json(io::Json::parse(py::module_::import("json").attr("dumps")(d).cast<std::string>()));
      })
      .def(py::self == py::self)
      .def("__repr__", [](const ModelParams& p) { return "ModelParams(" + io::params_to_json(p).dump() + ")"; });

  py::class_<SynthSpec>(m, "SynthSpec")
      .def(py::init<>())
      .def_static("desk_scale", &SynthSpec::desk_scale, py::arg("seed") = 0)
      .def_static("full_scale", &SynthSpec::full_scale, py::arg("seed") = 0)
      .def_readwrite("grid", &SynthSpec::grid)
      .def_readwrite("towers", &SynthSpec::towers)
      .def_readwrite("num_features", &SynthSpec::num_features)
      .def_readwrite("num_steps", &SynthSpec::num_steps)
      .def_readwrite("true_mu", &SynthSpec::true_mu)
      .def_readwrite("true_kappa", &SynthSpec::true_kappa)
      .def_readwrite("dropout", &SynthSpec::dropout)
      .def_readwrite("seed", &SynthSpec::seed);

  py::class_<Scenario>(m, "Scenario")
      .def_property_readonly("grid", [](const Scenario& s) { return std::const_pointer_cast<Grid>(s.grid); })
      .def_property_readonly("model", [](const Scenario& s) { return std::const_pointer_cast<Model>(s.model); })
      .def_readonly("truth", &Scenario::truth)
      .def_readonly("path", &Scenario::path)
      .def_property_readonly("bearings", [](const Scenario& s) { return bearings_to_numpy(s.bearings); });

  m.def("make_scenario", &make_scenario, py::call_guard<py::gil_scoped_release>());
  m.def("write_scenario", &io::write_scenario);
  m.def("load_scenario", [](const std::filesystem::path& dir) {
    const auto f = io::load_scenario(dir);
    Scenario s;
    s.grid = f.grid;
    s.model = f.model;
    if (f.truth) s.truth = *f.truth;
    if (f.true_path) s.path = *f.true_path;
    s.bearings = f.bearings;
    return s;
  });

  m.def("forward_backward",
        [](const ModelParams& p, const Model& md, const py::array_t<double>& y) {
          const BearingSeries obs = bearings_from_numpy(y);
          PosteriorTables post;
          {
            py::gil_scoped_release release;
            post = forward_backward(p, md, obs, {false, true});
          }
          py::array_t<double> gamma({post.num_steps, static_cast<int>(post.num_cells)});
          std::copy(post.gamma.begin(), post.gamma.end(), gamma.mutable_data());
          py::dict d;
          d["loglik"] = post.loglik;
          d["log_gamma"] = gamma;
          d["expected_counts"] = post.expected_counts;
          return d;
        },
        py::arg("params"), py::arg("model"), py::arg("bearings"));
  m.def(
      "viterbi",
      [](const ModelParams& p, const Model& md, const py::array_t<double>& y) {
        const BearingSeries obs = bearings_from_numpy(y);
        py::gil_scoped_release release;
        return viterbi(p, md, obs);
      },
      py::arg("params"), py::arg("model"), py::arg("bearings"));
  m.def(
      "gibbs_sample_path",
      [](const ModelParams& p, const Model& md, const py::array_t<double>& y, long num_burn, std::uint64_t seed) {
        const BearingSeries obs = bearings_from_numpy(y);
        py::gil_scoped_release release;
        Rng rng(seed);
        return gibbs_sample_path(p, md, obs, num_burn, rng);
      },
      py::arg("params"), py::arg("model"), py::arg("bearings"), py::arg("num_burn"), py::arg("seed") = 0);
  m.def(
      "complete_loglik",
      [](const ModelParams& p, const Model& md, const std::vector<CellId>& path, const py::array_t<double>& y) {
        return complete_loglik(p, md, path, bearings_from_numpy(y));
      },
      py::arg("params"), py::arg("model"), py::arg("path"), py::arg("bearings"));

  m.def(
      "fit",
      [](const Model& md, const py::array_t<double>& y, const std::string& algo, std::optional<long> max_iters,
         std::optional<double> max_time, long num_burn, std::uint64_t seed, std::optional<ModelParams> init,
         double kappa0, const std::string& direction) {
        FitConfig cfg;
        cfg.algo = algorithm_from_string(algo);
        cfg.max_iters = max_iters;
        if (max_time) cfg.max_time = *max_time;
        if (!max_iters && !max_time) throw DomainError("fit: give max_iters or max_time");
        cfg.num_burn = num_burn;
        cfg.seed = seed;
        cfg.direction = sg_direction_from_string(direction);
        cfg.init_params = init ? *init
                               : ModelParams::zeros(md.num_zones(), static_cast<int>(md.num_features()),
                                                    static_cast<int>(md.num_towers()), kappa0);
        cfg.validate();
        const BearingSeries obs = bearings_from_numpy(y);
        FitResult r;
        {
          py::gil_scoped_release release;
          r = fit(cfg, md, obs);
        }
        return py::make_tuple(r.params, trace_to_dict(r.trace));
      },
      py::arg("model"), py::arg("bearings"), py::arg("algo") = "sg", py::arg("max_iters") = py::none(),
      py::arg("max_time") = py::none(), py::arg("num_burn") = 1000, py::arg("seed") = 0, py::arg("init") = py::none(),
      py::arg("kappa0") = 50.0, py::arg("direction") = "fisher_scaled");

  m.def("location_error", [](const std::vector<CellId>& est, const std::vector<CellId>& truth, const Grid& g) {
    return location_error(est, truth, g);
  });
  m.def("weight_distance", [](const std::vector<double>& a, const std::vector<double>& b) { return weight_distance(a, b); });

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
