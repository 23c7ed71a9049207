#include <pybind11/complex.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include <nlohmann/json.hpp>

#include "mswf/characteristics.hpp"
#include "mswf/detector.hpp"
#include "mswf/errors.hpp"
#include "mswf/experiments.hpp"
#include "mswf/packets.hpp"
#include "mswf/potentials.hpp"
#include "mswf/propagator.hpp"

namespace py = pybind11;
using namespace mswf;
using nlohmann::json;

namespace {

// JSON crosses the boundary as text so Python sees plain dicts and lists.
py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::object& o) {
  if (py::isinstance<py::str>(o)) return json::parse(o.cast<std::string>());
  return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

Vec to_vec(const std::vector<double>& v) {
  require(!v.empty() && v.size() <= static_cast<std::size_t>(kMaxDim), ErrorCode::Input,
          "vectors need 1 to 3 components");
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> from_vec(const Vec& v) { return {v.data(), v.data() + v.size()}; }

py::array_t<cplx> values_array(const GridFunction& f) {
  std::vector<py::ssize_t> shape(f.grid().shape().begin(), f.grid().shape().end());
  py::array_t<cplx> out(shape);
  std::copy(f.values().begin(), f.values().end(), out.mutable_data());
  return out;
}

GridFunction from_array(const GridSpec& g, const py::array_t<cplx, py::array::c_style | py::array::forcecast>& a) {
  require(static_cast<std::size_t>(a.size()) == g.size(), ErrorCode::Input,
          "array size does not match the grid");
  return GridFunction(g, std::vector<cplx>(a.data(), a.data() + a.size()));
}

VectorPotentialModel model_of(const py::object& o) {
  if (py::isinstance<VectorPotentialModel>(o)) return o.cast<VectorPotentialModel>();
  return VectorPotentialModel::from_json(from_py(o));
}

ScalarPotentialModel scalar_of(const py::object& o, int n) {
  if (o.is_none()) return ScalarPotentialModel::zero(n);
  return ScalarPotentialModel::from_json(from_py(o), n);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Wave front set detection for magnetic Schroedinger equations";

  // Raised with args (message, code), code being the error category name.
  static PyObject* error_type =
      PyErr_NewException("mswf._core.MswfError", PyExc_RuntimeError, nullptr);
  m.attr("MswfError") = py::reinterpret_borrow<py::object>(error_type);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetObject(error_type, py::make_tuple(e.what(), std::string(to_string(e.code()))).ptr());
    }
  });

  py::class_<GridSpec>(m, "Grid")
      .def(py::init<int, std::size_t, double>(), py::arg("n"), py::arg("points"), py::arg("half_width"))
      .def_property_readonly("dimension", &GridSpec::dimension)
      .def_property_readonly("shape", [](const GridSpec& g) {
        return std::vector<std::size_t>(g.shape().begin(), g.shape().end());
      })
      .def("dx", &GridSpec::dx)
      .def("coordinates", [](const GridSpec& g, int axis) {
        std::vector<double> c(g.points(axis));
        for (std::size_t i = 0; i < c.size(); ++i) c[i] = g.coordinate(axis, i);
        return c;
      })
      .def("to_json", [](const GridSpec& g) { return to_py(g.to_json()); });

  py::class_<GridFunction>(m, "Field")
      .def(py::init(&from_array), py::arg("grid"), py::arg("values"))
      .def_property_readonly("grid", &GridFunction::grid)
      .def("values", &values_array)
      .def("l2_norm", &GridFunction::l2_norm)
      .def("max_abs", &GridFunction::max_abs);

  py::class_<VectorPotentialModel>(m, "VectorPotential")
      .def_static("from_json", [](const py::object& o) { return VectorPotentialModel::from_json(from_py(o)); })
      .def_static(
          "custom",
          [](int n, double rho, py::function a, bool conforming) {
            // Called from worker threads, so the GIL is taken per evaluation.
            auto fn = std::make_shared<py::function>(std::move(a));
            VectorPotentialModel::Callable c = [fn](double t, const Vec& x) {
              py::gil_scoped_acquire gil;
              return to_vec((*fn)(t, from_vec(x)).cast<std::vector<double>>());
            };
            return VectorPotentialModel::custom(n, rho, std::move(c), conforming);
          },
          py::arg("n"), py::arg("rho"), py::arg("a"), py::arg("conforming") = true)
      .def_property_readonly("dimension", &VectorPotentialModel::dimension)
      .def("value", [](const VectorPotentialModel& mdl, double t, const std::vector<double>& x) {
        return from_vec(mdl.value(t, to_vec(x)));
      })
      .def("to_json", [](const VectorPotentialModel& mdl) { return to_py(mdl.to_json()); });

  m.def("theorem_exponent", &theorem_exponent, py::arg("rho"));

  m.def("gaussian", [](const GridSpec& g, double width, std::vector<double> center,
                       std::vector<double> frequency) {
        return gaussian(g, width, center.empty() ? Vec() : to_vec(center),
                        frequency.empty() ? Vec() : to_vec(frequency));
      },
      py::arg("grid"), py::arg("width") = 1.0, py::arg("center") = std::vector<double>{},
      py::arg("frequency") = std::vector<double>{});
  m.def("discrete_delta", &discrete_delta, py::arg("grid"));
  m.def("datum", [](const GridSpec& g, const py::object& spec) {
        return make_datum(g, DatumSpec::from_json(from_py(spec)));
      },
      py::arg("grid"), py::arg("spec"));

  m.def("wpt_gaussian",
        [](const GridFunction& f, const std::vector<double>& x, const std::vector<double>& xi,
           double width, double lambda, double b, double t) {
          return wpt_gaussian(f, width, lambda, b, t, {to_vec(x), to_vec(xi)});
        },
        py::arg("f"), py::arg("x"), py::arg("xi"), py::arg("width") = 1.0, py::arg("lam") = 1.0,
        py::arg("b") = 0.125, py::arg("t") = 0.0);

  m.def("flow",
        [](const py::object& potential, double t0, double target, const std::vector<double>& x,
           const std::vector<double>& xi, double tol) {
          const VectorPotentialModel mdl = model_of(potential);
          std::optional<FlowResult> r;
          {
            py::gil_scoped_release nogil;
            r.emplace(flow(mdl, t0, target, to_vec(x), to_vec(xi), tol));
          }
          return py::make_tuple(from_vec(r->terminal.x), from_vec(r->terminal.xi), r->phase);
        },
        py::arg("potential"), py::arg("t0"), py::arg("target"), py::arg("x"), py::arg("xi"),
        py::arg("tol") = 1e-10,
        "Returns (x, xi, phase) at the target time.");

  m.def("evolve",
        [](const GridFunction& u0, const py::object& potential, double t0, double t1, double dt,
           const py::object& scalar_potential) {
          const VectorPotentialModel mdl = model_of(potential);
          const ScalarPotentialModel V = scalar_of(scalar_potential, u0.dimension());
          EvolveConfig cfg;
          cfg.dt = dt;
          py::gil_scoped_release nogil;
          return evolve(mdl, V, u0, t0, t1, cfg);
        },
        py::arg("u0"), py::arg("potential"), py::arg("t0"), py::arg("t1"), py::arg("dt") = 1e-3,
        py::arg("scalar_potential") = py::none());

  m.def("wf_test",
        [](const GridFunction& f, const std::vector<double>& x, const std::vector<double>& xi,
           const std::string& ladder, double b, double t0, const py::object& potential,
           const py::object& scalar_potential, bool detail) {
          ConicSample s;
          s.x0 = to_vec(x);
          s.xi0 = to_vec(xi);
          const std::vector<double> lad = parse_ladder(ladder);
          DecayReport r;
          if (t0 == 0.0 && potential.is_none()) {
            py::gil_scoped_release nogil;
            r = wf_test_static(f, GaussianBase{1.0}, b, s, lad);
          } else {
            const VectorPotentialModel mdl =
                potential.is_none() ? VectorPotentialModel::zero(f.dimension()) : model_of(potential);
            const ScalarPotentialModel V = scalar_of(scalar_potential, f.dimension());
            py::gil_scoped_release nogil;
            r = wf_test_dynamic(f, mdl, V, t0, GaussianBase{1.0}, b, s, lad);
          }
          return to_py(r.to_json(detail));
        },
        py::arg("f"), py::arg("x"), py::arg("xi"), py::arg("ladder") = "0:4", py::arg("b") = 0.125,
        py::arg("t0") = 0.0, py::arg("potential") = py::none(),
        py::arg("scalar_potential") = py::none(), py::arg("detail") = false,
        "Static test on f when t0 = 0 and no potential is given, dynamic test on f as u0 otherwise.");

  m.def("run_experiment",
        [](const py::object& config) {
          const ExperimentConfig cfg = ExperimentConfig::from_json(from_py(config));
          ExperimentOutput out;
          {
            py::gil_scoped_release nogil;
            out = run_experiment(cfg);
          }
          py::dict files;
          for (const auto& [name, text] : out.files) files[py::str(name)] = text;
          py::dict result;
          result["summary"] = to_py(out.summary);
          result["files"] = files;
          result["failure"] = out.failure ? py::object(py::str(out.failure->what())) : py::none();
          return result;
        },
        py::arg("config"));
}
