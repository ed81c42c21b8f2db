#include <pybind11/complex.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "aloha/cli.hpp"
#include "aloha/error.hpp"
#include "aloha/net_model.hpp"
#include "aloha/optimizers.hpp"
#include "aloha/rate_model.hpp"
#include "aloha/stochgeo.hpp"

namespace py = pybind11;
using namespace aloha;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

InterferenceMatrix matrix_from(const Array& a) {
  if (a.ndim() != 2 || a.shape(0) != a.shape(1)) throw ParameterError("b must be a square matrix");
  const auto n = static_cast<std::size_t>(a.shape(0));
  return InterferenceMatrix(n, std::vector<double>(a.data(), a.data() + n * n));
}

Array matrix_to(const InterferenceMatrix& b) {
  const auto n = static_cast<py::ssize_t>(b.size());
  Array out({n, n});
  auto m = out.mutable_unchecked<2>();
  for (py::ssize_t j = 0; j < n; ++j)
    for (py::ssize_t i = 0; i < n; ++i) m(j, i) = j == i ? 0.0 : b(j, i);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Adaptive spatial Aloha core";

  py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<GeometryError>(m, "GeometryError", PyExc_ValueError);

  py::class_<ChannelParams>(m, "ChannelParams")
      .def(py::init<>())
      .def_readwrite("alpha", &ChannelParams::alpha)
      .def_readwrite("sinr_threshold", &ChannelParams::sinr_threshold)
      .def_readwrite("fading_rate", &ChannelParams::fading_rate)
      .def_readwrite("noise", &ChannelParams::noise);

  py::enum_<CountMode>(m, "CountMode").value("fixed", CountMode::fixed).value("poisson", CountMode::poisson);

  py::class_<NetworkRealization>(m, "NetworkRealization")
      .def_property_readonly("size", &NetworkRealization::size)
      .def_readonly("region_side", &NetworkRealization::region_side)
      .def_readonly("link_distance", &NetworkRealization::link_distance)
      .def_readonly("seed", &NetworkRealization::seed)
      .def_property_readonly("tx", [](const NetworkRealization& r) {
        std::vector<std::pair<double, double>> v;
        for (const auto& b : r.bipoles) v.emplace_back(b.tx.x, b.tx.y);
        return v;
      })
      .def_property_readonly("rx", [](const NetworkRealization& r) {
        std::vector<std::pair<double, double>> v;
        for (const auto& b : r.bipoles) v.emplace_back(b.rx().x, b.rx().y);
        return v;
      });

  m.def("generate_realization", &generate_realization, py::arg("intensity"), py::arg("region_side"),
        py::arg("link_distance") = 1.0, py::arg("mode") = CountMode::poisson, py::arg("seed") = 1);
  m.def("interference_coefficients",
        [](const NetworkRealization& r, const ChannelParams& c) { return matrix_to(interference_coefficients(r, c)); },
        py::arg("realization"), py::arg("channel") = ChannelParams{});

  m.def(
      "success_probability",
      [](const std::vector<double>& p, const Array& b, const ChannelParams& c, double r0) {
        return success_probability(MapVector(p), matrix_from(b), c, r0);
      },
      py::arg("p"), py::arg("b"), py::arg("channel") = ChannelParams{}, py::arg("link_distance") = 1.0);

  py::class_<OptimizerReport>(m, "OptimizerReport")
      .def_readonly("scheme", &OptimizerReport::scheme)
      .def_readonly("p", &OptimizerReport::p)
      .def_readonly("objective_value", &OptimizerReport::objective_value)
      .def_readonly("iterations", &OptimizerReport::iterations)
      .def_readonly("converged", &OptimizerReport::converged)
      .def_readonly("residual", &OptimizerReport::residual)
      .def_readonly("trace", &OptimizerReport::trace);

  m.def("prop_fair", [](const Array& b) { return prop_fair_global(matrix_from(b)); }, py::arg("b"));
  m.def("max_throughput_bruteforce", [](const Array& b) { return max_throughput_bruteforce(matrix_from(b)); },
        py::arg("b"));
  m.def("max_min", [](const Array& b) { return max_min_global(matrix_from(b)); }, py::arg("b"));
  m.def("aggregate_throughput", [](const Array& b, const std::vector<std::uint8_t>& a) {
    return aggregate_throughput(matrix_from(b), a);
  });

  py::class_<AnalyticModel>(m, "AnalyticModel")
      .def(py::init<>())
      .def(py::init([](double lambda, double t, double r0, double alpha) {
             return AnalyticModel{lambda, t, r0, alpha};
           }),
           py::arg("intensity") = 0.25, py::arg("sinr_threshold") = 10.0, py::arg("link_distance") = 1.0,
           py::arg("alpha") = 4.0)
      .def_readwrite("intensity", &AnalyticModel::intensity)
      .def_readwrite("sinr_threshold", &AnalyticModel::sinr_threshold)
      .def_readwrite("link_distance", &AnalyticModel::link_distance)
      .def_readwrite("alpha", &AnalyticModel::alpha)
      .def_property_readonly("rbar0", &AnalyticModel::rbar0);

  py::class_<QuadratureSettings>(m, "QuadratureSettings")
      .def(py::init<>())
      .def_readwrite("radial_rel_tol", &QuadratureSettings::radial_rel_tol)
      .def_readwrite("contour_w_max", &QuadratureSettings::contour_w_max)
      .def_readwrite("contour_rel_tol", &QuadratureSettings::contour_rel_tol)
      .def_readwrite("rho_grid", &QuadratureSettings::rho_grid)
      .def_readwrite("spatial_r_max", &QuadratureSettings::spatial_r_max)
      .def_readwrite("radial_grid", &QuadratureSettings::radial_grid);

  py::class_<CdfCurve>(m, "CdfCurve")
      .def_readonly("rho", &CdfCurve::rho)
      .def_readonly("ccdf", &CdfCurve::ccdf)
      .def_readonly("atom_at_one", &CdfCurve::atom_at_one);

  py::enum_<ConditionalVariant>(m, "ConditionalVariant")
      .value("transmitter_distance", ConditionalVariant::transmitter_distance)
      .value("receiver_distance", ConditionalVariant::receiver_distance);

  m.def("laplace_shotnoise", &laplace_shotnoise, py::arg("rho"), py::arg("s"), py::arg("model"),
        py::arg("quad") = QuadratureSettings{});
  m.def("laplace_shotnoise_alpha4", &laplace_shotnoise_alpha4, py::arg("rho"), py::arg("s"), py::arg("model"),
        py::arg("quad") = QuadratureSettings{});
  m.def("laplace_shotnoise_fast", &laplace_shotnoise_fast, py::arg("rho"), py::arg("s"), py::arg("model"));
  m.def("map_ccdf", &map_ccdf, py::arg("rho"), py::arg("model"), py::arg("quad") = QuadratureSettings{});
  m.def("map_ccdf_curve", &map_ccdf_curve, py::arg("model"), py::arg("quad") = QuadratureSettings{},
        py::arg("threads") = 1, py::call_guard<py::gil_scoped_release>());
  m.def("conditional_map_ccdf_curve", &conditional_map_ccdf_curve, py::arg("distance"), py::arg("model"),
        py::arg("quad") = QuadratureSettings{}, py::arg("variant") = ConditionalVariant::transmitter_distance,
        py::arg("threads") = 1, py::call_guard<py::gil_scoped_release>());

  py::class_<MeanUtility>(m, "MeanUtility")
      .def_readonly("log_map_term", &MeanUtility::log_map_term)
      .def_readonly("interference_term", &MeanUtility::interference_term)
      .def_readonly("tail", &MeanUtility::tail)
      .def_readonly("total", &MeanUtility::total);
  m.def("mean_utility", &mean_utility, py::arg("model"), py::arg("quad") = QuadratureSettings{},
        py::arg("threads") = 1, py::call_guard<py::gil_scoped_release>());

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run the command line; returns (exit code, stdout, stderr).");
}
