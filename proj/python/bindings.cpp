#include "deepc/controllers.hpp"
#include "deepc/errors.hpp"
#include "deepc/hankel.hpp"
#include "deepc/harness.hpp"
#include "deepc/plant.hpp"
#include "deepc/qp.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace deepc;

namespace {

py::dict kpi_dict(const KpiRecord& k) {
  py::dict d;
  d["rmse_K"] = k.rmse_k;
  d["smoothness"] = k.smoothness;
  d["smoothness_undefined"] = k.smoothness_undefined;
  d["mean_error_K"] = k.mean_error_k;
  d["last_day_bias_K"] = k.last_day_bias_k;
  d["mean_solve_ms"] = k.mean_solve_ms;
  d["max_solve_ms"] = k.max_solve_ms;
  d["samples"] = k.samples;
  return d;
}

py::dict result_dict(const SimResult& r) {
  const auto n = static_cast<Eigen::Index>(r.records.size());
  Vector t(n), y(n), y_ref(n), y_meas(n), u(n), ms(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& rec = r.records[static_cast<std::size_t>(k)];
    t(k) = static_cast<double>(rec.t);
    y(k) = rec.y_true;
    y_ref(k) = rec.y_ref;
    y_meas(k) = rec.y_meas;
    u(k) = rec.u;
    ms(k) = rec.solve_ms;
  }
  py::dict d;
  d["controller"] = r.controller;
  d["failed"] = r.failed;
  d["failure_message"] = r.failure_message;
  d["t"] = t;
  d["y"] = y;
  d["y_ref"] = y_ref;
  d["y_meas"] = y_meas;
  d["u"] = u;
  d["solve_ms"] = ms;
  d["kpis"] = kpi_dict(r.kpis);
  return d;
}

ExperimentConfig config_from(const std::string& json) {
  return experiment_config_from_json(json.empty() ? "{}" : json);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Regularization-free DeePC variants and ARX-MPC on a single-zone building";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<ControllerError>(m, "ControllerError", PyExc_RuntimeError);

  py::class_<BuildingModel>(m, "BuildingModel")
      .def_static("reference", &BuildingModel::reference)
      .def_readonly("A", &BuildingModel::A)
      .def_readonly("B", &BuildingModel::B)
      .def_readonly("E", &BuildingModel::E)
      .def_readonly("C", &BuildingModel::C)
      .def("steady_state", &BuildingModel::steady_state, py::arg("u"), py::arg("w"))
      .def("spectral_radius", &BuildingModel::spectral_radius);

  m.def(
      "step_plant",
      [](const BuildingModel& model, const Vector& x, double u, const Vector& w) {
        const PlantStep s = step_plant(model, x, u, w);
        return py::make_tuple(s.x_next, s.y);
      },
      py::arg("model"), py::arg("x"), py::arg("u"), py::arg("w"),
      "Returns (x_next, y) with y = C x.");

  m.def("build_hankel", &build_hankel, py::arg("series"), py::arg("depth"),
        "Block Hankel matrix of a channels-by-time series.");
  m.def("pinv", &pinv, py::arg("matrix"), py::arg("rel_tol") = -1.0);
  m.def(
      "check_persistent_excitation",
      [](const Matrix& u, const Matrix& w, const Matrix& y, Eigen::Index t_ini, Eigen::Index t_f) {
        const PeReport r = check_persistent_excitation(split_blocks(u, w, y, t_ini, t_f));
        py::dict d;
        d["rank"] = r.rank;
        d["required_rank"] = r.required_rank;
        d["pass"] = r.pass;
        return d;
      },
      py::arg("u"), py::arg("w"), py::arg("y"), py::arg("t_ini"), py::arg("t_f"));

  m.def(
      "solve_qp",
      [](const Matrix& P, const Vector& q, std::optional<Matrix> a_eq, std::optional<Vector> b_eq,
         std::optional<Vector> lb, std::optional<Vector> ub) {
        QpProblem p(q.size());
        p.P = P;
        p.q = q;
        if (a_eq) p.a_eq = *a_eq;
        if (b_eq) p.b_eq = *b_eq;
        if (lb) p.lb = *lb;
        if (ub) p.ub = *ub;
        const QpSolution s = solve_qp(p);
        py::dict d;
        d["status"] = to_string(s.status);
        d["x"] = s.x;
        d["y_eq"] = s.y_eq;
        d["mu"] = s.mu;
        d["objective"] = s.objective;
        d["iterations"] = s.iterations;
        return d;
      },
      py::arg("P"), py::arg("q"), py::arg("A_eq") = py::none(), py::arg("b_eq") = py::none(),
      py::arg("lb") = py::none(), py::arg("ub") = py::none(),
      "min 1/2 x'Px + q'x  s.t.  A_eq x = b_eq, lb <= x <= ub");
  m.def(
      "kkt_residuals",
      [](const Matrix& P, const Vector& q, const Matrix& a_eq, const Vector& b_eq, const Vector& lb,
         const Vector& ub, const Vector& x) {
        QpProblem p(q.size());
        p.P = P;
        p.q = q;
        p.a_eq = a_eq;
        p.b_eq = b_eq;
        p.lb = lb;
        p.ub = ub;
        const KktResiduals r = kkt_residuals(p, x);
        return py::make_tuple(r.eq_residual, r.bound_violation, r.stationarity);
      },
      py::arg("P"), py::arg("q"), py::arg("A_eq"), py::arg("b_eq"), py::arg("lb"), py::arg("ub"),
      py::arg("x"), "(eq_residual, bound_violation, stationarity)");

  m.def(
      "compute_kpis",
      [](const std::vector<double>& y, const std::vector<double>& y_ref,
         const std::vector<double>& u, Eigen::Index settle_steps) {
        return kpi_dict(compute_kpis(y, y_ref, u, {}, settle_steps));
      },
      py::arg("y"), py::arg("y_ref"), py::arg("u"), py::arg("settle_steps") = 18);

  m.def("default_config_json", [] { return experiment_config_to_json(ExperimentConfig{}); });
  m.def(
      "simulate",
      [](const std::string& controller, const std::string& config_json) {
        const ExperimentConfig config = config_from(config_json);
        const ControllerKind kind = controller_kind_from_string(controller);
        SimResult r;
        {
          py::gil_scoped_release release;
          r = run_closed_loop(config, kind);
        }
        return result_dict(r);
      },
      py::arg("controller"), py::arg("config_json") = "{}");
  m.def(
      "compare",
      [](const std::string& config_json) {
        const ExperimentConfig config = config_from(config_json);
        std::vector<SimResult> results;
        {
          py::gil_scoped_release release;
          compare_controllers(config, &results);
        }
        py::list out;
        for (const auto& r : results) out.append(result_dict(r));
        return out;
      },
      py::arg("config_json") = "{}");
}
