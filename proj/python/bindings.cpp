#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "tsclimb/diagnostics.hpp"
#include "tsclimb/experiment.hpp"

namespace py = pybind11;
using namespace tsclimb;

namespace {

TransportMap make_map(const std::string& kind, int dim, int stack_depth, int hidden_width,
                      int hidden_layers, uint64_t init_seed) {
  FlowConfig cfg;
  cfg.kind = kind;
  cfg.stack_depth = stack_depth;
  cfg.hidden_width = hidden_width;
  cfg.hidden_layers = hidden_layers;
  cfg.init_seed = init_seed;
  return build_flow(cfg, dim);
}

Chain chain_from_rows(const std::vector<Vec>& rows) {
  require(!rows.empty(), "chain: no samples");
  Chain chain(Vec{}, static_cast<int>(rows.front().size()));
  for (const auto& r : rows) chain.push(r);
  return chain;
}

}  // namespace

PYBIND11_MODULE(tsclimb, m) {
  m.doc() = "Forward-KL variational inference with HMC on a learned warped space";

  py::register_exception<contract_error>(m, "ContractError", PyExc_ValueError);
  py::register_exception<numeric_error>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<Rng>(m, "Rng")
      .def(py::init<uint64_t>(), py::arg("seed"))
      .def("uniform", &Rng::uniform)
      .def("normal", &Rng::normal)
      .def("normal_vec", &Rng::normal_vec, py::arg("n"));

  py::class_<FlowForward>(m, "FlowForward")
      .def_readonly("z", &FlowForward::z)
      .def_readonly("logdet", &FlowForward::logdet);

  py::class_<TransportMap>(m, "TransportMap")
      .def_static("make", &make_map, py::arg("kind"), py::arg("dim"), py::arg("stack_depth") = 2,
                  py::arg("hidden_width") = 16, py::arg("hidden_layers") = 2,
                  py::arg("init_seed") = 42)
      .def_property_readonly("dim", &TransportMap::dim)
      .def_property_readonly("n_params", &TransportMap::n_params)
      .def_property("params", &TransportMap::params, &TransportMap::set_params)
      .def("forward", &TransportMap::forward, py::arg("eps"))
      .def("inverse", &TransportMap::inverse, py::arg("z"))
      .def("log_q", &TransportMap::log_q, py::arg("z"))
      .def("grad_log_q_params", &TransportMap::grad_log_q_params, py::arg("z"));

  py::class_<TargetModel>(m, "TargetModel")
      .def_property_readonly("name", &TargetModel::name)
      .def_property_readonly("dim", &TargetModel::dim)
      .def_property("theta", &TargetModel::theta, &TargetModel::set_theta)
      .def("log_joint", &TargetModel::log_joint, py::arg("z"))
      .def("grad_z", &TargetModel::grad_z, py::arg("z"))
      .def("grad_theta", &TargetModel::grad_theta, py::arg("z"))
      .def("exact_sample", &TargetModel::exact_sample, py::arg("rng"));

  m.def(
      "make_funnel", [](double a) -> std::unique_ptr<TargetModel> { return std::make_unique<Funnel>(a); },
      py::arg("a") = 1.0);
  m.def(
      "make_banana", [](double b) -> std::unique_ptr<TargetModel> { return std::make_unique<Banana>(b); },
      py::arg("b") = 0.02);
  m.def(
      "make_gaussian",
      [](const Vec& mean, const Vec& stddev) -> std::unique_ptr<TargetModel> {
        return std::make_unique<GaussianAnalytic>(mean, stddev);
      },
      py::arg("mean"), py::arg("std"));

  m.def(
      "ess",
      [](const std::vector<Vec>& rows, int dim) { return ess(chain_from_rows(rows), dim); },
      py::arg("samples"), py::arg("dim") = 0);
  m.def("moments", [](const std::vector<Vec>& rows) {
    const SummaryStats s = moments(chain_from_rows(rows));
    return py::make_tuple(s.mean, s.stddev);
  });

  m.def(
      "run_experiment",
      [](const std::string& config_json) {
        const auto cfg = parse_config_json(nlohmann::json::parse(config_json));
        const RunOutputs out = run_experiment(cfg);
        py::dict d;
        d["summary_json"] = out.summary_json.string();
        d["trace_csv"] = out.trace_csv.string();
        d["samples_csv"] = out.samples_csv.string();
        d["mean"] = out.stats.mean;
        d["std"] = out.stats.stddev;
        d["acceptance_rate"] = out.stats.acceptance_rate;
        d["final_theta"] = out.final_theta;
        d["flow_params"] = out.final_flow_params;
        return d;
      },
      py::arg("config_json"), "Run one experiment from a JSON config string; returns output paths and stats");

  m.def("default_config_json",
        []() { return config_to_json(default_config()).dump(2); });
}
