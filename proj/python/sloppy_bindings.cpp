#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sloppy/commands.hpp"
#include "sloppy/config.hpp"
#include "sloppy/error.hpp"
#include "sloppy/explorer.hpp"
#include "sloppy/fisher.hpp"
#include "sloppy/spectral.hpp"

namespace py = pybind11;
using namespace sloppy;

namespace {

py::object to_python(const nlohmann::ordered_json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

CommandOptions options(std::optional<std::string> out, std::optional<std::size_t> workers,
                       std::optional<std::uint64_t> seed) {
  CommandOptions o;
  o.out = std::move(out);
  o.workers = workers;
  o.seed = seed;
  return o;
}

py::dict result_dict(const CommandResult& r) {
  py::dict d;
  d["exit_code"] = r.exit_code;
  d["files"] = r.files;
  d["report"] = to_python(r.report);
  return d;
}

}  // namespace

PYBIND11_MODULE(_sloppy, m) {
  m.doc() = "Fisher-information sloppiness analysis and stiff-direction exploration";
  m.attr("__version__") = SLOPPY_VERSION;

  // Kept alive for the life of the interpreter.
  static PyObject* error_type = py::exception<Error>(m, "SloppyError").release().ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
      exc.attr("kind") = std::string(to_string(e.kind()));
      exc.attr("exit_code") = exit_code_for(e);
      PyErr_SetObject(error_type, exc.ptr());
    }
  });

  m.def(
      "fisher",
      [](const std::string& config_path, std::optional<std::size_t> workers) {
        auto cfg = load_run_config(config_path);
        if (workers) cfg.simulation.workers = *workers;
        auto model = make_model(cfg);
        FisherEstimate est;
        {
          py::gil_scoped_release release;
          est = estimate_fisher(*model, cfg.parameters, cfg.simulation, cfg.diff, cfg.loss);
        }
        return py::make_tuple(est.fisher.names, est.fisher.entries);
      },
      py::arg("config"), py::arg("workers") = py::none(),
      "Fisher matrix for a run config: (parameter names, P x P array).");

  m.def(
      "eigendecompose",
      [](const Eigen::MatrixXd& h) {
        const auto s = eigendecompose(h);
        return py::make_tuple(s.eigenvalues, s.eigenvectors);
      },
      py::arg("matrix"), "Descending eigenvalues and sign-normalised eigenvectors (columns).");

  m.def(
      "axis_similarity",
      [](const Eigen::MatrixXd& h) {
        const auto r = axis_similarity(eigendecompose(h));
        return py::make_tuple(r.best_axis, r.similarity);
      },
      py::arg("matrix"));

  m.def("stiffness_scale", &stiffness_scale, py::arg("eigenvalue"));
  m.def("step_distance", &step_distance, py::arg("lambda_chosen"), py::arg("lambda1"), py::arg("eps") = 0.1,
        py::arg("eps_min") = 0.3, py::arg("eps_max") = 1.0);
  m.def("wishart_null", &wishart_null, py::arg("P"), py::arg("M"), py::arg("trials"), py::arg("seed") = 1);
  m.def("marchenko_pastur_support", &marchenko_pastur_support, py::arg("P"), py::arg("M"));

  m.def(
      "spectrum",
      [](const std::string& config_path, std::optional<std::string> out, std::optional<std::size_t> workers,
         bool dump_ensembles) {
        auto o = options(std::move(out), workers, std::nullopt);
        o.dump_ensembles = dump_ensembles;
        return result_dict(cmd_spectrum(load_run_config(config_path), o));
      },
      py::arg("config"), py::arg("out") = py::none(), py::arg("workers") = py::none(),
      py::arg("dump_ensembles") = false);

  m.def(
      "explore",
      [](const std::string& config_path, std::optional<std::string> out, std::optional<std::size_t> workers,
         std::optional<std::uint64_t> seed, bool resume, bool both_orientations) {
        auto o = options(std::move(out), workers, seed);
        o.resume = resume;
        o.both_orientations = both_orientations;
        return result_dict(cmd_explore(load_run_config(config_path), o));
      },
      py::arg("config"), py::arg("out") = py::none(), py::arg("workers") = py::none(), py::arg("seed") = py::none(),
      py::arg("resume") = false, py::arg("both_orientations") = false);

  m.def(
      "validate",
      [](std::optional<std::string> out, std::optional<std::size_t> workers) {
        return result_dict(cmd_validate(options(std::move(out), workers, std::nullopt)));
      },
      py::arg("out") = py::none(), py::arg("workers") = py::none());

  m.def(
      "wishart",
      [](std::size_t p, std::size_t mm, std::size_t trials, std::optional<std::string> out,
         std::optional<std::uint64_t> seed) {
        return result_dict(cmd_wishart(p, mm, trials, options(std::move(out), std::nullopt, seed)));
      },
      py::arg("P") = 8, py::arg("M") = 64, py::arg("trials") = 200, py::arg("out") = py::none(),
      py::arg("seed") = py::none());
}
