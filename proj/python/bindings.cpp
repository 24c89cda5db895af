#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "beem/calibration.hpp"
#include "beem/errors.hpp"
#include "beem/evaluation.hpp"
#include "beem/policy.hpp"
#include "beem/synth.hpp"
#include "beem/theory.hpp"
#include "beem/trace.hpp"
#include "beem/trace_io.hpp"

namespace py = pybind11;

namespace {

// Reports cross the boundary as plain dicts with the file schema.
py::object to_python(const nlohmann::json& j) {
  switch (j.type()) {
    case nlohmann::json::value_t::null:
      return py::none();
    case nlohmann::json::value_t::boolean:
      return py::bool_(j.get<bool>());
    case nlohmann::json::value_t::number_integer:
      return py::int_(j.get<std::int64_t>());
    case nlohmann::json::value_t::number_unsigned:
      return py::int_(j.get<std::uint64_t>());
    case nlohmann::json::value_t::number_float:
      return py::float_(j.get<double>());
    case nlohmann::json::value_t::string:
      return py::str(j.get<std::string>());
    case nlohmann::json::value_t::array: {
      py::list out;
      for (const auto& v : j) out.append(to_python(v));
      return out;
    }
    case nlohmann::json::value_t::object: {
      py::dict out;
      for (auto it = j.begin(); it != j.end(); ++it) {
        out[py::str(it.key())] = to_python(it.value());
      }
      return out;
    }
    default:
      return py::none();
  }
}

beem::Split split_from(const std::string& s) { return beem::parse_split(s); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Early-exit decision rule, threshold calibration and audit";

  auto base = py::register_exception<beem::Error>(m, "BeemError",
                                                  PyExc_ValueError);
  py::register_exception<beem::ValidationError>(m, "ValidationError",
                                                base.ptr());
  py::register_exception<beem::ParseError>(m, "ParseError", base.ptr());
  py::register_exception<beem::ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<beem::LabelRequiredError>(m, "LabelRequiredError",
                                                   base.ptr());
  py::register_exception<beem::EmptyDataError>(m, "EmptyDataError",
                                               base.ptr());
  py::register_exception<beem::DomainError>(m, "DomainError", base.ptr());
  py::register_exception<beem::RangeError>(m, "RangeError", base.ptr());

  m.def(
      "predict",
      [](std::vector<double> probs) {
        const auto p = beem::predict(beem::ProbVector(std::move(probs)));
        return py::make_tuple(p.label, p.confidence);
      },
      py::arg("probs"), "(argmax label, max probability); ties -> lowest index");

  py::class_<beem::SampleTrace>(m, "SampleTrace")
      .def(py::init(&beem::SampleTrace::FromRows), py::arg("id"),
           py::arg("label"), py::arg("exits"))
      .def_property_readonly("id", &beem::SampleTrace::id)
      .def_property_readonly("label", &beem::SampleTrace::true_label)
      .def_property_readonly("num_layers", &beem::SampleTrace::num_layers)
      .def_property_readonly("num_classes", &beem::SampleTrace::num_classes)
      .def_property_readonly("predictions", [](const beem::SampleTrace& t) {
        py::list out;
        for (const auto& p : t.predictions()) {
          out.append(py::make_tuple(p.label, p.confidence));
        }
        return out;
      });

  m.def("prediction_change_count", &beem::prediction_change_count,
        py::arg("trace"), py::arg("upto"));

  py::class_<beem::Dataset>(m, "Dataset")
      .def_static(
          "classification",
          [](int layers, int classes, std::vector<beem::SampleTrace> samples,
             const std::string& split) {
            return beem::Dataset::Classification(layers, classes,
                                                 std::move(samples),
                                                 split_from(split));
          },
          py::arg("layers"), py::arg("classes"), py::arg("samples"),
          py::arg("split") = "unspecified")
      .def_property_readonly("mode", [](const beem::Dataset& d) {
        return beem::to_string(d.mode());
      })
      .def_property_readonly("num_layers", &beem::Dataset::num_layers)
      .def_property_readonly("num_classes", &beem::Dataset::num_classes)
      .def_property_readonly("split", [](const beem::Dataset& d) {
        return beem::to_string(d.split());
      })
      .def_property_readonly("units", [](const beem::Dataset& d) {
        return std::vector<beem::SampleTrace>(d.units().begin(),
                                              d.units().end());
      })
      .def("__len__", &beem::Dataset::size)
      .def("__eq__", [](const beem::Dataset& a, const beem::Dataset& b) {
        return a == b;
      });

  py::class_<beem::CostWeights>(m, "CostWeights")
      .def(py::init<double>(), py::arg("lam") = 0.1)
      .def_readonly("lam", &beem::CostWeights::lambda);
  py::class_<beem::AccuracyWeights>(m, "AccuracyWeights")
      .def(py::init<std::vector<double>>(), py::arg("accuracies"))
      .def_readonly("accuracies", &beem::AccuracyWeights::accuracies);
  py::class_<beem::ExplicitWeights>(m, "ExplicitWeights")
      .def(py::init<std::vector<double>>(), py::arg("weights"))
      .def_readonly("weights", &beem::ExplicitWeights::weights);

  m.def("materialize_weights", &beem::materialize_weights, py::arg("scheme"),
        py::arg("layers"));

  py::class_<beem::BeemPolicy>(m, "BeemPolicy")
      .def(py::init([](beem::WeightScheme w, std::vector<double> alphas) {
             return beem::BeemPolicy{std::move(w),
                                     beem::ThresholdVector(std::move(alphas))};
           }),
           py::arg("weights"), py::arg("thresholds"))
      .def_property_readonly("thresholds", [](const beem::BeemPolicy& b) {
        return std::vector<double>(b.thresholds.values().begin(),
                                   b.thresholds.values().end());
      });
  py::class_<beem::ConfidencePolicy>(m, "ConfidencePolicy")
      .def(py::init<double>(), py::arg("tau") = 0.9)
      .def_readonly("tau", &beem::ConfidencePolicy::tau);
  py::class_<beem::PatiencePolicy>(m, "PatiencePolicy")
      .def(py::init<int>(), py::arg("patience") = 2)
      .def_readonly("patience", &beem::PatiencePolicy::patience);
  py::class_<beem::MajorityPolicy>(m, "MajorityPolicy")
      .def(py::init<int>(), py::arg("quorum") = 3)
      .def_readonly("quorum", &beem::MajorityPolicy::quorum);
  py::class_<beem::FinalOnlyPolicy>(m, "FinalOnlyPolicy").def(py::init<>());

  py::class_<beem::ExitDecision>(m, "ExitDecision")
      .def_readonly("exit_layer", &beem::ExitDecision::exit_layer)
      .def_readonly("label", &beem::ExitDecision::label)
      .def_readonly("score_at_exit", &beem::ExitDecision::score_at_exit)
      .def_readonly("per_layer_scores", &beem::ExitDecision::per_layer_scores);

  m.def(
      "beem_step",
      [](double prev_score, std::optional<beem::ClassIndex> prev_label,
         beem::ClassIndex label, double confidence, double weight) {
        const auto s = beem::beem_step(prev_score, prev_label,
                                       beem::Prediction{label, confidence},
                                       weight);
        return py::make_tuple(s.score, s.label);
      },
      py::arg("prev_score"), py::arg("prev_label"), py::arg("label"),
      py::arg("confidence"), py::arg("weight"));
  m.def(
      "run_beem",
      [](const beem::SampleTrace& t, std::vector<double> weights,
         std::vector<double> thresholds) {
        return beem::run_beem(t, weights,
                              beem::ThresholdVector(std::move(thresholds)));
      },
      py::arg("trace"), py::arg("weights"), py::arg("thresholds"));
  m.def("run_policy", &beem::run_policy, py::arg("trace"), py::arg("policy"));

  m.def("speedup_ratio", [](std::vector<std::size_t> counts) {
    return beem::speedup_ratio(counts);
  });
  m.def(
      "evaluate",
      [](const beem::Dataset& d, const beem::Policy& p) {
        return to_python(beem::to_json(beem::evaluate(d, p)));
      },
      py::arg("data"), py::arg("policy"));
  m.def(
      "compare",
      [](const beem::Dataset& d, const std::vector<beem::Policy>& ps) {
        py::list out;
        for (const auto& r : beem::compare(d, ps)) {
          out.append(to_python(beem::to_json(r)));
        }
        return out;
      },
      py::arg("data"), py::arg("policies"));

  m.def("final_error_rate", &beem::final_error_rate, py::arg("data"));
  m.def(
      "calibrate_error_rate",
      [](const beem::Dataset& d, std::vector<double> weights,
         std::optional<std::vector<double>> grid, std::optional<double> p) {
        return to_python(beem::to_json(beem::calibrate_error_rate(
            d, weights, grid.value_or(beem::default_error_rate_grid()), p)));
      },
      py::arg("data"), py::arg("weights"), py::arg("grid") = py::none(),
      py::arg("p") = py::none());
  m.def(
      "calibrate_classical",
      [](const beem::Dataset& d, std::vector<double> weights,
         std::optional<std::vector<double>> grid) {
        return to_python(beem::to_json(beem::calibrate_classical(
            d, weights, grid.value_or(beem::default_classical_grid()))));
      },
      py::arg("data"), py::arg("weights"), py::arg("grid") = py::none());

  m.def("standalone_error_rates", &beem::standalone_error_rates,
        py::arg("data"));
  m.def("theorem_bound", &beem::theorem_bound, py::arg("a"), py::arg("b"),
        py::arg("p"), py::arg("t"));
  m.def(
      "check_condition",
      [](const beem::Dataset& d, const beem::BeemPolicy& p) {
        return to_python(beem::to_json(beem::check_condition(d, p)));
      },
      py::arg("data"), py::arg("policy"));

  m.def(
      "generate",
      [](int layers, int classes, std::size_t samples,
         std::vector<double> error_rates, double persistence,
         std::pair<double, double> conf_correct,
         std::pair<double, double> conf_wrong, std::uint64_t seed,
         const std::string& split) {
        beem::SynthConfig cfg;
        cfg.layers = layers;
        cfg.classes = classes;
        cfg.samples = samples;
        cfg.error_rates = std::move(error_rates);
        cfg.persistence = persistence;
        cfg.conf_correct = {conf_correct.first, conf_correct.second};
        cfg.conf_wrong = {conf_wrong.first, conf_wrong.second};
        cfg.seed = seed;
        cfg.split = split_from(split);
        return beem::generate(cfg);
      },
      py::arg("layers"), py::arg("classes"), py::arg("samples"),
      py::arg("error_rates"), py::arg("persistence") = 0.8,
      py::arg("conf_correct") = std::make_pair(5.0, 2.0),
      py::arg("conf_wrong") = std::make_pair(2.0, 5.0), py::arg("seed") = 0,
      py::arg("split") = "unspecified");

  m.def("load_traces", &beem::load_traces, py::arg("path"));
  m.def("save_traces", &beem::save_traces, py::arg("data"), py::arg("path"));
}
