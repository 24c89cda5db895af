// beem: replay, calibrate and audit multi-exit inference traces.
//
// Exit status: 0 success, 1 usage error, 2 data error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "beem/calibration.hpp"
#include "beem/errors.hpp"
#include "beem/evaluation.hpp"
#include "beem/policy.hpp"
#include "beem/synth.hpp"
#include "beem/theory.hpp"
#include "beem/trace_io.hpp"

namespace {

constexpr int kUsageError = 1;
constexpr int kDataError = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Report to --out (atomically) or stdout.
void emit(const nlohmann::json& report, const std::string& out) {
  if (out.empty()) {
    std::cout << beem::canonical_json(report) << '\n';
  } else {
    beem::save_report(report, out);
  }
}

std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

// "cost[:lambda]" | "accuracy" | "explicit:<file>"
std::vector<double> resolve_weight_flag(const std::string& flag,
                                        const beem::Dataset& val) {
  const auto colon = flag.find(':');
  const std::string kind = flag.substr(0, colon);
  const std::string arg =
      colon == std::string::npos ? "" : flag.substr(colon + 1);
  const int layers = val.num_layers();
  if (kind == "cost") {
    double lambda = 0.1;
    if (!arg.empty()) {
      try {
        std::size_t used = 0;
        lambda = std::stod(arg, &used);
        if (used != arg.size()) throw std::invalid_argument(arg);
      } catch (const std::exception&) {
        throw UsageError("--weights cost:<lambda> needs a number, got '" +
                         arg + "'");
      }
    }
    return beem::materialize_weights(beem::CostWeights{lambda}, layers);
  }
  if (kind == "accuracy") {
    if (!arg.empty()) throw UsageError("--weights accuracy takes no argument");
    std::vector<double> acc = beem::standalone_error_rates(val);
    for (double& a : acc) a = 1.0 - a;
    return beem::materialize_weights(beem::AccuracyWeights{acc}, layers);
  }
  if (kind == "explicit") {
    if (arg.empty()) throw UsageError("--weights explicit:<file> needs a file");
    const auto doc = beem::load_report(arg);
    if (!doc.is_array()) {
      throw beem::ConfigError(arg + ": expected a JSON array of weights");
    }
    return beem::materialize_weights(
        beem::ExplicitWeights{doc.get<std::vector<double>>()}, layers);
  }
  throw UsageError("--weights must be cost[:lambda], accuracy or "
                   "explicit:<file>, got '" +
                   flag + "'");
}

std::optional<beem::Dataset> optional_val(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return beem::load_traces(path);
}

std::string policy_label(const beem::RunConfig& c) {
  return c.name.empty() ? c.policy : c.name;
}

void print_table(const std::vector<beem::EvalReport>& reports) {
  std::size_t width = 6;
  for (const auto& r : reports) width = std::max(width, r.policy.size());
  std::ostringstream out;
  out << std::left;
  out.width(width + 2);
  out << "policy" << "Acc      Speed\n";
  for (const auto& r : reports) {
    out.width(width + 2);
    out << r.policy;
    std::string acc = r.accuracy ? format_fixed(100.0 * *r.accuracy, 2) : "-";
    acc.resize(std::max<std::size_t>(acc.size(), 9), ' ');
    out << acc << format_fixed(r.speedup, 2) << "x\n";
  }
  std::cout << out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Early-exit trace replay, threshold calibration and audit"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic trace file");
  std::string synth_config, synth_out, synth_split;
  std::optional<std::uint64_t> synth_seed;
  std::optional<std::size_t> synth_samples;
  synth->add_option("--config", synth_config, "Generator config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  synth->add_option("--out", synth_out, "Output trace file")->required();
  synth->add_option("--seed", synth_seed, "Override the config seed");
  synth->add_option("--samples", synth_samples, "Override the sample count");
  synth->add_option("--split", synth_split,
                    "Override the split tag (train|validation|test)");

  // calibrate
  auto* calibrate =
      app.add_subcommand("calibrate", "Choose thresholds on a validation set");
  std::string cal_val, cal_weights = "cost:0.1", cal_method = "error-rate",
                       cal_out;
  std::vector<double> cal_grid;
  std::optional<double> cal_p;
  calibrate->add_option("--val", cal_val, "Labeled validation traces")
      ->required()
      ->check(CLI::ExistingFile);
  calibrate->add_option("--weights", cal_weights,
                        "cost[:lambda] | accuracy | explicit:<file>");
  calibrate->add_option("--method", cal_method, "error-rate | classical")
      ->check(CLI::IsMember({"error-rate", "classical"}));
  calibrate->add_option("--grid", cal_grid, "Threshold grid (comma separated)")
      ->delimiter(',');
  auto* p_opt = calibrate->add_option(
      "--p", cal_p, "Error-rate target (defaults to final-layer error)");
  calibrate->add_option("--out", cal_out, "Report file (default: stdout)");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Replay one policy");
  std::string ev_test, ev_config, ev_val, ev_out;
  evaluate->add_option("--test", ev_test, "Trace file")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--policy-config", ev_config, "Policy config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--val", ev_val,
                       "Validation traces for accuracy weights")
      ->check(CLI::ExistingFile);
  evaluate->add_option("--out", ev_out, "Report file (default: stdout)");

  // compare
  auto* compare = app.add_subcommand("compare", "Replay several policies");
  std::string cmp_test, cmp_config, cmp_val, cmp_out;
  compare->add_option("--test", cmp_test, "Trace file")
      ->required()
      ->check(CLI::ExistingFile);
  compare->add_option("--policies-config", cmp_config,
                      "JSON array of policy configs")
      ->required()
      ->check(CLI::ExistingFile);
  compare->add_option("--val", cmp_val,
                      "Validation traces for accuracy weights")
      ->check(CLI::ExistingFile);
  compare->add_option("--out", cmp_out, "Write the reports as a JSON array");

  // check-theorem
  auto* theorem = app.add_subcommand(
      "check-theorem", "Check the per-exit sufficient error-rate condition");
  std::string th_test, th_config, th_val, th_out;
  theorem->add_option("--test", th_test, "Labeled trace file")
      ->required()
      ->check(CLI::ExistingFile);
  theorem->add_option("--policy-config", th_config, "BEEM policy config")
      ->required()
      ->check(CLI::ExistingFile);
  theorem->add_option("--val", th_val, "Validation traces for accuracy weights")
      ->check(CLI::ExistingFile);
  theorem->add_option("--out", th_out, "Report file (default: stdout)");

  // inspect
  auto* inspect =
      app.add_subcommand("inspect", "Per-layer walkthrough of one trace");
  std::string in_traces, in_id, in_config;
  inspect->add_option("--traces", in_traces, "Trace file")
      ->required()
      ->check(CLI::ExistingFile);
  inspect->add_option("--trace-id", in_id, "Sample id")->required();
  inspect->add_option("--policy-config", in_config,
                      "BEEM policy config (default: cost weights 0.1, "
                      "alpha 0.2)")
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsageError;
  }

  try {
    if (*synth) {
      beem::SynthConfig cfg = beem::load_synth_config(synth_config);
      if (synth_seed) cfg.seed = *synth_seed;
      if (synth_samples) cfg.samples = *synth_samples;
      if (!synth_split.empty()) cfg.split = beem::parse_split(synth_split);
      beem::save_traces(beem::generate(cfg), synth_out);
    } else if (*calibrate) {
      if (cal_method == "classical" && p_opt->count() > 0) {
        throw UsageError("--p only applies to --method error-rate");
      }
      const beem::Dataset val = beem::load_traces(cal_val);
      const auto weights = resolve_weight_flag(cal_weights, val);
      beem::CalibrationReport report;
      if (cal_method == "classical") {
        report = beem::calibrate_classical(
            val, weights,
            cal_grid.empty() ? beem::default_classical_grid() : cal_grid);
      } else {
        report = beem::calibrate_error_rate(
            val, weights,
            cal_grid.empty() ? beem::default_error_rate_grid() : cal_grid,
            cal_p);
      }
      emit(beem::to_json(report), cal_out);
    } else if (*evaluate) {
      const beem::RunConfig cfg = beem::load_config(ev_config);
      const beem::Dataset test = beem::load_traces(ev_test);
      const auto val = optional_val(ev_val);
      const beem::Policy policy = beem::resolve_policy(
          cfg, test.num_layers(), val ? &*val : nullptr);
      beem::EvalReport report = beem::evaluate(test, policy);
      report.policy = policy_label(cfg);
      emit(beem::to_json(report), ev_out);
    } else if (*compare) {
      const auto configs = beem::load_config_list(cmp_config);
      const beem::Dataset test = beem::load_traces(cmp_test);
      const auto val = optional_val(cmp_val);
      std::vector<beem::Policy> policies;
      for (const auto& c : configs) {
        policies.push_back(beem::resolve_policy(c, test.num_layers(),
                                                val ? &*val : nullptr));
      }
      auto reports = beem::compare(test, policies);
      nlohmann::json all = nlohmann::json::array();
      for (std::size_t i = 0; i < reports.size(); ++i) {
        reports[i].policy = policy_label(configs[i]);
        all.push_back(beem::to_json(reports[i]));
      }
      if (!cmp_out.empty()) beem::save_report(all, cmp_out);
      print_table(reports);
    } else if (*theorem) {
      const beem::RunConfig cfg = beem::load_config(th_config);
      if (cfg.policy != "beem") {
        throw UsageError("check-theorem needs a beem policy config");
      }
      const beem::Dataset test = beem::load_traces(th_test);
      const auto val = optional_val(th_val);
      const beem::Policy policy = beem::resolve_policy(
          cfg, test.num_layers(), val ? &*val : nullptr);
      emit(beem::to_json(beem::check_condition(
               test, std::get<beem::BeemPolicy>(policy))),
           th_out);
    } else if (*inspect) {
      beem::RunConfig cfg;
      if (!in_config.empty()) cfg = beem::load_config(in_config);
      if (cfg.policy != "beem") {
        throw UsageError("inspect needs a beem policy config");
      }
      const beem::Dataset data = beem::load_traces(in_traces);
      const beem::SampleTrace* trace = nullptr;
      for (const auto& u : data.units()) {
        if (u.id() == in_id) {
          trace = &u;
          break;
        }
      }
      if (!trace) throw beem::Error("no trace with id '" + in_id + "'");
      const auto policy = std::get<beem::BeemPolicy>(
          beem::resolve_policy(cfg, data.num_layers()));
      const auto weights =
          beem::materialize_weights(policy.weights, data.num_layers());
      const auto decision = beem::run_beem(*trace, weights, policy.thresholds);

      std::ostringstream out;
      out << "trace " << trace->id() << " label "
          << (trace->true_label() ? std::to_string(*trace->true_label())
                                  : std::string("-"))
          << '\n';
      out << "layer pred confidence  weight      score       alpha\n";
      for (int i = 1; i <= decision.exit_layer; ++i) {
        const auto& p = trace->prediction(i);
        std::string layer = std::to_string(i);
        std::string pred = std::to_string(p.label);
        layer.resize(6, ' ');
        pred.resize(5, ' ');
        out << layer << pred << format_fixed(p.confidence, 9) << ' '
            << format_fixed(weights[i - 1], 9) << ' '
            << format_fixed(decision.per_layer_scores[i - 1], 9) << ' '
            << format_fixed(policy.thresholds[i - 1], 9) << '\n';
      }
      out << "S = [";
      for (std::size_t i = 0; i < decision.per_layer_scores.size(); ++i) {
        if (i) out << ", ";
        out << format_fixed(decision.per_layer_scores[i], 9);
      }
      out << "]\n";
      out << "exit " << decision.exit_layer << " label " << decision.label
          << " score " << format_fixed(decision.score_at_exit, 9) << '\n';
      std::cout << out.str();
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const beem::Error& e) {
    std::cerr << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
  return 0;
}
