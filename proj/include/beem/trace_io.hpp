#pragma once

// Line-delimited trace files, run configurations and reports.
//
// Trace file, version 1. The first line is the header object
//   {"C":<int>,"L":<int>,"eos_token":<int>,"mode":"sequence","split":...,
//    "version":1}
// ("eos_token" only in sequence mode, "split" optional). Each following line
// is one record:
//   classification: {"exits":[[p x C] x L],"id":<str>,"label":<int>|null}
//   sequence:       {"eos":<int>,"id":<str>,"ref":[<int>...]|null,
//                    "tokens":[[[p x C] x L] per step]}
// Writers emit canonical text: sorted keys, no whitespace, reals with exactly
// nine decimals. Readers reject anything that violates a trace invariant.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "beem/calibration.hpp"
#include "beem/evaluation.hpp"
#include "beem/policy.hpp"
#include "beem/synth.hpp"
#include "beem/theory.hpp"
#include "beem/trace.hpp"

namespace beem {

inline constexpr int kTraceFormatVersion = 1;

// Canonical single-line rendering: sorted keys, reals as %.9f, NaN/inf as
// null.
std::string canonical_json(const nlohmann::json& value);

// `source` names the stream in error messages.
Dataset read_traces(std::istream& in, const std::string& source = "<stream>");
Dataset load_traces(const std::filesystem::path& path);
void write_traces(const Dataset& data, std::ostream& out);
void save_traces(const Dataset& data, const std::filesystem::path& path);

// Writes `contents` to `path` through a temporary sibling and a rename, so a
// failed write leaves no partial file.
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& contents);

// Flat key-value run configuration shared by the CLI commands. Every key is
// optional; omitted keys take the defaults below.
struct RunConfig {
  std::string name;                       // "name": report label
  std::string policy = "beem";            // beem|confidence|patience|majority|final
  std::string weights = "cost";           // cost|accuracy|explicit
  double lambda = 0.1;                    // "lambda"
  std::vector<double> weight_values;      // "weight_values" (explicit)
  std::vector<double> accuracies;         // "accuracies" (accuracy weights)
  std::optional<double> alpha;            // "alpha": uniform threshold
  std::vector<double> thresholds;         // "thresholds": per-exit
  std::string calibration;                // "calibration": report path
  double tau = 0.9;                       // "tau"
  int patience = 2;                       // "patience"
  int quorum = 3;                         // "quorum"
  std::uint64_t seed = 0;                 // "seed"
  std::string method = kMethodErrorRate;  // "method"
  std::vector<double> grid_classical = default_classical_grid();
  std::vector<double> grid_error_rate = default_error_rate_grid();
  std::optional<double> p;                // "p": error-rate override

  bool operator==(const RunConfig&) const = default;
};

// Uniform threshold used by a BEEM policy with neither "alpha",
// "thresholds" nor "calibration".
inline constexpr double kDefaultAlpha = 0.2;

RunConfig parse_config(const nlohmann::json& object);
nlohmann::json to_json(const RunConfig& config);
RunConfig load_config(const std::filesystem::path& path);
void save_config(const RunConfig& config, const std::filesystem::path& path);

// Builds the policy a config describes for `layers` exits. BEEM thresholds
// come from "calibration" (which also supplies weights), "thresholds",
// "alpha", or kDefaultAlpha, in that order. Accuracy weights without
// "accuracies" are measured on `validation`.
Policy resolve_policy(const RunConfig& config, int layers,
                      const Dataset* validation = nullptr);

// A JSON array of flat configs.
std::vector<RunConfig> load_config_list(const std::filesystem::path& path);

SynthConfig parse_synth_config(const nlohmann::json& object);
nlohmann::json to_json(const SynthConfig& config);
SynthConfig load_synth_config(const std::filesystem::path& path);

nlohmann::json to_json(const CalibrationReport& report);
CalibrationReport calibration_report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TheoremReport& report);
TheoremReport theorem_report_from_json(const nlohmann::json& j);

// Canonical text plus trailing newline, written atomically.
void save_report(const nlohmann::json& report, const std::filesystem::path& path);
nlohmann::json load_report(const std::filesystem::path& path);

}  // namespace beem
