#include "beem/trace_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "beem/errors.hpp"

namespace beem {

using nlohmann::json;

namespace {

void append_real(std::string& out, double v) {
  if (!std::isfinite(v)) {
    out += "null";
    return;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9f", v);
  out += buf;
}

void append_canonical(std::string& out, const json& v) {
  switch (v.type()) {
    case json::value_t::object: {
      out += '{';
      bool first = true;
      // nlohmann::json objects are std::map-backed, so iteration is sorted.
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) out += ',';
        first = false;
        out += json(it.key()).dump();
        out += ':';
        append_canonical(out, it.value());
      }
      out += '}';
      break;
    }
    case json::value_t::array: {
      out += '[';
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        append_canonical(out, v[i]);
      }
      out += ']';
      break;
    }
    case json::value_t::number_float:
      append_real(out, v.get<double>());
      break;
    default:
      out += v.dump();
  }
}

// Record-level schema checks raise ParseError with the line number.
class LineContext {
 public:
  LineContext(std::string source, std::size_t line)
      : source_(std::move(source)), line_(line) {}

  [[noreturn]] void fail(const std::string& detail) const {
    throw ParseError(line_, source_ + ": " + detail);
  }

  void expect_keys(const json& obj, const std::set<std::string>& required,
                   const std::set<std::string>& optional = {}) const {
    if (!obj.is_object()) fail("expected a JSON object");
    for (const auto& k : required) {
      if (!obj.contains(k)) fail("missing key \"" + k + "\"");
    }
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (!required.count(it.key()) && !optional.count(it.key())) {
        fail("unknown key \"" + it.key() + "\"");
      }
    }
  }

  int integer(const json& v, const std::string& key) const {
    if (!v.is_number_integer()) fail("\"" + key + "\" must be an integer");
    return v.get<int>();
  }

  std::string string(const json& v, const std::string& key) const {
    if (!v.is_string()) fail("\"" + key + "\" must be a string");
    return v.get<std::string>();
  }

  std::size_t line() const { return line_; }
  const std::string& source() const { return source_; }

 private:
  std::string source_;
  std::size_t line_;
};

struct Header {
  int layers = 0;
  int classes = 0;
  TraceMode mode = TraceMode::kClassification;
  std::optional<ClassIndex> eos;
  Split split = Split::kUnspecified;
};

Header parse_header(const json& h, const LineContext& ctx) {
  ctx.expect_keys(h, {"version", "L", "C", "mode"}, {"eos_token", "split"});
  Header out;
  const int version = ctx.integer(h["version"], "version");
  if (version != kTraceFormatVersion) {
    throw ValidationError("version", "unsupported trace format version " +
                                         std::to_string(version));
  }
  out.layers = ctx.integer(h["L"], "L");
  out.classes = ctx.integer(h["C"], "C");
  if (out.layers < 1) {
    throw ValidationError("layer_count", "header L must be >= 1");
  }
  if (out.classes < 2) {
    throw ValidationError("class_count", "header C must be >= 2");
  }
  const std::string mode = ctx.string(h["mode"], "mode");
  if (mode == "classification") {
    out.mode = TraceMode::kClassification;
  } else if (mode == "sequence") {
    out.mode = TraceMode::kSequence;
  } else {
    ctx.fail("unknown mode \"" + mode + "\"");
  }
  const bool has_eos = h.contains("eos_token") && !h["eos_token"].is_null();
  if (has_eos != (out.mode == TraceMode::kSequence)) {
    throw ValidationError("mode_consistency",
                          "eos_token is required in sequence mode and only "
                          "there");
  }
  if (has_eos) out.eos = ctx.integer(h["eos_token"], "eos_token");
  if (h.contains("split")) {
    out.split = parse_split(ctx.string(h["split"], "split"));
  }
  return out;
}

std::vector<std::vector<double>> parse_exits(const json& exits,
                                             const Header& header,
                                             const LineContext& ctx) {
  if (!exits.is_array()) ctx.fail("exits must be an array");
  if (exits.size() != static_cast<std::size_t>(header.layers)) {
    throw ShapeError("line " + std::to_string(ctx.line()) + ": " +
                     std::to_string(exits.size()) + " exits, header L = " +
                     std::to_string(header.layers));
  }
  std::vector<std::vector<double>> rows;
  rows.reserve(exits.size());
  for (const auto& row : exits) {
    if (!row.is_array()) ctx.fail("each exit must be an array of reals");
    if (row.size() != static_cast<std::size_t>(header.classes)) {
      throw ShapeError("line " + std::to_string(ctx.line()) + ": " +
                       std::to_string(row.size()) +
                       " probabilities, header C = " +
                       std::to_string(header.classes));
    }
    std::vector<double> probs;
    probs.reserve(row.size());
    for (const auto& v : row) {
      if (!v.is_number()) ctx.fail("probabilities must be numbers");
      probs.push_back(v.get<double>());
    }
    rows.push_back(std::move(probs));
  }
  return rows;
}

std::optional<ClassIndex> optional_int(const json& v, const std::string& key,
                                       const LineContext& ctx) {
  if (v.is_null()) return std::nullopt;
  return ctx.integer(v, key);
}

SampleTrace parse_sample(const json& rec, const Header& header,
                         const LineContext& ctx) {
  ctx.expect_keys(rec, {"id", "label", "exits"});
  std::string id = ctx.string(rec["id"], "id");
  const auto label = optional_int(rec["label"], "label", ctx);
  return SampleTrace::FromRows(std::move(id), label,
                               parse_exits(rec["exits"], header, ctx));
}

SequenceTrace parse_sequence(const json& rec, const Header& header,
                             const LineContext& ctx) {
  ctx.expect_keys(rec, {"id", "eos", "tokens", "ref"});
  std::string id = ctx.string(rec["id"], "id");
  const int eos = ctx.integer(rec["eos"], "eos");
  if (eos != *header.eos) {
    throw ShapeError("line " + std::to_string(ctx.line()) + ": record eos " +
                     std::to_string(eos) + ", header eos_token " +
                     std::to_string(*header.eos));
  }
  const json& tokens = rec["tokens"];
  if (!tokens.is_array()) ctx.fail("tokens must be an array");
  std::vector<SampleTrace> steps;
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    steps.push_back(SampleTrace::FromRows(id + "/" + std::to_string(k),
                                          std::nullopt,
                                          parse_exits(tokens[k], header, ctx)));
  }
  std::optional<std::vector<ClassIndex>> ref;
  if (!rec["ref"].is_null()) {
    if (!rec["ref"].is_array()) ctx.fail("ref must be an array or null");
    ref.emplace();
    for (const auto& r : rec["ref"]) ref->push_back(ctx.integer(r, "ref"));
  }
  return SequenceTrace(std::move(id), std::move(steps), eos, std::move(ref));
}

json exits_json(const SampleTrace& trace) {
  json exits = json::array();
  for (const auto& r : trace.records()) {
    json row = json::array();
    for (double p : r.probs().values()) row.push_back(p);
    exits.push_back(std::move(row));
  }
  return exits;
}

json nullable(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> get_nullable(const json& v) {
  if (v.is_null()) return std::nullopt;
  return v.get<T>();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_document(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(0, path.string() + ": " + e.what());
  }
}

void require_object(const json& j, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + " must be a JSON object");
}

template <class T>
T config_value(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("key \"" + key + "\" has the wrong type");
  }
}

}  // namespace

std::string canonical_json(const json& value) {
  std::string out;
  append_canonical(out, value);
  return out;
}

Dataset read_traces(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) {
    throw ParseError(1, source + ": missing header line");
  }
  ++line_no;

  auto parse_line = [&](const std::string& text) {
    if (text.empty()) throw ParseError(line_no, source + ": empty line");
    try {
      return json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, source + ": " + e.what());
    }
  };

  const Header header =
      parse_header(parse_line(line), LineContext(source, line_no));
  std::vector<SampleTrace> samples;
  std::vector<SequenceTrace> sequences;
  while (std::getline(in, line)) {
    ++line_no;
    const LineContext ctx(source, line_no);
    const json rec = parse_line(line);
    try {
      if (header.mode == TraceMode::kClassification) {
        samples.push_back(parse_sample(rec, header, ctx));
      } else {
        sequences.push_back(parse_sequence(rec, header, ctx));
      }
    } catch (const ValidationError& e) {
      throw ValidationError(e.invariant(), source + " line " +
                                               std::to_string(line_no) + ": " +
                                               e.what());
    }
  }
  if (header.mode == TraceMode::kClassification) {
    return Dataset::Classification(header.layers, header.classes,
                                   std::move(samples), header.split);
  }
  return Dataset::Sequence(header.layers, header.classes, *header.eos,
                           std::move(sequences), header.split);
}

Dataset load_traces(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  return read_traces(in, path.string());
}

void write_traces(const Dataset& data, std::ostream& out) {
  json header = {{"version", kTraceFormatVersion},
                 {"L", data.num_layers()},
                 {"C", data.num_classes()},
                 {"mode", to_string(data.mode())}};
  if (data.eos_token()) header["eos_token"] = *data.eos_token();
  if (data.split() != Split::kUnspecified) {
    header["split"] = to_string(data.split());
  }
  out << canonical_json(header) << '\n';
  if (data.mode() == TraceMode::kClassification) {
    for (const auto& s : data.samples()) {
      json rec = {{"id", s.id()}, {"exits", exits_json(s)}};
      rec["label"] = s.true_label() ? json(*s.true_label()) : json(nullptr);
      out << canonical_json(rec) << '\n';
    }
    return;
  }
  for (const auto& seq : data.sequences()) {
    json tokens = json::array();
    for (const auto& t : seq.token_traces()) tokens.push_back(exits_json(t));
    json rec = {{"id", seq.id()}, {"eos", seq.eos_token()}, {"tokens", tokens}};
    rec["ref"] = seq.reference() ? json(*seq.reference()) : json(nullptr);
    out << canonical_json(rec) << '\n';
  }
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string(), "cannot open for writing");
    out << contents;
    out.flush();
    if (!out) {
      std::error_code ignored;
      std::filesystem::remove(tmp, ignored);
      throw IoError(path.string(), "write failed");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError(path.string(), "rename failed");
  }
}

void save_traces(const Dataset& data, const std::filesystem::path& path) {
  std::ostringstream out;
  write_traces(data, out);
  write_file_atomic(path, out.str());
}

RunConfig parse_config(const json& j) {
  require_object(j, "config");
  RunConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    if (k == "name") {
      c.name = config_value<std::string>(v, k);
    } else if (k == "policy") {
      c.policy = config_value<std::string>(v, k);
    } else if (k == "weights") {
      c.weights = config_value<std::string>(v, k);
    } else if (k == "lambda") {
      c.lambda = config_value<double>(v, k);
    } else if (k == "weight_values") {
      c.weight_values = config_value<std::vector<double>>(v, k);
    } else if (k == "accuracies") {
      c.accuracies = config_value<std::vector<double>>(v, k);
    } else if (k == "alpha") {
      c.alpha = v.is_null() ? std::nullopt
                            : std::optional(config_value<double>(v, k));
    } else if (k == "thresholds") {
      c.thresholds = config_value<std::vector<double>>(v, k);
    } else if (k == "calibration") {
      c.calibration = config_value<std::string>(v, k);
    } else if (k == "tau") {
      c.tau = config_value<double>(v, k);
    } else if (k == "patience") {
      c.patience = config_value<int>(v, k);
    } else if (k == "quorum") {
      c.quorum = config_value<int>(v, k);
    } else if (k == "seed") {
      c.seed = config_value<std::uint64_t>(v, k);
    } else if (k == "method") {
      c.method = config_value<std::string>(v, k);
    } else if (k == "grid_classical") {
      c.grid_classical = config_value<std::vector<double>>(v, k);
    } else if (k == "grid_error_rate") {
      c.grid_error_rate = config_value<std::vector<double>>(v, k);
    } else if (k == "p") {
      c.p = v.is_null() ? std::nullopt
                        : std::optional(config_value<double>(v, k));
    } else {
      throw ConfigError("unknown key \"" + k + "\"");
    }
  }
  static const std::set<std::string> kPolicies = {
      "beem", "confidence", "patience", "majority", "final"};
  if (!kPolicies.count(c.policy)) {
    throw ConfigError("unknown policy \"" + c.policy + "\"");
  }
  if (c.weights != "cost" && c.weights != "accuracy" &&
      c.weights != "explicit") {
    throw ConfigError("unknown weights \"" + c.weights + "\"");
  }
  if (c.method != kMethodErrorRate && c.method != kMethodClassical) {
    throw ConfigError("unknown method \"" + c.method + "\"");
  }
  return c;
}

json to_json(const RunConfig& c) {
  return {{"name", c.name},
          {"policy", c.policy},
          {"weights", c.weights},
          {"lambda", c.lambda},
          {"weight_values", c.weight_values},
          {"accuracies", c.accuracies},
          {"alpha", nullable(c.alpha)},
          {"thresholds", c.thresholds},
          {"calibration", c.calibration},
          {"tau", c.tau},
          {"patience", c.patience},
          {"quorum", c.quorum},
          {"seed", c.seed},
          {"method", c.method},
          {"grid_classical", c.grid_classical},
          {"grid_error_rate", c.grid_error_rate},
          {"p", nullable(c.p)}};
}

RunConfig load_config(const std::filesystem::path& path) {
  try {
    return parse_config(parse_document(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void save_config(const RunConfig& config, const std::filesystem::path& path) {
  write_file_atomic(path, canonical_json(to_json(config)) + "\n");
}

std::vector<RunConfig> load_config_list(const std::filesystem::path& path) {
  const json doc = parse_document(path);
  if (!doc.is_array() || doc.empty()) {
    throw ConfigError(path.string() +
                      ": expected a non-empty JSON array of configs");
  }
  std::vector<RunConfig> out;
  for (const auto& item : doc) {
    try {
      out.push_back(parse_config(item));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }
  return out;
}

SynthConfig parse_synth_config(const json& j) {
  require_object(j, "synth config");
  SynthConfig c;
  bool have_rates = false;
  auto shape = [](const json& v, const std::string& key) {
    const auto pair = config_value<std::vector<double>>(v, key);
    if (pair.size() != 2) {
      throw ConfigError("key \"" + key + "\" must be [alpha, beta]");
    }
    return BetaShape{pair[0], pair[1]};
  };
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    if (k == "layers") {
      c.layers = config_value<int>(v, k);
    } else if (k == "classes") {
      c.classes = config_value<int>(v, k);
    } else if (k == "samples") {
      c.samples = config_value<std::size_t>(v, k);
    } else if (k == "error_rates") {
      c.error_rates = config_value<std::vector<double>>(v, k);
      have_rates = true;
    } else if (k == "persistence") {
      c.persistence = config_value<double>(v, k);
    } else if (k == "conf_correct") {
      c.conf_correct = shape(v, k);
    } else if (k == "conf_wrong") {
      c.conf_wrong = shape(v, k);
    } else if (k == "seed") {
      c.seed = config_value<std::uint64_t>(v, k);
    } else if (k == "split") {
      c.split = parse_split(config_value<std::string>(v, k));
    } else {
      throw ConfigError("unknown key \"" + k + "\"");
    }
  }
  if (!have_rates) throw ConfigError("missing key \"error_rates\"");
  validate(c);
  return c;
}

json to_json(const SynthConfig& c) {
  return {{"layers", c.layers},
          {"classes", c.classes},
          {"samples", c.samples},
          {"error_rates", c.error_rates},
          {"persistence", c.persistence},
          {"conf_correct", {c.conf_correct.alpha, c.conf_correct.beta}},
          {"conf_wrong", {c.conf_wrong.alpha, c.conf_wrong.beta}},
          {"seed", c.seed},
          {"split", to_string(c.split)}};
}

SynthConfig load_synth_config(const std::filesystem::path& path) {
  try {
    return parse_synth_config(parse_document(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

json to_json(const CalibrationReport& r) {
  json per_exit = json::array();
  for (const auto& e : r.per_exit) {
    per_exit.push_back({{"exit", e.exit},
                        {"c_stop", e.c_stop},
                        {"c_misc_fraction", e.c_misc_fraction},
                        {"alpha", e.alpha},
                        {"feasible", e.feasible}});
  }
  return {{"kind", "calibration"},
          {"method", r.method},
          {"weights", r.weights},
          {"thresholds", std::vector<double>(r.thresholds.values().begin(),
                                             r.thresholds.values().end())},
          {"per_exit", per_exit},
          {"final_error_rate", r.final_error_rate},
          {"grid", r.grid}};
}

CalibrationReport calibration_report_from_json(const json& j) {
  try {
    if (j.at("kind") != "calibration") {
      throw ConfigError("not a calibration report");
    }
    CalibrationReport r;
    r.method = j.at("method").get<std::string>();
    r.weights = j.at("weights").get<std::vector<double>>();
    r.thresholds =
        ThresholdVector(j.at("thresholds").get<std::vector<double>>());
    for (const auto& e : j.at("per_exit")) {
      r.per_exit.push_back({e.at("exit").get<int>(),
                            e.at("c_stop").get<std::size_t>(),
                            e.at("c_misc_fraction").get<double>(),
                            e.at("alpha").get<double>(),
                            e.at("feasible").get<bool>()});
    }
    r.final_error_rate = j.at("final_error_rate").get<double>();
    r.grid = j.at("grid").get<std::vector<double>>();
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed calibration report: ") +
                      e.what());
  }
}

json to_json(const EvalReport& r) {
  json errors = json::array();
  for (const auto& e : r.per_exit_error) errors.push_back(nullable(e));
  return {{"kind", "evaluation"},
          {"policy", r.policy},
          {"accuracy", nullable(r.accuracy)},
          {"speedup", r.speedup},
          {"time_reduction", r.time_reduction},
          {"exit_counts", r.exit_counts},
          {"per_exit_error", errors},
          {"sample_count", r.sample_count},
          {"unterminated", r.unterminated}};
}

EvalReport eval_report_from_json(const json& j) {
  try {
    if (j.at("kind") != "evaluation") {
      throw ConfigError("not an evaluation report");
    }
    EvalReport r;
    r.policy = j.at("policy").get<std::string>();
    r.accuracy = get_nullable<double>(j.at("accuracy"));
    r.speedup = j.at("speedup").get<double>();
    r.time_reduction = j.at("time_reduction").get<double>();
    r.exit_counts = j.at("exit_counts").get<std::vector<std::size_t>>();
    for (const auto& e : j.at("per_exit_error")) {
      r.per_exit_error.push_back(get_nullable<double>(e));
    }
    r.sample_count = j.at("sample_count").get<std::size_t>();
    r.unterminated = j.at("unterminated").get<std::size_t>();
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed evaluation report: ") + e.what());
  }
}

json to_json(const TheoremReport& r) {
  json per_exit = json::array();
  for (const auto& c : r.per_exit) {
    const auto& a = c.a_estimate;
    json sat = c.satisfied ? json(*c.satisfied) : json(nullptr);
    per_exit.push_back({{"exit", c.exit},
                        {"q", c.q},
                        {"support0", a.support0},
                        {"support1", a.support1},
                        {"exits0", a.exits0},
                        {"exits1", a.exits1},
                        {"a0", nullable(a.a0)},
                        {"a1", nullable(a.a1)},
                        {"a", nullable(a.ratio)},
                        {"b", nullable(c.b)},
                        {"bound", nullable(c.bound)},
                        {"satisfied", sat}});
  }
  return {{"kind", "theorem"},
          {"p", r.p},
          {"per_exit", per_exit},
          {"estimable_exits", r.estimable_exits},
          {"all_satisfied", r.all_satisfied}};
}

TheoremReport theorem_report_from_json(const json& j) {
  try {
    if (j.at("kind") != "theorem") throw ConfigError("not a theorem report");
    TheoremReport r;
    r.p = j.at("p").get<double>();
    for (const auto& e : j.at("per_exit")) {
      ExitCondition c;
      c.exit = e.at("exit").get<int>();
      c.q = e.at("q").get<double>();
      c.a_estimate.exit = c.exit;
      c.a_estimate.support0 = e.at("support0").get<std::size_t>();
      c.a_estimate.support1 = e.at("support1").get<std::size_t>();
      c.a_estimate.exits0 = e.at("exits0").get<std::size_t>();
      c.a_estimate.exits1 = e.at("exits1").get<std::size_t>();
      c.a_estimate.a0 = get_nullable<double>(e.at("a0"));
      c.a_estimate.a1 = get_nullable<double>(e.at("a1"));
      c.a_estimate.ratio = get_nullable<double>(e.at("a"));
      c.b = get_nullable<double>(e.at("b"));
      c.bound = get_nullable<double>(e.at("bound"));
      c.satisfied = get_nullable<bool>(e.at("satisfied"));
      r.per_exit.push_back(std::move(c));
    }
    r.estimable_exits = j.at("estimable_exits").get<std::size_t>();
    r.all_satisfied = j.at("all_satisfied").get<bool>();
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed theorem report: ") + e.what());
  }
}

void save_report(const json& report, const std::filesystem::path& path) {
  write_file_atomic(path, canonical_json(report) + "\n");
}

json load_report(const std::filesystem::path& path) {
  return parse_document(path);
}

}  // namespace beem
