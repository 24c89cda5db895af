#include "beem/trace.hpp"

#include <cmath>
#include <utility>

#include "beem/errors.hpp"

namespace beem {

ProbVector::ProbVector(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.size() < 2) {
    throw ValidationError("class_count",
                          "need at least 2 classes, got " +
                              std::to_string(probs_.size()));
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < probs_.size(); ++c) {
    const double v = probs_[c];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ValidationError("probability_range",
                            "entry " + std::to_string(c) + " = " +
                                std::to_string(v) + " outside [0, 1]");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kNormalizationTolerance) {
    throw ValidationError("normalization",
                          "probabilities sum to " + std::to_string(sum));
  }
}

Prediction predict(const ProbVector& probs) {
  Prediction best{0, probs[0]};
  for (std::size_t c = 1; c < probs.num_classes(); ++c) {
    // Strict comparison keeps the lowest index on ties.
    if (probs[c] > best.confidence) {
      best = {static_cast<ClassIndex>(c), probs[c]};
    }
  }
  return best;
}

ExitRecord::ExitRecord(int exit_index, ProbVector probs)
    : exit_index_(exit_index), probs_(std::move(probs)) {
  if (exit_index_ < 1) {
    throw ValidationError("exit_index",
                          "exit index must be >= 1, got " +
                              std::to_string(exit_index_));
  }
}

Prediction predict(const ExitRecord& record) { return predict(record.probs()); }

SampleTrace::SampleTrace(std::string id, std::optional<ClassIndex> true_label,
                         std::vector<ExitRecord> records)
    : id_(std::move(id)),
      true_label_(true_label),
      records_(std::move(records)) {
  if (records_.empty()) {
    throw ValidationError("layer_count", "trace '" + id_ + "' has no exits");
  }
  const std::size_t classes = records_.front().probs().num_classes();
  predictions_.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (records_[i].exit_index() != static_cast<int>(i) + 1) {
      throw ValidationError(
          "exit_order", "trace '" + id_ + "': record " + std::to_string(i) +
                            " has exit index " +
                            std::to_string(records_[i].exit_index()));
    }
    if (records_[i].probs().num_classes() != classes) {
      throw ValidationError("class_count",
                            "trace '" + id_ + "': exit " +
                                std::to_string(i + 1) +
                                " has a different class count");
    }
    predictions_.push_back(predict(records_[i]));
  }
  if (true_label_ &&
      (*true_label_ < 0 || *true_label_ >= static_cast<int>(classes))) {
    throw ValidationError("label_range",
                          "trace '" + id_ + "': label " +
                              std::to_string(*true_label_) + " not in [0, " +
                              std::to_string(classes) + ")");
  }
}

SampleTrace SampleTrace::FromRows(std::string id,
                                  std::optional<ClassIndex> true_label,
                                  std::vector<std::vector<double>> rows) {
  std::vector<ExitRecord> records;
  records.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    records.emplace_back(static_cast<int>(i) + 1,
                         ProbVector(std::move(rows[i])));
  }
  return SampleTrace(std::move(id), true_label, std::move(records));
}

int SampleTrace::num_classes() const noexcept {
  return static_cast<int>(records_.front().probs().num_classes());
}

const Prediction& SampleTrace::prediction(int exit) const {
  if (exit < 1 || exit > num_layers()) {
    throw RangeError("exit " + std::to_string(exit) + " not in [1, " +
                     std::to_string(num_layers()) + "]");
  }
  return predictions_[exit - 1];
}

SampleTrace SampleTrace::WithLabel(std::optional<ClassIndex> label) const {
  SampleTrace copy = *this;
  if (label && (*label < 0 || *label >= num_classes())) {
    throw ValidationError("label_range", "trace '" + id_ + "': label " +
                                             std::to_string(*label) +
                                             " out of range");
  }
  copy.true_label_ = label;
  return copy;
}

int prediction_change_count(const SampleTrace& trace, int upto) {
  if (upto < 1 || upto > trace.num_layers()) {
    throw RangeError("upto " + std::to_string(upto) + " not in [1, " +
                     std::to_string(trace.num_layers()) + "]");
  }
  const auto preds = trace.predictions();
  int changes = 0;
  for (int i = 1; i < upto; ++i) {
    if (preds[i - 1].label != preds[i].label) ++changes;
  }
  return changes;
}

SequenceTrace::SequenceTrace(std::string id,
                             std::vector<SampleTrace> token_traces,
                             ClassIndex eos_token,
                             std::optional<std::vector<ClassIndex>> reference)
    : id_(std::move(id)),
      tokens_(std::move(token_traces)),
      eos_(eos_token),
      reference_(std::move(reference)) {
  if (tokens_.empty()) {
    throw ValidationError("sequence_nonempty",
                          "sequence '" + id_ + "' has no decoding steps");
  }
  const int layers = tokens_.front().num_layers();
  const int classes = tokens_.front().num_classes();
  for (const auto& t : tokens_) {
    if (t.num_layers() != layers || t.num_classes() != classes) {
      throw ValidationError("homogeneous_shape",
                            "sequence '" + id_ +
                                "': token traces differ in L or C");
    }
  }
  if (eos_ < 0 || eos_ >= classes) {
    throw ValidationError("eos_range", "sequence '" + id_ + "': eos token " +
                                           std::to_string(eos_) +
                                           " out of range");
  }
  if (reference_) {
    for (ClassIndex r : *reference_) {
      if (r < 0 || r >= classes) {
        throw ValidationError("label_range",
                              "sequence '" + id_ + "': reference token " +
                                  std::to_string(r) + " out of range");
      }
    }
  }
  for (std::size_t k = 0; k < tokens_.size(); ++k) {
    std::optional<ClassIndex> label;
    if (reference_ && k < reference_->size()) label = (*reference_)[k];
    tokens_[k] = tokens_[k].WithLabel(label);
  }
}

int SequenceTrace::num_layers() const noexcept {
  return tokens_.front().num_layers();
}

int SequenceTrace::num_classes() const noexcept {
  return tokens_.front().num_classes();
}

std::string to_string(TraceMode mode) {
  return mode == TraceMode::kClassification ? "classification" : "sequence";
}

std::string to_string(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kValidation:
      return "validation";
    case Split::kTest:
      return "test";
    case Split::kUnspecified:
      break;
  }
  return "unspecified";
}

Split parse_split(const std::string& text) {
  if (text == "train") return Split::kTrain;
  if (text == "validation") return Split::kValidation;
  if (text == "test") return Split::kTest;
  if (text == "unspecified") return Split::kUnspecified;
  throw ValidationError("split", "unknown split '" + text + "'");
}

namespace {

void check_dims(int layers, int classes) {
  if (layers < 1) {
    throw ValidationError("layer_count",
                          "L must be >= 1, got " + std::to_string(layers));
  }
  if (classes < 2) {
    throw ValidationError("class_count",
                          "C must be >= 2, got " + std::to_string(classes));
  }
}

void check_shape(const std::string& id, int layers, int classes, int want_l,
                 int want_c) {
  if (layers != want_l || classes != want_c) {
    throw ShapeError("trace '" + id + "' has L=" + std::to_string(layers) +
                     ", C=" + std::to_string(classes) + "; dataset has L=" +
                     std::to_string(want_l) + ", C=" + std::to_string(want_c));
  }
}

}  // namespace

Dataset Dataset::Classification(int layers, int classes,
                                std::vector<SampleTrace> samples,
                                Split split) {
  check_dims(layers, classes);
  for (const auto& s : samples) {
    check_shape(s.id(), s.num_layers(), s.num_classes(), layers, classes);
  }
  Dataset d;
  d.mode_ = TraceMode::kClassification;
  d.layers_ = layers;
  d.classes_ = classes;
  d.split_ = split;
  d.samples_ = std::move(samples);
  return d;
}

Dataset Dataset::Sequence(int layers, int classes, ClassIndex eos_token,
                          std::vector<SequenceTrace> sequences, Split split) {
  check_dims(layers, classes);
  if (eos_token < 0 || eos_token >= classes) {
    throw ValidationError("eos_range", "eos token " +
                                           std::to_string(eos_token) +
                                           " out of range");
  }
  for (const auto& s : sequences) {
    check_shape(s.id(), s.num_layers(), s.num_classes(), layers, classes);
    if (s.eos_token() != eos_token) {
      throw ShapeError("sequence '" + s.id() + "' has eos " +
                       std::to_string(s.eos_token()) + ", header has " +
                       std::to_string(eos_token));
    }
  }
  Dataset d;
  d.mode_ = TraceMode::kSequence;
  d.layers_ = layers;
  d.classes_ = classes;
  d.eos_ = eos_token;
  d.split_ = split;
  d.sequences_ = std::move(sequences);
  for (const auto& s : d.sequences_) {
    for (const auto& t : s.token_traces()) d.units_.push_back(t);
  }
  return d;
}

bool Dataset::fully_labeled() const noexcept {
  for (const auto& u : units()) {
    if (!u.true_label()) return false;
  }
  return true;
}

void require_labeled(const Dataset& data, const std::string& what) {
  if (data.units().empty()) throw EmptyDataError(what);
  for (const auto& u : data.units()) {
    if (!u.true_label()) {
      throw LabelRequiredError(what + ": trace '" + u.id() +
                               "' has no label");
    }
  }
}

}  // namespace beem
