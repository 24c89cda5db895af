#pragma once

// Multi-exit inference traces: per-exit class distributions for one input,
// replayable by any exit policy.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace beem {

using ClassIndex = int;

// Entries of a probability vector must sum to 1 within this absolute bound.
inline constexpr double kNormalizationTolerance = 1e-6;

class ProbVector {
 public:
  // Throws ValidationError ("class_count", "probability_range",
  // "normalization") when the vector is not a distribution over >= 2 classes.
  explicit ProbVector(std::vector<double> probs);

  std::span<const double> values() const noexcept { return probs_; }
  std::size_t num_classes() const noexcept { return probs_.size(); }
  double operator[](std::size_t c) const { return probs_[c]; }

  bool operator==(const ProbVector&) const = default;

 private:
  std::vector<double> probs_;
};

// Exit prediction: argmax label (lowest index on ties) and its probability.
struct Prediction {
  ClassIndex label = 0;
  double confidence = 0.0;

  bool operator==(const Prediction&) const = default;
};

Prediction predict(const ProbVector& probs);

class ExitRecord {
 public:
  ExitRecord(int exit_index, ProbVector probs);

  int exit_index() const noexcept { return exit_index_; }
  const ProbVector& probs() const noexcept { return probs_; }

  bool operator==(const ExitRecord&) const = default;

 private:
  int exit_index_;
  ProbVector probs_;
};

Prediction predict(const ExitRecord& record);

// One input's trip through layers 1..L. Immutable once built; predictions are
// computed at construction.
class SampleTrace {
 public:
  SampleTrace(std::string id, std::optional<ClassIndex> true_label,
              std::vector<ExitRecord> records);

  // Builds records 1..L from raw probability rows.
  static SampleTrace FromRows(std::string id,
                              std::optional<ClassIndex> true_label,
                              std::vector<std::vector<double>> rows);

  const std::string& id() const noexcept { return id_; }
  const std::optional<ClassIndex>& true_label() const noexcept {
    return true_label_;
  }
  std::span<const ExitRecord> records() const noexcept { return records_; }
  int num_layers() const noexcept { return static_cast<int>(records_.size()); }
  int num_classes() const noexcept;

  // `exit` is 1-based.
  const Prediction& prediction(int exit) const;
  std::span<const Prediction> predictions() const noexcept {
    return predictions_;
  }

  SampleTrace WithLabel(std::optional<ClassIndex> label) const;

  bool operator==(const SampleTrace& other) const {
    return id_ == other.id_ && true_label_ == other.true_label_ &&
           records_ == other.records_;
  }

 private:
  std::string id_;
  std::optional<ClassIndex> true_label_;
  std::vector<ExitRecord> records_;
  std::vector<Prediction> predictions_;
};

// Number of adjacent prediction changes among exits 1..upto.
// Throws RangeError unless 1 <= upto <= L.
int prediction_change_count(const SampleTrace& trace, int upto);

// Autoregressive decoding trace: one SampleTrace per decoding step over the
// vocabulary. Token traces are relabelled from `reference` (teacher-forced
// view) when a reference is present.
class SequenceTrace {
 public:
  SequenceTrace(std::string id, std::vector<SampleTrace> token_traces,
                ClassIndex eos_token,
                std::optional<std::vector<ClassIndex>> reference);

  const std::string& id() const noexcept { return id_; }
  std::span<const SampleTrace> token_traces() const noexcept {
    return tokens_;
  }
  ClassIndex eos_token() const noexcept { return eos_; }
  const std::optional<std::vector<ClassIndex>>& reference() const noexcept {
    return reference_;
  }
  int num_layers() const noexcept;
  int num_classes() const noexcept;

  bool operator==(const SequenceTrace&) const = default;

 private:
  std::string id_;
  std::vector<SampleTrace> tokens_;
  ClassIndex eos_;
  std::optional<std::vector<ClassIndex>> reference_;
};

enum class TraceMode { kClassification, kSequence };
enum class Split { kUnspecified, kTrain, kValidation, kTest };

std::string to_string(TraceMode mode);
std::string to_string(Split split);
Split parse_split(const std::string& text);

// Homogeneous collection of traces. Decision units are the samples in
// classification mode and every recorded token step in sequence mode.
class Dataset {
 public:
  static Dataset Classification(int layers, int classes,
                                std::vector<SampleTrace> samples,
                                Split split = Split::kUnspecified);
  static Dataset Sequence(int layers, int classes, ClassIndex eos_token,
                          std::vector<SequenceTrace> sequences,
                          Split split = Split::kUnspecified);

  TraceMode mode() const noexcept { return mode_; }
  int num_layers() const noexcept { return layers_; }
  int num_classes() const noexcept { return classes_; }
  std::optional<ClassIndex> eos_token() const noexcept { return eos_; }
  Split split() const noexcept { return split_; }

  std::span<const SampleTrace> samples() const noexcept { return samples_; }
  std::span<const SequenceTrace> sequences() const noexcept {
    return sequences_;
  }
  // Samples, or all token traces flattened in order.
  std::span<const SampleTrace> units() const noexcept {
    return mode_ == TraceMode::kClassification ? std::span(samples_)
                                               : std::span(units_);
  }
  std::size_t size() const noexcept {
    return mode_ == TraceMode::kClassification ? samples_.size()
                                               : sequences_.size();
  }
  bool empty() const noexcept { return size() == 0; }

  // True iff every decision unit carries a label.
  bool fully_labeled() const noexcept;

  bool operator==(const Dataset& other) const {
    return mode_ == other.mode_ && layers_ == other.layers_ &&
           classes_ == other.classes_ && eos_ == other.eos_ &&
           split_ == other.split_ && samples_ == other.samples_ &&
           sequences_ == other.sequences_;
  }

 private:
  Dataset() = default;

  TraceMode mode_ = TraceMode::kClassification;
  int layers_ = 0;
  int classes_ = 0;
  std::optional<ClassIndex> eos_;
  Split split_ = Split::kUnspecified;
  std::vector<SampleTrace> samples_;
  std::vector<SequenceTrace> sequences_;
  std::vector<SampleTrace> units_;
};

// Throws LabelRequiredError unless every unit is labeled, EmptyDataError if
// there are no units. `what` names the calling operation.
void require_labeled(const Dataset& data, const std::string& what);

}  // namespace beem
