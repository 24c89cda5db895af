#pragma once

// Exit policies: the weighted-confidence ensemble rule and the baselines it is
// compared against (confidence threshold, patience, majority vote, final
// layer only).

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "beem/trace.hpp"

namespace beem {

// w_i = lambda * i.
struct CostWeights {
  double lambda = 0.1;
  bool operator==(const CostWeights&) const = default;
};

// w_i = validation accuracy of exit i, used verbatim.
struct AccuracyWeights {
  std::vector<double> accuracies;
  bool operator==(const AccuracyWeights&) const = default;
};

struct ExplicitWeights {
  std::vector<double> weights;
  bool operator==(const ExplicitWeights&) const = default;
};

using WeightScheme = std::variant<CostWeights, AccuracyWeights, ExplicitWeights>;

// Throws ShapeError on a length mismatch and ValidationError("weight_positive")
// for any non-positive weight.
std::vector<double> materialize_weights(const WeightScheme& scheme, int layers);

// Per-exit thresholds alpha_1..alpha_L. The final exit always fires, so
// alpha_L only matters for reporting.
class ThresholdVector {
 public:
  ThresholdVector() = default;
  // Entries must be finite and >= 0 (ValidationError "threshold_range").
  explicit ThresholdVector(std::vector<double> alphas);
  static ThresholdVector Uniform(double alpha, int layers);

  std::span<const double> values() const noexcept { return alphas_; }
  std::size_t size() const noexcept { return alphas_.size(); }
  double operator[](std::size_t i) const { return alphas_[i]; }

  bool operator==(const ThresholdVector&) const = default;

 private:
  std::vector<double> alphas_;
};

struct BeemPolicy {
  WeightScheme weights = CostWeights{};
  ThresholdVector thresholds;
  bool operator==(const BeemPolicy&) const = default;
};

struct ConfidencePolicy {
  double tau = 0.9;
  bool operator==(const ConfidencePolicy&) const = default;
};

struct PatiencePolicy {
  int patience = 2;
  bool operator==(const PatiencePolicy&) const = default;
};

struct MajorityPolicy {
  int quorum = 3;
  bool operator==(const MajorityPolicy&) const = default;
};

struct FinalOnlyPolicy {
  bool operator==(const FinalOnlyPolicy&) const = default;
};

using Policy = std::variant<BeemPolicy, ConfidencePolicy, PatiencePolicy,
                            MajorityPolicy, FinalOnlyPolicy>;

// Short stable name: "beem", "confidence", "patience", "majority", "final".
std::string policy_kind(const Policy& policy);

// Throws ValidationError when a parameter is out of range for `layers`.
void validate_policy(const Policy& policy, int layers);

struct ExitDecision {
  int exit_layer = 0;
  ClassIndex label = 0;
  double score_at_exit = 0.0;
  // Policy score at layers 1..exit_layer: S_i for BEEM, C_i for confidence
  // and final-only, agreement run length for patience, leading vote count for
  // majority.
  std::vector<double> per_layer_scores;

  bool operator==(const ExitDecision&) const = default;
};

struct BeemState {
  double score = 0.0;
  ClassIndex label = 0;
};

// One step of the weighted-confidence recurrence. Without a previous label
// (first exit) the score is weight * confidence; otherwise the previous score
// accumulates when the label repeats and resets when it changes.
BeemState beem_step(double prev_score, std::optional<ClassIndex> prev_label,
                    const Prediction& current, double weight);
BeemState beem_step(double prev_score, std::optional<ClassIndex> prev_label,
                    const ExitRecord& record, double weight);

// All L scores S_1..S_L, independent of thresholds.
std::vector<double> beem_scores(const SampleTrace& trace,
                                std::span<const double> weights);

ExitDecision run_beem(const SampleTrace& trace, std::span<const double> weights,
                      const ThresholdVector& thresholds);
ExitDecision run_beem(const SampleTrace& trace, const WeightScheme& weights,
                      const ThresholdVector& thresholds);
ExitDecision run_confidence(const SampleTrace& trace, double tau);
ExitDecision run_patience(const SampleTrace& trace, int patience);
ExitDecision run_majority(const SampleTrace& trace, int quorum);
ExitDecision run_final_only(const SampleTrace& trace);

// A policy bound to a layer count, with weights materialized once.
class PolicyRunner {
 public:
  PolicyRunner(Policy policy, int layers);

  ExitDecision operator()(const SampleTrace& trace) const;
  const Policy& policy() const noexcept { return policy_; }
  int num_layers() const noexcept { return layers_; }

 private:
  Policy policy_;
  int layers_;
  std::vector<double> weights_;
};

ExitDecision run_policy(const SampleTrace& trace, const Policy& policy);

struct SequenceDecision {
  std::vector<ClassIndex> tokens;
  std::vector<int> exit_layers;
  // False when no emitted token was the end-of-sequence token.
  bool terminated = false;
};

// Applies the policy to each decoding step in order, stopping after the
// end-of-sequence token is emitted. Policy state does not carry across steps.
SequenceDecision run_sequence(const SequenceTrace& seq, const Policy& policy);
SequenceDecision run_sequence(const SequenceTrace& seq,
                              const PolicyRunner& runner);

}  // namespace beem
