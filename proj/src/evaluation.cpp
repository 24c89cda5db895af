#include "beem/evaluation.hpp"

#include "beem/errors.hpp"

namespace beem {

namespace {

// Accumulates exits and correctness per layer.
class Tally {
 public:
  explicit Tally(int layers)
      : counts_(layers, 0), wrong_(layers, 0), labeled_(true) {}

  void add(int exit_layer, std::optional<bool> correct) {
    ++counts_[exit_layer - 1];
    if (!correct) {
      labeled_ = false;
    } else if (!*correct) {
      ++wrong_[exit_layer - 1];
    }
  }

  EvalReport finish(std::string policy) const {
    EvalReport r;
    r.policy = std::move(policy);
    r.exit_counts = counts_;
    r.speedup = speedup_ratio(counts_);
    r.time_reduction = time_reduction(counts_);
    std::size_t total = 0;
    std::size_t wrong = 0;
    r.per_exit_error.resize(counts_.size());
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      total += counts_[i];
      wrong += wrong_[i];
      if (labeled_ && counts_[i] > 0) {
        r.per_exit_error[i] = static_cast<double>(wrong_[i]) / counts_[i];
      }
    }
    r.sample_count = total;
    if (labeled_) r.accuracy = 1.0 - static_cast<double>(wrong) / total;
    return r;
  }

 private:
  std::vector<std::size_t> counts_;
  std::vector<std::size_t> wrong_;
  bool labeled_;
};

}  // namespace

double speedup_ratio(std::span<const std::size_t> exit_counts) {
  const double layers = static_cast<double>(exit_counts.size());
  double full = 0.0;
  double used = 0.0;
  for (std::size_t i = 0; i < exit_counts.size(); ++i) {
    full += layers * static_cast<double>(exit_counts[i]);
    used += static_cast<double>(i + 1) * static_cast<double>(exit_counts[i]);
  }
  if (used == 0.0) throw EmptyDataError("speedup of zero exits");
  return full / used;
}

double time_reduction(std::span<const std::size_t> exit_counts) {
  return 1.0 - 1.0 / speedup_ratio(exit_counts);
}

EvalReport evaluate_units(std::span<const SampleTrace> units,
                          const Policy& policy, int layers) {
  if (units.empty()) throw EmptyDataError("evaluate");
  const PolicyRunner runner(policy, layers);
  Tally tally(layers);
  for (const auto& u : units) {
    const ExitDecision d = runner(u);
    std::optional<bool> correct;
    if (u.true_label()) correct = d.label == *u.true_label();
    tally.add(d.exit_layer, correct);
  }
  return tally.finish(policy_kind(policy));
}

EvalReport evaluate(const Dataset& data, const Policy& policy) {
  if (data.empty()) throw EmptyDataError("evaluate");
  if (data.mode() == TraceMode::kClassification) {
    return evaluate_units(data.samples(), policy, data.num_layers());
  }
  const PolicyRunner runner(policy, data.num_layers());
  Tally tally(data.num_layers());
  std::size_t unterminated = 0;
  for (const auto& seq : data.sequences()) {
    const SequenceDecision d = run_sequence(seq, runner);
    if (!d.terminated) ++unterminated;
    const auto& ref = seq.reference();
    for (std::size_t k = 0; k < d.tokens.size(); ++k) {
      std::optional<bool> correct;
      // Emitted tokens past the end of the reference count as errors.
      if (ref) correct = k < ref->size() && (*ref)[k] == d.tokens[k];
      tally.add(d.exit_layers[k], correct);
    }
  }
  EvalReport r = tally.finish(policy_kind(policy));
  r.unterminated = unterminated;
  return r;
}

std::vector<EvalReport> compare(const Dataset& data,
                                std::span<const Policy> policies) {
  if (policies.empty()) {
    throw ValidationError("policy_count", "compare needs at least one policy");
  }
  std::vector<EvalReport> out;
  out.reserve(policies.size());
  for (const auto& p : policies) out.push_back(evaluate(data, p));
  return out;
}

}  // namespace beem
