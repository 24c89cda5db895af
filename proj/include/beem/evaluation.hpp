#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "beem/policy.hpp"
#include "beem/trace.hpp"

namespace beem {

struct EvalReport {
  std::string policy;
  // Absent when the data carries no labels.
  std::optional<double> accuracy;
  // (sum_i L * n_i) / (sum_i i * n_i); in [1, L].
  double speedup = 1.0;
  // 1 - (sum_i i * n_i) / (sum_i L * n_i).
  double time_reduction = 0.0;
  std::vector<std::size_t> exit_counts;
  // Error among units exiting at each layer; absent for layers nobody exited
  // at, or when unlabeled.
  std::vector<std::optional<double>> per_exit_error;
  std::size_t sample_count = 0;
  // Sequence mode: sequences that never emitted the end-of-sequence token.
  std::size_t unterminated = 0;

  bool operator==(const EvalReport&) const = default;
};

// Layer-count speedup from exit counts n_1..n_L (L = exit_counts.size()).
// Throws EmptyDataError when all counts are zero.
double speedup_ratio(std::span<const std::size_t> exit_counts);
double time_reduction(std::span<const std::size_t> exit_counts);

// Replays the policy over every sample (classification) or over each
// sequence's emitted tokens (sequence mode, tokens are the units).
EvalReport evaluate(const Dataset& data, const Policy& policy);

// Replays the policy over each decision unit independently, ignoring
// sequence termination.
EvalReport evaluate_units(std::span<const SampleTrace> units,
                          const Policy& policy, int layers);

std::vector<EvalReport> compare(const Dataset& data,
                                std::span<const Policy> policies);

}  // namespace beem
