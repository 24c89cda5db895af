#pragma once

// Seedable synthetic trace generator with controllable per-exit error rates.
//
// Each sample draws one difficulty u ~ U(0,1) shared by all exits; exit i is
// correct iff u < 1 - q_i. Correctness is therefore comonotone across exits
// and the marginal error of exit i is q_i. A wrong exit repeats the previous
// exit's wrong label with probability `persistence`, otherwise it picks
// uniformly among the other classes. The predicted class's probability is a
// Beta draw rescaled to (1/C, 1]. Probabilities are quantized to 1e-9 so a
// generated dataset survives a save/load cycle unchanged.

#include <cstdint>
#include <vector>

#include "beem/trace.hpp"

namespace beem {

// Beta(alpha, beta) shape, rescaled onto the confidence interval.
struct BetaShape {
  double alpha = 1.0;
  double beta = 1.0;
  bool operator==(const BetaShape&) const = default;
};

struct SynthConfig {
  int layers = 12;
  int classes = 2;
  std::size_t samples = 1000;
  std::vector<double> error_rates;
  double persistence = 0.8;
  BetaShape conf_correct{5.0, 2.0};
  BetaShape conf_wrong{2.0, 5.0};
  std::uint64_t seed = 0;
  Split split = Split::kUnspecified;

  bool operator==(const SynthConfig&) const = default;
};

// Throws ValidationError naming the offending field.
void validate(const SynthConfig& cfg);

Dataset generate(const SynthConfig& cfg);

}  // namespace beem
