#include "beem/synth.hpp"

#include <cmath>
#include <random>
#include <string>

#include "beem/errors.hpp"

namespace beem {

namespace {

constexpr std::int64_t kQuantum = 1'000'000'000;  // 9 decimals
// Keeps the predicted class strictly above the uniform share.
constexpr double kConfidenceFloorGap = 1e-6;

// Independent stream per (seed, sample index).
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int uniform_index(std::mt19937_64& rng, int n) {
  return static_cast<int>(rng() % static_cast<std::uint64_t>(n));
}

double beta_draw(std::mt19937_64& rng, const BetaShape& shape) {
  std::gamma_distribution<double> ga(shape.alpha, 1.0);
  std::gamma_distribution<double> gb(shape.beta, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x + y > 0.0 ? x / (x + y) : 0.5;
}

std::vector<double> make_distribution(std::mt19937_64& rng, int classes,
                                      ClassIndex top, double confidence) {
  const double rest = 1.0 - confidence;
  const int others = classes - 1;
  const double share = rest / others;

  // Mix a flat split of the remaining mass with a Dirichlet(1) split. The
  // mixing weight keeps every other entry at most halfway between the flat
  // share and the top confidence.
  double mix = 1.0;
  if (rest - share > 0.0) {
    mix = std::min(1.0, 0.5 * (confidence - share) / (rest - share));
  }
  std::vector<double> gaps(others);
  double total = 0.0;
  std::exponential_distribution<double> expo(1.0);
  for (auto& g : gaps) {
    g = expo(rng);
    total += g;
  }

  std::vector<std::int64_t> units(classes, 0);
  std::int64_t used = 0;
  for (int k = 0, c = 0; c < classes; ++c) {
    if (c == top) continue;
    const double dir = total > 0.0 ? gaps[k] / total : 1.0 / others;
    const double v = rest * ((1.0 - mix) / others + mix * dir);
    units[c] = std::llround(v * kQuantum);
    used += units[c];
    ++k;
  }
  units[top] = kQuantum - used;

  std::vector<double> probs(classes);
  for (int c = 0; c < classes; ++c) {
    probs[c] = static_cast<double>(units[c]) / kQuantum;
  }
  return probs;
}

SampleTrace generate_sample(const SynthConfig& cfg, std::size_t index) {
  auto rng = substream(cfg.seed, index);
  const ClassIndex label = uniform_index(rng, cfg.classes);
  const double difficulty = uniform01(rng);
  const double floor = 1.0 / cfg.classes + kConfidenceFloorGap;

  std::vector<std::vector<double>> rows;
  rows.reserve(cfg.layers);
  std::optional<ClassIndex> prev_wrong;
  for (int i = 0; i < cfg.layers; ++i) {
    const bool correct = difficulty < 1.0 - cfg.error_rates[i];
    ClassIndex predicted = label;
    if (correct) {
      prev_wrong.reset();
    } else {
      if (prev_wrong && uniform01(rng) < cfg.persistence) {
        predicted = *prev_wrong;
      } else {
        const int k = uniform_index(rng, cfg.classes - 1);
        predicted = k < label ? k : k + 1;
      }
      prev_wrong = predicted;
    }
    const double draw =
        beta_draw(rng, correct ? cfg.conf_correct : cfg.conf_wrong);
    const double confidence = floor + (1.0 - floor) * draw;
    rows.push_back(make_distribution(rng, cfg.classes, predicted, confidence));
  }
  return SampleTrace::FromRows("s" + std::to_string(index), label,
                               std::move(rows));
}

void check_shape(const BetaShape& s, const char* name) {
  if (!(s.alpha > 0.0 && s.beta > 0.0) || !std::isfinite(s.alpha) ||
      !std::isfinite(s.beta)) {
    throw ValidationError(name, "Beta shape parameters must be positive");
  }
}

}  // namespace

void validate(const SynthConfig& cfg) {
  if (cfg.layers < 1) throw ValidationError("layers", "L must be >= 1");
  if (cfg.classes < 2) throw ValidationError("classes", "C must be >= 2");
  if (cfg.error_rates.size() != static_cast<std::size_t>(cfg.layers)) {
    throw ValidationError("error_rates",
                          "need " + std::to_string(cfg.layers) +
                              " error rates, got " +
                              std::to_string(cfg.error_rates.size()));
  }
  for (double q : cfg.error_rates) {
    if (!(q >= 0.0 && q <= 1.0)) {
      throw ValidationError("error_rates",
                            "error rate " + std::to_string(q) +
                                " outside [0, 1]");
    }
  }
  if (!(cfg.persistence >= 0.0 && cfg.persistence <= 1.0)) {
    throw ValidationError("persistence", "persistence outside [0, 1]");
  }
  check_shape(cfg.conf_correct, "conf_correct");
  check_shape(cfg.conf_wrong, "conf_wrong");
}

Dataset generate(const SynthConfig& cfg) {
  validate(cfg);
  std::vector<SampleTrace> samples;
  samples.reserve(cfg.samples);
  for (std::size_t n = 0; n < cfg.samples; ++n) {
    samples.push_back(generate_sample(cfg, n));
  }
  return Dataset::Classification(cfg.layers, cfg.classes, std::move(samples),
                                 cfg.split);
}

}  // namespace beem
