#pragma once

// Helpers shared by the unit and acceptance suites. Nothing here calls the
// library's policy code, so the reference implementations below stay
// independent of the code they check.

#include <cassert>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "beem/trace.hpp"

namespace beem::testing {

// (label, confidence) per exit.
using PredConf = std::pair<ClassIndex, double>;

// Distribution with `conf` on `label` and the rest spread evenly. Requires
// conf > 1/classes so the label is the unique argmax.
inline std::vector<double> peaked(int classes, ClassIndex label, double conf) {
  const double rest = (1.0 - conf) / (classes - 1);
  assert(conf > rest);
  std::vector<double> p(classes, rest);
  p[label] = conf;
  return p;
}

inline SampleTrace trace_from(const std::vector<PredConf>& exits,
                              int classes = 3,
                              std::optional<ClassIndex> label = std::nullopt,
                              std::string id = "t") {
  std::vector<std::vector<double>> rows;
  for (const auto& [l, c] : exits) rows.push_back(peaked(classes, l, c));
  return SampleTrace::FromRows(std::move(id), label, std::move(rows));
}

// Traces with labels drawn from a small alphabet so runs of agreement occur.
inline SampleTrace random_trace(std::mt19937_64& rng, int layers, int classes,
                                std::string id = "r") {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, std::min(classes, 3) - 1);
  std::vector<std::vector<double>> rows;
  ClassIndex current = pick(rng);
  for (int i = 0; i < layers; ++i) {
    if (unit(rng) < 0.35) current = pick(rng);
    std::vector<double> p(classes);
    double sum = 0.0;
    for (auto& v : p) {
      v = unit(rng);
      sum += v;
    }
    // Push mass onto `current` so it is the unique argmax.
    const double boost = 0.05 + unit(rng) * 2.0 * sum;
    p[current] += boost;
    sum += boost;
    for (auto& v : p) v /= sum;
    rows.push_back(std::move(p));
  }
  const ClassIndex label = std::uniform_int_distribution<int>(0, classes - 1)(rng);
  return SampleTrace::FromRows(std::move(id), label, std::move(rows));
}

// Closed-form scores: S_i is the weighted confidence summed over the maximal
// run of identical predictions ending at i.
inline std::vector<double> reference_scores(const SampleTrace& t,
                                            const std::vector<double>& w) {
  const auto preds = t.predictions();
  std::vector<double> s(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    std::size_t start = i;
    while (start > 0 && preds[start - 1].label == preds[i].label) --start;
    double total = 0.0;
    for (std::size_t k = start; k <= i; ++k) {
      total += w[k] * preds[k].confidence;
    }
    s[i] = total;
  }
  return s;
}

struct ReferenceExit {
  int layer;
  ClassIndex label;
};

// Compute all scores, then scan for the first crossing before the last exit.
inline ReferenceExit reference_beem(const SampleTrace& t,
                                    const std::vector<double>& w,
                                    const std::vector<double>& alpha) {
  const auto s = reference_scores(t, w);
  const int layers = t.num_layers();
  int exit = layers;
  for (int i = 1; i < layers; ++i) {
    if (s[i - 1] >= alpha[i - 1]) {
      exit = i;
      break;
    }
  }
  return {exit, t.predictions()[exit - 1].label};
}

}  // namespace beem::testing
