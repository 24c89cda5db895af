#include "beem/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "beem/errors.hpp"
#include "beem/evaluation.hpp"

namespace beem {

namespace {

// Scores and correctness of every unit, computed once per weight vector.
struct ScoreTable {
  std::size_t layers = 0;
  std::vector<double> scores;  // unit-major, L per unit
  std::vector<char> correct;   // unit-major, L per unit

  std::size_t units() const { return layers ? scores.size() / layers : 0; }
  double score(std::size_t u, int exit) const {
    return scores[u * layers + exit - 1];
  }
  bool is_correct(std::size_t u, int exit) const {
    return correct[u * layers + exit - 1] != 0;
  }
};

ScoreTable build_table(const Dataset& val, std::span<const double> weights) {
  if (weights.size() != static_cast<std::size_t>(val.num_layers())) {
    throw ShapeError("weights have " + std::to_string(weights.size()) +
                     " entries, dataset has L = " +
                     std::to_string(val.num_layers()));
  }
  ScoreTable t;
  t.layers = weights.size();
  const auto units = val.units();
  t.scores.reserve(units.size() * t.layers);
  t.correct.reserve(units.size() * t.layers);
  for (const auto& u : units) {
    const auto s = beem_scores(u, weights);
    t.scores.insert(t.scores.end(), s.begin(), s.end());
    for (const auto& p : u.predictions()) {
      t.correct.push_back(p.label == *u.true_label() ? 1 : 0);
    }
  }
  return t;
}

std::vector<double> normalize_grid(std::vector<double> grid) {
  if (grid.empty()) {
    throw ValidationError("grid_nonempty", "threshold grid is empty");
  }
  for (double g : grid) {
    if (!(g >= 0.0) || !std::isfinite(g)) {
      throw ValidationError("threshold_range",
                            "grid value " + std::to_string(g));
    }
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

struct Counts {
  std::size_t stop = 0;
  std::size_t misc = 0;

  double fraction() const {
    return stop == 0 ? 0.0 : static_cast<double>(misc) / stop;
  }
};

Counts count_crossing(const ScoreTable& table,
                      const std::vector<std::size_t>& alive, int exit,
                      double alpha) {
  Counts c;
  for (std::size_t u : alive) {
    if (table.score(u, exit) >= alpha) {
      ++c.stop;
      if (!table.is_correct(u, exit)) ++c.misc;
    }
  }
  return c;
}

}  // namespace

std::vector<double> default_error_rate_grid() {
  std::vector<double> grid;
  for (int k = 1; k <= 10; ++k) grid.push_back(0.5 * k);
  return grid;
}

std::vector<double> default_classical_grid() {
  return {0.3, 0.6, 0.9, 1.2, 1.5};
}

double final_error_rate(const Dataset& val) {
  require_labeled(val, "final_error_rate");
  const auto units = val.units();
  std::size_t wrong = 0;
  for (const auto& u : units) {
    if (u.predictions().back().label != *u.true_label()) ++wrong;
  }
  return static_cast<double>(wrong) / units.size();
}

ExitStats exit_stats(const Dataset& val, std::span<const double> weights,
                     std::span<const double> fixed_prefix, double alpha,
                     int exit) {
  require_labeled(val, "exit_stats");
  if (exit < 1 || exit > val.num_layers()) {
    throw RangeError("exit " + std::to_string(exit) + " not in [1, " +
                     std::to_string(val.num_layers()) + "]");
  }
  if (fixed_prefix.size() != static_cast<std::size_t>(exit - 1)) {
    throw ShapeError("fixed prefix has " + std::to_string(fixed_prefix.size()) +
                     " thresholds, exit " + std::to_string(exit) + " needs " +
                     std::to_string(exit - 1));
  }
  const ScoreTable table = build_table(val, weights);
  std::vector<std::size_t> alive;
  for (std::size_t u = 0; u < table.units(); ++u) {
    bool exited = false;
    for (int i = 1; i < exit && !exited; ++i) {
      exited = table.score(u, i) >= fixed_prefix[i - 1];
    }
    if (!exited) alive.push_back(u);
  }
  const Counts c = count_crossing(table, alive, exit, alpha);
  return {c.stop, c.fraction()};
}

CalibrationReport calibrate_error_rate(const Dataset& val,
                                       std::span<const double> weights,
                                       std::vector<double> grid,
                                       std::optional<double> p_override) {
  require_labeled(val, "calibrate_error_rate");
  const int layers = val.num_layers();
  if (grid.empty()) {
    throw ValidationError("grid_nonempty", "threshold grid is empty");
  }
  grid.push_back(static_cast<double>(layers));
  grid = normalize_grid(std::move(grid));

  double p = 0.0;
  if (p_override) {
    if (!(*p_override >= 0.0 && *p_override <= 1.0)) {
      throw DomainError("p override " + std::to_string(*p_override) +
                        " not in [0, 1]");
    }
    p = *p_override;
  } else {
    p = final_error_rate(val);
  }

  const ScoreTable table = build_table(val, weights);
  std::vector<std::size_t> alive(table.units());
  std::iota(alive.begin(), alive.end(), std::size_t{0});

  CalibrationReport report;
  report.method = kMethodErrorRate;
  report.weights.assign(weights.begin(), weights.end());
  report.final_error_rate = p;
  report.grid = grid;

  std::vector<double> alphas;
  double weight_sum = 0.0;
  for (int t = 1; t < layers; ++t) {
    weight_sum += weights[t - 1];
    ExitCalibration ex;
    ex.exit = t;
    ex.feasible = false;
    for (double alpha : grid) {
      const Counts c = count_crossing(table, alive, t, alpha);
      if (c.fraction() <= p) {
        ex.alpha = alpha;
        ex.c_stop = c.stop;
        ex.c_misc_fraction = c.fraction();
        ex.feasible = true;
        break;
      }
    }
    if (!ex.feasible) {
      // No grid value satisfies the constraint: close the exit with a
      // threshold above the largest reachable score, S_t <= sum_{i<=t} w_i.
      ex.alpha = 2.0 * weight_sum;
      ex.c_stop = 0;
      ex.c_misc_fraction = 0.0;
    }
    alphas.push_back(ex.alpha);
    std::erase_if(alive, [&](std::size_t u) {
      return table.score(u, t) >= ex.alpha;
    });
    report.per_exit.push_back(ex);
  }

  ExitCalibration last;
  last.exit = layers;
  last.alpha = static_cast<double>(layers);
  last.c_stop = alive.size();
  std::size_t misc = 0;
  for (std::size_t u : alive) {
    if (!table.is_correct(u, layers)) ++misc;
  }
  last.c_misc_fraction =
      alive.empty() ? 0.0 : static_cast<double>(misc) / alive.size();
  last.feasible = true;
  alphas.push_back(last.alpha);
  report.per_exit.push_back(last);

  report.thresholds = ThresholdVector(std::move(alphas));
  return report;
}

CalibrationReport calibrate_classical(const Dataset& val,
                                      std::span<const double> weights,
                                      std::vector<double> grid) {
  require_labeled(val, "calibrate_classical");
  const int layers = val.num_layers();
  grid = normalize_grid(std::move(grid));
  const double p = final_error_rate(val);
  // Validates the weight vector length before any replay.
  build_table(val, weights);

  ExplicitWeights scheme{{weights.begin(), weights.end()}};
  std::optional<EvalReport> best;
  double best_alpha = grid.front();
  for (double alpha : grid) {
    const BeemPolicy policy{scheme, ThresholdVector::Uniform(alpha, layers)};
    EvalReport r = evaluate_units(val.units(), policy, layers);
    // Grid is ascending, so strict improvement keeps the smallest alpha on
    // exact ties.
    if (!best || *r.accuracy > *best->accuracy ||
        (*r.accuracy == *best->accuracy && r.speedup > best->speedup)) {
      best = std::move(r);
      best_alpha = alpha;
    }
  }

  CalibrationReport report;
  report.method = kMethodClassical;
  report.weights.assign(weights.begin(), weights.end());
  report.final_error_rate = p;
  report.grid = grid;
  report.thresholds = ThresholdVector::Uniform(best_alpha, layers);
  for (int t = 1; t <= layers; ++t) {
    ExitCalibration ex;
    ex.exit = t;
    ex.alpha = best_alpha;
    ex.c_stop = best->exit_counts[t - 1];
    ex.c_misc_fraction = best->per_exit_error[t - 1].value_or(0.0);
    ex.feasible = t == layers || ex.c_misc_fraction <= p;
    report.per_exit.push_back(ex);
  }
  return report;
}

BeemPolicy to_policy(const CalibrationReport& report) {
  return BeemPolicy{ExplicitWeights{report.weights}, report.thresholds};
}

}  // namespace beem
