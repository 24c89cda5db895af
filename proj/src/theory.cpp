#include "beem/theory.hpp"

#include <algorithm>
#include <cmath>

#include "beem/errors.hpp"

namespace beem {

std::vector<double> standalone_error_rates(const Dataset& data) {
  require_labeled(data, "standalone_error_rates");
  const int layers = data.num_layers();
  std::vector<std::size_t> wrong(layers, 0);
  const auto units = data.units();
  for (const auto& u : units) {
    for (int i = 0; i < layers; ++i) {
      if (u.predictions()[i].label != *u.true_label()) ++wrong[i];
    }
  }
  std::vector<double> q(layers);
  for (int i = 0; i < layers; ++i) {
    q[i] = static_cast<double>(wrong[i]) / units.size();
  }
  return q;
}

std::vector<ExitRatioEstimate> estimate_a(const Dataset& data,
                                          const BeemPolicy& policy) {
  const int layers = data.num_layers();
  const PolicyRunner runner(policy, layers);
  std::vector<ExitRatioEstimate> est(layers > 1 ? layers - 1 : 0);
  for (int t = 1; t < layers; ++t) est[t - 1].exit = t;

  for (const auto& u : data.units()) {
    const int exit_layer = runner(u).exit_layer;
    int changes = 0;
    for (int t = 1; t < layers; ++t) {
      if (t > 1 && u.predictions()[t - 1].label != u.predictions()[t - 2].label)
        ++changes;
      auto& e = est[t - 1];
      if (changes == 0) {
        ++e.support0;
        if (exit_layer == t) ++e.exits0;
      } else if (changes == 1) {
        ++e.support1;
        if (exit_layer == t) ++e.exits1;
      }
    }
  }

  for (auto& e : est) {
    if (e.support0 > 0) e.a0 = static_cast<double>(e.exits0) / e.support0;
    if (e.support1 > 0) e.a1 = static_cast<double>(e.exits1) / e.support1;
    if (e.a0 && e.a1 && *e.a0 > 0.0 && *e.a1 > 0.0) e.ratio = *e.a1 / *e.a0;
  }
  return est;
}

double theorem_bound(double a, double b, double p, int t) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("p = " + std::to_string(p) + " not in (0, 1)");
  }
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw DomainError("a = " + std::to_string(a) + " must be positive");
  }
  if (!(b >= 1.0) || !std::isfinite(b)) {
    throw DomainError("b = " + std::to_string(b) + " must be >= 1");
  }
  if (t < 1) throw DomainError("t must be >= 1");
  return a / (a + (1.0 / p - 1.0) * std::pow(b, t - 1));
}

TheoremReport check_condition(const Dataset& data, const BeemPolicy& policy) {
  const std::vector<double> q = standalone_error_rates(data);
  const int layers = data.num_layers();
  TheoremReport report;
  report.p = q.back();
  const bool p_usable = report.p > 0.0 && report.p < 1.0;

  const auto a = estimate_a(data, policy);
  double q_max = 0.0;
  double q_min = 1.0;
  bool all = true;
  for (int t = 1; t < layers; ++t) {
    q_max = std::max(q_max, q[t - 1]);
    q_min = std::min(q_min, q[t - 1]);
    ExitCondition c;
    c.exit = t;
    c.q = q[t - 1];
    c.a_estimate = a[t - 1];
    if (q_min > 0.0) c.b = q_max / q_min;
    if (c.a_estimable() && c.b_estimable() && p_usable) {
      c.bound = theorem_bound(*c.a_estimate.ratio, *c.b, report.p, t);
      c.satisfied = c.q < *c.bound;
      ++report.estimable_exits;
      all = all && *c.satisfied;
    }
    report.per_exit.push_back(std::move(c));
  }
  report.all_satisfied = report.estimable_exits > 0 && all;
  return report;
}

}  // namespace beem
