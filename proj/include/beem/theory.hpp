#pragma once

// Empirical check of the sufficient condition under which the ensemble exit
// rule's error probability beats the final layer:
//
//   q_t < a_t / (a_t + (1/p - 1) * b_t^(t-1))   for every exit t < L
//
// with q_t the standalone error of exit t, p the final-layer error,
// b_t = max{q_1..q_t} / min{q_1..q_t} and a_t = A_t^1 / A_t^0, where A_t^c is
// the probability of exiting at t given c prediction changes among exits
// 1..t. The condition is sufficient only.

#include <cstddef>
#include <optional>
#include <vector>

#include "beem/policy.hpp"
#include "beem/trace.hpp"

namespace beem {

// q_i over all units, no exiting. Throws LabelRequiredError/EmptyDataError.
std::vector<double> standalone_error_rates(const Dataset& data);

struct ExitRatioEstimate {
  int exit = 0;
  // Units whose change count at this exit is 0 / 1.
  std::size_t support0 = 0;
  std::size_t support1 = 0;
  // Of those, units the policy exits at this layer.
  std::size_t exits0 = 0;
  std::size_t exits1 = 0;
  std::optional<double> a0;
  std::optional<double> a1;
  // A_t^1 / A_t^0; absent when either conditional is unsupported or either
  // estimate is zero.
  std::optional<double> ratio;

  bool operator==(const ExitRatioEstimate&) const = default;
};

// One estimate per exit 1..L-1.
std::vector<ExitRatioEstimate> estimate_a(const Dataset& data,
                                          const BeemPolicy& policy);

// a / (a + (1/p - 1) * b^(t-1)). Throws DomainError unless a > 0, b >= 1,
// 0 < p < 1 and t >= 1.
double theorem_bound(double a, double b, double p, int t);

struct ExitCondition {
  int exit = 0;
  double q = 0.0;
  ExitRatioEstimate a_estimate;
  std::optional<double> b;
  std::optional<double> bound;
  // Present only when a_t, b_t and the bound are all estimable.
  std::optional<bool> satisfied;

  bool a_estimable() const { return a_estimate.ratio.has_value(); }
  bool b_estimable() const { return b.has_value(); }
  bool operator==(const ExitCondition&) const = default;
};

struct TheoremReport {
  double p = 0.0;
  std::vector<ExitCondition> per_exit;
  std::size_t estimable_exits = 0;
  // Conjunction over estimable exits; false when none is estimable.
  bool all_satisfied = false;

  bool operator==(const TheoremReport&) const = default;
};

TheoremReport check_condition(const Dataset& data, const BeemPolicy& policy);

}  // namespace beem
