#include <doctest.h>

#include <cmath>
#include <random>

#include "beem/errors.hpp"
#include "beem/synth.hpp"
#include "beem/theory.hpp"
#include "test_support.hpp"

using namespace beem;
using beem::testing::trace_from;

TEST_CASE("theorem_bound arithmetic") {
  for (int t = 1; t <= 12; ++t) {
    CHECK(std::abs(theorem_bound(1.0, 1.0, 0.5, t) - 0.5) < 1e-12);
    CHECK(std::abs(theorem_bound(1.0, 1.0, 0.1, t) - 0.1) < 1e-12);
  }
  CHECK(std::abs(theorem_bound(1.0, 2.0, 0.1, 3) - 1.0 / 37.0) < 1e-12);
  CHECK_THROWS_AS(theorem_bound(1.0, 1.0, 0.0, 1), DomainError);
  CHECK_THROWS_AS(theorem_bound(1.0, 1.0, 1.0, 1), DomainError);
  CHECK_THROWS_AS(theorem_bound(0.0, 1.0, 0.5, 1), DomainError);
  CHECK_THROWS_AS(theorem_bound(1.0, 0.5, 0.5, 1), DomainError);
}

TEST_CASE("theorem_bound monotonicity") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int n = 0; n < 1000; ++n) {
    const double a = 0.05 + 5.0 * unit(rng);
    const double b = 1.0 + 3.0 * unit(rng) + 1e-3;
    const double p = 0.02 + 0.9 * unit(rng);
    const int t = 2 + static_cast<int>(rng() % 10);
    // Decreasing in b (t >= 2) and in t (b > 1), increasing in p.
    CHECK(theorem_bound(a, b + 0.1, p, t) < theorem_bound(a, b, p, t));
    CHECK(theorem_bound(a, b, p, t + 1) < theorem_bound(a, b, p, t));
    CHECK(theorem_bound(a, b, std::min(p + 0.05, 0.99), t) >
          theorem_bound(a, b, p, t));
    // b = 1 collapses to a / (a + 1/p - 1) for every t.
    CHECK(std::abs(theorem_bound(a, 1.0, p, t) - a / (a + (1.0 / p - 1.0))) <
          1e-12);
  }
}

TEST_CASE("standalone_error_rates") {
  std::vector<SampleTrace> s = {
      trace_from({{0, .9}, {0, .9}}, 2, 0, "a"),
      trace_from({{0, .9}, {1, .9}}, 2, 0, "b"),
      trace_from({{1, .9}, {1, .9}}, 2, 1, "c"),
      trace_from({{0, .9}, {0, .9}}, 2, 0, "d")};
  const auto d = Dataset::Classification(2, 2, std::move(s));
  const auto q = standalone_error_rates(d);
  CHECK(q[0] == 0.0);
  CHECK(q[1] == doctest::Approx(0.25));
  CHECK_THROWS_AS(
      standalone_error_rates(Dataset::Classification(
          2, 2, {trace_from({{0, .9}, {0, .9}}, 2)})),
      LabelRequiredError);
}

namespace {
const BeemPolicy kPolicy{ExplicitWeights{{0.5, 0.5, 0.5}},
                         ThresholdVector::Uniform(0.9, 3)};
}

TEST_CASE("estimate_a on a hand-enumerated set") {
  // S with w = 0.5: agree(.9,.9) -> 0.45, 0.9 (exit 2); changes reset.
  std::vector<SampleTrace> s = {
      // 0 changes at t=2, exits at 2.
      trace_from({{0, .9}, {0, .9}, {0, .9}}, 3, 0, "a"),
      trace_from({{1, .9}, {1, .9}, {1, .9}}, 3, 0, "b"),
      // 0 changes at t=2, low confidence: exits at 3.
      trace_from({{0, .5}, {0, .5}, {0, .9}}, 3, 0, "c"),
      // 1 change at t=2, exits at 3 (score resets to 0.45).
      trace_from({{0, .9}, {1, .9}, {1, .9}}, 3, 0, "d"),
      trace_from({{2, .9}, {0, .9}, {0, .9}}, 3, 0, "e"),
      // 1 change at t=2 but S_2 = 0.5 * 1.0 = 0.5; still exits at 3.
      trace_from({{0, .9}, {2, .99}, {2, .99}}, 3, 0, "f")};
  const auto d = Dataset::Classification(3, 3, std::move(s));
  const auto est = estimate_a(d, kPolicy);
  REQUIRE(est.size() == 2);
  // t = 1: change count is always 0, nobody exits (S_1 <= 0.495 < 0.9).
  CHECK(est[0].support0 == 6);
  CHECK(est[0].support1 == 0);
  CHECK_FALSE(est[0].ratio.has_value());
  // t = 2: A^0 = 2/3, A^1 = 0/3 -> ratio not estimable (zero A^1).
  CHECK(est[1].support0 == 3);
  CHECK(est[1].exits0 == 2);
  CHECK(est[1].support1 == 3);
  CHECK(est[1].exits1 == 0);
  CHECK(*est[1].a0 == doctest::Approx(2.0 / 3.0));
  CHECK(*est[1].a1 == 0.0);
  CHECK_FALSE(est[1].ratio.has_value());
}

TEST_CASE("estimate_a ratio with support on both branches") {
  // w = 0.5, alpha = 0.4: a single confident exit crosses immediately.
  const BeemPolicy policy{ExplicitWeights{{0.5, 0.5, 0.5}},
                          ThresholdVector::Uniform(0.4, 3)};
  std::vector<SampleTrace> s = {
      trace_from({{0, .5}, {0, .9}, {0, .9}}, 3, 0, "a"),   // c=0, exit 2
      trace_from({{0, .5}, {0, .5}, {0, .9}}, 3, 0, "b"),   // c=0, exit 2
      trace_from({{0, .5}, {1, .9}, {1, .9}}, 3, 0, "c"),   // c=1, exit 2
      trace_from({{0, .5}, {1, .5}, {1, .9}}, 3, 0, "d"),   // c=1, exit 3
      trace_from({{0, .5}, {2, .6}, {2, .9}}, 3, 0, "e"),   // c=1, exit 3
      trace_from({{0, .5}, {0, .6}, {0, .9}}, 3, 0, "f")};  // c=0, exit 2
  const auto d = Dataset::Classification(3, 3, std::move(s));
  const auto est = estimate_a(d, policy);
  // Exit 2: A^0 = 3/3, A^1 = 1/3.
  CHECK(est[1].exits0 == 3);
  CHECK(est[1].exits1 == 1);
  REQUIRE(est[1].ratio.has_value());
  CHECK(*est[1].ratio == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("estimate_a flags zero support and a zero denominator") {
  // Constant predictions: no sample has one change.
  std::vector<SampleTrace> s = {trace_from({{0, .9}, {0, .9}, {0, .9}}, 3, 0)};
  const auto est = estimate_a(Dataset::Classification(3, 3, s), kPolicy);
  CHECK(est[1].support1 == 0);
  CHECK_FALSE(est[1].ratio.has_value());
  // One-change samples exit at 2, zero-change samples never do.
  const BeemPolicy policy{ExplicitWeights{{0.5, 0.5, 0.5}},
                          ThresholdVector::Uniform(0.45, 3)};
  std::vector<SampleTrace> s2 = {
      trace_from({{0, .5}, {0, .4}, {0, .9}}, 3, 0, "z"),  // S_2 = 0.45 exits
      trace_from({{0, .5}, {1, .9}, {1, .9}}, 3, 0, "o")};
  auto est2 = estimate_a(Dataset::Classification(3, 3, s2), policy);
  // z crosses at exit 2 as well; make the zero-change branch miss instead.
  std::vector<SampleTrace> s3 = {
      trace_from({{0, .34}, {0, .34}, {0, .9}}, 3, 0, "z"),
      trace_from({{0, .5}, {1, .9}, {1, .9}}, 3, 0, "o")};
  est2 = estimate_a(Dataset::Classification(3, 3, s3), policy);
  CHECK(*est2[1].a0 == 0.0);
  CHECK(*est2[1].a1 == 1.0);
  CHECK_FALSE(est2[1].ratio.has_value());
}

TEST_CASE("check_condition on exits identical to the final layer") {
  std::vector<SampleTrace> s;
  for (int i = 0; i < 10; ++i) {
    const ClassIndex pred = i < 3 ? 1 : 0;
    s.push_back(trace_from({{pred, .9}, {pred, .9}, {pred, .9}}, 3, 0,
                           "s" + std::to_string(i)));
  }
  const auto r = check_condition(Dataset::Classification(3, 3, s), kPolicy);
  CHECK(r.p == doctest::Approx(0.3));
  for (const auto& c : r.per_exit) {
    CHECK(c.q == doctest::Approx(r.p));
    CHECK_FALSE(c.satisfied.value_or(false));
  }
  CHECK_FALSE(r.all_satisfied);
}

TEST_CASE("check_condition flags b when an early exit is perfect") {
  std::vector<SampleTrace> s = {
      trace_from({{0, .9}, {1, .9}, {0, .9}}, 3, 0, "a"),
      trace_from({{0, .9}, {0, .9}, {1, .9}}, 3, 0, "b")};
  const auto r = check_condition(Dataset::Classification(3, 3, s), kPolicy);
  CHECK(r.per_exit[0].q == 0.0);
  CHECK_FALSE(r.per_exit[0].b.has_value());
  CHECK_FALSE(r.per_exit[1].b.has_value());
}

TEST_CASE("b_t is at least 1 and nondecreasing") {
  SynthConfig cfg;
  cfg.layers = 8;
  cfg.classes = 4;
  cfg.samples = 2000;
  cfg.error_rates = {0.4, 0.2, 0.3, 0.1, 0.25, 0.15, 0.12, 0.1};
  cfg.persistence = 0.3;
  const auto d = generate(cfg);
  const BeemPolicy policy{CostWeights{0.1}, ThresholdVector::Uniform(0.5, 8)};
  const auto r = check_condition(d, policy);
  double prev = 1.0;
  for (const auto& c : r.per_exit) {
    REQUIRE(c.b.has_value());
    CHECK(*c.b >= 1.0);
    CHECK(*c.b >= prev);
    prev = *c.b;
    if (c.bound) CHECK(c.satisfied == (c.q < *c.bound));
  }
}

TEST_CASE("check_condition reports satisfaction on a favourable config") {
  SynthConfig cfg;
  cfg.layers = 6;
  cfg.classes = 4;
  cfg.samples = 20000;
  cfg.error_rates = {0.02, 0.02, 0.02, 0.02, 0.02, 0.2};
  cfg.persistence = 0.3;
  cfg.seed = 5;
  const auto d = generate(cfg);
  const BeemPolicy policy{CostWeights{0.1}, ThresholdVector::Uniform(0.2, 6)};
  const auto r = check_condition(d, policy);
  CHECK(r.p == doctest::Approx(0.2).epsilon(0.05));
  CHECK(r.estimable_exits > 0);
  CHECK(r.all_satisfied);
}
