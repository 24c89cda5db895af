// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "beem/calibration.hpp"
#include "beem/evaluation.hpp"
#include "beem/policy.hpp"
#include "beem/synth.hpp"
#include "beem/theory.hpp"
#include "beem/trace_io.hpp"
#include "corpus.hpp"
#include "test_support.hpp"

using namespace beem;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Random trace with L <= 12, C <= 10 and random positive weights/thresholds.
struct RandomCase {
  SampleTrace trace;
  std::vector<double> weights;
  std::vector<double> alpha;
};

RandomCase random_case(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int layers = 1 + static_cast<int>(rng() % 12);
  const int classes = 2 + static_cast<int>(rng() % 9);
  auto trace = testing::random_trace(rng, layers, classes);
  std::vector<double> w(layers), a(layers);
  const bool cost = unit(rng) < 0.5;
  const double lambda = 0.05 + unit(rng);
  for (int i = 0; i < layers; ++i) {
    w[i] = cost ? lambda * (i + 1) : 0.05 + unit(rng);
    a[i] = 2.0 * unit(rng);
  }
  return {std::move(trace), std::move(w), std::move(a)};
}

Outcome oracle_equivalence() {
  std::mt19937_64 rng(20240101);
  std::vector<RandomCase> cases;
  cases.reserve(10000);
  for (int n = 0; n < 10000; ++n) cases.push_back(random_case(rng));
  const auto start = Clock::now();
  int mismatches = 0;
  for (const auto& c : cases) {
    const auto got = run_beem(c.trace, c.weights, ThresholdVector(c.alpha));
    const auto want = testing::reference_beem(c.trace, c.weights, c.alpha);
    if (got.exit_layer != want.layer || got.label != want.label) ++mismatches;
  }
  const double secs = seconds_since(start);
  return {mismatches == 0 && secs < 10.0,
          fmt("10000 traces, %d mismatches, %.3f s", mismatches, secs)};
}

Outcome scale_invariance() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  int violations = 0;
  for (int n = 0; n < 1000; ++n) {
    const auto c = random_case(rng);
    const double k = scale(rng);
    auto w = c.weights;
    auto a = c.alpha;
    for (auto& v : w) v *= k;
    for (auto& v : a) v *= k;
    const auto base = run_beem(c.trace, c.weights, ThresholdVector(c.alpha));
    const auto scaled = run_beem(c.trace, w, ThresholdVector(a));
    if (base.exit_layer != scaled.exit_layer || base.label != scaled.label) {
      ++violations;
    }
  }
  return {violations == 0, fmt("1000 tuples, %d violations", violations)};
}

Outcome threshold_monotonicity() {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> bump(0.0, 1.0);
  int violations = 0;
  for (int n = 0; n < 1000; ++n) {
    const auto c = random_case(rng);
    auto raised = c.alpha;
    for (auto& v : raised) v += bump(rng) < 0.3 ? 0.0 : bump(rng);
    const int lo = run_beem(c.trace, c.weights, ThresholdVector(c.alpha)).exit_layer;
    const int hi = run_beem(c.trace, c.weights, ThresholdVector(raised)).exit_layer;
    if (hi < lo) ++violations;
  }
  return {violations == 0, fmt("1000 traces, %d violations", violations)};
}

SynthConfig calibration_config(std::uint64_t seed, std::size_t n) {
  SynthConfig cfg;
  cfg.layers = 12;
  cfg.classes = 10;
  cfg.samples = n;
  cfg.seed = seed;
  cfg.error_rates = {0.30, 0.26, 0.22, 0.19, 0.17, 0.15,
                     0.13, 0.12, 0.11, 0.10, 0.10, 0.10};
  return cfg;
}

// Largest error among exits 1..L-1 that received samples.
double worst_early_exit_error(const EvalReport& r) {
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < r.exit_counts.size(); ++i) {
    if (r.exit_counts[i] > 0) worst = std::max(worst, *r.per_exit_error[i]);
  }
  return worst;
}

Outcome calibration_guarantee() {
  const auto val = generate(calibration_config(1000, 5000));
  const auto weights = materialize_weights(CostWeights{0.1}, 12);
  const auto report = calibrate_error_rate(val, weights, default_error_rate_grid());
  const double p = report.final_error_rate;
  const Policy policy = to_policy(report);

  const auto same = evaluate(val, policy);
  const double same_worst = worst_early_exit_error(same);
  const bool same_ok = same_worst <= p;

  int good_seeds = 0;
  double worst_fresh = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto test = generate(calibration_config(seed, 20000));
    const double worst = worst_early_exit_error(evaluate(test, policy));
    worst_fresh = std::max(worst_fresh, worst);
    if (worst <= p + 0.02) ++good_seeds;
  }
  return {same_ok && good_seeds >= 18,
          fmt("p = %.4f; same set worst exit error %.4f; fresh sets within "
              "p + 0.02 in %d/20 (worst %.4f); speedup %.3f",
              p, same_worst, good_seeds, worst_fresh, same.speedup)};
}

SynthConfig theorem_config(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.layers = 6;
  cfg.classes = 4;
  cfg.samples = 20000;
  cfg.seed = seed;
  cfg.persistence = 0.3;
  cfg.error_rates = {0.02, 0.02, 0.02, 0.02, 0.02, 0.2};
  return cfg;
}

Outcome theorem_check() {
  const auto start = Clock::now();
  const BeemPolicy policy{CostWeights{0.1}, ThresholdVector::Uniform(0.2, 6)};
  int condition_seeds = 0;
  int bound_seeds = 0;
  int final_in_ci = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto data = generate(theorem_config(seed));
    const auto cond = check_condition(data, policy);
    if (cond.all_satisfied) ++condition_seeds;
    const auto r = evaluate(data, policy);
    if (1.0 - *r.accuracy <= cond.p) ++bound_seeds;
    const double final_err = 1.0 - *evaluate(data, FinalOnlyPolicy{}).accuracy;
    const double sigma = std::sqrt(0.2 * 0.8 / 20000.0);
    if (std::abs(final_err - 0.2) <= 3.0 * sigma) ++final_in_ci;
  }
  const double secs = seconds_since(start);
  return {condition_seeds == 20 && bound_seeds >= 19 && final_in_ci == 20 &&
              secs < 120.0,
          fmt("condition reported in %d/20 seeds; BEEM error <= p in %d/20; "
              "final-only within 3 sigma of 0.2 in %d/20; %.1f s",
              condition_seeds, bound_seeds, final_in_ci, secs)};
}

Outcome speedup_exactness() {
  std::vector<std::size_t> all_last(12, 0), sixth(12, 0), half(12, 0);
  all_last[11] = 100;
  sixth[5] = 100;
  half[5] = 50;
  half[11] = 50;
  const double e1 = std::abs(speedup_ratio(all_last) - 1.0);
  const double e2 = std::abs(speedup_ratio(sixth) - 2.0);
  const double e3 = std::abs(speedup_ratio(half) - 1200.0 / 900.0);
  const double worst = std::max({e1, e2, e3});
  return {worst <= 1e-12, fmt("max abs error %.3g", worst)};
}

Outcome bound_arithmetic() {
  double worst = 0.0;
  worst = std::max(worst, std::abs(theorem_bound(1, 1, 0.5, 1) - 0.5));
  worst = std::max(worst, std::abs(theorem_bound(1, 1, 0.1, 1) - 0.1));
  worst = std::max(worst, std::abs(theorem_bound(1, 2, 0.1, 3) - 1.0 / 37.0));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int t = 1; t <= 12; ++t) {
    for (int n = 0; n < 50; ++n) {
      const double a = 0.01 + 10.0 * unit(rng);
      const double p = 0.01 + 0.98 * unit(rng);
      const double simplified = a / (a + (1.0 / p - 1.0));
      worst = std::max(worst, std::abs(theorem_bound(a, 1.0, p, t) - simplified));
    }
  }
  return {worst <= 1e-12, fmt("max abs error %.3g", worst)};
}

SynthConfig baseline_config(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.layers = 12;
  cfg.classes = 10;
  cfg.samples = 20000;
  cfg.seed = seed;
  cfg.persistence = 0.9;
  cfg.error_rates = {0.20, 0.17, 0.15, 0.13, 0.12, 0.11,
                     0.10, 0.10, 0.10, 0.10, 0.10, 0.10};
  return cfg;
}

// Fastest candidate whose validation accuracy is within 0.01 of the final
// layer's; the most accurate candidate if none qualifies.
Policy tune_on_validation(const Dataset& val, const std::vector<Policy>& candidates) {
  const double final_acc = *evaluate(val, FinalOnlyPolicy{}).accuracy;
  const auto reports = compare(val, candidates);
  std::size_t best = 0;
  bool qualified = false;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const bool ok = *reports[i].accuracy >= final_acc - 0.01;
    if (ok && (!qualified || reports[i].speedup > reports[best].speedup)) {
      best = i;
      qualified = true;
    } else if (!qualified && *reports[i].accuracy > *reports[best].accuracy) {
      best = i;
    }
  }
  return candidates[best];
}

std::string describe(const Policy& p) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, ConfidencePolicy>) return fmt("tau %.2f", x.tau);
        if constexpr (std::is_same_v<T, PatiencePolicy>) return fmt("t %d", x.patience);
        if constexpr (std::is_same_v<T, MajorityPolicy>) return fmt("quorum %d", x.quorum);
        return "";
      },
      p);
}

Outcome baseline_sanity() {
  const std::vector<double> sweep = [] {
    std::vector<double> a;
    for (double x = 0.05; x <= 6.0 + 1e-9; x += 0.02) a.push_back(x);
    return a;
  }();
  std::vector<Policy> confidences, patiences, majorities;
  for (double tau = 0.5; tau <= 0.99 + 1e-9; tau += 0.01) {
    confidences.push_back(ConfidencePolicy{tau});
  }
  for (int t = 1; t <= 11; ++t) patiences.push_back(PatiencePolicy{t});
  for (int k = 1; k <= 11; ++k) majorities.push_back(MajorityPolicy{k});
  int sane_seeds = 0;
  int ordered_seeds = 0;
  std::ostringstream first;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto data = generate(baseline_config(seed));
    const auto val = generate(baseline_config(seed + 1000));
    const Policy confidence = tune_on_validation(val, confidences);
    const Policy patience = tune_on_validation(val, patiences);
    const Policy majority = tune_on_validation(val, majorities);
    const auto cal = calibrate_error_rate(
        val, materialize_weights(CostWeights{0.1}, 12), default_error_rate_grid());
    const double final_acc = *evaluate(data, FinalOnlyPolicy{}).accuracy;
    const auto rc = evaluate(data, confidence);
    const auto rp = evaluate(data, patience);
    const auto rm = evaluate(data, majority);
    const auto rb = evaluate(data, to_policy(cal));
    bool sane = true;
    for (const auto* r : {&rc, &rp, &rm, &rb}) {
      sane = sane && r->speedup > 1.0 &&
             std::abs(*r->accuracy - final_acc) <= 0.02;
    }
    if (sane) ++sane_seeds;

    double best = 0.0;
    for (double a : sweep) {
      const auto r = evaluate(
          data, BeemPolicy{CostWeights{0.1}, ThresholdVector::Uniform(a, 12)});
      if (std::abs(*r.accuracy - *rp.accuracy) <= 0.005) {
        best = std::max(best, r.speedup);
      }
    }
    if (best >= rp.speedup) ++ordered_seeds;
    if (seed == 1) {
      first << "seed 1 tuned " << describe(confidence) << ", "
            << describe(patience) << ", " << describe(majority) << ": ";
      first << fmt("final %.4f | conf %.4f/%.2fx | pat %.4f/%.2fx | "
                   "maj %.4f/%.2fx | beem %.4f/%.2fx | beem@pat-acc %.2fx",
                   final_acc, *rc.accuracy, rc.speedup, *rp.accuracy,
                   rp.speedup, *rm.accuracy, rm.speedup, *rb.accuracy,
                   rb.speedup, best);
    }
  }
  return {sane_seeds == 20 && ordered_seeds >= 15,
          fmt("all four sane in %d/20 seeds; BEEM >= patience at matched "
              "accuracy in %d/20; ",
              sane_seeds, ordered_seeds) +
              first.str()};
}

Outcome trace_round_trip() {
  const auto dir = fs::temp_directory_path() / "beem_acceptance";
  fs::create_directories(dir);
  std::mt19937_64 rng(99);
  int failures = 0;
  for (int n = 0; n < 100; ++n) {
    SynthConfig cfg;
    cfg.layers = 1 + static_cast<int>(rng() % 12);
    cfg.classes = 2 + static_cast<int>(rng() % 9);
    cfg.samples = 1 + rng() % 200;
    cfg.seed = rng();
    cfg.persistence = std::uniform_real_distribution<double>(0, 1)(rng);
    for (int i = 0; i < cfg.layers; ++i) {
      cfg.error_rates.push_back(std::uniform_real_distribution<double>(0, 1)(rng));
    }
    const auto data = generate(cfg);
    const auto path = dir / "round_trip.jsonl";
    save_traces(data, path);
    if (!(load_traces(path) == data)) ++failures;
  }
  const auto corpus = testing::bad_corpus(fs::path(BEEM_TEST_DATA_DIR) / "bad");
  int rejected = 0;
  std::string misses;
  for (const auto& f : corpus) {
    if (testing::rejected_as_expected(f)) {
      ++rejected;
    } else {
      misses += " " + f.path.filename().string();
    }
  }
  const bool ok = failures == 0 && corpus.size() >= 10 &&
                  rejected == static_cast<int>(corpus.size());
  return {ok, fmt("100 datasets, %d round-trip failures; %d/%zu malformed "
                  "files rejected with the named invariant",
                  failures, rejected, corpus.size()) +
                  (misses.empty() ? "" : ";" + misses)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"oracle equivalence", oracle_equivalence},
      {"scale invariance", scale_invariance},
      {"threshold monotonicity", threshold_monotonicity},
      {"calibration guarantee", calibration_guarantee},
      {"theorem check", theorem_check},
      {"speedup exactness", speedup_exactness},
      {"theorem bound arithmetic", bound_arithmetic},
      {"baseline sanity", baseline_sanity},
      {"trace round trip", trace_round_trip},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s  %-26s %s\n", o.pass ? "PASS" : "FAIL", name.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n",
              static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
