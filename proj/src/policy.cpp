#include "beem/policy.hpp"

#include <cmath>
#include <map>
#include <type_traits>

#include "beem/errors.hpp"

namespace beem {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_length(std::size_t got, int layers, const char* what) {
  if (got != static_cast<std::size_t>(layers)) {
    throw ShapeError(std::string(what) + " has " + std::to_string(got) +
                     " entries, expected L = " + std::to_string(layers));
  }
}

void check_positive(std::span<const double> w) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!(w[i] > 0.0) || !std::isfinite(w[i])) {
      throw ValidationError("weight_positive",
                            "w_" + std::to_string(i + 1) + " = " +
                                std::to_string(w[i]) + " is not positive");
    }
  }
}

ExitDecision decide(const SampleTrace& trace, int exit_layer,
                    std::vector<double> scores) {
  ExitDecision d;
  d.exit_layer = exit_layer;
  d.label = trace.prediction(exit_layer).label;
  d.score_at_exit = scores.back();
  d.per_layer_scores = std::move(scores);
  return d;
}

}  // namespace

std::vector<double> materialize_weights(const WeightScheme& scheme,
                                        int layers) {
  if (layers < 1) throw ShapeError("L must be >= 1");
  std::vector<double> w = std::visit(
      Overloaded{
          [&](const CostWeights& c) {
            std::vector<double> out(layers);
            for (int i = 1; i <= layers; ++i) out[i - 1] = c.lambda * i;
            return out;
          },
          [&](const AccuracyWeights& a) {
            check_length(a.accuracies.size(), layers, "accuracy weights");
            for (double v : a.accuracies) {
              if (!(v >= 0.0 && v <= 1.0)) {
                throw ValidationError("accuracy_range",
                                      "accuracy " + std::to_string(v) +
                                          " outside [0, 1]");
              }
            }
            return a.accuracies;
          },
          [&](const ExplicitWeights& e) {
            check_length(e.weights.size(), layers, "explicit weights");
            return e.weights;
          },
      },
      scheme);
  check_positive(w);
  return w;
}

ThresholdVector::ThresholdVector(std::vector<double> alphas)
    : alphas_(std::move(alphas)) {
  for (std::size_t i = 0; i < alphas_.size(); ++i) {
    if (!(alphas_[i] >= 0.0) || !std::isfinite(alphas_[i])) {
      throw ValidationError("threshold_range",
                            "alpha_" + std::to_string(i + 1) + " = " +
                                std::to_string(alphas_[i]));
    }
  }
}

ThresholdVector ThresholdVector::Uniform(double alpha, int layers) {
  return ThresholdVector(std::vector<double>(layers, alpha));
}

std::string policy_kind(const Policy& policy) {
  return std::visit(Overloaded{
                        [](const BeemPolicy&) { return "beem"; },
                        [](const ConfidencePolicy&) { return "confidence"; },
                        [](const PatiencePolicy&) { return "patience"; },
                        [](const MajorityPolicy&) { return "majority"; },
                        [](const FinalOnlyPolicy&) { return "final"; },
                    },
                    policy);
}

void validate_policy(const Policy& policy, int layers) {
  std::visit(
      Overloaded{
          [&](const BeemPolicy& b) {
            materialize_weights(b.weights, layers);
            check_length(b.thresholds.size(), layers, "threshold vector");
          },
          [](const ConfidencePolicy& c) {
            if (!(c.tau > 0.0 && c.tau < 1.0)) {
              throw ValidationError("tau_range",
                                    "tau = " + std::to_string(c.tau) +
                                        " not in (0, 1)");
            }
          },
          [](const PatiencePolicy& p) {
            if (p.patience < 1) {
              throw ValidationError("patience_range",
                                    "patience must be >= 1");
            }
          },
          [](const MajorityPolicy& m) {
            if (m.quorum < 1) {
              throw ValidationError("quorum_range", "quorum must be >= 1");
            }
          },
          [](const FinalOnlyPolicy&) {},
      },
      policy);
}

BeemState beem_step(double prev_score, std::optional<ClassIndex> prev_label,
                    const Prediction& current, double weight) {
  const double contribution = weight * current.confidence;
  if (prev_label && *prev_label == current.label) {
    return {prev_score + contribution, current.label};
  }
  return {contribution, current.label};
}

BeemState beem_step(double prev_score, std::optional<ClassIndex> prev_label,
                    const ExitRecord& record, double weight) {
  return beem_step(prev_score, prev_label, predict(record), weight);
}

std::vector<double> beem_scores(const SampleTrace& trace,
                                std::span<const double> weights) {
  check_length(weights.size(), trace.num_layers(), "weights");
  std::vector<double> scores;
  scores.reserve(weights.size());
  BeemState state;
  std::optional<ClassIndex> prev;
  for (int i = 1; i <= trace.num_layers(); ++i) {
    state = beem_step(state.score, prev, trace.prediction(i), weights[i - 1]);
    prev = state.label;
    scores.push_back(state.score);
  }
  return scores;
}

ExitDecision run_beem(const SampleTrace& trace, std::span<const double> weights,
                      const ThresholdVector& thresholds) {
  const int layers = trace.num_layers();
  check_length(weights.size(), layers, "weights");
  check_length(thresholds.size(), layers, "threshold vector");
  std::vector<double> scores;
  scores.reserve(layers);
  BeemState state;
  std::optional<ClassIndex> prev;
  for (int i = 1; i <= layers; ++i) {
    state = beem_step(state.score, prev, trace.prediction(i), weights[i - 1]);
    prev = state.label;
    scores.push_back(state.score);
    if (i < layers && state.score >= thresholds[i - 1]) break;
  }
  const int exit = static_cast<int>(scores.size());
  return decide(trace, exit, std::move(scores));
}

ExitDecision run_beem(const SampleTrace& trace, const WeightScheme& weights,
                      const ThresholdVector& thresholds) {
  const auto w = materialize_weights(weights, trace.num_layers());
  return run_beem(trace, w, thresholds);
}

ExitDecision run_confidence(const SampleTrace& trace, double tau) {
  const int layers = trace.num_layers();
  std::vector<double> scores;
  for (int i = 1; i <= layers; ++i) {
    scores.push_back(trace.prediction(i).confidence);
    if (i < layers && scores.back() >= tau) break;
  }
  const int exit = static_cast<int>(scores.size());
  return decide(trace, exit, std::move(scores));
}

ExitDecision run_patience(const SampleTrace& trace, int patience) {
  const int layers = trace.num_layers();
  std::vector<double> scores;
  int run = 0;
  for (int i = 1; i <= layers; ++i) {
    if (i > 1 && trace.prediction(i).label == trace.prediction(i - 1).label) {
      ++run;
    } else {
      run = 0;
    }
    scores.push_back(run);
    if (i < layers && run >= patience) break;
  }
  const int exit = static_cast<int>(scores.size());
  return decide(trace, exit, std::move(scores));
}

ExitDecision run_majority(const SampleTrace& trace, int quorum) {
  const int layers = trace.num_layers();
  std::map<ClassIndex, int> votes;
  std::vector<double> scores;
  for (int i = 1; i <= layers; ++i) {
    const ClassIndex label = trace.prediction(i).label;
    ++votes[label];
    ClassIndex leader = label;
    int lead = 0;
    for (const auto& [l, n] : votes) {
      if (n > lead) {
        leader = l;
        lead = n;
      }
    }
    scores.push_back(lead);
    if (i >= quorum && 2 * lead > i) {
      ExitDecision d;
      d.exit_layer = i;
      d.label = leader;
      d.score_at_exit = lead;
      d.per_layer_scores = std::move(scores);
      return d;
    }
  }
  return decide(trace, layers, std::move(scores));
}

ExitDecision run_final_only(const SampleTrace& trace) {
  std::vector<double> scores;
  for (const auto& p : trace.predictions()) scores.push_back(p.confidence);
  return decide(trace, trace.num_layers(), std::move(scores));
}

PolicyRunner::PolicyRunner(Policy policy, int layers)
    : policy_(std::move(policy)), layers_(layers) {
  validate_policy(policy_, layers_);
  if (const auto* b = std::get_if<BeemPolicy>(&policy_)) {
    weights_ = materialize_weights(b->weights, layers_);
  }
}

ExitDecision PolicyRunner::operator()(const SampleTrace& trace) const {
  if (trace.num_layers() != layers_) {
    throw ShapeError("trace '" + trace.id() + "' has L = " +
                     std::to_string(trace.num_layers()) +
                     ", policy bound to L = " + std::to_string(layers_));
  }
  return std::visit(
      Overloaded{
          [&](const BeemPolicy& b) {
            return run_beem(trace, weights_, b.thresholds);
          },
          [&](const ConfidencePolicy& c) { return run_confidence(trace, c.tau); },
          [&](const PatiencePolicy& p) {
            return run_patience(trace, p.patience);
          },
          [&](const MajorityPolicy& m) { return run_majority(trace, m.quorum); },
          [&](const FinalOnlyPolicy&) { return run_final_only(trace); },
      },
      policy_);
}

ExitDecision run_policy(const SampleTrace& trace, const Policy& policy) {
  return PolicyRunner(policy, trace.num_layers())(trace);
}

SequenceDecision run_sequence(const SequenceTrace& seq,
                              const PolicyRunner& runner) {
  SequenceDecision out;
  for (const auto& step : seq.token_traces()) {
    const ExitDecision d = runner(step);
    out.tokens.push_back(d.label);
    out.exit_layers.push_back(d.exit_layer);
    if (d.label == seq.eos_token()) {
      out.terminated = true;
      break;
    }
  }
  return out;
}

SequenceDecision run_sequence(const SequenceTrace& seq, const Policy& policy) {
  return run_sequence(seq, PolicyRunner(policy, seq.num_layers()));
}

}  // namespace beem
