#include <algorithm>

#include "beem/errors.hpp"
#include "beem/theory.hpp"
#include "beem/trace_io.hpp"

namespace beem {

namespace {

WeightScheme resolve_weights(const RunConfig& c, int layers,
                             const Dataset* validation) {
  if (c.weights == "cost") return CostWeights{c.lambda};
  if (c.weights == "explicit") return ExplicitWeights{c.weight_values};
  if (!c.accuracies.empty()) return AccuracyWeights{c.accuracies};
  if (!validation) {
    throw ConfigError(
        "accuracy weights need \"accuracies\" or a validation set");
  }
  if (validation->num_layers() != layers) {
    throw ShapeError("validation set has L = " +
                     std::to_string(validation->num_layers()) +
                     ", test set has L = " + std::to_string(layers));
  }
  std::vector<double> acc = standalone_error_rates(*validation);
  for (double& a : acc) a = 1.0 - a;
  return AccuracyWeights{std::move(acc)};
}

}  // namespace

Policy resolve_policy(const RunConfig& c, int layers,
                      const Dataset* validation) {
  Policy policy;
  if (c.policy == "confidence") {
    policy = ConfidencePolicy{c.tau};
  } else if (c.policy == "patience") {
    policy = PatiencePolicy{c.patience};
  } else if (c.policy == "majority") {
    policy = MajorityPolicy{c.quorum};
  } else if (c.policy == "final") {
    policy = FinalOnlyPolicy{};
  } else if (!c.calibration.empty()) {
    policy = to_policy(
        calibration_report_from_json(load_report(c.calibration)));
  } else {
    BeemPolicy b;
    b.weights = resolve_weights(c, layers, validation);
    if (!c.thresholds.empty()) {
      b.thresholds = ThresholdVector(c.thresholds);
    } else {
      b.thresholds =
          ThresholdVector::Uniform(c.alpha.value_or(kDefaultAlpha), layers);
    }
    policy = std::move(b);
  }
  validate_policy(policy, layers);
  return policy;
}

}  // namespace beem
