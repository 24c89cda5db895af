#pragma once

// Threshold selection on a labeled validation set.
//
// Two methods are provided. The classical method picks one threshold for all
// exits by validation accuracy. The error-rate method picks, exit by exit, the
// smallest grid threshold whose exited-and-misclassified fraction does not
// exceed the final layer's error rate p. Exits are calibrated in order
// 1..L-1 and each exit only sees samples that did not leave at an earlier
// exit under the thresholds already chosen.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "beem/policy.hpp"
#include "beem/trace.hpp"

namespace beem {

inline constexpr const char* kMethodErrorRate = "error-rate";
inline constexpr const char* kMethodClassical = "classical";

// {0.5, 1.0, ..., 5.0}; the sentinel L is added by calibrate_error_rate.
std::vector<double> default_error_rate_grid();
// {0.3, 0.6, 0.9, 1.2, 1.5}.
std::vector<double> default_classical_grid();

struct ExitCalibration {
  int exit = 0;
  std::size_t c_stop = 0;
  // Misclassified fraction among the c_stop exiters; 0 when c_stop == 0.
  double c_misc_fraction = 0.0;
  double alpha = 0.0;
  bool feasible = true;

  bool operator==(const ExitCalibration&) const = default;
};

struct CalibrationReport {
  std::string method;
  std::vector<double> weights;
  ThresholdVector thresholds;
  std::vector<ExitCalibration> per_exit;
  double final_error_rate = 0.0;
  std::vector<double> grid;

  bool operator==(const CalibrationReport&) const = default;
};

// Fraction of units whose final-layer prediction is wrong.
double final_error_rate(const Dataset& val);

struct ExitStats {
  std::size_t c_stop = 0;
  double error_rate = 0.0;

  bool operator==(const ExitStats&) const = default;
};

// Replays the recurrence on every unit. Among units that did not exit at
// 1..t-1 under `fixed_prefix` (t-1 thresholds), counts those with S_t >= alpha
// and the misclassified fraction among them.
ExitStats exit_stats(const Dataset& val, std::span<const double> weights,
                     std::span<const double> fixed_prefix, double alpha,
                     int exit);

CalibrationReport calibrate_error_rate(const Dataset& val,
                                       std::span<const double> weights,
                                       std::vector<double> grid,
                                       std::optional<double> p_override = {});

CalibrationReport calibrate_classical(const Dataset& val,
                                      std::span<const double> weights,
                                      std::vector<double> grid);

// Policy with the report's weights and thresholds.
BeemPolicy to_policy(const CalibrationReport& report);

}  // namespace beem
