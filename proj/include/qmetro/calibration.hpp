#pragma once

#include <cstdint>
#include <vector>

#include "qmetro/interferometer.hpp"

namespace qmetro {

/// Outcome counts recorded at a set of known phases.
struct CalibrationData {
  std::vector<double> thetas;
  /// counts[j][o]: events with outcome index o at phase thetas[j].
  std::vector<std::vector<long long>> counts;

  long long total(std::size_t j) const;
  /// Throws ParameterError on ragged rows, negative counts or empty phases.
  void validate(std::size_t outcome_count) const;
};

enum class TiltMode { kNone, kCollective, kPerQubit };

/// Which NoiseModel parameters are free in a fit; the others stay at their ideal values.
struct NoiseFamily {
  bool white_noise = true;
  TiltMode tilt = TiltMode::kCollective;
  bool visibility = false;
};

struct FitOptions {
  int max_iterations = 200;
  /// Converged once the cost fell by less than this fraction over the last five accepted steps.
  double tolerance = 1e-5;
};

struct CalibrationFit {
  NoiseModel noise;
  ProbabilityModel model;
  double residual_rms = 0.0;
  int iterations = 0;
};

/// Least-squares fit of the free noise parameters to the observed outcome frequencies,
/// minimizing sum_{j,mu} (c_j(mu)/total_j - P(mu|theta_j))^2. The probe and generator of
/// `ideal` are kept; any noise it carries is ignored.
CalibrationFit fit_calibration(const ProbabilityModel& ideal, const CalibrationData& data,
                               const NoiseFamily& family, const FitOptions& options = {});

/// Multinomial draws of `events` outcomes at every phase.
CalibrationData simulate_calibration(const ProbabilityModel& model,
                                     const std::vector<double>& thetas, long long events,
                                     std::uint64_t seed);

/// `events` * P(mu|theta) rounded to the nearest integer: calibration data without shot noise.
CalibrationData expected_calibration(const ProbabilityModel& model,
                                     const std::vector<double>& thetas, long long events);

/// `points` equally spaced phases covering [lo, hi].
std::vector<double> phase_grid(double lo, double hi, int points);

}  // namespace qmetro
