#pragma once

#include <cstdint>
#include <map>
#include <numbers>
#include <vector>

#include "qmetro/interferometer.hpp"

namespace qmetro {

/// Closed phase interval used as the estimator's domain and the flat prior's support.
struct Interval {
  double lo = 0.0;
  double hi = std::numbers::pi / 2;

  double length() const { return hi - lo; }
  void validate() const;
};

inline constexpr int kDefaultGridPoints = 2001;
/// Probabilities below this are floored before taking logarithms.
inline constexpr double kLogFloor = 1e-300;
inline constexpr double kConfidenceMass = 0.68;

struct OutcomeSample {
  double theta_true = 0.0;
  std::vector<int> outcomes;
  std::uint64_t seed = 0;
};

/// m i.i.d. outcomes drawn from P(mu|theta0); identical for identical seeds.
OutcomeSample sample_outcomes(const ProbabilityModel& model, double theta0, int m,
                              std::uint64_t seed);

struct LikelihoodCurve {
  std::vector<double> grid;
  std::vector<double> log_values;
};

/// log P(mu|theta) tabulated on a uniform grid over the interval, shared by every
/// estimate made with the same model.
class LikelihoodTable {
 public:
  LikelihoodTable(const ProbabilityModel& model, Interval interval,
                  int grid_points = kDefaultGridPoints);

  const Interval& interval() const noexcept { return interval_; }
  const std::vector<double>& grid() const noexcept { return grid_; }
  const MeasurementModel& measurement() const noexcept { return measurement_; }

  /// sum_i log P(mu_i|theta) on the grid. Throws EstimationError when every grid point
  /// assigns zero probability to some observed outcome.
  LikelihoodCurve log_likelihood(const OutcomeSample& sample) const;

 private:
  Interval interval_;
  MeasurementModel measurement_;
  std::vector<double> grid_;
  std::vector<std::vector<double>> log_p_;      // [outcome][grid]
  std::vector<std::vector<bool>> vanishing_;    // [outcome][grid]: P below the log floor
};

struct MlEstimate {
  double theta_est = 0.0;
  double log_likelihood_at_max = 0.0;
};

/// Grid argmax of the log-likelihood (first maximum on ties), refined by a parabola
/// through the maximum and its two neighbours.
MlEstimate ml_estimate(const LikelihoodTable& table, const OutcomeSample& sample);
MlEstimate ml_estimate(const ProbabilityModel& model, const OutcomeSample& sample,
                       Interval interval = {}, int grid_points = kDefaultGridPoints);

struct BayesPosterior {
  std::vector<double> grid;
  std::vector<double> density;
  double theta_est = 0.0;
  /// Half-width of [theta_est - C, theta_est + C] holding 68% of the posterior mass.
  double confidence = 0.0;
  /// The interval hit a boundary and was completed on the other side.
  bool clipped = false;
};

/// Posterior for a flat prior on the interval, normalized with the trapezoid rule.
BayesPosterior bayes_posterior(const LikelihoodTable& table, const OutcomeSample& sample);
BayesPosterior bayes_posterior(const ProbabilityModel& model, const OutcomeSample& sample,
                               Interval interval = {}, int grid_points = kDefaultGridPoints);

/// Half-width C around `center` such that the (boundary-clipped) interval holds `mass`.
double symmetric_confidence(const std::vector<double>& grid, const std::vector<double>& density,
                            double center, double mass, bool* clipped = nullptr);

struct EstimatorHistogram {
  Interval range;
  std::vector<long long> counts;

  long long mass() const;
  double bin_center(std::size_t bin) const;
};

struct CampaignOptions {
  int m = 100;
  int repetitions = 1000;
  std::uint64_t base_seed = 1;
  Interval interval;
  int grid_points = kDefaultGridPoints;
  int histogram_bins = 50;
};

struct CampaignReport {
  double theta_true = 0.0;
  int m = 0;
  int repetitions = 0;
  /// Repetitions whose estimate raised EstimationError; they are left out of all statistics.
  int failures = 0;
  std::vector<double> estimates;
  EstimatorHistogram histogram;
  double mean = 0.0;
  double std = 0.0;
  double bias = 0.0;
  /// sqrt(m) * std for ML; sqrt(m) * <C> for Bayes.
  double delta_res = 0.0;
  /// Bayes only: per-repetition confidences and their spread.
  std::vector<double> confidences;
  double mean_confidence = 0.0;
  double confidence_std = 0.0;
  double confidence_sem = 0.0;
  int clipped = 0;

  /// Monte Carlo standard error of delta_res.
  double delta_res_error() const;
};

/// R independent m-experiments; repetition i uses seed derive_seed(base_seed, i).
CampaignReport ml_campaign(const ProbabilityModel& model, double theta0,
                           const CampaignOptions& options);
CampaignReport bayes_campaign(const ProbabilityModel& model, double theta0,
                              const CampaignOptions& options);

struct CorrectedBound {
  double value = 0.0;
  double bias_slope = 0.0;
  /// theta0 sat at the edge of the bias grid and a one-sided difference was used.
  bool reduced_accuracy = false;
};

/// Cramer-Rao bound for a biased estimator, |1 + db/dtheta0| / sqrt(m F), with
/// b = <theta_est> - theta0 and db/dtheta0 from finite differences of `bias_curve`
/// (central where possible, one-sided at the grid edges).
CorrectedBound bias_corrected_crlb(const std::map<double, double>& bias_curve, double fisher,
                                   int m, double theta0);

}  // namespace qmetro
