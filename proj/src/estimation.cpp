#include "qmetro/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "qmetro/calibration.hpp"
#include "qmetro/errors.hpp"
#include "qmetro/random.hpp"

namespace qmetro {

namespace {

constexpr double kLogFloorValue = -690.7755278982137;  // log(1e-300)

std::size_t first_argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

// Vertex of the parabola through (i-1, i, i+1), or the grid point when that is not concave.
double refine_peak(const std::vector<double>& grid, const std::vector<double>& values,
                   std::size_t i) {
  if (i == 0 || i + 1 >= values.size()) return grid[i];
  const double left = values[i - 1];
  const double mid = values[i];
  const double right = values[i + 1];
  const double curvature = left - 2.0 * mid + right;
  if (!(curvature < 0.0)) return grid[i];
  const double shift = std::clamp(0.5 * (left - right) / curvature, -0.5, 0.5);
  return grid[i] + shift * (grid[i + 1] - grid[i]);
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

EstimatorHistogram make_histogram(const std::vector<double>& values, Interval range, int bins) {
  EstimatorHistogram h{range, std::vector<long long>(static_cast<std::size_t>(bins), 0)};
  for (double v : values) {
    const double pos = (v - range.lo) / range.length() * bins;
    const auto bin = static_cast<std::size_t>(std::clamp(std::floor(pos), 0.0, bins - 1.0));
    ++h.counts[bin];
  }
  return h;
}

void check_campaign(const CampaignOptions& options) {
  if (options.repetitions < 2) throw ParameterError("a campaign needs at least two repetitions");
  if (options.m < 1) throw ParameterError("a campaign needs m >= 1");
  if (options.histogram_bins < 1) throw ParameterError("histogram needs at least one bin");
  options.interval.validate();
}

}  // namespace

void Interval::validate() const {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(hi > lo)) {
    throw ParameterError("estimation interval must be finite with lo < hi");
  }
}

OutcomeSample sample_outcomes(const ProbabilityModel& model, double theta0, int m,
                              std::uint64_t seed) {
  if (!std::isfinite(theta0)) throw ParameterError("true phase must be finite");
  if (m < 0) throw ParameterError("sample size m must be nonnegative");
  OutcomeSample sample{theta0, {}, seed};
  if (m == 0) return sample;
  const std::vector<double> p = model.probabilities(theta0);
  std::vector<double> cdf(p.size());
  std::partial_sum(p.begin(), p.end(), cdf.begin());
  Rng rng(seed);
  sample.outcomes.reserve(static_cast<std::size_t>(m));
  const std::vector<int>& outcomes = model.outcomes();
  for (int i = 0; i < m; ++i) sample.outcomes.push_back(outcomes[sample_categorical(cdf, rng)]);
  return sample;
}

LikelihoodTable::LikelihoodTable(const ProbabilityModel& model, Interval interval,
                                 int grid_points)
    : interval_(interval), measurement_(model.measurement()) {
  interval_.validate();
  if (grid_points < 3) throw ParameterError("likelihood grid needs at least 3 points");
  grid_ = phase_grid(interval_.lo, interval_.hi, grid_points);
  const std::size_t n_out = measurement_.outcome_count();
  log_p_.assign(n_out, std::vector<double>(grid_.size()));
  vanishing_.assign(n_out, std::vector<bool>(grid_.size()));
  for (std::size_t g = 0; g < grid_.size(); ++g) {
    const std::vector<double> p = model.probabilities(grid_[g]);
    for (std::size_t o = 0; o < n_out; ++o) {
      vanishing_[o][g] = p[o] < kLogFloor;
      log_p_[o][g] = vanishing_[o][g] ? kLogFloorValue : std::log(p[o]);
    }
  }
}

LikelihoodCurve LikelihoodTable::log_likelihood(const OutcomeSample& sample) const {
  if (sample.outcomes.empty()) throw ParameterError("cannot estimate from an empty sample");
  std::vector<long long> counts(measurement_.outcome_count(), 0);
  for (int mu : sample.outcomes) ++counts[measurement_.index_of(mu)];

  LikelihoodCurve curve{grid_, std::vector<double>(grid_.size(), 0.0)};
  bool any_possible = false;
  for (std::size_t g = 0; g < grid_.size(); ++g) {
    bool possible = true;
    double acc = 0.0;
    for (std::size_t o = 0; o < counts.size(); ++o) {
      if (counts[o] == 0) continue;
      acc += static_cast<double>(counts[o]) * log_p_[o][g];
      if (vanishing_[o][g]) possible = false;
    }
    curve.log_values[g] = acc;
    any_possible = any_possible || possible;
  }
  if (!any_possible) {
    throw EstimationError("likelihood vanishes on the whole interval for the observed outcomes");
  }
  return curve;
}

MlEstimate ml_estimate(const LikelihoodTable& table, const OutcomeSample& sample) {
  const LikelihoodCurve curve = table.log_likelihood(sample);
  const std::size_t i = first_argmax(curve.log_values);
  return {refine_peak(curve.grid, curve.log_values, i), curve.log_values[i]};
}

MlEstimate ml_estimate(const ProbabilityModel& model, const OutcomeSample& sample,
                       Interval interval, int grid_points) {
  return ml_estimate(LikelihoodTable(model, interval, grid_points), sample);
}

double symmetric_confidence(const std::vector<double>& grid, const std::vector<double>& density,
                            double center, double mass, bool* clipped) {
  const std::size_t n = grid.size();
  // Cumulative mass at the grid nodes of the piecewise-linear density.
  std::vector<double> cumulative(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    cumulative[i] = cumulative[i - 1] + 0.5 * (density[i - 1] + density[i]) * (grid[i] - grid[i - 1]);
  }
  const auto cdf = [&](double x) {
    if (x <= grid.front()) return 0.0;
    if (x >= grid.back()) return cumulative.back();
    const auto it = std::upper_bound(grid.begin(), grid.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - grid.begin()) - 1;
    const double h = grid[i + 1] - grid[i];
    const double t = x - grid[i];
    return cumulative[i] + density[i] * t + (density[i + 1] - density[i]) * t * t / (2.0 * h);
  };
  const double target = mass * cumulative.back();
  double lo = 0.0;
  double hi = grid.back() - grid.front();
  for (int it = 0; it < 200; ++it) {
    const double c = 0.5 * (lo + hi);
    if (c <= lo || c >= hi) break;
    if (cdf(center + c) - cdf(center - c) < target) {
      lo = c;
    } else {
      hi = c;
    }
  }
  if (clipped) *clipped = center - hi < grid.front() || center + hi > grid.back();
  return hi;
}

BayesPosterior bayes_posterior(const LikelihoodTable& table, const OutcomeSample& sample) {
  const LikelihoodCurve curve = table.log_likelihood(sample);
  const std::vector<double>& grid = curve.grid;
  const std::size_t n = grid.size();
  const std::size_t peak = first_argmax(curve.log_values);
  const double top = curve.log_values[peak];

  BayesPosterior post;
  post.grid = grid;
  post.density.resize(n);
  for (std::size_t g = 0; g < n; ++g) post.density[g] = std::exp(curve.log_values[g] - top);
  double norm = 0.0;
  for (std::size_t g = 1; g < n; ++g) {
    norm += 0.5 * (post.density[g - 1] + post.density[g]) * (grid[g] - grid[g - 1]);
  }
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw EstimationError("posterior cannot be normalized on the interval");
  }
  for (double& d : post.density) d /= norm;

  // A plateau of equal maxima is resolved to its midpoint.
  std::size_t last = peak;
  while (last + 1 < n && curve.log_values[last + 1] == top) ++last;
  post.theta_est = last > peak ? 0.5 * (grid[peak] + grid[last])
                               : refine_peak(grid, curve.log_values, peak);
  post.confidence =
      symmetric_confidence(grid, post.density, post.theta_est, kConfidenceMass, &post.clipped);
  return post;
}

BayesPosterior bayes_posterior(const ProbabilityModel& model, const OutcomeSample& sample,
                               Interval interval, int grid_points) {
  return bayes_posterior(LikelihoodTable(model, interval, grid_points), sample);
}

long long EstimatorHistogram::mass() const {
  return std::accumulate(counts.begin(), counts.end(), 0LL);
}

double EstimatorHistogram::bin_center(std::size_t bin) const {
  return range.lo + (static_cast<double>(bin) + 0.5) * range.length() /
                        static_cast<double>(counts.size());
}

double CampaignReport::delta_res_error() const {
  const auto n = static_cast<double>(repetitions - failures);
  if (!confidences.empty()) return std::sqrt(static_cast<double>(m)) * confidence_sem;
  return n > 1 ? delta_res / std::sqrt(2.0 * (n - 1.0)) : 0.0;
}

CampaignReport ml_campaign(const ProbabilityModel& model, double theta0,
                           const CampaignOptions& options) {
  check_campaign(options);
  const LikelihoodTable table(model, options.interval, options.grid_points);
  CampaignReport report;
  report.theta_true = theta0;
  report.m = options.m;
  report.repetitions = options.repetitions;
  for (int r = 0; r < options.repetitions; ++r) {
    const OutcomeSample sample =
        sample_outcomes(model, theta0, options.m, derive_seed(options.base_seed, r));
    try {
      report.estimates.push_back(ml_estimate(table, sample).theta_est);
    } catch (const EstimationError&) {
      ++report.failures;
    }
  }
  report.histogram = make_histogram(report.estimates, options.interval, options.histogram_bins);
  report.mean = mean_of(report.estimates);
  report.std = sample_std(report.estimates, report.mean);
  report.bias = report.mean - theta0;
  report.delta_res = std::sqrt(static_cast<double>(options.m)) * report.std;
  return report;
}

CampaignReport bayes_campaign(const ProbabilityModel& model, double theta0,
                              const CampaignOptions& options) {
  check_campaign(options);
  const LikelihoodTable table(model, options.interval, options.grid_points);
  CampaignReport report;
  report.theta_true = theta0;
  report.m = options.m;
  report.repetitions = options.repetitions;
  for (int r = 0; r < options.repetitions; ++r) {
    const OutcomeSample sample =
        sample_outcomes(model, theta0, options.m, derive_seed(options.base_seed, r));
    try {
      const BayesPosterior post = bayes_posterior(table, sample);
      report.estimates.push_back(post.theta_est);
      report.confidences.push_back(post.confidence);
      if (post.clipped) ++report.clipped;
    } catch (const EstimationError&) {
      ++report.failures;
    }
  }
  report.histogram = make_histogram(report.estimates, options.interval, options.histogram_bins);
  report.mean = mean_of(report.estimates);
  report.std = sample_std(report.estimates, report.mean);
  report.bias = report.mean - theta0;
  report.mean_confidence = mean_of(report.confidences);
  report.confidence_std = sample_std(report.confidences, report.mean_confidence);
  report.confidence_sem =
      report.confidences.empty()
          ? 0.0
          : report.confidence_std / std::sqrt(static_cast<double>(report.confidences.size()));
  report.delta_res = std::sqrt(static_cast<double>(options.m)) * report.mean_confidence;
  return report;
}

CorrectedBound bias_corrected_crlb(const std::map<double, double>& bias_curve, double fisher,
                                   int m, double theta0) {
  if (bias_curve.size() < 2) throw ParameterError("bias curve needs at least two phases");
  if (!(fisher > 0.0) || !std::isfinite(fisher)) {
    throw ParameterError("Fisher information must be positive and finite");
  }
  if (m < 1) throw ParameterError("m must be positive");

  constexpr double kKeyTol = 1e-9;
  auto it = bias_curve.lower_bound(theta0 - kKeyTol);
  if (it == bias_curve.end() || std::abs(it->first - theta0) > kKeyTol) {
    throw ParameterError("theta0 is not on the bias grid");
  }
  CorrectedBound out;
  const auto next = std::next(it);
  if (it != bias_curve.begin() && next != bias_curve.end()) {
    const auto prev = std::prev(it);
    out.bias_slope = (next->second - prev->second) / (next->first - prev->first);
  } else if (next != bias_curve.end()) {
    out.bias_slope = (next->second - it->second) / (next->first - it->first);
    out.reduced_accuracy = true;
  } else {
    const auto prev = std::prev(it);
    out.bias_slope = (it->second - prev->second) / (it->first - prev->first);
    out.reduced_accuracy = true;
  }
  out.value = std::abs(1.0 + out.bias_slope) / std::sqrt(static_cast<double>(m) * fisher);
  return out;
}

}  // namespace qmetro
