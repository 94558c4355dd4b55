#include "qmetro/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <fmt/format.h>

#include "qmetro/errors.hpp"
#include "qmetro/random.hpp"

namespace qmetro {

namespace {

// Maps a flat parameter vector onto a NoiseModel for one NoiseFamily.
class NoiseParameterization {
 public:
  NoiseParameterization(const NoiseFamily& family, int n_qubits)
      : family_(family), n_qubits_(n_qubits) {
    if (family_.white_noise) add(0.0, 1.0, 0.02);
    if (family_.tilt == TiltMode::kCollective) add(-std::numbers::pi / 2, std::numbers::pi / 2, 0.0);
    if (family_.tilt == TiltMode::kPerQubit) {
      for (int q = 0; q < n_qubits_; ++q) add(-std::numbers::pi / 2, std::numbers::pi / 2, 0.0);
    }
    // Fitted as the damping 1 - v so that every parameter is zero for an ideal device.
    if (family_.visibility) add(0.0, 1.0, 0.02);
    if (lower_.empty()) throw ParameterError("noise family has no free parameters");
  }

  Eigen::Index size() const { return static_cast<Eigen::Index>(lower_.size()); }
  Eigen::VectorXd initial() const { return Eigen::Map<const Eigen::VectorXd>(start_.data(), size()); }

  Eigen::VectorXd clamp(Eigen::VectorXd x) const {
    for (Eigen::Index i = 0; i < size(); ++i) x(i) = std::clamp(x(i), lower_[i], upper_[i]);
    return x;
  }
  double lower(Eigen::Index i) const { return lower_[i]; }
  double upper(Eigen::Index i) const { return upper_[i]; }

  NoiseModel noise(const Eigen::VectorXd& x) const {
    NoiseModel out;
    Eigen::Index i = 0;
    if (family_.white_noise) out.white_noise = x(i++);
    if (family_.tilt == TiltMode::kCollective) {
      out.misalignment.assign(static_cast<std::size_t>(n_qubits_), x(i++));
    } else if (family_.tilt == TiltMode::kPerQubit) {
      for (int q = 0; q < n_qubits_; ++q) out.misalignment.push_back(x(i++));
    }
    if (family_.visibility) out.visibility = 1.0 - x(i++);
    return out;
  }

 private:
  void add(double lo, double hi, double start) {
    lower_.push_back(lo);
    upper_.push_back(hi);
    start_.push_back(start);
  }

  NoiseFamily family_;
  int n_qubits_;
  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<double> start_;
};

}  // namespace

long long CalibrationData::total(std::size_t j) const {
  long long t = 0;
  for (long long c : counts.at(j)) t += c;
  return t;
}

void CalibrationData::validate(std::size_t outcome_count) const {
  if (thetas.size() != counts.size()) {
    throw ParameterError("calibration data has mismatched phase and count rows");
  }
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (counts[j].size() != outcome_count) {
      throw ParameterError("calibration row " + std::to_string(j) + " has the wrong outcome count");
    }
    for (long long c : counts[j]) {
      if (c < 0) throw ParameterError("calibration counts must be nonnegative");
    }
    if (total(j) <= 0) {
      throw ParameterError("calibration phase " + std::to_string(j) + " has no events");
    }
  }
}

CalibrationFit fit_calibration(const ProbabilityModel& ideal, const CalibrationData& data,
                               const NoiseFamily& family, const FitOptions& options) {
  const std::size_t n_out = ideal.outcomes().size();
  if (data.thetas.size() < 2) throw ParameterError("calibration needs at least two phases");
  data.validate(n_out);

  const NoiseParameterization params(family, ideal.n_qubits());
  const Eigen::Index n_res = static_cast<Eigen::Index>(data.thetas.size() * n_out);
  Eigen::VectorXd observed(n_res);
  for (std::size_t j = 0; j < data.thetas.size(); ++j) {
    const double total = static_cast<double>(data.total(j));
    for (std::size_t o = 0; o < n_out; ++o) {
      observed(static_cast<Eigen::Index>(j * n_out + o)) = data.counts[j][o] / total;
    }
  }

  auto residuals = [&](const Eigen::VectorXd& x) {
    const ProbabilityModel model(ideal.probe(), ideal.generator(), params.noise(x));
    Eigen::VectorXd r(n_res);
    for (std::size_t j = 0; j < data.thetas.size(); ++j) {
      const std::vector<double> p = model.probabilities(data.thetas[j]);
      for (std::size_t o = 0; o < n_out; ++o) {
        const auto k = static_cast<Eigen::Index>(j * n_out + o);
        r(k) = p[o] - observed(k);
      }
    }
    return r;
  };

  auto jacobian = [&](const Eigen::VectorXd& x) {
    constexpr double h = 1e-6;
    Eigen::MatrixXd jac(n_res, params.size());
    for (Eigen::Index i = 0; i < params.size(); ++i) {
      Eigen::VectorXd up = x;
      Eigen::VectorXd down = x;
      up(i) = std::min(x(i) + h, params.upper(i));
      down(i) = std::max(x(i) - h, params.lower(i));
      jac.col(i) = (residuals(up) - residuals(down)) / (up(i) - down(i));
    }
    return jac;
  };

  Eigen::VectorXd x = params.initial();
  Eigen::VectorXd r = residuals(x);
  double cost = r.squaredNorm();
  double damping = 1e-3;
  constexpr std::size_t kStallWindow = 5;
  std::vector<double> history{cost};
  bool converged = false;
  int iteration = 0;

  for (; iteration < options.max_iterations && !converged; ++iteration) {
    const Eigen::MatrixXd jac = jacobian(x);
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * r;

    bool accepted = false;
    while (!accepted) {
      Eigen::MatrixXd lhs = jtj;
      lhs.diagonal() += damping * (jtj.diagonal().array() + 1e-12).matrix();
      const Eigen::VectorXd step = lhs.ldlt().solve(-grad);
      const Eigen::VectorXd trial = params.clamp(x + step);
      const Eigen::VectorXd trial_r = residuals(trial);
      const double trial_cost = trial_r.squaredNorm();
      if (trial_cost <= cost) {
        const double moved = (trial - x).norm();
        x = trial;
        r = trial_r;
        cost = trial_cost;
        damping = std::max(damping / 3.0, 1e-12);
        accepted = true;
        history.push_back(cost);
        // Flat valleys (e.g. per-qubit tilts of a symmetric probe) creep forever, so compare
        // against the cost a few accepted steps back rather than the previous one.
        const std::size_t k = history.size();
        const double window_decrease = k > kStallWindow ? history[k - 1 - kStallWindow] - cost : cost;
        if (window_decrease <= options.tolerance * cost || cost == 0.0 || moved < 1e-12) converged = true;
      } else {
        damping *= 4.0;
        if (damping > 1e12) {
          // No descent direction left inside the bounds: a (constrained) stationary point.
          converged = true;
          break;
        }
      }
    }
  }

  const double rms = std::sqrt(cost / static_cast<double>(n_res));
  if (!converged) {
    throw FitError(fmt::format("calibration fit did not converge after {} iterations, "
                               "residual rms {:.3e}",
                               iteration, rms),
                   rms, iteration);
  }
  NoiseModel noise = params.noise(x);
  ProbabilityModel model(ideal.probe(), ideal.generator(), noise);
  return {std::move(noise), std::move(model), rms, iteration};
}

CalibrationData simulate_calibration(const ProbabilityModel& model,
                                     const std::vector<double>& thetas, long long events,
                                     std::uint64_t seed) {
  if (events < 1) throw ParameterError("need at least one event per phase");
  CalibrationData data;
  data.thetas = thetas;
  for (std::size_t j = 0; j < thetas.size(); ++j) {
    const std::vector<double> p = model.probabilities(thetas[j]);
    std::vector<double> cdf(p.size());
    double acc = 0.0;
    for (std::size_t o = 0; o < p.size(); ++o) cdf[o] = (acc += p[o]);
    Rng rng(derive_seed(seed, j));
    std::vector<long long> counts(p.size(), 0);
    for (long long e = 0; e < events; ++e) {
      ++counts[sample_categorical(cdf, rng)];
    }
    data.counts.push_back(std::move(counts));
  }
  return data;
}

CalibrationData expected_calibration(const ProbabilityModel& model,
                                     const std::vector<double>& thetas, long long events) {
  if (events < 1) throw ParameterError("need at least one event per phase");
  CalibrationData data;
  data.thetas = thetas;
  for (double theta : thetas) {
    std::vector<long long> counts;
    for (double p : model.probabilities(theta)) {
      counts.push_back(std::llround(p * static_cast<double>(events)));
    }
    data.counts.push_back(std::move(counts));
  }
  return data;
}

std::vector<double> phase_grid(double lo, double hi, int points) {
  if (points < 1) throw ParameterError("phase grid needs at least one point");
  if (!(hi >= lo)) throw ParameterError("phase grid bounds are reversed");
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    grid[i] = points == 1 ? lo : lo + (hi - lo) * i / (points - 1);
  }
  if (points > 1) grid.back() = hi;
  return grid;
}

}  // namespace qmetro
