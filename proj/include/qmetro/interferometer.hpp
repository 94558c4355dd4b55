#pragma once

#include <optional>
#include <vector>

#include "qmetro/state.hpp"

namespace qmetro {

/// Projective measurement of mu = (N_H - N_V) / 2, diagonal in the computational basis.
class MeasurementModel {
 public:
  int n_qubits() const noexcept { return n_qubits_; }
  /// Outcome values in ascending order, -N/2 ... N/2.
  const std::vector<int>& outcomes() const noexcept { return outcomes_; }
  std::size_t outcome_count() const noexcept { return outcomes_.size(); }
  /// Position of mu in outcomes(); throws ParameterError for values outside the set.
  std::size_t index_of(int mu) const;
  /// Outcome index hit by a computational basis state.
  std::size_t index_of_basis(Eigen::Index basis_state) const { return basis_outcome_[basis_state]; }
  CMatrix projector(int mu) const;
  Eigen::Index rank(int mu) const;

  friend MeasurementModel projectors(int n_qubits);

 private:
  int n_qubits_ = 0;
  std::vector<int> outcomes_;
  std::vector<std::size_t> basis_outcome_;
};

/// Builds the outcome projectors for an even number of qubits.
MeasurementModel projectors(int n_qubits);

/// Imperfections of the interferometer.
///
/// A misalignment angle d_i tilts the rotation axis of qubit i by d_i towards z (towards x
/// when the axis is along z) and offsets its rotation angle by d_i, so qubit i undergoes
/// exp(-i (theta + d_i) n'_i.sigma / 2). The probe is first damped, rho -> v rho + (1-v) diag(rho),
/// then mixed with white noise, rho -> (1-p) rho + p 1/2^N.
struct NoiseModel {
  std::vector<double> misalignment;  ///< radians per qubit; empty means aligned
  double white_noise = 0.0;
  double visibility = 1.0;

  static NoiseModel collective(int n_qubits, double tilt, double white_noise = 0.0,
                               double visibility = 1.0);
  /// Throws ParameterError for out-of-range values or a wrong number of tilts.
  void validate(int n_qubits) const;
};

/// Axis obtained by tilting `axis` by `angle` radians towards z (or x for axes along z).
LocalAxis tilted_axis(const LocalAxis& axis, double angle);

/// theta -> P(mu|theta) for a probe, a phase generator, the mu measurement and optional noise.
/// Immutable; probabilities are evaluated as finite Fourier series in theta.
class ProbabilityModel {
 public:
  ProbabilityModel(QuantumState probe, CollectiveGenerator generator,
                   std::optional<NoiseModel> noise = std::nullopt);

  const QuantumState& probe() const noexcept { return probe_; }
  const CollectiveGenerator& generator() const noexcept { return generator_; }
  const MeasurementModel& measurement() const noexcept { return measurement_; }
  const std::optional<NoiseModel>& noise() const noexcept { return noise_; }
  int n_qubits() const noexcept { return probe_.n_qubits(); }
  const std::vector<int>& outcomes() const noexcept { return measurement_.outcomes(); }

  /// Probe after damping, white noise and the static misalignment offset.
  const QuantumState& effective_probe() const noexcept { return effective_probe_; }
  /// Generator with the tilted axes.
  const CollectiveGenerator& effective_generator() const noexcept { return effective_generator_; }

  /// P(mu|theta) for every outcome, in outcomes() order.
  std::vector<double> probabilities(double theta) const;
  /// dP(mu|theta)/dtheta for every outcome, in outcomes() order.
  std::vector<double> derivatives(double theta) const;

 private:
  QuantumState probe_;
  CollectiveGenerator generator_;
  MeasurementModel measurement_;
  std::optional<NoiseModel> noise_;
  QuantumState effective_probe_;
  CollectiveGenerator effective_generator_;
  int max_frequency_ = 0;
  // coefficients_[o](d + max_frequency_) multiplies exp(-i d theta).
  std::vector<CVector> coefficients_;
};

double cond_prob(const ProbabilityModel& model, double theta, int mu);
double prob_derivative(const ProbabilityModel& model, double theta, int mu);

struct FisherResult {
  double value = 0.0;
  /// Set when some P(mu|theta) vanishes while its derivative does not. `value` then holds
  /// only the regular terms and must not be read as the Fisher information.
  bool divergent = false;
};

inline constexpr double kFisherProbabilityFloor = 1e-12;
inline constexpr double kFisherDerivativeFloor = 1e-9;

/// Classical Fisher information sum_mu (dP/dtheta)^2 / P.
FisherResult fisher_information(const ProbabilityModel& model, double theta);

/// Same probe and generator, with `noise` replacing any noise already present.
ProbabilityModel apply_noise(const ProbabilityModel& model, const NoiseModel& noise);

}  // namespace qmetro
