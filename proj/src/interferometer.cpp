#include "qmetro/interferometer.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "qmetro/errors.hpp"

namespace qmetro {

namespace {

constexpr double kNegativeProbabilityTol = 1e-12;

QuantumState noisy_probe(const QuantumState& probe, const NoiseModel& noise,
                         const std::vector<LocalAxis>& tilted) {
  const Eigen::Index dim = probe.dim();
  const CMatrix& rho = probe.matrix();
  CMatrix out = noise.visibility * rho;
  out.diagonal() += (1.0 - noise.visibility) * rho.diagonal();
  out *= (1.0 - noise.white_noise);
  out.diagonal().array() += noise.white_noise / static_cast<double>(dim);

  if (!noise.misalignment.empty()) {
    const int n = probe.n_qubits();
    const std::array<Eigen::Matrix2cd, 3> paulis = {pauli_x(), pauli_y(), pauli_z()};
    CMatrix offset = CMatrix::Identity(dim, dim);
    for (int q = 0; q < n; ++q) {
      const double half = 0.5 * noise.misalignment[q];
      if (half == 0.0) continue;
      const Eigen::Vector3d a = tilted[q].vector();
      Eigen::Matrix2cd n_sigma = a(0) * paulis[0] + a(1) * paulis[1] + a(2) * paulis[2];
      const Eigen::Matrix2cd u = std::cos(half) * Eigen::Matrix2cd::Identity() -
                                 Complex(0.0, std::sin(half)) * n_sigma;
      offset = embed_single_qubit(u, q, n) * offset;
    }
    out = offset * out * offset.adjoint();
  }
  out = 0.5 * (out + out.adjoint()).eval();
  return {probe.n_qubits(), std::move(out)};
}

}  // namespace

MeasurementModel projectors(int n_qubits) {
  if (n_qubits < 2 || n_qubits > kMaxQubits) {
    throw ParameterError("mu measurement needs 2 <= N <= " + std::to_string(kMaxQubits));
  }
  if (n_qubits % 2 != 0) {
    throw UnsupportedParameterError("odd N gives half-integer outcomes, which are not modelled");
  }
  MeasurementModel m;
  m.n_qubits_ = n_qubits;
  const int half = n_qubits / 2;
  for (int mu = -half; mu <= half; ++mu) m.outcomes_.push_back(mu);
  const Eigen::Index dim = hilbert_dim(n_qubits);
  m.basis_outcome_.resize(static_cast<std::size_t>(dim));
  for (Eigen::Index b = 0; b < dim; ++b) {
    const int n_v = std::popcount(static_cast<unsigned long long>(b));
    const int mu = (n_qubits - 2 * n_v) / 2;
    m.basis_outcome_[static_cast<std::size_t>(b)] = static_cast<std::size_t>(mu + half);
  }
  return m;
}

std::size_t MeasurementModel::index_of(int mu) const {
  const int half = n_qubits_ / 2;
  if (mu < -half || mu > half) {
    throw ParameterError("outcome mu=" + std::to_string(mu) + " is not in the outcome set");
  }
  return static_cast<std::size_t>(mu + half);
}

CMatrix MeasurementModel::projector(int mu) const {
  const std::size_t idx = index_of(mu);
  const Eigen::Index dim = hilbert_dim(n_qubits_);
  CMatrix p = CMatrix::Zero(dim, dim);
  for (Eigen::Index b = 0; b < dim; ++b) {
    if (basis_outcome_[static_cast<std::size_t>(b)] == idx) p(b, b) = 1.0;
  }
  return p;
}

Eigen::Index MeasurementModel::rank(int mu) const {
  const std::size_t idx = index_of(mu);
  return std::count(basis_outcome_.begin(), basis_outcome_.end(), idx);
}

NoiseModel NoiseModel::collective(int n_qubits, double tilt, double white_noise,
                                  double visibility) {
  NoiseModel noise;
  noise.misalignment.assign(static_cast<std::size_t>(n_qubits), tilt);
  noise.white_noise = white_noise;
  noise.visibility = visibility;
  return noise;
}

void NoiseModel::validate(int n_qubits) const {
  if (!misalignment.empty() && static_cast<int>(misalignment.size()) != n_qubits) {
    throw ParameterError("misalignment needs one angle per qubit");
  }
  for (double a : misalignment) {
    if (!std::isfinite(a) || std::abs(a) > std::numbers::pi / 2) {
      throw ParameterError("misalignment angles must lie in [-pi/2, pi/2]");
    }
  }
  if (!(white_noise >= 0.0 && white_noise <= 1.0)) {
    throw ParameterError("white-noise fraction must lie in [0, 1]");
  }
  if (!(visibility >= 0.0 && visibility <= 1.0)) {
    throw ParameterError("visibility must lie in [0, 1]");
  }
}

LocalAxis tilted_axis(const LocalAxis& axis, double angle) {
  if (angle == 0.0) return axis;
  const Eigen::Vector3d n = axis.vector();
  Eigen::Vector3d t = Eigen::Vector3d::UnitZ() - n.z() * n;
  if (t.norm() < 1e-12) t = Eigen::Vector3d::UnitX() - n.x() * n;
  t.normalize();
  const Eigen::Vector3d out = std::cos(angle) * n + std::sin(angle) * t;
  return LocalAxis::normalized(out.x(), out.y(), out.z());
}

ProbabilityModel::ProbabilityModel(QuantumState probe, CollectiveGenerator generator,
                                   std::optional<NoiseModel> noise)
    : probe_(std::move(probe)),
      generator_(std::move(generator)),
      measurement_(projectors(probe_.n_qubits())),
      noise_(std::move(noise)),
      effective_probe_(probe_),
      effective_generator_(generator_) {
  if (probe_.n_qubits() != generator_.n_qubits()) {
    throw ParameterError("probe and generator act on different numbers of qubits");
  }
  const int n = probe_.n_qubits();
  if (noise_) {
    noise_->validate(n);
    std::vector<LocalAxis> axes = generator_.axes();
    if (!noise_->misalignment.empty()) {
      for (int q = 0; q < n; ++q) axes[q] = tilted_axis(axes[q], noise_->misalignment[q]);
    }
    effective_probe_ = noisy_probe(probe_, *noise_, axes);
    effective_generator_ = CollectiveGenerator(std::move(axes));
  }

  // Generator eigenvalues are half-integers, so every Bohr frequency is an integer in [-N, N].
  max_frequency_ = n;
  const CMatrix& w = effective_generator_.eigenvectors();
  const Eigen::VectorXd& lambda = effective_generator_.eigenvalues();
  const CMatrix rho = w.adjoint() * effective_probe_.matrix() * w;
  const Eigen::Index dim = rho.rows();
  const std::size_t n_out = measurement_.outcome_count();

  // Rows of W grouped by outcome give W^dagger P_mu W.
  std::vector<CMatrix> proj(n_out, CMatrix::Zero(dim, dim));
  for (Eigen::Index b = 0; b < dim; ++b) {
    const std::size_t o = measurement_.index_of_basis(b);
    proj[o] += w.row(b).adjoint() * w.row(b);
  }

  coefficients_.assign(n_out, CVector::Zero(2 * max_frequency_ + 1));
  for (std::size_t o = 0; o < n_out; ++o) {
    for (Eigen::Index k = 0; k < dim; ++k) {
      for (Eigen::Index l = 0; l < dim; ++l) {
        const int d = static_cast<int>(std::lround(lambda(k) - lambda(l)));
        coefficients_[o](d + max_frequency_) += proj[o](l, k) * rho(k, l);
      }
    }
  }
}

std::vector<double> ProbabilityModel::probabilities(double theta) const {
  std::vector<double> out(coefficients_.size());
  for (std::size_t o = 0; o < coefficients_.size(); ++o) {
    double p = 0.0;
    for (int d = -max_frequency_; d <= max_frequency_; ++d) {
      p += (coefficients_[o](d + max_frequency_) * std::polar(1.0, -theta * d)).real();
    }
    if (p < -kNegativeProbabilityTol) {
      throw InconsistencyError("model produced negative probability " + std::to_string(p));
    }
    out[o] = std::clamp(p, 0.0, 1.0);
  }
  return out;
}

std::vector<double> ProbabilityModel::derivatives(double theta) const {
  std::vector<double> out(coefficients_.size());
  for (std::size_t o = 0; o < coefficients_.size(); ++o) {
    double dp = 0.0;
    for (int d = -max_frequency_; d <= max_frequency_; ++d) {
      const Complex c = coefficients_[o](d + max_frequency_) * std::polar(1.0, -theta * d);
      dp += (Complex(0.0, -static_cast<double>(d)) * c).real();
    }
    out[o] = dp;
  }
  return out;
}

double cond_prob(const ProbabilityModel& model, double theta, int mu) {
  const std::size_t idx = model.measurement().index_of(mu);
  return model.probabilities(theta)[idx];
}

double prob_derivative(const ProbabilityModel& model, double theta, int mu) {
  const std::size_t idx = model.measurement().index_of(mu);
  return model.derivatives(theta)[idx];
}

FisherResult fisher_information(const ProbabilityModel& model, double theta) {
  const std::vector<double> p = model.probabilities(theta);
  const std::vector<double> dp = model.derivatives(theta);
  FisherResult result;
  for (std::size_t o = 0; o < p.size(); ++o) {
    if (p[o] < kFisherProbabilityFloor) {
      if (std::abs(dp[o]) >= kFisherDerivativeFloor) result.divergent = true;
      continue;
    }
    result.value += dp[o] * dp[o] / p[o];
  }
  return result;
}

ProbabilityModel apply_noise(const ProbabilityModel& model, const NoiseModel& noise) {
  return ProbabilityModel(model.probe(), model.generator(), noise);
}

}  // namespace qmetro
