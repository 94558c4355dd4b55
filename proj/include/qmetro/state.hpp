#pragma once

#include <complex>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace qmetro {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr int kMaxQubits = 12;

/// Dimension of the Hilbert space of `n_qubits` qubits.
inline Eigen::Index hilbert_dim(int n_qubits) { return Eigen::Index{1} << n_qubits; }

/// Unit vector on the Bloch sphere selecting a local Pauli direction n.sigma.
class LocalAxis {
 public:
  /// Throws ParameterError unless x^2+y^2+z^2 = 1 within 1e-12.
  LocalAxis(double x, double y, double z);

  static LocalAxis unit_x() { return {1.0, 0.0, 0.0}; }
  static LocalAxis unit_y() { return {0.0, 1.0, 0.0}; }
  static LocalAxis unit_z() { return {0.0, 0.0, 1.0}; }
  /// Rescales (x, y, z) onto the sphere; throws on the zero vector.
  static LocalAxis normalized(double x, double y, double z);

  double x() const noexcept { return x_; }
  double y() const noexcept { return y_; }
  double z() const noexcept { return z_; }
  Eigen::Vector3d vector() const { return {x_, y_, z_}; }

  friend bool operator==(const LocalAxis&, const LocalAxis&) = default;

 private:
  double x_;
  double y_;
  double z_;
};

/// Normalized state vector. Basis index bit (n-1-i) holds qubit i, H = 0 and V = 1,
/// so qubit 0 ("mode 1") is the most significant bit.
class PureState {
 public:
  PureState(int n_qubits, CVector amplitudes);

  int n_qubits() const noexcept { return n_qubits_; }
  const CVector& amplitudes() const noexcept { return amplitudes_; }
  Eigen::Index dim() const noexcept { return amplitudes_.size(); }

 private:
  int n_qubits_;
  CVector amplitudes_;
};

/// Density matrix: Hermitian, unit trace, positive semidefinite (all within 1e-10).
class QuantumState {
 public:
  QuantumState(int n_qubits, CMatrix matrix);

  static QuantumState from_pure(const PureState& psi);
  static QuantumState maximally_mixed(int n_qubits);

  int n_qubits() const noexcept { return n_qubits_; }
  const CMatrix& matrix() const noexcept { return matrix_; }
  Eigen::Index dim() const noexcept { return matrix_.rows(); }
  double purity() const;

 private:
  int n_qubits_;
  CMatrix matrix_;
};

/// J = 1/2 sum_i n_i . sigma^(i), stored together with its exact spectral
/// decomposition (tensor product of the local eigenbases of n_i . sigma).
class CollectiveGenerator {
 public:
  explicit CollectiveGenerator(std::vector<LocalAxis> axes);

  int n_qubits() const noexcept { return static_cast<int>(axes_.size()); }
  const std::vector<LocalAxis>& axes() const noexcept { return axes_; }
  const CMatrix& matrix() const noexcept { return matrix_; }
  const Eigen::VectorXd& eigenvalues() const noexcept { return eigenvalues_; }
  /// Columns are orthonormal eigenvectors matching eigenvalues().
  const CMatrix& eigenvectors() const noexcept { return eigenvectors_; }

  /// exp(-i J theta).
  CMatrix unitary(double theta) const;

 private:
  std::vector<LocalAxis> axes_;
  CMatrix matrix_;
  Eigen::VectorXd eigenvalues_;
  CMatrix eigenvectors_;
};

struct DickeKind {
  int excitations;
};
struct GhzKind {};
struct ProductKind {
  Eigen::Vector2cd ket;
};
using StateKind = std::variant<DickeKind, GhzKind, ProductKind>;

/// |+> = (|H> + |V>)/sqrt(2).
Eigen::Vector2cd plus_ket();
Eigen::Vector2cd minus_ket();

PureState state_factory(const StateKind& kind, int n_qubits);
PureState dicke_state(int n_qubits, int excitations);
PureState ghz_state(int n_qubits);
PureState product_state(int n_qubits, const Eigen::Vector2cd& ket);

CollectiveGenerator collective_generator(std::span<const LocalAxis> axes);
/// Same axis on every qubit.
CollectiveGenerator collective_generator(int n_qubits, const LocalAxis& axis);

/// U rho U^dagger with U = exp(-i J theta).
QuantumState evolve(const QuantumState& rho, const CollectiveGenerator& generator, double theta);

/// <psi|rho|psi>.
double fidelity(const QuantumState& rho, const PureState& psi);

/// Embeds a single-qubit operator acting on `qubit` (0-based) into the n-qubit space.
CMatrix embed_single_qubit(const Eigen::Matrix2cd& op, int qubit, int n_qubits);

/// Pauli matrices in the (H, V) basis.
Eigen::Matrix2cd pauli_x();
Eigen::Matrix2cd pauli_y();
Eigen::Matrix2cd pauli_z();

}  // namespace qmetro
