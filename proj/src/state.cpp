#include "qmetro/state.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "qmetro/errors.hpp"

namespace qmetro {

namespace {

constexpr double kAxisTol = 1e-12;
constexpr double kStateTol = 1e-10;
constexpr double kNormTol = 1e-12;

void check_qubits(int n_qubits) {
  if (n_qubits < 1 || n_qubits > kMaxQubits) {
    throw ParameterError("number of qubits must be in [1, " + std::to_string(kMaxQubits) +
                         "], got " + std::to_string(n_qubits));
  }
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

// Columns: eigenvector of n.sigma for +1, then for -1.
Eigen::Matrix2cd local_eigenbasis(const LocalAxis& n) {
  const double polar = std::acos(std::clamp(n.z(), -1.0, 1.0));
  const double azimuth = std::atan2(n.y(), n.x());
  const Complex phase = std::polar(1.0, azimuth);
  const double c = std::cos(polar / 2);
  const double s = std::sin(polar / 2);
  Eigen::Matrix2cd w;
  w(0, 0) = c;
  w(1, 0) = phase * s;
  w(0, 1) = s;
  w(1, 1) = -phase * c;
  return w;
}

}  // namespace

LocalAxis::LocalAxis(double x, double y, double z) : x_(x), y_(y), z_(z) {
  const double norm2 = x * x + y * y + z * z;
  if (!std::isfinite(norm2) || std::abs(norm2 - 1.0) > kAxisTol) {
    throw ParameterError("local axis must be a unit vector, |n|^2 = " + std::to_string(norm2));
  }
}

LocalAxis LocalAxis::normalized(double x, double y, double z) {
  const double norm = std::sqrt(x * x + y * y + z * z);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw ParameterError("cannot normalize a zero or non-finite axis");
  }
  return LocalAxis(x / norm, y / norm, z / norm);
}

PureState::PureState(int n_qubits, CVector amplitudes)
    : n_qubits_(n_qubits), amplitudes_(std::move(amplitudes)) {
  check_qubits(n_qubits);
  if (amplitudes_.size() != hilbert_dim(n_qubits)) {
    throw ParameterError("amplitude vector length does not match 2^n_qubits");
  }
  const double norm2 = amplitudes_.squaredNorm();
  if (std::abs(norm2 - 1.0) > kNormTol) {
    throw ParameterError("pure state is not normalized, norm^2 = " + std::to_string(norm2));
  }
}

QuantumState::QuantumState(int n_qubits, CMatrix matrix)
    : n_qubits_(n_qubits), matrix_(std::move(matrix)) {
  check_qubits(n_qubits);
  const Eigen::Index dim = hilbert_dim(n_qubits);
  if (matrix_.rows() != dim || matrix_.cols() != dim) {
    throw ParameterError("density matrix shape does not match 2^n_qubits");
  }
  const double herm = (matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff();
  if (herm > kStateTol) {
    throw ValidationError("density matrix is not Hermitian, max deviation " + std::to_string(herm));
  }
  const double trace_dev = std::abs(matrix_.trace() - Complex(1.0));
  if (trace_dev > kStateTol) {
    throw ValidationError("density matrix trace deviates from 1 by " + std::to_string(trace_dev));
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(matrix_, Eigen::EigenvaluesOnly);
  const double min_eig = solver.eigenvalues().minCoeff();
  if (min_eig < -kStateTol) {
    throw ValidationError("density matrix has negative eigenvalue " + std::to_string(min_eig));
  }
}

QuantumState QuantumState::from_pure(const PureState& psi) {
  const CVector& a = psi.amplitudes();
  return {psi.n_qubits(), a * a.adjoint()};
}

QuantumState QuantumState::maximally_mixed(int n_qubits) {
  check_qubits(n_qubits);
  const Eigen::Index dim = hilbert_dim(n_qubits);
  return {n_qubits, CMatrix::Identity(dim, dim) / static_cast<double>(dim)};
}

double QuantumState::purity() const { return (matrix_ * matrix_).trace().real(); }

CollectiveGenerator::CollectiveGenerator(std::vector<LocalAxis> axes) : axes_(std::move(axes)) {
  const int n = static_cast<int>(axes_.size());
  check_qubits(n);
  const Eigen::Index dim = hilbert_dim(n);

  matrix_ = CMatrix::Zero(dim, dim);
  for (int q = 0; q < n; ++q) {
    const LocalAxis& a = axes_[q];
    const Eigen::Index mask = Eigen::Index{1} << (n - 1 - q);
    for (Eigen::Index col = 0; col < dim; ++col) {
      const bool is_v = (col & mask) != 0;
      matrix_(col, col) += 0.5 * (is_v ? -a.z() : a.z());
      // <H|n.sigma|V> = x - iy, <V|n.sigma|H> = x + iy
      matrix_(col ^ mask, col) += 0.5 * (is_v ? Complex(a.x(), -a.y()) : Complex(a.x(), a.y()));
    }
  }

  eigenvectors_ = local_eigenbasis(axes_[0]);
  for (int q = 1; q < n; ++q) {
    eigenvectors_ = kron(eigenvectors_, local_eigenbasis(axes_[q]));
  }
  eigenvalues_.resize(dim);
  for (Eigen::Index idx = 0; idx < dim; ++idx) {
    int minus = 0;
    for (int q = 0; q < n; ++q) minus += static_cast<int>((idx >> q) & 1);
    eigenvalues_(idx) = 0.5 * (n - 2 * minus);
  }
}

CMatrix CollectiveGenerator::unitary(double theta) const {
  CVector phases(eigenvalues_.size());
  for (Eigen::Index k = 0; k < phases.size(); ++k) {
    phases(k) = std::polar(1.0, -theta * eigenvalues_(k));
  }
  return eigenvectors_ * phases.asDiagonal() * eigenvectors_.adjoint();
}

Eigen::Vector2cd plus_ket() { return Eigen::Vector2cd(M_SQRT1_2, M_SQRT1_2); }
Eigen::Vector2cd minus_ket() { return Eigen::Vector2cd(M_SQRT1_2, -M_SQRT1_2); }

PureState dicke_state(int n_qubits, int excitations) {
  check_qubits(n_qubits);
  if (excitations < 0 || excitations > n_qubits) {
    throw ParameterError("Dicke excitation number must be in [0, N], got " +
                         std::to_string(excitations));
  }
  const Eigen::Index dim = hilbert_dim(n_qubits);
  CVector amps = CVector::Zero(dim);
  Eigen::Index terms = 0;
  for (Eigen::Index idx = 0; idx < dim; ++idx) {
    if (std::popcount(static_cast<unsigned long long>(idx)) == excitations) {
      amps(idx) = 1.0;
      ++terms;
    }
  }
  amps /= std::sqrt(static_cast<double>(terms));
  return {n_qubits, std::move(amps)};
}

PureState ghz_state(int n_qubits) {
  check_qubits(n_qubits);
  const Eigen::Index dim = hilbert_dim(n_qubits);
  CVector amps = CVector::Zero(dim);
  amps(0) = M_SQRT1_2;
  amps(dim - 1) = M_SQRT1_2;
  return {n_qubits, std::move(amps)};
}

PureState product_state(int n_qubits, const Eigen::Vector2cd& ket) {
  check_qubits(n_qubits);
  if (std::abs(ket.squaredNorm() - 1.0) > kNormTol) {
    throw ParameterError("single-qubit ket is not normalized");
  }
  const Eigen::Index dim = hilbert_dim(n_qubits);
  CVector amps(dim);
  for (Eigen::Index idx = 0; idx < dim; ++idx) {
    Complex a = 1.0;
    for (int q = 0; q < n_qubits; ++q) a *= ket((idx >> (n_qubits - 1 - q)) & 1);
    amps(idx) = a;
  }
  return {n_qubits, std::move(amps)};
}

PureState state_factory(const StateKind& kind, int n_qubits) {
  struct Visitor {
    int n;
    PureState operator()(const DickeKind& d) const { return dicke_state(n, d.excitations); }
    PureState operator()(const GhzKind&) const { return ghz_state(n); }
    PureState operator()(const ProductKind& p) const { return product_state(n, p.ket); }
  };
  return std::visit(Visitor{n_qubits}, kind);
}

CollectiveGenerator collective_generator(std::span<const LocalAxis> axes) {
  return CollectiveGenerator(std::vector<LocalAxis>(axes.begin(), axes.end()));
}

CollectiveGenerator collective_generator(int n_qubits, const LocalAxis& axis) {
  check_qubits(n_qubits);
  return CollectiveGenerator(std::vector<LocalAxis>(static_cast<std::size_t>(n_qubits), axis));
}

QuantumState evolve(const QuantumState& rho, const CollectiveGenerator& generator, double theta) {
  if (rho.n_qubits() != generator.n_qubits()) {
    throw ParameterError("state and generator act on different numbers of qubits");
  }
  if (theta == 0.0) return rho;
  const CMatrix u = generator.unitary(theta);
  CMatrix out = u * rho.matrix() * u.adjoint();
  // Re-symmetrize so repeated evolution does not accumulate anti-Hermitian drift.
  out = 0.5 * (out + out.adjoint()).eval();
  return {rho.n_qubits(), std::move(out)};
}

double fidelity(const QuantumState& rho, const PureState& psi) {
  if (rho.dim() != psi.dim()) {
    throw ParameterError("state dimensions do not match");
  }
  const Complex f = psi.amplitudes().dot(rho.matrix() * psi.amplitudes());
  return f.real();
}

CMatrix embed_single_qubit(const Eigen::Matrix2cd& op, int qubit, int n_qubits) {
  check_qubits(n_qubits);
  if (qubit < 0 || qubit >= n_qubits) throw ParameterError("qubit index out of range");
  const Eigen::Index dim = hilbert_dim(n_qubits);
  const int shift = n_qubits - 1 - qubit;
  const Eigen::Index mask = Eigen::Index{1} << shift;
  CMatrix out = CMatrix::Zero(dim, dim);
  for (Eigen::Index col = 0; col < dim; ++col) {
    const int b = static_cast<int>((col >> shift) & 1);
    const Eigen::Index base = col & ~mask;
    out(base, col) = op(0, b);
    out(base | mask, col) = op(1, b);
  }
  return out;
}

Eigen::Matrix2cd pauli_x() {
  Eigen::Matrix2cd m;
  m << 0, 1, 1, 0;
  return m;
}

Eigen::Matrix2cd pauli_y() {
  Eigen::Matrix2cd m;
  m << 0, Complex(0, -1), Complex(0, 1), 0;
  return m;
}

Eigen::Matrix2cd pauli_z() {
  Eigen::Matrix2cd m;
  m << 1, 0, 0, -1;
  return m;
}

}  // namespace qmetro
