#include "qmetro/qfi.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "qmetro/errors.hpp"
#include "qmetro/random.hpp"

namespace qmetro {

namespace {

constexpr double kUpperSlack = 1e-9;

// Pair weights 2 (l_k - l_l)^2 / (l_k + l_l) in the eigenbasis of rho.
struct SpectralWeights {
  Eigen::MatrixXd weight;
  CMatrix basis;
};

SpectralWeights spectral_weights(const QuantumState& rho) {
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(rho.matrix());
  const Eigen::VectorXd& lambda = solver.eigenvalues();
  const Eigen::Index dim = lambda.size();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    for (Eigen::Index l = 0; l < dim; ++l) {
      const double sum = lambda(k) + lambda(l);
      if (sum < kQfiPairCutoff) continue;
      const double diff = lambda(k) - lambda(l);
      w(k, l) = 2.0 * diff * diff / sum;
    }
  }
  return {std::move(w), solver.eigenvectors()};
}

double weighted_norm(const Eigen::MatrixXd& w, const CMatrix& op) {
  return (w.array() * op.array().abs2()).sum();
}

double weighted_inner(const Eigen::MatrixXd& w, const CMatrix& a, const CMatrix& b) {
  return (w.array() * (a.array() * b.array().conjugate()).real()).sum();
}

// Maximizes n^T A n + 2 b^T n over the unit sphere.
Eigen::Vector3d maximize_on_sphere(const Eigen::Matrix3d& a, const Eigen::Vector3d& b) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(a);
  const Eigen::Vector3d lambda = solver.eigenvalues();
  const Eigen::Matrix3d q = solver.eigenvectors();
  const Eigen::Vector3d beta = q.transpose() * b;
  const double top = lambda(2);
  const double scale = std::max({1.0, std::abs(top), b.norm()});

  if (b.norm() <= 1e-15 * scale) return q.col(2);

  // Components along the top eigenspace decide between the regular and the hard case.
  double top_weight = 0.0;
  for (int j = 0; j < 3; ++j) {
    if (top - lambda(j) <= 1e-13 * scale) top_weight += beta(j) * beta(j);
  }
  if (top_weight <= 1e-26 * scale * scale) {
    Eigen::Vector3d n = Eigen::Vector3d::Zero();
    for (int j = 0; j < 3; ++j) {
      if (top - lambda(j) > 1e-13 * scale) n += beta(j) / (top - lambda(j)) * q.col(j);
    }
    if (n.squaredNorm() <= 1.0) {
      return n + std::sqrt(1.0 - n.squaredNorm()) * q.col(2);
    }
  }

  auto norm2 = [&](double mu) {
    double s = 0.0;
    for (int j = 0; j < 3; ++j) {
      const double t = beta(j) / (mu - lambda(j));
      s += t * t;
    }
    return s;
  };
  double lo = top;
  double hi = top + b.norm();
  for (int it = 0; it < 200 && hi - lo > 1e-16 * scale; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (norm2(mid) > 1.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  Eigen::Vector3d n = Eigen::Vector3d::Zero();
  for (int j = 0; j < 3; ++j) n += beta(j) / (hi - lambda(j)) * q.col(j);
  return n;
}

LocalAxis random_axis(Rng& rng) {
  const double z = 2.0 * uniform01(rng) - 1.0;
  const double phi = 2.0 * std::numbers::pi * uniform01(rng);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return LocalAxis::normalized(r * std::cos(phi), r * std::sin(phi), z);
}

bool lexicographically_less(const std::vector<LocalAxis>& a, const std::vector<LocalAxis>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Eigen::Vector3d u = a[i].vector();
    const Eigen::Vector3d v = b[i].vector();
    for (int c = 0; c < 3; ++c) {
      if (u(c) != v(c)) return u(c) < v(c);
    }
  }
  return false;
}

}  // namespace

double qfi(const QuantumState& rho, const CMatrix& generator) {
  if (generator.rows() != rho.dim() || generator.cols() != rho.dim()) {
    throw ParameterError("state and generator dimensions do not match");
  }
  const SpectralWeights sw = spectral_weights(rho);
  const CMatrix j = sw.basis.adjoint() * generator * sw.basis;
  return std::max(0.0, weighted_norm(sw.weight, j));
}

double qfi(const QuantumState& rho, const CollectiveGenerator& generator) {
  if (rho.n_qubits() != generator.n_qubits()) {
    throw ParameterError("state and generator act on different numbers of qubits");
  }
  return qfi(rho, generator.matrix());
}

double qfi_pure(const PureState& psi, const CollectiveGenerator& generator) {
  if (psi.n_qubits() != generator.n_qubits()) {
    throw ParameterError("state and generator act on different numbers of qubits");
  }
  const CVector j_psi = generator.matrix() * psi.amplitudes();
  const double mean = psi.amplitudes().dot(j_psi).real();
  const double second = j_psi.squaredNorm();
  return std::max(0.0, 4.0 * (second - mean * mean));
}

QfiResult optimize_axes_from(const QuantumState& rho, std::vector<LocalAxis> start, double tol,
                             int max_sweeps, std::vector<double>* trace) {
  const int n = rho.n_qubits();
  if (static_cast<int>(start.size()) != n) {
    throw ParameterError("starting axes must list one axis per qubit");
  }
  if (!(tol > 0.0)) throw ParameterError("see-saw tolerance must be positive");

  const SpectralWeights sw = spectral_weights(rho);
  const std::array<Eigen::Matrix2cd, 3> paulis = {pauli_x(), pauli_y(), pauli_z()};
  // Half Pauli operators of every qubit, expressed in the eigenbasis of rho.
  std::vector<std::array<CMatrix, 3>> local(static_cast<std::size_t>(n));
  for (int q = 0; q < n; ++q) {
    for (int c = 0; c < 3; ++c) {
      local[q][c] = sw.basis.adjoint() * (0.5 * embed_single_qubit(paulis[c], q, n)) * sw.basis;
    }
  }

  std::vector<LocalAxis> axes = std::move(start);
  CMatrix j = CMatrix::Zero(rho.dim(), rho.dim());
  for (int q = 0; q < n; ++q) {
    const Eigen::Vector3d v = axes[q].vector();
    for (int c = 0; c < 3; ++c) j += v(c) * local[q][c];
  }
  double value = weighted_norm(sw.weight, j);
  if (trace) trace->push_back(value);

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    const double before = value;
    for (int q = 0; q < n; ++q) {
      const Eigen::Vector3d old = axes[q].vector();
      CMatrix rest = j;
      for (int c = 0; c < 3; ++c) rest -= old(c) * local[q][c];

      Eigen::Matrix3d a;
      Eigen::Vector3d b;
      for (int r = 0; r < 3; ++r) {
        b(r) = weighted_inner(sw.weight, local[q][r], rest);
        for (int c = r; c < 3; ++c) {
          a(r, c) = weighted_inner(sw.weight, local[q][r], local[q][c]);
          a(c, r) = a(r, c);
        }
      }
      const Eigen::Vector3d proposal = maximize_on_sphere(a, b);
      const LocalAxis candidate = LocalAxis::normalized(proposal(0), proposal(1), proposal(2));
      CMatrix updated = rest;
      const Eigen::Vector3d v = candidate.vector();
      for (int c = 0; c < 3; ++c) updated += v(c) * local[q][c];
      const double new_value = weighted_norm(sw.weight, updated);
      if (new_value >= value) {
        axes[q] = candidate;
        j = std::move(updated);
        value = new_value;
      }
      if (trace) trace->push_back(value);
    }
    if (value - before < tol) break;
  }
  return {std::max(0.0, value), std::move(axes)};
}

QfiResult optimize_axes(const QuantumState& rho, const SeeSawOptions& options) {
  if (options.restarts < 1) throw ParameterError("optimize_axes needs at least one restart");
  const int n = rho.n_qubits();
  const auto uniform = [n](const LocalAxis& a) {
    return std::vector<LocalAxis>(static_cast<std::size_t>(n), a);
  };
  std::vector<std::vector<LocalAxis>> starts = {uniform(LocalAxis::unit_x()),
                                                uniform(LocalAxis::unit_y()),
                                                uniform(LocalAxis::unit_z())};
  Rng rng(options.seed);
  for (int r = 0; r < options.restarts; ++r) {
    std::vector<LocalAxis> s;
    s.reserve(static_cast<std::size_t>(n));
    for (int q = 0; q < n; ++q) s.push_back(random_axis(rng));
    starts.push_back(std::move(s));
  }

  QfiResult best{-std::numeric_limits<double>::infinity(), {}};
  for (auto& s : starts) {
    QfiResult r = optimize_axes_from(rho, std::move(s), options.tol, options.max_sweeps);
    const bool better = r.value > best.value + 1e-12;
    const bool tie = std::abs(r.value - best.value) <= 1e-12;
    if (better || (tie && lexicographically_less(r.axes, best.axes))) best = std::move(r);
  }
  return best;
}

QfiResult optimize_axes(const QuantumState& rho, int restarts, double tol) {
  SeeSawOptions options;
  options.restarts = restarts;
  options.tol = tol;
  return optimize_axes(rho, options);
}

double producibility_bound(int n_qubits, int k) {
  if (n_qubits < 1) throw ParameterError("N must be positive");
  if (k < 1 || k > n_qubits) {
    throw ParameterError("k must be in [1, N], got k=" + std::to_string(k) +
                         " for N=" + std::to_string(n_qubits));
  }
  const int s = n_qubits / k;
  const int r = n_qubits - s * k;
  return static_cast<double>(s * k * k + r * r);
}

DepthClassification classify_depth(double fisher, int n_qubits) {
  if (n_qubits < 1) throw ParameterError("N must be positive");
  if (!std::isfinite(fisher) || fisher < 0.0) {
    throw ParameterError("Fisher information must be finite and nonnegative");
  }
  const double heisenberg = static_cast<double>(n_qubits) * n_qubits;
  if (fisher > heisenberg + kUpperSlack) {
    throw InconsistencyError("Fisher information " + std::to_string(fisher) +
                             " exceeds the Heisenberg bound N^2 = " + std::to_string(heisenberg));
  }
  DepthClassification out;
  out.certified_depth = n_qubits;
  bool found = false;
  for (int k = 1; k <= n_qubits; ++k) {
    const double bound = producibility_bound(n_qubits, k);
    out.bounds_table[k] = bound;
    if (!found && fisher <= bound + kUpperSlack) {
      out.certified_depth = k;
      found = true;
    }
  }
  return out;
}

double witness_value(const QuantumState& rho) {
  if (rho.n_qubits() != 4) {
    throw ParameterError("the Dicke witness is defined for four-qubit states only");
  }
  return 2.0 / 3.0 - fidelity(rho, dicke_state(4, 2));
}

}  // namespace qmetro
