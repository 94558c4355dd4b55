#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "qmetro/state.hpp"

namespace qmetro {

/// Spectral pairs with lambda_k + lambda_l below this are dropped from the QFI sum.
inline constexpr double kQfiPairCutoff = 1e-12;

struct QfiResult {
  double value = 0.0;
  std::vector<LocalAxis> axes;
};

struct DepthClassification {
  int certified_depth = 1;
  std::map<int, double> bounds_table;
};

/// Quantum Fisher information of rho for the phase generator, from the spectral formula
/// 2 sum_{k,l} (l_k - l_l)^2 / (l_k + l_l) |<k|J|l>|^2.
double qfi(const QuantumState& rho, const CollectiveGenerator& generator);
/// Same, for an arbitrary Hermitian generator matrix.
double qfi(const QuantumState& rho, const CMatrix& generator);

/// 4 Var(J) on a pure state.
double qfi_pure(const PureState& psi, const CollectiveGenerator& generator);

struct SeeSawOptions {
  int restarts = 16;
  double tol = 1e-10;
  int max_sweeps = 500;
  std::uint64_t seed = 0x5eed5eedULL;
};

/// One see-saw ascent from `start`. `trace`, when given, receives the QFI value after
/// every single-qubit update (nondecreasing).
QfiResult optimize_axes_from(const QuantumState& rho, std::vector<LocalAxis> start, double tol,
                             int max_sweeps = 500, std::vector<double>* trace = nullptr);

/// Maximizes the QFI over local axes: see-saw ascent from the all-x, all-y and all-z
/// generators plus `restarts` random starts; the best result wins (ties go to the
/// lexicographically smallest axes).
QfiResult optimize_axes(const QuantumState& rho, const SeeSawOptions& options);
QfiResult optimize_axes(const QuantumState& rho, int restarts, double tol);

/// s k^2 + r^2 with N = s k + r, 0 <= r < k: the largest QFI reachable with
/// k-producible states of N qubits.
double producibility_bound(int n_qubits, int k);

/// Smallest k with F <= producibility_bound(N, k), comparing with 1e-9 slack so that a
/// numerically evaluated F = N does not certify entanglement.
DepthClassification classify_depth(double fisher, int n_qubits);

/// 2/3 - <D_4^(2)|rho|D_4^(2)>; negative certifies genuine four-qubit entanglement.
double witness_value(const QuantumState& rho);

}  // namespace qmetro
