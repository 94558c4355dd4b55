#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "oracles.hpp"
#include "qmetro/errors.hpp"
#include "qmetro/state.hpp"

using namespace qmetro;

namespace {

double max_abs(const CMatrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(StateFactory, DickeFourTwoAmplitudes) {
  const PureState d = dicke_state(4, 2);
  // HHVV, HVHV, HVVH, VHHV, VHVH, VVHH with V = 1 and qubit 0 the leading bit.
  const std::vector<Eigen::Index> support = {0b0011, 0b0101, 0b0110, 0b1001, 0b1010, 0b1100};
  for (Eigen::Index i = 0; i < 16; ++i) {
    const bool in = std::find(support.begin(), support.end(), i) != support.end();
    EXPECT_NEAR(std::abs(d.amplitudes()(i) - Complex(in ? 1.0 / std::sqrt(6.0) : 0.0)), 0.0, 1e-15)
        << "basis " << i;
  }
}

TEST(StateFactory, DickeZeroIsAllH) {
  const PureState d = state_factory(DickeKind{0}, 3);
  EXPECT_EQ(d.amplitudes()(0), Complex(1.0));
  EXPECT_NEAR(d.amplitudes().norm(), 1.0, 1e-15);
}

TEST(StateFactory, ProductPlusIsUniform) {
  const PureState p = state_factory(ProductKind{plus_ket()}, 4);
  for (Eigen::Index i = 0; i < 16; ++i) EXPECT_NEAR(std::abs(p.amplitudes()(i) - 0.25), 0.0, 1e-15);
}

TEST(StateFactory, Ghz) {
  const PureState g = ghz_state(3);
  EXPECT_NEAR(g.amplitudes()(0).real(), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(g.amplitudes()(7).real(), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(g.amplitudes().segment(1, 6).norm(), 0.0, 1e-15);
}

TEST(StateFactory, RejectsBadArguments) {
  EXPECT_THROW(dicke_state(4, 5), ParameterError);
  EXPECT_THROW(dicke_state(4, -1), ParameterError);
  EXPECT_THROW(ghz_state(0), ParameterError);
  EXPECT_THROW(product_state(kMaxQubits + 1, plus_ket()), ParameterError);
}

TEST(StateFactory, EveryDickeStateIsNormalizedWithBinomialSupport) {
  for (int n = 1; n <= 8; ++n) {
    for (int k = 0; k <= n; ++k) {
      const PureState d = dicke_state(n, k);
      EXPECT_NEAR(d.amplitudes().squaredNorm(), 1.0, 1e-12);
      int support = 0;
      for (Eigen::Index i = 0; i < d.dim(); ++i) support += std::abs(d.amplitudes()(i)) > 0.0;
      EXPECT_EQ(support, static_cast<int>(oracle::binomial(n, k)));
    }
  }
}

TEST(Validation, PureStateNorm) {
  EXPECT_THROW(PureState(1, CVector::Ones(2)), ParameterError);
  EXPECT_THROW(PureState(2, CVector::Ones(3) / std::sqrt(3.0)), ParameterError);
}

TEST(Validation, DensityMatrixChecks) {
  CMatrix m = CMatrix::Identity(2, 2) * 0.5;
  m(0, 1) = Complex(0.1, 0.0);
  EXPECT_THROW(QuantumState(1, m), ValidationError);  // not Hermitian
  EXPECT_THROW(QuantumState(1, CMatrix::Identity(2, 2) * 0.6), ValidationError);  // trace
  CMatrix neg(2, 2);
  neg << 1.2, 0.0, 0.0, -0.2;
  EXPECT_THROW(QuantumState(1, neg), ValidationError);
  EXPECT_NO_THROW(QuantumState(1, CMatrix::Identity(2, 2) * 0.5));
}

TEST(Validation, LocalAxisNorm) {
  EXPECT_THROW(LocalAxis(1.0, 1.0, 0.0), ParameterError);
  EXPECT_THROW(LocalAxis::normalized(0.0, 0.0, 0.0), ParameterError);
  const LocalAxis a = LocalAxis::normalized(1.0, 1.0, 0.0);
  EXPECT_NEAR(a.vector().norm(), 1.0, 1e-15);
}

TEST(Generator, SingleQubitZ) {
  const CollectiveGenerator j = collective_generator(1, LocalAxis::unit_z());
  CMatrix expected(2, 2);
  expected << 0.5, 0.0, 0.0, -0.5;
  EXPECT_EQ(max_abs(j.matrix() - expected), 0.0);
}

TEST(Generator, FourQubitYSpectrumHasBinomialMultiplicities) {
  const CollectiveGenerator j = collective_generator(4, LocalAxis::unit_y());
  // Diagonalize the matrix from scratch rather than trusting the stored spectrum.
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(j.matrix());
  std::map<int, int> counts;
  for (double ev : solver.eigenvalues()) {
    const double rounded = std::round(ev);
    EXPECT_NEAR(ev, rounded, 1e-12);
    ++counts[static_cast<int>(rounded)];
  }
  for (int lambda = -2; lambda <= 2; ++lambda) {
    EXPECT_EQ(counts[lambda], static_cast<int>(oracle::binomial(4, lambda + 2))) << lambda;
  }
}

TEST(Generator, MixedAxesAreTracelessAndSymmetric) {
  const std::vector<LocalAxis> axes = {LocalAxis::unit_x(), LocalAxis::unit_z()};
  const CollectiveGenerator j = collective_generator(axes);
  EXPECT_NEAR(std::abs(j.matrix().trace()), 0.0, 1e-15);
  EXPECT_NEAR(max_abs(j.matrix() - j.matrix().adjoint()), 0.0, 1e-15);
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(j.matrix());
  const Eigen::VectorXd ev = solver.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) EXPECT_NEAR(ev(i), -ev(ev.size() - 1 - i), 1e-12);
}

TEST(Generator, MatchesKroneckerOracleAndStoredSpectrum) {
  Rng rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 4;
    const auto axes = oracle::random_axes(rng, n);
    const CollectiveGenerator j(axes);
    EXPECT_LT(max_abs(j.matrix() - oracle::generator(axes)), 1e-12);
    const CMatrix& v = j.eigenvectors();
    EXPECT_LT(max_abs(v.adjoint() * v - CMatrix::Identity(v.rows(), v.cols())), 1e-12);
    EXPECT_LT(max_abs(j.matrix() * v - v * j.eigenvalues().cast<Complex>().asDiagonal()), 1e-12);
    EXPECT_LE(j.eigenvalues().cwiseAbs().maxCoeff(), n / 2.0 + 1e-12);
  }
}

// J restricted to the part acting on qubit i is linear in the axis of qubit i.
TEST(Generator, LinearInEachAxis) {
  Rng rng(202);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + trial % 3;
    const int qubit = trial % n;
    auto axes = oracle::random_axes(rng, n);
    auto with = [&](const Eigen::Vector3d& v) {
      auto a = axes;
      a[qubit] = LocalAxis(v(0), v(1), v(2));
      return collective_generator(a).matrix();
    };
    const Eigen::Vector3d z(0, 0, 1);
    const CMatrix rest = 0.5 * (with(z) + with(-z));
    const Eigen::Vector3d nv = oracle::random_axis(rng).vector();
    const Eigen::Vector3d mv = oracle::random_axis(rng).vector();
    const double a = oracle::uniform(rng, -2.0, 2.0);
    const double b = oracle::uniform(rng, -2.0, 2.0);
    const Eigen::Vector3d c = a * nv + b * mv;
    if (c.norm() < 1e-3) continue;
    const CMatrix lhs = c.norm() * (with(c / c.norm()) - rest);
    const CMatrix rhs = a * (with(nv) - rest) + b * (with(mv) - rest);
    EXPECT_LT(max_abs(lhs - rhs), 1e-12);
  }
}

TEST(Evolve, ZeroAngleIsExactIdentity) {
  Rng rng(5);
  const QuantumState rho(3, oracle::random_density(rng, 3, 3));
  const QuantumState out = evolve(rho, collective_generator(3, LocalAxis::unit_y()), 0.0);
  EXPECT_EQ(max_abs(out.matrix() - rho.matrix()), 0.0);
}

TEST(Evolve, FullTurnReturnsTheState) {
  const QuantumState rho = QuantumState::from_pure(dicke_state(4, 2));
  const QuantumState out =
      evolve(rho, collective_generator(4, LocalAxis::unit_y()), 2.0 * std::numbers::pi);
  EXPECT_LT(max_abs(out.matrix() - rho.matrix()), 1e-10);
}

TEST(Evolve, MatchesTaylorExponential) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 4;
    const auto axes = oracle::random_axes(rng, n);
    const QuantumState rho(n, oracle::random_density(rng, n, 2));
    const double theta = oracle::uniform(rng, -4.0, 4.0);
    const CMatrix u = oracle::taylor_exp(oracle::generator(axes), theta);
    const CMatrix expected = u * rho.matrix() * u.adjoint();
    const QuantumState out = evolve(rho, CollectiveGenerator(axes), theta);
    EXPECT_LT(max_abs(out.matrix() - expected), 1e-10);
  }
}

TEST(Evolve, PreservesTraceSpectrumAndPurity) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 4;
    const int rank = trial % 2 == 0 ? 1 : 3;
    const QuantumState rho(n, oracle::random_density(rng, n, rank));
    const QuantumState out =
        evolve(rho, CollectiveGenerator(oracle::random_axes(rng, n)), oracle::uniform(rng, -3, 3));
    EXPECT_NEAR(out.matrix().trace().real(), 1.0, 1e-10);
    EXPECT_LT(max_abs(out.matrix() - out.matrix().adjoint()), 1e-12);
    const Eigen::VectorXd before = Eigen::SelfAdjointEigenSolver<CMatrix>(rho.matrix()).eigenvalues();
    const Eigen::VectorXd after = Eigen::SelfAdjointEigenSolver<CMatrix>(out.matrix()).eigenvalues();
    EXPECT_LT((before - after).cwiseAbs().maxCoeff(), 1e-10);
    if (rank == 1) {
      EXPECT_NEAR(out.purity(), 1.0, 1e-10);
    }
  }
}

TEST(Evolve, Composes) {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 4;
    const CollectiveGenerator j(oracle::random_axes(rng, n));
    const QuantumState rho(n, oracle::random_density(rng, n, 2));
    const double t1 = oracle::uniform(rng, -3, 3);
    const double t2 = oracle::uniform(rng, -3, 3);
    const QuantumState two_steps = evolve(evolve(rho, j, t1), j, t2);
    const QuantumState one_step = evolve(rho, j, t1 + t2);
    EXPECT_LT(max_abs(two_steps.matrix() - one_step.matrix()), 1e-10);
  }
}

TEST(Evolve, RejectsDimensionMismatch) {
  const QuantumState rho = QuantumState::maximally_mixed(2);
  EXPECT_THROW(evolve(rho, collective_generator(3, LocalAxis::unit_y()), 0.1), ParameterError);
}

TEST(Fidelity, Examples) {
  const PureState d = dicke_state(4, 2);
  const QuantumState pure = QuantumState::from_pure(d);
  EXPECT_NEAR(fidelity(pure, d), 1.0, 1e-12);
  EXPECT_NEAR(fidelity(QuantumState::maximally_mixed(4), d), 1.0 / 16.0, 1e-12);
  for (double p : {0.0, 0.1, 0.37, 1.0}) {
    const CMatrix mix = (1 - p) * pure.matrix() + p * CMatrix::Identity(16, 16) / 16.0;
    EXPECT_NEAR(fidelity(QuantumState(4, mix), d), 1 - p + p / 16, 1e-12);
  }
  EXPECT_THROW(fidelity(pure, dicke_state(3, 1)), ParameterError);
}

TEST(Embedding, MatchesKroneckerOracle) {
  for (int n = 1; n <= 4; ++n) {
    for (int q = 0; q < n; ++q) {
      for (int c = 0; c < 3; ++c) {
        EXPECT_EQ(max_abs(embed_single_qubit(oracle::pauli(c), q, n) - oracle::on_qubit(oracle::pauli(c), q, n)), 0.0);
      }
    }
  }
}
