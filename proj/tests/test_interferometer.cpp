#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qmetro/errors.hpp"
#include "qmetro/interferometer.hpp"
#include "qmetro/qfi.hpp"

using namespace qmetro;

namespace {

constexpr double kPi = std::numbers::pi;

ProbabilityModel ideal(const PureState& psi, const LocalAxis& axis = LocalAxis::unit_y()) {
  return ProbabilityModel(QuantumState::from_pure(psi), collective_generator(psi.n_qubits(), axis));
}

// Noise semantics rebuilt from their definition: damp, mix, then rotate every qubit
// about its tilted axis by theta + d_i.
std::vector<double> noisy_oracle(const CMatrix& rho, const std::vector<Eigen::Vector3d>& axes,
                                 const NoiseModel& noise, double theta) {
  const int n = static_cast<int>(axes.size());
  const Eigen::Index dim = rho.rows();
  CMatrix r = noise.visibility * rho;
  for (Eigen::Index i = 0; i < dim; ++i) r(i, i) = rho(i, i);
  r = (1 - noise.white_noise) * r + noise.white_noise * CMatrix::Identity(dim, dim) / double(dim);
  CMatrix u = CMatrix::Identity(1, 1);
  for (int q = 0; q < n; ++q) {
    const double d = noise.misalignment.empty() ? 0.0 : noise.misalignment[q];
    Eigen::Vector3d a = axes[q];
    Eigen::Vector3d toward(0, 0, 1);
    if (std::abs(std::abs(a.z()) - 1.0) < 1e-12) toward = Eigen::Vector3d(1, 0, 0);
    toward = (toward - toward.dot(a) * a).normalized();
    a = std::cos(d) * a + std::sin(d) * toward;
    u = oracle::kron(u, oracle::taylor_exp(oracle::generator(std::vector<Eigen::Vector3d>{a}), theta + d));
  }
  const CMatrix out = u * r * u.adjoint();
  std::vector<double> p;
  for (int mu = -n / 2; mu <= n / 2; ++mu) p.push_back(oracle::outcome_probability(out, mu, n));
  return p;
}

NoiseModel random_noise(Rng& rng, int n) {
  NoiseModel noise;
  for (int q = 0; q < n; ++q) noise.misalignment.push_back(oracle::uniform(rng, -0.3, 0.3));
  noise.white_noise = oracle::uniform(rng, 0.0, 0.5);
  noise.visibility = oracle::uniform(rng, 0.5, 1.0);
  return noise;
}

}  // namespace

TEST(Projectors, FourQubits) {
  const MeasurementModel m = projectors(4);
  EXPECT_EQ(m.outcomes(), (std::vector<int>{-2, -1, 0, 1, 2}));
  CMatrix sum = CMatrix::Zero(16, 16);
  for (int mu : m.outcomes()) {
    const CMatrix p = m.projector(mu);
    sum += p;
    EXPECT_EQ((p * p - p).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(m.rank(mu), static_cast<Eigen::Index>(oracle::binomial(4, 2 + mu)));
  }
  EXPECT_EQ((sum - CMatrix::Identity(16, 16)).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(m.rank(0), 6);
  EXPECT_EQ(m.rank(2), 1);
  EXPECT_EQ(m.projector(2)(0, 0), Complex(1.0));  // |HHHH>
}

TEST(Projectors, RanksForOtherSizes) {
  for (int n : {2, 6, 8}) {
    const MeasurementModel m = projectors(n);
    for (int mu : m.outcomes()) {
      EXPECT_EQ(m.rank(mu), static_cast<Eigen::Index>(oracle::binomial(n, n / 2 + mu)));
    }
  }
}

TEST(Projectors, Errors) {
  EXPECT_THROW(projectors(3), UnsupportedParameterError);
  EXPECT_THROW(projectors(0), ParameterError);
  EXPECT_THROW(projectors(4).index_of(3), ParameterError);
}

TEST(CondProb, DickeAtZero) {
  const ProbabilityModel m = ideal(dicke_state(4, 2));
  EXPECT_NEAR(cond_prob(m, 0.0, 0), 1.0, 1e-12);
  for (int mu : {-2, -1, 1, 2}) EXPECT_NEAR(cond_prob(m, 0.0, mu), 0.0, 1e-12);
  EXPECT_THROW(cond_prob(m, 0.0, 5), ParameterError);
}

TEST(CondProb, SeparableIsBinomial) {
  const ProbabilityModel m = ideal(product_state(4, plus_ket()));
  for (int mu = -2; mu <= 2; ++mu) {
    EXPECT_NEAR(cond_prob(m, 0.0, mu), oracle::binomial(4, mu + 2) / 16.0, 1e-12);
  }
  // Each qubit ends in H with probability (1 - sin theta)/2 after exp(-i theta sigma_y/2).
  for (double theta : {0.1, 0.7, 1.3}) {
    const double ph = (1 - std::sin(theta)) / 2;
    for (int mu = -2; mu <= 2; ++mu) {
      const int nh = mu + 2;
      const double expected = oracle::binomial(4, nh) * std::pow(ph, nh) * std::pow(1 - ph, 4 - nh);
      EXPECT_NEAR(cond_prob(m, theta, mu), expected, 1e-12);
    }
  }
}

TEST(CondProb, FullWhiteNoiseGivesProjectorRanks) {
  const ProbabilityModel m =
      apply_noise(ideal(dicke_state(4, 2)), NoiseModel::collective(4, 0.0, 1.0));
  for (double theta : {0.0, 0.4, 1.1}) {
    for (int mu = -2; mu <= 2; ++mu) {
      EXPECT_NEAR(cond_prob(m, theta, mu), oracle::binomial(4, mu + 2) / 16.0, 1e-12);
    }
    EXPECT_NEAR(fisher_information(m, theta).value, 0.0, 1e-12);
  }
}

TEST(CondProb, MatchesDirectEvaluationForRandomNoisyModels) {
  Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = trial % 2 == 0 ? 2 : 4;
    const CMatrix rho = oracle::random_density(rng, n, 1 + trial % 3);
    const auto axes = oracle::random_axes(rng, n);
    std::vector<Eigen::Vector3d> vecs;
    for (const auto& a : axes) vecs.push_back(a.vector());
    const NoiseModel noise = random_noise(rng, n);
    const ProbabilityModel m(QuantumState(n, rho), CollectiveGenerator(axes), noise);
    const double theta = oracle::uniform(rng, -2.0, 2.0);
    const std::vector<double> expected = noisy_oracle(rho, vecs, noise, theta);
    const std::vector<double> got = m.probabilities(theta);
    for (std::size_t o = 0; o < got.size(); ++o) EXPECT_NEAR(got[o], expected[o], 1e-10);
  }
}

TEST(CondProb, ZAxisTiltsTowardsX) {
  const CMatrix rho = QuantumState::from_pure(ghz_state(2)).matrix();
  NoiseModel noise = NoiseModel::collective(2, 0.2);
  const ProbabilityModel m(QuantumState(2, rho), collective_generator(2, LocalAxis::unit_z()), noise);
  const std::vector<Eigen::Vector3d> z(2, Eigen::Vector3d(0, 0, 1));
  const std::vector<double> expected = noisy_oracle(rho, z, noise, 0.5);
  const std::vector<double> got = m.probabilities(0.5);
  for (std::size_t o = 0; o < got.size(); ++o) EXPECT_NEAR(got[o], expected[o], 1e-10);
}

TEST(CondProb, NormalizedAndNonnegative) {
  Rng rng(32);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + 2 * (trial % 2);
    const ProbabilityModel m(QuantumState(n, oracle::random_density(rng, n, 2)),
                             CollectiveGenerator(oracle::random_axes(rng, n)), random_noise(rng, n));
    for (int k = 0; k < 5; ++k) {
      const std::vector<double> p = m.probabilities(oracle::uniform(rng, -4.0, 4.0));
      double sum = 0.0;
      for (double v : p) {
        EXPECT_GE(v, 0.0);
        sum += v;
      }
      EXPECT_NEAR(sum, 1.0, 1e-10);
    }
  }
}

TEST(Derivative, MatchesCentralDifference) {
  Rng rng(33);
  constexpr double h = 1e-5;
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + 2 * (trial % 2);
    std::optional<NoiseModel> noise;
    if (trial % 3 == 0) noise = random_noise(rng, n);
    const ProbabilityModel m(QuantumState(n, oracle::random_density(rng, n, 1 + trial % 2)),
                             CollectiveGenerator(oracle::random_axes(rng, n)), noise);
    const double theta = oracle::uniform(rng, -3.0, 3.0);
    const auto plus = m.probabilities(theta + h);
    const auto minus = m.probabilities(theta - h);
    const auto d = m.derivatives(theta);
    double sum = 0.0;
    for (std::size_t o = 0; o < d.size(); ++o) {
      EXPECT_NEAR(d[o], (plus[o] - minus[o]) / (2 * h), 1e-6);
      EXPECT_EQ(d[o], prob_derivative(m, theta, m.outcomes()[o]));
      sum += d[o];
    }
    EXPECT_NEAR(sum, 0.0, 1e-10);
  }
}

TEST(Derivative, DickeExtremumAtZero) {
  EXPECT_NEAR(prob_derivative(ideal(dicke_state(4, 2)), 0.0, 0), 0.0, 1e-12);
}

TEST(Fisher, SaturatesQfiForIdealStates) {
  const ProbabilityModel d = ideal(dicke_state(4, 2));
  const ProbabilityModel s = ideal(product_state(4, plus_ket()));
  EXPECT_NEAR(fisher_information(d, 0.2 * kPi).value, 12.0, 1e-6);
  for (int i = 0; i < 50; ++i) {
    const double theta = 0.05 * kPi + i * 0.4 * kPi / 49;
    const FisherResult fd = fisher_information(d, theta);
    const FisherResult fs = fisher_information(s, theta);
    EXPECT_FALSE(fd.divergent);
    EXPECT_NEAR(fd.value, 12.0, 1e-6) << theta;
    EXPECT_NEAR(fs.value, 4.0, 1e-6) << theta;
  }
}

TEST(Fisher, SkipsTermsWhereProbabilityAndSlopeVanish) {
  // At theta = 0 only mu = 0 occurs and every slope is zero.
  const FisherResult f = fisher_information(ideal(dicke_state(4, 2)), 0.0);
  EXPECT_FALSE(f.divergent);
  EXPECT_NEAR(f.value, 0.0, 1e-12);
}

TEST(Fisher, FlagsVanishingProbabilityWithNonzeroSlope) {
  // P(0|theta) of the Dicke probe has an isolated zero near 0.304 pi; just beside it
  // P is below 1e-12 while the slope is still above 1e-9.
  const ProbabilityModel m = ideal(dicke_state(4, 2));
  double lo = 0.28 * kPi, hi = 0.33 * kPi;
  for (int it = 0; it < 200; ++it) {
    const double a = lo + (hi - lo) / 3, b = hi - (hi - lo) / 3;
    if (cond_prob(m, a, 0) < cond_prob(m, b, 0)) {
      hi = b;
    } else {
      lo = a;
    }
  }
  const double zero = 0.5 * (lo + hi);
  ASSERT_LT(cond_prob(m, zero, 0), 1e-20);
  const double theta = zero + 3e-7;
  ASSERT_LT(cond_prob(m, theta, 0), 1e-12);
  ASSERT_GT(std::abs(prob_derivative(m, theta, 0)), 1e-9);
  const FisherResult f = fisher_information(m, theta);
  EXPECT_TRUE(f.divergent);
  EXPECT_TRUE(std::isfinite(f.value));
}

TEST(Fisher, BoundedByQfiOfTheNoisyProbe) {
  Rng rng(34);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + 2 * (trial % 2);
    const ProbabilityModel m(QuantumState(n, oracle::random_density(rng, n, 1 + trial % 3)),
                             CollectiveGenerator(oracle::random_axes(rng, n)), random_noise(rng, n));
    const double f_q = qfi(m.effective_probe(), m.effective_generator());
    for (int k = 0; k < 5; ++k) {
      const FisherResult f = fisher_information(m, oracle::uniform(rng, -3.0, 3.0));
      if (!f.divergent) {
        EXPECT_LE(f.value, f_q + 1e-6);
      }
    }
  }
}

TEST(Fisher, WhiteNoiseConvexityBound) {
  const ProbabilityModel d = ideal(dicke_state(4, 2));
  for (double p : {0.05, 0.1, 0.3, 0.7}) {
    const ProbabilityModel noisy = apply_noise(d, NoiseModel::collective(4, 0.0, p));
    for (int i = 1; i < 40; ++i) {
      const double theta = i * kPi / 80;
      EXPECT_LE(fisher_information(noisy, theta).value,
                (1 - p) * fisher_information(d, theta).value + 1e-8);
    }
  }
}

TEST(ApplyNoise, ZeroNoiseIsIdentity) {
  Rng rng(35);
  const ProbabilityModel m(QuantumState(4, oracle::random_density(rng, 4, 2)),
                           CollectiveGenerator(oracle::random_axes(rng, 4)));
  const ProbabilityModel same = apply_noise(m, NoiseModel{});
  for (int k = 0; k < 20; ++k) {
    const double theta = oracle::uniform(rng, -3.0, 3.0);
    const auto a = m.probabilities(theta);
    const auto b = same.probabilities(theta);
    for (std::size_t o = 0; o < a.size(); ++o) EXPECT_NEAR(a[o], b[o], 1e-12);
  }
}

TEST(ApplyNoise, TiltPopulatesIdealZeros) {
  const ProbabilityModel m = apply_noise(ideal(dicke_state(4, 2)), NoiseModel::collective(4, 0.05));
  for (int mu : {-2, -1, 1, 2}) EXPECT_GT(cond_prob(m, 0.0, mu), 0.0) << mu;
}

TEST(ApplyNoise, RejectsOutOfRangeParameters) {
  const ProbabilityModel d = ideal(dicke_state(4, 2));
  EXPECT_THROW(apply_noise(d, NoiseModel::collective(4, 0.0, 1.5)), ParameterError);
  EXPECT_THROW(apply_noise(d, NoiseModel::collective(4, 0.0, -0.1)), ParameterError);
  EXPECT_THROW(apply_noise(d, NoiseModel::collective(4, 0.0, 0.0, 1.2)), ParameterError);
  EXPECT_THROW(apply_noise(d, NoiseModel::collective(4, 2.0)), ParameterError);
  NoiseModel wrong_count;
  wrong_count.misalignment = {0.01, 0.02};
  EXPECT_THROW(apply_noise(d, wrong_count), ParameterError);
}
