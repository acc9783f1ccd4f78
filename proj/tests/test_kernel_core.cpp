#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fusion_spectra/kernel_core.hpp"
#include "fusion_spectra/synthetic_model.hpp"

using namespace fusion_spectra;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::MatrixXd M(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) M(i, j) = g(rng);
  return M;
}

Eigen::MatrixXd random_spd(Eigen::Index n, std::uint64_t seed) {
  const Eigen::MatrixXd B = random_matrix(n, n, seed);
  return B * B.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
}

KernelStack noisy_stack(std::size_t n, std::uint64_t seed) {
  ModelConfig c;
  c.n = n;
  c.p1 = 2 * n;
  c.p2 = 3 * n;
  c.zeta1 = {0.5};
  c.zeta2 = {0.2};
  c.seed = seed;
  const auto pair = generate(c);
  return fuse(affinity(pairwise_sq_dists(pair.X), static_cast<double>(c.p1), 1.0),
              affinity(pairwise_sq_dists(pair.Y), static_cast<double>(c.p2), 1.0));
}

}  // namespace

TEST(PairwiseSqDists, IdenticalColumnsGiveZero) {
  Eigen::MatrixXd P(3, 2);
  P << 1, 1, 2, 2, 3, 3;
  EXPECT_EQ(pairwise_sq_dists(P)(0, 1), 0.0);
}

TEST(PairwiseSqDists, ThreeFourFive) {
  Eigen::MatrixXd P(2, 2);
  P << 0, 3, 0, 4;
  EXPECT_DOUBLE_EQ(pairwise_sq_dists(P)(0, 1), 25.0);
}

TEST(PairwiseSqDists, MatchesDoubleLoop) {
  const Eigen::MatrixXd P = random_matrix(5, 6, 3);
  const Eigen::MatrixXd D = pairwise_sq_dists(P);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      double s = 0.0;
      for (int k = 0; k < 5; ++k) s += (P(k, i) - P(k, j)) * (P(k, i) - P(k, j));
      EXPECT_NEAR(D(i, j), s, 1e-12 * std::max(1.0, s));
    }
  EXPECT_TRUE((D.array() == D.transpose().array()).all());
  EXPECT_EQ(D.diagonal().cwiseAbs().maxCoeff(), 0.0);
}

TEST(PairwiseSqDists, RejectsNonFinite) {
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(2, 3);
  P(1, 1) = std::nan("");
  EXPECT_THROW(pairwise_sq_dists(P), InputError);
  P(1, 1) = INFINITY;
  EXPECT_THROW(pairwise_sq_dists(P), InputError);
}

TEST(Affinity, KernelValues) {
  Eigen::MatrixXd sq(1, 1);
  sq << 0.0;
  EXPECT_EQ(affinity(sq, 2.0, 1.0)(0, 0), 1.0);
  Eigen::MatrixXd sq2 = Eigen::MatrixXd::Zero(2, 2);
  sq2(0, 1) = sq2(1, 0) = 3.0;
  EXPECT_NEAR(affinity(sq2, 3.0, 1.0)(0, 1), 0.36787944117144233, 1e-15);
}

TEST(Affinity, ThreePointHandCase) {
  Eigen::MatrixXd sq(3, 3);
  sq << 0, 1, 4, 1, 0, 1, 4, 1, 0;
  const Eigen::MatrixXd W = affinity(sq, 2.0, 1.0);
  EXPECT_NEAR(W(0, 1), std::exp(-0.5), 1e-15);
  EXPECT_NEAR(W(0, 2), std::exp(-2.0), 1e-15);
  EXPECT_EQ(W(1, 1), 1.0);
}

TEST(Affinity, RejectsNonPositiveBandwidth) {
  const Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(2, 2);
  EXPECT_THROW(affinity(sq, 0.0, 1.0), ParameterError);
  EXPECT_THROW(affinity(sq, -1.0, 1.0), ParameterError);
}

TEST(Fuse, IdenticalPointsGiveRankOne) {
  const int n = 6;
  const Eigen::MatrixXd W = Eigen::MatrixXd::Ones(n, n);
  const auto k = fuse(W, W);
  const Eigen::MatrixXd J = Eigen::MatrixXd::Constant(n, n, 1.0 / n);
  EXPECT_LT((k.A1 - J).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((k.N - J).cwiseAbs().maxCoeff(), 1e-15);
  const auto s = spectrum(k.N);
  EXPECT_NEAR(s.eigen_real[0], 1.0, 1e-12);
  for (int i = 1; i < n; ++i) EXPECT_NEAR(s.eigen_real[i], 0.0, 1e-12);
}

TEST(Fuse, IdentitySecondFactor) {
  Eigen::MatrixXd sq(3, 3);
  sq << 0, 1, 4, 1, 0, 1, 4, 1, 0;
  const auto k = fuse(affinity(sq, 2.0, 1.0), Eigen::MatrixXd::Identity(3, 3));
  EXPECT_LT((k.N - k.A1).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Fuse, ThreePointProductMatchesHandMultiplication) {
  Eigen::MatrixXd sq1(3, 3), sq2(3, 3);
  sq1 << 0, 1, 4, 1, 0, 1, 4, 1, 0;
  sq2 << 0, 2, 1, 2, 0, 3, 1, 3, 0;
  const Eigen::MatrixXd W1 = affinity(sq1, 2.0, 1.0), W2 = affinity(sq2, 1.5, 1.0);
  const auto k = fuse(W1, W2);
  double A1[3][3], A2[3][3];
  for (int i = 0; i < 3; ++i) {
    double d1 = 0, d2 = 0;
    for (int j = 0; j < 3; ++j) {
      d1 += std::exp(-sq1(i, j) / 2.0);
      d2 += std::exp(-sq2(i, j) / 1.5);
    }
    for (int j = 0; j < 3; ++j) {
      A1[i][j] = std::exp(-sq1(i, j) / 2.0) / d1;
      A2[i][j] = std::exp(-sq2(i, j) / 1.5) / d2;
    }
  }
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double ncca = 0, ad = 0;
      for (int m = 0; m < 3; ++m) {
        ncca += A1[i][m] * A2[j][m];
        ad += A1[i][m] * A2[m][j];
      }
      EXPECT_NEAR(k.N(i, j), ncca, 1e-12);
      EXPECT_NEAR(k.A_fused(i, j), ad, 1e-12);
    }
}

TEST(Fuse, RowStochasticity) {
  const auto k = noisy_stack(120, 8);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(120);
  EXPECT_LT((k.A1 * one - one).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((k.A2 * one - one).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((k.A_fused * one - one).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_TRUE((k.W1.array() > 0.0).all() && (k.W1.array() <= 1.0).all());
  EXPECT_TRUE((k.W1.array() == k.W1.transpose().array()).all());
  EXPECT_GT(k.D1.minCoeff(), 0.0);
}

TEST(Fuse, TransitionTopEigenvalueIsOne) {
  const auto k = noisy_stack(80, 9);
  EXPECT_NEAR(spectrum(k.A1).eigen_real[0], 1.0, 1e-8);
  EXPECT_NEAR(spectrum(k.A_fused).eigen_real[0], 1.0, 1e-8);
}

TEST(Fuse, RejectsMismatchedShapes) {
  EXPECT_THROW(fuse(Eigen::MatrixXd::Identity(3, 3), Eigen::MatrixXd::Identity(4, 4)), InputError);
}

TEST(Spectrum, IdentityAndScale) {
  const auto s = spectrum(Eigen::MatrixXd::Identity(5, 5), 25.0);
  for (double v : s.eigen_real) EXPECT_NEAR(v, 25.0, 1e-12);
  for (double v : s.singular) EXPECT_NEAR(v, 25.0, 1e-12);
  EXPECT_EQ(s.scale_applied, 25.0);
  EXPECT_EQ(s.eigen_imag_max, 0.0);
}

TEST(Spectrum, OrderedByRealPartAndRecordsImaginary) {
  Eigen::MatrixXd R(3, 3);
  R << 0, -1, 0, 1, 0, 0, 0, 0, 0.5;  // eigenvalues +-i and 0.5
  const auto s = spectrum(R);
  EXPECT_NEAR(s.eigen_real[0], 0.5, 1e-12);
  EXPECT_NEAR(s.eigen_imag_max, 1.0, 1e-12);
  EXPECT_TRUE(s.imag_warning);
  EXPECT_TRUE(std::is_sorted(s.singular.rbegin(), s.singular.rend()));
}

TEST(Spectrum, CyclicProductsShareSpectrum) {
  const auto k = noisy_stack(60, 10);
  const auto a = spectrum(k.N).eigen_real;
  const auto b = spectrum(Eigen::MatrixXd(k.A2.transpose() * k.A1)).eigen_real;
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-10);
}

TEST(Spectrum, RejectsNonFinite) {
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(2, 2);
  M(0, 1) = std::nan("");
  EXPECT_THROW(spectrum(M), InputError);
}

TEST(MatrixInequalities, EigenvalueProductBoundsForSpdPairs) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Eigen::Index n = 3 + static_cast<Eigen::Index>(seed % 18);
    const Eigen::MatrixXd A = random_spd(n, 100 + seed), B = random_spd(n, 200 + seed);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(A), eb(B);
    const Eigen::VectorXd la = ea.eigenvalues().reverse(), lb = eb.eigenvalues().reverse();
    // AB is similar to A^{1/2} B A^{1/2}, which is symmetric positive definite.
    const Eigen::MatrixXd Ah = ea.operatorSqrt();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ep(Ah * B * Ah);
    const Eigen::VectorXd lp = ep.eigenvalues().reverse();
    for (Eigen::Index k = 0; k < n; ++k) {
      EXPECT_LE(la(k) * lb(n - 1), lp(k) * (1 + 1e-12));
      EXPECT_LE(lp(k), la(k) * lb(0) * (1 + 1e-12));
    }
  }
}

TEST(MatrixInequalities, HadamardNormBound) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Eigen::Index n = 3 + static_cast<Eigen::Index>(seed % 18);
    const Eigen::MatrixXd G = random_matrix(n, n, 300 + seed);
    const Eigen::MatrixXd L = (G * G.transpose()).cwiseAbs();  // nonnegative symmetric
    const Eigen::MatrixXd H = random_matrix(n, n, 400 + seed);
    const Eigen::MatrixXd E = 0.5 * (H + H.transpose());
    const double lhs = singular_values(L.cwiseProduct(E)).front();
    const double rhs = E.cwiseAbs().maxCoeff() * singular_values(L).front();
    EXPECT_LE(lhs, rhs * (1 + 1e-12));
  }
}

TEST(SpectralNorm, MatchesSvd) {
  const Eigen::MatrixXd M = random_matrix(30, 30, 5);
  EXPECT_NEAR(spectral_norm(M), singular_values(M).front(), 1e-6 * singular_values(M).front());
  EXPECT_EQ(spectral_norm(Eigen::MatrixXd::Zero(4, 4)), 0.0);
}

TEST(NumericalRank, CountsAboveThreshold) {
  const Eigen::VectorXd u = Eigen::VectorXd::LinSpaced(10, 1, 2), v = Eigen::VectorXd::LinSpaced(10, -1, 3);
  EXPECT_EQ(numerical_rank(u * u.transpose()), 1u);
  EXPECT_EQ(numerical_rank(u * u.transpose() + v * v.transpose()), 2u);
}
