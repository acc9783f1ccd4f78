#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fusion_spectra/synthetic_model.hpp"

using namespace fusion_spectra;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.n = 40;
  c.p1 = 80;
  c.p2 = 120;
  c.seed = 11;
  return c;
}

}  // namespace

TEST(SnrSigma, ZeroExponentIsOne) { EXPECT_DOUBLE_EQ(snr_sigma(100, 0.0), 1.0); }
TEST(SnrSigma, UnitExponentIsN) { EXPECT_DOUBLE_EQ(snr_sigma(100, 1.0), 100.0); }
TEST(SnrSigma, FractionalExponent) { EXPECT_NEAR(snr_sigma(256, 1.5), 4096.0, 1e-9); }

TEST(Generate, NoSpikesIsPureNoise) {
  ModelConfig c = small_config();
  c.d1 = c.d2 = 0;
  c.zeta1.clear();
  c.zeta2.clear();
  const auto pair = generate(c);
  EXPECT_EQ(pair.Ux.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(pair.Uy.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((pair.X - pair.Z).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((pair.Y - pair.Wn).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Generate, ObservationIsSignalPlusNoiseExactly) {
  ModelConfig c = small_config();
  c.zeta1 = {0.7};
  c.zeta2 = {0.3};
  const auto pair = generate(c);
  EXPECT_TRUE((pair.X.array() == (pair.Ux + pair.Z).array()).all());
  EXPECT_TRUE((pair.Y.array() == (pair.Uy + pair.Wn).array()).all());
}

TEST(Generate, RowsBeyondSpikeCountAreZero) {
  ModelConfig c = small_config();
  c.d1 = 2;
  c.zeta1 = {0.5, 0.2};
  const auto pair = generate(c);
  EXPECT_GT(pair.Ux.topRows(2).cwiseAbs().minCoeff(), 0.0);
  EXPECT_EQ(pair.Ux.bottomRows(c.p1 - 2).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(pair.Uy.bottomRows(c.p2 - 1).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Generate, SensorsShareTheLatentDraw) {
  ModelConfig c = small_config();
  c.zeta1 = {1.0};
  c.zeta2 = {0.5};
  const auto pair = generate(c);
  const double r = std::sqrt(snr_sigma(40, 1.0) / snr_sigma(40, 0.5));
  EXPECT_LT((pair.Ux.row(0) - r * pair.Uy.row(0)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Generate, SameSeedIsBitIdentical) {
  ModelConfig c = small_config();
  c.zeta1 = {0.4};
  const auto a = generate(c), b = generate(c);
  EXPECT_TRUE((a.X.array() == b.X.array()).all());
  EXPECT_TRUE((a.Y.array() == b.Y.array()).all());
  c.seed = 12;
  const auto d = generate(c);
  EXPECT_FALSE((a.X.array() == d.X.array()).all());
}

TEST(Generate, NoiseColumnMeanMonteCarlo) {
  ModelConfig c;
  c.n = 4;
  c.p1 = c.p2 = 8;
  c.gamma = 0.4;
  c.zeta1 = c.zeta2 = {0.0};
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(8, 4);
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    c.seed = derive_trial_seed(2024, static_cast<std::uint64_t>(t));
    acc += generate(c).Z;
  }
  acc /= trials;
  EXPECT_LT(acc.cwiseAbs().maxCoeff(), 0.05);
}

TEST(Generate, SpikeVarianceMatchesSnr) {
  ModelConfig c;
  c.n = 100;
  c.p1 = 200;
  c.p2 = 300;
  c.zeta1 = {2.0};
  c.seed = 5;
  const auto pair = generate(c);
  const Eigen::ArrayXd row = pair.Ux.row(0).transpose().array();
  EXPECT_NEAR(row.mean(), 0.0, 1e-9);
  const double var = (row - row.mean()).square().sum() / (row.size() - 1);
  EXPECT_NEAR(var / 1e4, 1.0, 0.15);
}

TEST(Generate, NoiseCovarianceNearIdentity) {
  ModelConfig c;
  c.n = 2000;
  c.p1 = 1000;
  c.p2 = 1000;
  c.zeta1 = c.zeta2 = {0.0};
  c.seed = 99;
  const auto pair = generate(c);
  // Covariance over samples of the first 10 noise coordinates.
  const Eigen::MatrixXd Zs = pair.Z.topRows(10);
  const Eigen::MatrixXd C = Zs * Zs.transpose() / static_cast<double>(c.n);
  const double sd = 1.0 / std::sqrt(static_cast<double>(c.n));
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) {
      const double tol = 3.0 * sd * (i == j ? std::sqrt(2.0) : 1.0);
      EXPECT_NEAR(C(i, j), i == j ? 1.0 : 0.0, tol) << i << "," << j;
    }
}

TEST(Generate, RademacherNoiseIsSigned) {
  ModelConfig c = small_config();
  c.noise = NoiseKind::rademacher;
  const auto pair = generate(c);
  EXPECT_TRUE((pair.Z.array().abs() == 1.0).all());
  EXPECT_NEAR(pair.Z.mean(), 0.0, 0.05);
}

TEST(Generate, CircleManifoldHasConstantRadius) {
  ModelConfig c = small_config();
  c.signal = SignalKind::circle_manifold;
  c.zeta1 = {1.0};
  c.zeta2 = {0.5};
  const auto pair = generate(c);
  for (Eigen::Index i = 0; i < pair.Ux.cols(); ++i) {
    EXPECT_NEAR(pair.Ux.col(i).squaredNorm(), 40.0, 1e-9);
    EXPECT_NEAR(pair.Uy.col(i).squaredNorm(), std::sqrt(40.0), 1e-9);
  }
  EXPECT_EQ(pair.Ux.bottomRows(c.p1 - 2).cwiseAbs().maxCoeff(), 0.0);
  // Same angle in both sensors without warp.
  const Eigen::ArrayXd ax = pair.Ux.row(1).array().binaryExpr(pair.Ux.row(0).array(), [](double y, double x) {
    return std::atan2(y, x);
  });
  const Eigen::ArrayXd ay = pair.Uy.row(1).array().binaryExpr(pair.Uy.row(0).array(), [](double y, double x) {
    return std::atan2(y, x);
  });
  EXPECT_LT((ax - ay).abs().maxCoeff(), 1e-12);
}

TEST(Generate, WarpedCircleIsSmoothReparametrisation) {
  ModelConfig c = small_config();
  c.signal = SignalKind::circle_manifold;
  c.zeta1 = c.zeta2 = {0.5};
  c.phi_warp = 0.5;
  const auto pair = generate(c);
  for (Eigen::Index i = 0; i < pair.Ux.cols(); ++i) {
    double t = std::atan2(pair.Ux(1, i), pair.Ux(0, i));
    const double ty = t + 0.5 * std::sin(t);
    EXPECT_NEAR(std::atan2(pair.Uy(1, i), pair.Uy(0, i)), std::atan2(std::sin(ty), std::cos(ty)), 1e-9);
  }
}

TEST(Generate, ConcentrationOfInnerProducts) {
  // max_{i != j} |x_i^T x_j| / p against (sigma^2/n + n^{-1/2}) log n: fit K at n = 100, check at n = 400.
  auto worst_ratio = [](std::size_t n, double zeta) {
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
      ModelConfig c;
      c.n = n;
      c.p1 = 2 * n;
      c.p2 = 3 * n;
      c.zeta1 = {zeta};
      c.seed = derive_trial_seed(77 + n, static_cast<std::uint64_t>(t));
      const auto pair = generate(c);
      Eigen::MatrixXd G = pair.X.transpose() * pair.X / static_cast<double>(c.p1);
      G.diagonal().setZero();
      const double nd = static_cast<double>(n);
      const double scale = (snr_sigma(nd, zeta) / nd + 1.0 / std::sqrt(nd)) * std::log(nd);
      worst = std::max(worst, G.cwiseAbs().maxCoeff() / scale);
    }
    return worst;
  };
  for (double zeta : {0.0, 0.5}) {
    const double K = worst_ratio(100, zeta);
    EXPECT_LE(worst_ratio(400, zeta), K) << "zeta = " << zeta;
  }
}

TEST(Validate, RejectsBadConfigurations) {
  ModelConfig c = small_config();
  c.n = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.p1 = 4000;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.zeta1 = {0.1, 0.2};
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.upsilon = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.zeta2 = {-0.5};
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.phi_warp = 0.3;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(generate(c), ConfigError);
}

TEST(TrialSeeds, DistinctAndDeterministic) {
  EXPECT_EQ(derive_trial_seed(1, 0), derive_trial_seed(1, 0));
  EXPECT_NE(derive_trial_seed(1, 0), derive_trial_seed(1, 1));
  EXPECT_NE(derive_trial_seed(1, 0), derive_trial_seed(2, 0));
}
