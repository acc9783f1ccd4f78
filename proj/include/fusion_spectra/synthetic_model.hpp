#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace fusion_spectra {

enum class NoiseKind { gaussian, rademacher };
enum class SignalKind { gaussian_spike, circle_manifold };

inline std::string to_string(NoiseKind k) { return k == NoiseKind::gaussian ? "gaussian" : "rademacher"; }
inline std::string to_string(SignalKind k) {
  return k == SignalKind::gaussian_spike ? "gaussian-spike" : "circle-manifold";
}

/// Signal variance for sample count n and SNR exponent zeta: n^zeta.
inline double snr_sigma(double n, double zeta) { return std::pow(n, zeta); }

/// splitmix64 step. Used to derive independent per-trial seeds from one root seed:
/// seed_t = splitmix64(root + (t + 1) * 0x9E3779B97F4A7C15).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_trial_seed(std::uint64_t root, std::uint64_t trial) {
  return splitmix64(root + (trial + 1) * 0x9E3779B97F4A7C15ULL);
}

/// Full description of one synthetic two-sensor experiment.
///
/// Signal variances are sigma^2 = n^zeta with the proportionality constant fixed to 1.
/// For circle-manifold signals each sensor carries a 2-dimensional signal
/// u = sigma (cos t, sin t, 0, ...) with the angle t shared by both sensors
/// (optionally warped t -> t + phi_warp * sin t on the second sensor).
struct ModelConfig {
  std::size_t n = 300;
  std::size_t p1 = 600;
  std::size_t p2 = 900;
  std::size_t d1 = 1;
  std::size_t d2 = 1;
  std::vector<double> zeta1{0.0};
  std::vector<double> zeta2{0.0};
  double upsilon = 1.0;
  double gamma = 0.1;
  NoiseKind noise = NoiseKind::gaussian;
  SignalKind signal = SignalKind::gaussian_spike;
  double phi_warp = 0.0;
  std::uint64_t seed = 0;

  double c1() const { return static_cast<double>(n) / static_cast<double>(p1); }
  double c2() const { return static_cast<double>(n) / static_cast<double>(p2); }

  std::size_t dim(int sensor) const { return sensor == 1 ? p1 : p2; }
  const std::vector<double>& zetas(int sensor) const { return sensor == 1 ? zeta1 : zeta2; }

  /// Number of nonzero signal rows actually generated for a sensor.
  std::size_t effective_d(int sensor) const {
    if (signal == SignalKind::circle_manifold) return 2;
    return sensor == 1 ? d1 : d2;
  }

  /// Largest exponent of a sensor; 0 when the sensor carries no spike.
  double zeta_max(int sensor) const {
    double z = 0.0;
    for (double v : zetas(sensor)) z = std::max(z, v);
    return z;
  }

  /// E||u_i||^2 for the sensor.
  double signal_power(int sensor) const {
    const auto& zs = zetas(sensor);
    if (zs.empty()) return 0.0;
    if (signal == SignalKind::circle_manifold) return snr_sigma(static_cast<double>(n), zs.front());
    double s = 0.0;
    for (double z : zs) s += snr_sigma(static_cast<double>(n), z);
    return s;
  }

  void validate() const {
    if (n < 2 || p1 < 2 || p2 < 2) throw ConfigError("n, p1 and p2 must all be at least 2");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0,1)");
    for (double c : {c1(), c2()}) {
      if (c < gamma || c > 1.0 / gamma)
        throw ConfigError("aspect ratio n/p = " + std::to_string(c) + " outside [gamma, 1/gamma]");
    }
    if (!(upsilon > 0.0) || !std::isfinite(upsilon)) throw ConfigError("upsilon must be positive");
    if (d1 > p1 || d2 > p2) throw ConfigError("signal dimension exceeds ambient dimension");
    for (int s : {1, 2}) {
      const auto& zs = zetas(s);
      for (double z : zs)
        if (!(z >= 0.0) || !std::isfinite(z)) throw ConfigError("SNR exponents must be finite and >= 0");
      if (signal == SignalKind::circle_manifold) {
        if (zs.empty()) throw ConfigError("circle-manifold signal needs one SNR exponent per sensor");
        for (double z : zs)
          if (z != zs.front()) throw ConfigError("circle-manifold signal uses a single radius per sensor");
      } else if (zs.size() != (s == 1 ? d1 : d2)) {
        throw ConfigError("zeta" + std::to_string(s) + " has length " + std::to_string(zs.size()) +
                          ", expected d" + std::to_string(s) + " = " + std::to_string(s == 1 ? d1 : d2));
      }
    }
    if (!std::isfinite(phi_warp) || std::abs(phi_warp) >= 1.0)
      throw ConfigError("phi_warp must satisfy |a| < 1 so that t + a sin t stays a bijection");
    if (phi_warp != 0.0 && signal != SignalKind::circle_manifold)
      throw ConfigError("phi_warp only applies to circle-manifold signals");
  }
};

/// Two aligned noisy point clouds, one sample per column, with their clean and noise parts.
/// X = Ux + Z and Y = Uy + Wn hold exactly.
struct PointCloudPair {
  Eigen::MatrixXd X, Y;
  Eigen::MatrixXd Ux, Uy;
  Eigen::MatrixXd Z, Wn;

  std::size_t n() const { return static_cast<std::size_t>(X.cols()); }
};

namespace detail {

template <class Rng>
void fill_noise(Eigen::MatrixXd& m, NoiseKind kind, Rng& rng) {
  if (kind == NoiseKind::gaussian) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = normal(rng);
  } else {
    std::bernoulli_distribution coin(0.5);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = coin(rng) ? 1.0 : -1.0;
  }
}

}  // namespace detail

/// Draws a PointCloudPair. Deterministic for a fixed config (including seed).
/// Draw order: shared latent signal, then noise of sensor 1, then noise of sensor 2.
inline PointCloudPair generate(const ModelConfig& config) {
  config.validate();
  const auto n = static_cast<Eigen::Index>(config.n);
  const auto p1 = static_cast<Eigen::Index>(config.p1);
  const auto p2 = static_cast<Eigen::Index>(config.p2);
  const double nd = static_cast<double>(config.n);

  std::mt19937_64 rng(config.seed);
  PointCloudPair out;
  out.Ux = Eigen::MatrixXd::Zero(p1, n);
  out.Uy = Eigen::MatrixXd::Zero(p2, n);

  if (config.signal == SignalKind::gaussian_spike) {
    const std::size_t dmax = std::max(config.d1, config.d2);
    Eigen::MatrixXd latent(static_cast<Eigen::Index>(dmax), n);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index r = 0; r < latent.rows(); ++r) latent(r, i) = normal(rng);
    // Exact zero mean and unit empirical second moment per latent coordinate.
    for (Eigen::Index r = 0; r < latent.rows(); ++r) {
      latent.row(r).array() -= latent.row(r).mean();
      latent.row(r) /= std::sqrt(latent.row(r).squaredNorm() / nd);
    }
    for (std::size_t r = 0; r < config.d1; ++r)
      out.Ux.row(static_cast<Eigen::Index>(r)) =
          std::sqrt(snr_sigma(nd, config.zeta1[r])) * latent.row(static_cast<Eigen::Index>(r));
    for (std::size_t r = 0; r < config.d2; ++r)
      out.Uy.row(static_cast<Eigen::Index>(r)) =
          std::sqrt(snr_sigma(nd, config.zeta2[r])) * latent.row(static_cast<Eigen::Index>(r));
  } else {
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    const double r1 = std::sqrt(snr_sigma(nd, config.zeta1.front()));
    const double r2 = std::sqrt(snr_sigma(nd, config.zeta2.front()));
    for (Eigen::Index i = 0; i < n; ++i) {
      const double t = angle(rng);
      const double ty = t + config.phi_warp * std::sin(t);
      out.Ux(0, i) = r1 * std::cos(t);
      out.Ux(1, i) = r1 * std::sin(t);
      out.Uy(0, i) = r2 * std::cos(ty);
      out.Uy(1, i) = r2 * std::sin(ty);
    }
  }

  out.Z.resize(p1, n);
  out.Wn.resize(p2, n);
  detail::fill_noise(out.Z, config.noise, rng);
  detail::fill_noise(out.Wn, config.noise, rng);
  out.X = out.Ux + out.Z;
  out.Y = out.Uy + out.Wn;
  return out;
}

}  // namespace fusion_spectra
