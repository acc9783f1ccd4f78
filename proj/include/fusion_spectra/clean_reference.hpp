#pragma once

#include <cmath>
#include <cstddef>
#include <optional>

#include <Eigen/Dense>

#include "errors.hpp"
#include "kernel_core.hpp"
#include "rmt_predictor.hpp"
#include "synthetic_model.hpp"

namespace fusion_spectra {

/// Clean-signal affinities and transition matrices per sensor, plus the mixed-regime surrogate.
struct ReferenceStack {
  Eigen::MatrixXd W_s[2];        // affinity of the clean signal
  Eigen::MatrixXd W_tilde_s[2];  // e^{-2 ups p/h} W_s + (1 - e^{-2 ups p/h}) I
  Eigen::MatrixXd A_tilde_s[2];
  Eigen::MatrixXd A_s[2];
  Eigen::MatrixXd W_tilde_c[2];  // W_tilde_s with the signal/noise cross term
  Eigen::MatrixXd A_tilde_c[2];
  Eigen::MatrixXd T[2];          // varsigma_{k,h} I + (2 ups e^{-ups tau_k p_k/h_k} / h_k) (noise Gram)
  Eigen::MatrixXd N_tilde;       // mixed-regime surrogate, first-sensor branch picked by zeta1
  bool cross_branch = false;     // N_tilde built from A_tilde_c (zeta1 >= 2)
  ModelScalars scalars;

  const Eigen::MatrixXd& w_s(int k) const { return W_s[k - 1]; }
  const Eigen::MatrixXd& a_tilde_s(int k) const { return A_tilde_s[k - 1]; }
  const Eigen::MatrixXd& a_s(int k) const { return A_s[k - 1]; }
  const Eigen::MatrixXd& a_tilde_c(int k) const { return A_tilde_c[k - 1]; }
};

/// Cross-term factor exp(-2 ups (u_i - u_j)^T (z_i - z_j) / h).
inline Eigen::MatrixXd cross_term_affinity(const Eigen::MatrixXd& U, const Eigen::MatrixXd& Z, double h,
                                           double upsilon) {
  const Eigen::MatrixXd G = U.transpose() * Z;  // G(i,j) = u_i^T z_j
  const Eigen::VectorXd g = G.diagonal();
  const Eigen::Index n = G.rows();
  Eigen::MatrixXd arg(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) arg(i, j) = g(i) + g(j) - G(i, j) - G(j, i);
  Eigen::MatrixXd W = (-(2.0 * upsilon / h) * arg.array()).exp().matrix();
  W.diagonal().setOnes();
  return W;
}

inline Eigen::MatrixXd lazy_affinity(const Eigen::MatrixXd& Ws, double p, double h, double upsilon) {
  const double r = std::exp(-2.0 * upsilon * p / h);
  Eigen::MatrixXd out = r * Ws;
  out.diagonal().array() += 1.0 - r;
  return out;
}

inline Eigen::MatrixXd noise_gram_surrogate(const Eigen::MatrixXd& noise, const ModelScalars& s, int k) {
  const double coef = 2.0 * s.upsilon * std::exp(-s.upsilon * s.tau(k) * s.p(k) / s.h(k)) / s.h(k);
  Eigen::MatrixXd T = coef * (noise.transpose() * noise);
  T.diagonal().array() += s.varsigma_h(k);
  return T;
}

inline ReferenceStack build_reference(const PointCloudPair& pair, const ModelConfig& config, double h1, double h2) {
  const auto n = static_cast<Eigen::Index>(config.n);
  const Eigen::MatrixXd* U[2] = {&pair.Ux, &pair.Uy};
  const Eigen::MatrixXd* Z[2] = {&pair.Z, &pair.Wn};
  for (int k = 0; k < 2; ++k)
    if (U[k]->cols() != n || Z[k]->cols() != n || U[k]->size() == 0 || Z[k]->size() == 0)
      throw InputError("build_reference: point cloud pair lacks clean or noise parts of the expected size");

  ReferenceStack ref;
  ref.scalars = scalars(config, h1, h2);
  const double h[2] = {h1, h2};
  for (int k = 0; k < 2; ++k) {
    const double p = static_cast<double>(config.dim(k + 1));
    ref.W_s[k] = affinity(pairwise_sq_dists(*U[k]), h[k], config.upsilon);
    ref.W_tilde_s[k] = lazy_affinity(ref.W_s[k], p, h[k], config.upsilon);
    ref.A_tilde_s[k] = row_normalize(ref.W_tilde_s[k]);
    ref.A_s[k] = row_normalize(ref.W_s[k]);
    ref.W_tilde_c[k] = ref.W_tilde_s[k].cwiseProduct(cross_term_affinity(*U[k], *Z[k], h[k], config.upsilon));
    ref.A_tilde_c[k] = row_normalize(ref.W_tilde_c[k]);
    ref.T[k] = noise_gram_surrogate(*Z[k], ref.scalars, k + 1);
  }
  ref.cross_branch = config.zeta_max(1) >= 2.0;
  const Eigen::MatrixXd& first = ref.cross_branch ? ref.A_tilde_c[0] : ref.A_tilde_s[0];
  ref.N_tilde.noalias() = mixed_scale(ref.scalars) * first * ref.T[1];
  return ref;
}

/// Expansion depth ceil(1/(1 - zeta)) + 1, for zeta < 1.
inline int expansion_depth(double zeta) {
  if (!(zeta < 1.0)) throw RegimeError("expansion depth is defined only for zeta < 1");
  return static_cast<int>(std::ceil(1.0 / (1.0 - zeta))) + 1;
}

/// Error exponent (zeta - 1)(ceil(1/(1 - zeta)) + 1) + 1 of the Taylor surrogate.
inline double error_exponent(double zeta) { return (zeta - 1.0) * expansion_depth(zeta) + 1.0; }

/// Taylor surrogate of one sensor's affinity around the concentration point tau.
struct ShMatrices {
  Eigen::VectorXd Phi;
  Eigen::MatrixXd Sh0, Sh1, Sh2;
  std::optional<Eigen::MatrixXd> Sh_d;  // present when zeta >= 0.5
  Eigen::MatrixXd K1;
  int depth = 2;                        // expansion depth; Sh_d sums orders 3..depth-1
  double tau = 2.0;
};

/// k-th derivative of f(x) = exp(-ups x) at tau.
inline double kernel_derivative(int k, double upsilon, double tau) {
  return std::pow(-upsilon, k) * std::exp(-upsilon * tau);
}

inline ShMatrices build_sh(const PointCloudPair& pair, const ModelConfig& config, int sensor) {
  if (sensor != 1 && sensor != 2) throw ParameterError("build_sh: sensor must be 1 or 2");
  const double zeta = config.zeta_max(sensor);
  if (zeta >= 1.0) throw RegimeError("build_sh: the Taylor surrogate needs zeta < 1, got " + std::to_string(zeta));
  const Eigen::MatrixXd& X = sensor == 1 ? pair.X : pair.Y;
  const Eigen::MatrixXd& U = sensor == 1 ? pair.Ux : pair.Uy;
  const double p = static_cast<double>(config.dim(sensor));
  const double sigma2 = config.signal_power(sensor);
  const double ups = config.upsilon;
  const Eigen::Index n = X.cols();
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);

  ShMatrices sh;
  sh.tau = kernel_tau(sigma2, p);
  sh.depth = expansion_depth(zeta);
  const double f0 = kernel_derivative(0, ups, sh.tau);
  const double f1 = kernel_derivative(1, ups, sh.tau);
  const double f2 = kernel_derivative(2, ups, sh.tau);

  sh.Phi = X.colwise().squaredNorm().transpose() / p - (1.0 + sigma2 / p) * ones;
  const Eigen::VectorXd phi2 = sh.Phi.cwiseProduct(sh.Phi);
  sh.Sh0 = f0 * ones * ones.transpose();
  sh.Sh1 = f1 * (ones * sh.Phi.transpose() + sh.Phi * ones.transpose());
  const double c = 4.0 * ((sigma2 + 1.0) * (sigma2 + 1.0) + p) / (p * p);
  sh.Sh2 = 0.5 * f2 *
           (ones * phi2.transpose() + phi2 * ones.transpose() + 2.0 * sh.Phi * sh.Phi.transpose() +
            c * ones * ones.transpose());

  sh.K1 = (-2.0 * f1 / p) * (X.transpose() * X) + sh.Sh0 + sh.Sh1 + sh.Sh2;
  sh.K1.diagonal().array() += isotropic_shift(ups, sh.tau);

  if (zeta >= 0.5) {
    // L = O - 2 P_s with O(i,j) = phi_i + phi_j and P_s the signal Gram over p.
    Eigen::MatrixXd L = sh.Phi * ones.transpose() + ones * sh.Phi.transpose();
    L.noalias() -= (2.0 / p) * (U.transpose() * U);
    const Eigen::MatrixXd O = sh.Phi * ones.transpose() + ones * sh.Phi.transpose();
    // Second order: swap the signal part 4 sigma^4 / p^2 of Sh2's constant for the exact signal terms.
    Eigen::MatrixXd Shd = 0.5 * f2 * (L.array().square() - O.array().square() - 4.0 * sigma2 * sigma2 / (p * p)).matrix();
    Eigen::ArrayXXd Lk = L.array().square();
    double fact = 2.0;
    for (int k = 3; k <= sh.depth - 1; ++k) {
      Lk *= L.array();
      fact *= k;
      Shd.array() += kernel_derivative(k, ups, sh.tau) / fact * Lk;
    }
    sh.K1 += Shd;
    sh.Sh_d = std::move(Shd);
  }
  return sh;
}

inline double surrogate_error(const Eigen::MatrixXd& W, const ShMatrices& sh) {
  if (W.rows() != sh.K1.rows() || W.cols() != sh.K1.cols())
    throw InputError("surrogate_error: dimension mismatch");
  return spectral_norm(W - sh.K1);
}

}  // namespace fusion_spectra
