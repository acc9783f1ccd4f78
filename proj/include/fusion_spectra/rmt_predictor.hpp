#pragma once

#include <cmath>
#include <cstddef>

#include "errors.hpp"
#include "free_convolution.hpp"
#include "measure.hpp"
#include "synthetic_model.hpp"

namespace fusion_spectra {

/// Deterministic constants of the kernel expansion for one configuration and pair of bandwidths.
struct ModelScalars {
  double tau1 = 2.0, tau2 = 2.0;
  double varsigma1 = 0.0, varsigma2 = 0.0;
  double varsigma1_h = 0.0, varsigma2_h = 0.0;
  double eta = 0.0;
  double eta1 = 0.0, eta2 = 0.0;
  double h1 = 0.0, h2 = 0.0;
  double p1 = 0.0, p2 = 0.0;
  double c1 = 0.0, c2 = 0.0;
  double upsilon = 1.0;

  double tau(int k) const { return k == 1 ? tau1 : tau2; }
  double varsigma(int k) const { return k == 1 ? varsigma1 : varsigma2; }
  double varsigma_h(int k) const { return k == 1 ? varsigma1_h : varsigma2_h; }
  double eta_k(int k) const { return k == 1 ? eta1 : eta2; }
  double h(int k) const { return k == 1 ? h1 : h2; }
  double p(int k) const { return k == 1 ? p1 : p2; }
  double c(int k) const { return k == 1 ? c1 : c2; }
};

inline double kernel_tau(double sigma2, double p) { return 2.0 * (sigma2 / p + 1.0); }

inline double isotropic_shift(double upsilon, double tau) {
  const double e = std::exp(-upsilon * tau);
  return 1.0 - 2.0 * upsilon * e - e;
}

inline double bandwidth_shift(double upsilon, double tau, double p, double h) {
  const double r = p / h;
  const double e = std::exp(-upsilon * tau * r);
  return 1.0 - 2.0 * upsilon * r * e - e;
}

inline double mp_scale(double upsilon) { return 2.0 * upsilon * std::exp(-2.0 * upsilon); }

inline double mp_scale_h(double upsilon, double p, double h) {
  const double r = p / h;
  return 2.0 * r * upsilon * std::exp(-2.0 * r * upsilon);
}

inline ModelScalars scalars(const ModelConfig& config, double h1, double h2) {
  if (!(h1 > 0.0) || !(h2 > 0.0)) throw ParameterError("scalars: bandwidths must be positive");
  ModelScalars s;
  s.upsilon = config.upsilon;
  s.h1 = h1;
  s.h2 = h2;
  s.p1 = static_cast<double>(config.p1);
  s.p2 = static_cast<double>(config.p2);
  s.c1 = config.c1();
  s.c2 = config.c2();
  s.tau1 = kernel_tau(config.signal_power(1), s.p1);
  s.tau2 = kernel_tau(config.signal_power(2), s.p2);
  s.varsigma1 = isotropic_shift(s.upsilon, s.tau1);
  s.varsigma2 = isotropic_shift(s.upsilon, s.tau2);
  s.varsigma1_h = bandwidth_shift(s.upsilon, s.tau1, s.p1, h1);
  s.varsigma2_h = bandwidth_shift(s.upsilon, s.tau2, s.p2, h2);
  s.eta = mp_scale(s.upsilon);
  s.eta1 = mp_scale_h(s.upsilon, s.p1, h1);
  s.eta2 = mp_scale_h(s.upsilon, s.p2, h2);
  return s;
}

inline Measure mp_measure(double c, double s2, MpConvention convention = MpConvention::standard) {
  return Measure::mp(c, s2, convention);
}

/// Shifted MP law of one sensor, T_{varsigma_{k,h}} nu_{c_k, eta_k}. With h = p it reduces to
/// T_{varsigma_k} nu_{c_k, eta}.
inline Measure sensor_law(const ModelScalars& s, int k, MpConvention convention = MpConvention::standard) {
  return Measure::mp(s.c(k), s.eta_k(k), convention).shifted(s.varsigma_h(k));
}

/// Scale e^{4 upsilon p1 p2 / (h1 h2)} applied to the free convolution quantiles in the low-SNR regime.
inline double both_low_scale(const ModelScalars& s) {
  return std::exp(4.0 * s.upsilon * s.p1 * s.p2 / (s.h1 * s.h2));
}

/// Scale e^{2 upsilon p2 / h2} of the extreme mixed case.
inline double mixed_scale(const ModelScalars& s) { return std::exp(2.0 * s.upsilon * s.p2 / s.h2); }

/// Predicted quantiles for lambda_i(n^2 N), i = 1..n, when both sensors are noise dominated.
inline std::vector<double> predict_both_low(const ModelScalars& s, std::size_t n,
                                            MpConvention convention = MpConvention::standard,
                                            const FreeConvolutionOptions& opt = {}) {
  auto res = free_multiplicative_convolution(sensor_law(s, 1, convention), sensor_law(s, 2, convention), n, opt);
  const double scale = both_low_scale(s);
  for (auto& q : res.quantiles) q *= scale;
  return res.quantiles;
}

/// Predicted quantiles for lambda_i(n N), i = 1..n, in the extreme mixed case.
inline std::vector<double> predict_extreme_mixed(const ModelScalars& s, std::size_t n,
                                                 MpConvention convention = MpConvention::standard) {
  auto q = sensor_law(s, 2, convention).quantiles(n);
  const double scale = mixed_scale(s);
  for (auto& v : q) v *= scale;
  return q;
}

}  // namespace fusion_spectra
