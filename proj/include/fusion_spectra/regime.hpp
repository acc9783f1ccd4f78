#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>

#include "bandwidth.hpp"
#include "clean_reference.hpp"
#include "errors.hpp"

namespace fusion_spectra {

enum class Regime { BothLow, Mixed, BothHigh_1, BothHigh_2, BothHigh_3, ExtremeIdentity };

inline std::string to_string(Regime r) {
  switch (r) {
    case Regime::BothLow: return "BothLow";
    case Regime::Mixed: return "Mixed";
    case Regime::BothHigh_1: return "BothHigh_1";
    case Regime::BothHigh_2: return "BothHigh_2";
    case Regime::BothHigh_3: return "BothHigh_3";
    case Regime::ExtremeIdentity: return "ExtremeIdentity";
  }
  return "unknown";
}

inline Regime regime_from_string(const std::string& s) {
  for (Regime r : {Regime::BothLow, Regime::Mixed, Regime::BothHigh_1, Regime::BothHigh_2, Regime::BothHigh_3,
                   Regime::ExtremeIdentity})
    if (to_string(r) == s) return r;
  throw ConfigError("unknown regime label '" + s + "'");
}

/// Constants the theory leaves unspecified.
struct RegimeParams {
  double C = 2.0;            // multiplies log n / n^{zeta2-1} in the exclusion count R
  std::size_t s1 = 4, s2 = 4;
  double delta_slack = 1.05; // delta = slack * 2/(zeta - 1)
};

struct RegimeThresholds {
  Regime regime = Regime::BothLow;
  double zeta1 = 0.0, zeta2 = 0.0;  // after ordering, zeta1 >= zeta2
  bool swapped = false;             // inputs arrived with zeta1 < zeta2
  std::size_t T = 0, S = 0;
  std::optional<double> R;          // C log n or C n^{zeta2-1}; unset outside 1 <= zeta2 < 2
  std::optional<double> e1, e2;     // only for zeta < 1
  std::optional<int> d1_frak, d2_frak;
  std::optional<double> rate;       // predicted exponent of the leading error term
  std::optional<double> delta;      // set when the large-zeta condition holds
  bool extreme = false;             // zeta1 (Mixed) or zeta2 (BothHigh) beyond 2/delta + 1
};

/// delta for the large-zeta condition zeta > 2/delta + 1; admissible only when it lies in (0,1).
inline std::optional<double> extreme_delta(double zeta, const RegimeParams& params) {
  if (!(zeta > 1.0)) return std::nullopt;
  const double d = params.delta_slack * 2.0 / (zeta - 1.0);
  if (!(d < 1.0)) return std::nullopt;
  return d;
}

inline RegimeThresholds classify(double zeta1, double zeta2, std::size_t n, BandwidthKind policy = BandwidthKind::classic,
                                 const RegimeParams& params = {}) {
  if (!(zeta1 >= 0.0) || !(zeta2 >= 0.0)) throw ConfigError("classify: SNR exponents must be >= 0");
  RegimeThresholds t;
  t.swapped = zeta1 < zeta2;
  t.zeta1 = std::max(zeta1, zeta2);
  t.zeta2 = std::min(zeta1, zeta2);
  const double z1 = t.zeta1, z2 = t.zeta2;
  const double nd = static_cast<double>(n);
  if (z1 < 1.0) {
    t.e1 = error_exponent(z1);
    t.d1_frak = expansion_depth(z1);
  }
  if (z2 < 1.0) {
    t.e2 = error_exponent(z2);
    t.d2_frak = expansion_depth(z2);
  }
  t.S = z2 < 0.5 ? 4 : params.s2 + 4;

  if (z1 < 1.0) {
    t.regime = Regime::BothLow;
    if (z1 < 0.5) t.T = 8;
    else if (z2 < 0.5) t.T = params.s1 + 8;
    else t.T = params.s1 + params.s2 + 8;
    t.rate = std::max((z1 - 1.0) / 2.0, *t.e1);
    return t;
  }
  if (z2 < 1.0) {
    t.regime = Regime::Mixed;
    t.delta = extreme_delta(z1, params);
    t.extreme = t.delta.has_value();
    t.rate = std::max(*t.e2, (z2 - 1.0) / 2.0);
    if (t.extreme) t.rate = std::max(*t.rate, -0.5);
    return t;
  }

  if (policy == BandwidthKind::percentile) {
    // A single statement covers every zeta2 >= 1 with adaptive bandwidths; tail index C log n.
    t.regime = Regime::BothHigh_1;
    t.R = params.C * std::log(nd);
    t.rate = z2 > 1.0 ? std::max(-0.5, 1.0 - z2) : -0.5;
    return t;
  }
  if (z2 == 1.0) t.R = params.C * std::log(nd);
  else if (z2 < 2.0) t.R = params.C * std::pow(nd, z2 - 1.0);
  if (z1 < 2.0) {
    t.regime = Regime::BothHigh_1;
    t.rate = -0.5;
  } else if (z2 < 2.0) {
    t.regime = Regime::BothHigh_2;
    t.delta = extreme_delta(z1, params);
    t.extreme = t.delta.has_value();
    t.rate = -0.5;
  } else {
    t.delta = extreme_delta(z2, params);
    t.extreme = t.delta.has_value();
    t.regime = t.extreme ? Regime::ExtremeIdentity : Regime::BothHigh_3;
    if (!t.extreme) t.rate = std::max(-1.5, -z2 / 2.0);
  }
  return t;
}

}  // namespace fusion_spectra
