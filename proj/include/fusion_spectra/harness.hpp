#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bandwidth.hpp"
#include "clean_reference.hpp"
#include "errors.hpp"
#include "kernel_core.hpp"
#include "measure.hpp"
#include "regime.hpp"
#include "rmt_predictor.hpp"
#include "synthetic_model.hpp"

namespace fusion_spectra {

enum class FusedMatrix { ncca, ad };

inline std::string to_string(FusedMatrix m) { return m == FusedMatrix::ncca ? "ncca" : "ad"; }

enum class MatrixSelection { ncca, ad, both };

inline std::string to_string(MatrixSelection m) {
  return m == MatrixSelection::ncca ? "ncca" : m == MatrixSelection::ad ? "ad" : "both";
}

inline std::vector<FusedMatrix> matrices(MatrixSelection m) {
  if (m == MatrixSelection::ncca) return {FusedMatrix::ncca};
  if (m == MatrixSelection::ad) return {FusedMatrix::ad};
  return {FusedMatrix::ncca, FusedMatrix::ad};
}

struct RegimeConfig {
  RegimeParams params;
  MpConvention mp_convention = MpConvention::standard;
  std::optional<Regime> expect;  // reject the run if the classified regime differs
  bool singular_values = true;   // also compute singular values of the compared matrix
  MatrixSelection matrix = MatrixSelection::ncca;
};

struct ExperimentConfig {
  ModelConfig model;
  BandwidthPolicy bandwidth;
  RegimeConfig regime;
  std::size_t trials = 1;
  std::uint64_t seed = 0;  // root seed; trial t uses derive_trial_seed(seed, t)

  void validate() const {
    model.validate();
    bandwidth.validate();
    if (trials == 0) throw ConfigError("trials must be at least 1");
  }
};

struct TrialResult {
  std::uint64_t seed = 0;
  double h1 = 0.0, h2 = 0.0;
  SpectrumResult empirical;                 // spectrum of the scaled fused matrix
  std::vector<double> predicted;            // aligned with empirical.eigen_real (1-based index i -> [i-1])
  std::vector<std::size_t> compared;        // 1-based indices entering the summary
  std::vector<double> abs_err, rel_err;     // over `compared`
  double median_abs = 0.0, median_rel = 0.0, max_rel = 0.0;
  std::map<std::string, double> norm_errors;
  std::vector<double> reference_eigs;       // tail statement reference product, descending real parts
  double tail_max = std::numeric_limits<double>::quiet_NaN();
};

struct RegimeReport {
  ExperimentConfig config;
  RegimeThresholds thresholds;
  FusedMatrix matrix = FusedMatrix::ncca;
  double scale = 1.0;                   // 1, n or n^2
  std::string prediction;               // what the empirical spectrum is compared with
  std::string headline_metric;          // name of the per-regime error the rate fits use
  std::size_t index_lo = 0, index_hi = 0;  // compared indices are (index_lo, index_hi]
  std::vector<TrialResult> trials;
  // Trial means.
  double median_abs = 0.0, median_rel = 0.0, max_rel = 0.0;
  std::map<std::string, double> norm_errors;
  double tail_max = std::numeric_limits<double>::quiet_NaN();
  double headline = 0.0;
};

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

/// Run body(t) for t in [0, count) on up to `jobs` threads; rethrows the first exception.
template <class F>
void parallel_for(std::size_t count, std::size_t jobs, F&& body) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t t = 0; t < count; ++t) body(t);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w)
    pool.emplace_back([&] {
      for (std::size_t t; (t = next++) < count;) {
        try {
          body(t);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

inline ModelConfig swap_sensors(ModelConfig c) {
  std::swap(c.p1, c.p2);
  std::swap(c.d1, c.d2);
  std::swap(c.zeta1, c.zeta2);
  return c;
}

inline PointCloudPair swap_sensors(PointCloudPair p) {
  std::swap(p.X, p.Y);
  std::swap(p.Ux, p.Uy);
  std::swap(p.Z, p.Wn);
  return p;
}

inline std::string product_name(FusedMatrix m, const std::string& a, const std::string& b) {
  return a + "*" + b + (m == FusedMatrix::ncca ? "^T" : "");
}

inline Eigen::MatrixXd product(FusedMatrix m, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return m == FusedMatrix::ncca ? Eigen::MatrixXd(a * b.transpose()) : Eigen::MatrixXd(a * b);
}

inline std::vector<double> real_parts_desc(const Eigen::MatrixXd& M) {
  const auto ev = sorted_eigenvalues(M);
  std::vector<double> out;
  out.reserve(ev.size());
  for (const auto& z : ev) out.push_back(z.real());
  return out;
}

}  // namespace detail

/// Bandwidths of the two sensors under a policy, from precomputed squared distances.
inline std::pair<double, double> select_bandwidths(const BandwidthPolicy& policy, const ModelConfig& model,
                                                   const Eigen::MatrixXd& sq1, const Eigen::MatrixXd& sq2) {
  if (policy.kind == BandwidthKind::classic) return {classic_bandwidth(model.p1), classic_bandwidth(model.p2)};
  return {percentile_bandwidth_sq(sq1, policy.omega1), percentile_bandwidth_sq(sq2, policy.omega2)};
}

/// Least-squares slope of log y against log x; points with y <= 0 are skipped.
inline double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ParameterError("fit_loglog_slope: size mismatch");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t m = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0) || !std::isfinite(y[i])) continue;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  if (m < 2) return std::numeric_limits<double>::quiet_NaN();
  const double md = static_cast<double>(m);
  const double den = md * sxx - sx * sx;
  if (den == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (md * sxy - sx * sy) / den;
}

inline RegimeReport run_experiment(const ExperimentConfig& cfg, FusedMatrix matrix = FusedMatrix::ncca,
                                   std::size_t jobs = 1) {
  cfg.validate();
  RegimeReport rep;
  rep.config = cfg;
  rep.matrix = matrix;
  rep.thresholds = classify(cfg.model.zeta_max(1), cfg.model.zeta_max(2), cfg.model.n, cfg.bandwidth.kind,
                            cfg.regime.params);
  const auto& th = rep.thresholds;
  if (cfg.regime.expect && *cfg.regime.expect != th.regime)
    throw ConfigError("requested a " + to_string(*cfg.regime.expect) + " comparison but (zeta1, zeta2) = (" +
                      std::to_string(th.zeta1) + ", " + std::to_string(th.zeta2) + ") falls in " +
                      to_string(th.regime));

  const ModelConfig ordered = th.swapped ? detail::swap_sensors(cfg.model) : cfg.model;
  BandwidthPolicy policy = cfg.bandwidth;
  if (th.swapped) std::swap(policy.omega1, policy.omega2);

  const std::size_t n = cfg.model.n;
  const double nd = static_cast<double>(n);
  const std::string M = matrix == FusedMatrix::ncca ? "N" : "A";
  const bool spectral = th.regime == Regime::BothLow || th.regime == Regime::Mixed;
  if (th.regime == Regime::BothLow) {
    rep.scale = nd * nd;
    rep.prediction = "exp(4 ups p1 p2/(h1 h2)) * quantiles of nu1~ [x] nu2~";
    rep.headline_metric = "median_rel";
  } else if (th.regime == Regime::Mixed && th.extreme) {
    rep.scale = nd;
    rep.prediction = "exp(2 ups p2/h2) * quantiles of nu2~";
    rep.headline_metric = "median_rel";
  } else if (th.regime == Regime::Mixed) {
    rep.scale = nd;
    rep.prediction = "eigenvalues of N~";
    rep.headline_metric = "median_abs";
  } else if (th.regime == Regime::ExtremeIdentity) {
    rep.prediction = "identity";
    rep.headline_metric = M + "-I";
  } else {
    rep.prediction = "eigenvalues of " + (cfg.bandwidth.kind == BandwidthKind::percentile
                                              ? detail::product_name(matrix, "A1s", "A2s")
                                              : detail::product_name(matrix, "At1s", "At2s"));
    if (cfg.bandwidth.kind == BandwidthKind::percentile)
      rep.headline_metric = M + "-" + detail::product_name(matrix, "A1s", "A2s");
    else if (th.regime == Regime::BothHigh_1)
      rep.headline_metric = M + "-" + detail::product_name(matrix, "At1s", "At2s");
    else if (th.regime == Regime::BothHigh_2)
      rep.headline_metric = M + "-" + detail::product_name(matrix, "At1c", "At2s");
    else
      rep.headline_metric = M + "-" + detail::product_name(matrix, "At1c", "At2c");
  }
  if (spectral) {
    const std::size_t excl = th.regime == Regime::BothLow ? th.T : th.S;
    rep.index_lo = std::max<std::size_t>(excl, static_cast<std::size_t>(std::ceil(0.05 * nd)));
    rep.index_hi = static_cast<std::size_t>(std::floor(0.95 * nd));
  } else {
    rep.index_lo = 0;
    rep.index_hi = n;
  }

  rep.trials.resize(cfg.trials);
  detail::parallel_for(cfg.trials, jobs, [&](std::size_t t) {
    TrialResult tr;
    ModelConfig mc = cfg.model;
    tr.seed = derive_trial_seed(cfg.seed, t);
    mc.seed = tr.seed;
    PointCloudPair pair = generate(mc);
    if (th.swapped) pair = detail::swap_sensors(std::move(pair));
    const Eigen::MatrixXd sq1 = pairwise_sq_dists(pair.X), sq2 = pairwise_sq_dists(pair.Y);
    std::tie(tr.h1, tr.h2) = select_bandwidths(policy, ordered, sq1, sq2);
    const KernelStack ks = fuse(affinity(sq1, tr.h1, ordered.upsilon), affinity(sq2, tr.h2, ordered.upsilon), tr.h1, tr.h2);
    const Eigen::MatrixXd& F = matrix == FusedMatrix::ncca ? ks.N : ks.A_fused;
    const ModelScalars sc = scalars(ordered, tr.h1, tr.h2);

    if (cfg.regime.singular_values) {
      tr.empirical = spectrum(F, rep.scale);
    } else {
      tr.empirical.scale_applied = rep.scale;
      const auto ev = sorted_eigenvalues(rep.scale * F);
      double radius = 0.0;
      for (const auto& z : ev) {
        tr.empirical.eigen_real.push_back(z.real());
        tr.empirical.eigen_imag.push_back(z.imag());
        tr.empirical.eigen_imag_max = std::max(tr.empirical.eigen_imag_max, std::abs(z.imag()));
        radius = std::max(radius, std::abs(z));
      }
      tr.empirical.imag_warning = tr.empirical.eigen_imag_max > 1e-6 * radius;
    }

    if (th.regime == Regime::BothLow) {
      tr.predicted = predict_both_low(sc, n, cfg.regime.mp_convention);
    } else if (th.regime == Regime::Mixed && th.extreme) {
      tr.predicted = predict_extreme_mixed(sc, n, cfg.regime.mp_convention);
    } else if (th.regime == Regime::Mixed) {
      const ReferenceStack ref = build_reference(pair, ordered, tr.h1, tr.h2);
      tr.predicted = detail::real_parts_desc(ref.N_tilde);
    } else if (th.regime == Regime::ExtremeIdentity) {
      tr.predicted.assign(n, 1.0);
      tr.norm_errors[M + "-I"] = spectral_norm(F - Eigen::MatrixXd::Identity(F.rows(), F.cols()));
    } else {
      const ReferenceStack ref = build_reference(pair, ordered, tr.h1, tr.h2);
      auto add = [&](const std::string& a, const Eigen::MatrixXd& A, const std::string& b, const Eigen::MatrixXd& B) {
        const Eigen::MatrixXd P = detail::product(matrix, A, B);
        tr.norm_errors[M + "-" + detail::product_name(matrix, a, b)] = spectral_norm(F - P);
        return P;
      };
      const Eigen::MatrixXd P_ss = add("At1s", ref.a_tilde_s(1), "At2s", ref.a_tilde_s(2));
      add("At1c", ref.a_tilde_c(1), "At2s", ref.a_tilde_s(2));
      add("At1c", ref.a_tilde_c(1), "At2c", ref.a_tilde_c(2));
      Eigen::MatrixXd P_ref = P_ss;
      if (cfg.bandwidth.kind == BandwidthKind::percentile) P_ref = add("A1s", ref.a_s(1), "A2s", ref.a_s(2));
      if (th.regime == Regime::BothHigh_2 && th.extreme) {
        const Eigen::MatrixXd A2 = matrix == FusedMatrix::ncca ? Eigen::MatrixXd(ref.a_tilde_s(2).transpose())
                                                               : ref.a_tilde_s(2);
        tr.norm_errors[M + "-At2s" + (matrix == FusedMatrix::ncca ? "^T" : "")] = spectral_norm(F - A2);
      }
      tr.norm_errors[M + "-I"] = spectral_norm(F - Eigen::MatrixXd::Identity(F.rows(), F.cols()));
      tr.reference_eigs = detail::real_parts_desc(P_ref);
      tr.predicted = tr.reference_eigs;
      if (th.R) {
        double mx = 0.0;
        for (std::size_t i = static_cast<std::size_t>(std::floor(*th.R)) + 1; i <= n; ++i)
          mx = std::max(mx, std::abs(tr.reference_eigs[i - 1]));
        tr.tail_max = mx;
      }
    }

    for (std::size_t i = rep.index_lo + 1; i <= rep.index_hi; ++i) {
      const double e = tr.empirical.eigen_real[i - 1], p = tr.predicted[i - 1];
      tr.compared.push_back(i);
      tr.abs_err.push_back(std::abs(e - p));
      tr.rel_err.push_back(p != 0.0 ? std::abs(e - p) / std::abs(p) : std::numeric_limits<double>::infinity());
    }
    tr.median_abs = detail::median(tr.abs_err);
    tr.median_rel = detail::median(tr.rel_err);
    tr.max_rel = tr.rel_err.empty() ? 0.0 : *std::max_element(tr.rel_err.begin(), tr.rel_err.end());
    rep.trials[t] = std::move(tr);
  });

  const double T = static_cast<double>(cfg.trials);
  for (const auto& tr : rep.trials) {
    rep.median_abs += tr.median_abs / T;
    rep.median_rel += tr.median_rel / T;
    rep.max_rel += tr.max_rel / T;
    for (const auto& [k, v] : tr.norm_errors) rep.norm_errors[k] += v / T;
  }
  if (th.R) {
    rep.tail_max = 0.0;
    for (const auto& tr : rep.trials) rep.tail_max += tr.tail_max / T;
  }
  if (rep.headline_metric == "median_rel") rep.headline = rep.median_rel;
  else if (rep.headline_metric == "median_abs") rep.headline = rep.median_abs;
  else rep.headline = rep.norm_errors.at(rep.headline_metric);
  return rep;
}

/// Same pipeline on the alternating-diffusion matrix A1 A2 (reference products lose their transpose).
inline RegimeReport ad_variant(const ExperimentConfig& cfg, std::size_t jobs = 1) {
  return run_experiment(cfg, FusedMatrix::ad, jobs);
}

struct SweepPoint {
  std::size_t n = 0;
  RegimeReport report;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  std::string metric;
  double slope = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> predicted_rate;
};

/// Run the experiment at each n with the aspect ratios n/p_k held fixed, and fit the log-log slope of
/// the headline error against n.
inline SweepResult sweep(const ExperimentConfig& base, const std::vector<std::size_t>& ns,
                         FusedMatrix matrix = FusedMatrix::ncca, std::size_t jobs = 1) {
  if (ns.empty()) throw ConfigError("sweep needs at least one n");
  SweepResult out;
  const double c1 = base.model.c1(), c2 = base.model.c2();
  std::vector<double> xs, ys;
  for (std::size_t n : ns) {
    ExperimentConfig cfg = base;
    cfg.model.n = n;
    cfg.model.p1 = static_cast<std::size_t>(std::llround(static_cast<double>(n) / c1));
    cfg.model.p2 = static_cast<std::size_t>(std::llround(static_cast<double>(n) / c2));
    SweepPoint pt{n, run_experiment(cfg, matrix, jobs)};
    xs.push_back(static_cast<double>(n));
    ys.push_back(pt.report.headline);
    out.metric = pt.report.headline_metric;
    out.predicted_rate = pt.report.thresholds.rate;
    out.points.push_back(std::move(pt));
  }
  out.slope = fit_loglog_slope(xs, ys);
  return out;
}

}  // namespace fusion_spectra
