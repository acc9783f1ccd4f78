#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "measure.hpp"

namespace fusion_spectra {

struct FreeConvolutionOptions {
  double delta_rel = 1e-3;       // contour offset, relative to the support-width bound
  bool richardson = true;        // extrapolate density(delta), density(2 delta) to delta -> 0
  double damping = 0.5;
  int max_iter = 500;            // damped fixed-point steps per grid point
  int newton_iter = 50;          // polishing steps once inside the basin
  std::size_t grid_points = 2000;
  int edge_refine = 4;           // subdivision factor of cells adjacent to detected edges
  double residual_tol = 1e-8;
  double max_fail_fraction = 0.01;
};

struct SubordinationDiagnostics {
  std::size_t points = 0;
  std::size_t failed = 0;
  double max_residual = 0.0;   // over accepted points
  double raw_mass = 0.0;       // mass of the recovered density before renormalisation
  double delta = 0.0;
  std::vector<double> residuals;
};

struct ConvolutionResult {
  std::vector<double> quantiles;  // gamma(j), j = 1..n
  Measure density_grid = Measure::point(0.0);
  SubordinationDiagnostics diagnostics;
};

/// Solution of the subordination system at one spectral parameter z.
/// omega_a feeds mu1, omega_b feeds mu2:
///   M(z) = M_mu1(omega_a) = M_mu2(omega_b),  omega_a * omega_b = z M(z).
struct SubordinationPoint {
  cplx omega_a, omega_b;
  cplx M;
  double residual = 0.0;
  bool converged = false;
};

namespace detail {

// One sweep of the coupled map starting from omega_b.
inline cplx subordination_map(const Measure& mu1, const Measure& mu2, cplx z, cplx omega_b, cplx* omega_a_out) {
  const cplx oa = z * mu2.m_transform(omega_b) / omega_b;
  if (omega_a_out) *omega_a_out = oa;
  return z * mu1.m_transform(oa) / oa;
}

inline double subordination_residual(const Measure& mu1, const Measure& mu2, cplx z, cplx oa, cplx ob) {
  const cplx prod = oa * ob;
  return std::max(std::abs(z * mu1.m_transform(oa) - prod), std::abs(z * mu2.m_transform(ob) - prod));
}

}  // namespace detail

/// Solve the subordination equations at z (Im z > 0) by damped fixed-point iteration,
/// finishing with Newton steps on omega_b - F(omega_b) once the iterate has settled.
inline SubordinationPoint solve_subordination(const Measure& mu1, const Measure& mu2, cplx z, cplx omega_b_start,
                                              const FreeConvolutionOptions& opt = {}) {
  SubordinationPoint sp;
  cplx ob = omega_b_start;
  if (!(ob.imag() > 0.0) || !std::isfinite(ob.real()) || !std::isfinite(ob.imag())) ob = z;
  auto valid = [](cplx w) { return std::isfinite(w.real()) && std::isfinite(w.imag()) && w.imag() > 0.0; };

  cplx oa;
  for (int it = 0; it < opt.max_iter; ++it) {
    const cplx f = detail::subordination_map(mu1, mu2, z, ob, &oa);
    if (!valid(f)) break;
    const double step = std::abs(f - ob);
    ob = (1.0 - opt.damping) * ob + opt.damping * f;
    if (step < 1e-4 * std::abs(ob)) break;
  }
  // Newton on G(w) = w - F(w); F is analytic so a complex difference quotient is the derivative.
  for (int it = 0; it < opt.newton_iter; ++it) {
    const cplx f = detail::subordination_map(mu1, mu2, z, ob, &oa);
    const cplx g = ob - f;
    if (std::abs(g) < 1e-14 * std::abs(ob)) break;
    const cplx h = 1e-7 * std::abs(ob);
    const cplx gh = (ob + h) - detail::subordination_map(mu1, mu2, z, ob + h, nullptr);
    const cplx dg = (gh - g) / h;
    cplx next = dg != 0.0 ? ob - g / dg : f;
    if (!valid(next)) next = (1.0 - opt.damping) * ob + opt.damping * f;
    if (!valid(next)) break;
    ob = next;
  }
  // Fall back to plain damped iteration if Newton left the admissible half plane.
  if (!valid(ob)) {
    ob = z;
    for (int it = 0; it < 20 * opt.max_iter; ++it) {
      const cplx f = detail::subordination_map(mu1, mu2, z, ob, &oa);
      ob = (1.0 - opt.damping) * ob + opt.damping * f;
    }
  }
  oa = z * mu2.m_transform(ob) / ob;
  sp.omega_a = oa;
  sp.omega_b = ob;
  sp.M = mu1.m_transform(oa);
  sp.residual = detail::subordination_residual(mu1, mu2, z, oa, ob);
  sp.converged = valid(ob) && valid(oa) && sp.residual < opt.residual_tol;
  return sp;
}

/// Stieltjes transform of the convolution recovered from its M-transform.
inline cplx stieltjes_from_m(cplx z, cplx M) { return M / (z * (1.0 - M)); }

/// Free multiplicative convolution mu1 [x] mu2 of two compactly supported measures on [0, inf).
/// Returns quantiles gamma(1..n), the density on the evaluation grid and solver diagnostics.
inline ConvolutionResult free_multiplicative_convolution(const Measure& mu1, const Measure& mu2, std::size_t n,
                                                         const FreeConvolutionOptions& opt = {}) {
  if (n == 0) throw ParameterError("free_multiplicative_convolution: n must be positive");
  if (mu1.lower_edge() < 0.0 || mu2.lower_edge() < 0.0)
    throw ParameterError("free_multiplicative_convolution: measures must live on [0, inf)");
  const bool point1 = mu1.kind() == MeasureKind::point, point2 = mu2.kind() == MeasureKind::point;
  if (point1 && point2 && mu1.atom_location() == 0.0 && mu2.atom_location() == 0.0)
    throw ParameterError("free_multiplicative_convolution: both measures are the point mass at 0");

  ConvolutionResult res;
  // Point masses: delta_s [x] mu is mu scaled by s, no solve needed.
  if (point1 || point2) {
    const Measure& other = point1 ? mu2 : mu1;
    const double s = point1 ? mu1.atom_location() : mu2.atom_location();
    res.quantiles.resize(n);
    for (std::size_t j = 1; j <= n; ++j) res.quantiles[j - 1] = s * other.quantile(j, n);
    if (other.kind() == MeasureKind::point) {
      res.density_grid = Measure::point(s * other.atom_location());
      return res;
    }
  }

  const double lo_b = mu1.lower_edge() * mu2.lower_edge();
  const double hi_b = mu1.upper_edge() * mu2.upper_edge();
  double width = hi_b - lo_b;
  if (!(width > 0.0)) width = std::max(hi_b, 1.0);
  const double delta = opt.delta_rel * width;
  const double x_lo = 0.5 * lo_b, x_hi = 1.5 * hi_b;

  auto density_at = [&](double x, cplx& warm, cplx& warm2, double& resid, bool& ok) {
    const cplx z1(x, delta);
    const auto s1 = solve_subordination(mu1, mu2, z1, warm, opt);
    double rho = stieltjes_from_m(z1, s1.M).imag() / std::numbers::pi;
    resid = s1.residual;
    ok = s1.converged;
    if (s1.converged) warm = s1.omega_b;
    if (opt.richardson) {
      const cplx z2(x, 2.0 * delta);
      const auto s2 = solve_subordination(mu1, mu2, z2, warm2, opt);
      const double rho2 = stieltjes_from_m(z2, s2.M).imag() / std::numbers::pi;
      resid = std::max(resid, s2.residual);
      ok = ok && s2.converged;
      if (s2.converged) warm2 = s2.omega_b;
      rho = 2.0 * rho - rho2;
    }
    return std::max(rho, 0.0);
  };

  struct Node {
    double x, rho, resid;
    bool ok;
  };
  std::vector<Node> nodes;
  nodes.reserve(opt.grid_points * 2);
  {
    cplx warm(x_lo, delta), warm2(x_lo, 2 * delta);
    for (std::size_t k = 0; k < opt.grid_points; ++k) {
      const double x = x_lo + (x_hi - x_lo) * static_cast<double>(k) / static_cast<double>(opt.grid_points - 1);
      double r;
      bool ok;
      const double rho = density_at(x, warm, warm2, r, ok);
      nodes.push_back({x, rho, r, ok});
    }
  }
  // Refine cells next to support edges (transitions between negligible and appreciable density).
  if (opt.edge_refine > 1) {
    double peak = 0.0;
    for (const auto& nd : nodes) peak = std::max(peak, nd.rho);
    const double thr = 1e-3 * peak;
    std::vector<std::size_t> edge_cells;
    for (std::size_t k = 1; k < nodes.size(); ++k)
      if ((nodes[k - 1].rho > thr) != (nodes[k].rho > thr))
        for (std::size_t c = (k > 3 ? k - 3 : 1); c <= std::min(k + 3, nodes.size() - 1); ++c) edge_cells.push_back(c);
    std::sort(edge_cells.begin(), edge_cells.end());
    edge_cells.erase(std::unique(edge_cells.begin(), edge_cells.end()), edge_cells.end());
    std::vector<Node> extra;
    for (std::size_t c : edge_cells) {
      const double a = nodes[c - 1].x, b = nodes[c].x;
      cplx warm = solve_subordination(mu1, mu2, cplx(a, delta), cplx(a, delta), opt).omega_b;
      cplx warm2 = solve_subordination(mu1, mu2, cplx(a, 2 * delta), cplx(a, 2 * delta), opt).omega_b;
      for (int s = 1; s < opt.edge_refine; ++s) {
        const double x = a + (b - a) * s / opt.edge_refine;
        double r;
        bool ok;
        const double rho = density_at(x, warm, warm2, r, ok);
        extra.push_back({x, rho, r, ok});
      }
    }
    nodes.insert(nodes.end(), extra.begin(), extra.end());
    std::sort(nodes.begin(), nodes.end(), [](const Node& a, const Node& b) { return a.x < b.x; });
  }

  auto& diag = res.diagnostics;
  diag.points = nodes.size();
  diag.delta = delta;
  std::vector<double> xs, rhos;
  for (const auto& nd : nodes) {
    diag.residuals.push_back(nd.resid);
    if (!nd.ok) {
      ++diag.failed;
      continue;
    }
    diag.max_residual = std::max(diag.max_residual, nd.resid);
    xs.push_back(nd.x);
    rhos.push_back(nd.rho);
  }
  const double fail_frac = static_cast<double>(diag.failed) / static_cast<double>(diag.points);
  if (fail_frac > opt.max_fail_fraction)
    throw SolverError("subordination solver failed to converge on " + std::to_string(diag.failed) + " of " +
                          std::to_string(diag.points) + " grid points",
                      fail_frac, diag.max_residual);
  double raw = 0.0;
  for (std::size_t k = 1; k < xs.size(); ++k) raw += 0.5 * (rhos[k] + rhos[k - 1]) * (xs[k] - xs[k - 1]);
  diag.raw_mass = raw;
  // The product of positive operators has spectrum inside [lo_b, hi_b]; outside it, and below the
  // round-off floor, the extrapolated density is contour smearing. Zero it, then trim the padding so
  // the grid's end nodes sit at the support edges.
  {
    const double peak = rhos.empty() ? 0.0 : *std::max_element(rhos.begin(), rhos.end());
    for (std::size_t k = 0; k < rhos.size(); ++k)
      if (rhos[k] < 1e-5 * peak || xs[k] < lo_b || xs[k] > hi_b) rhos[k] = 0.0;
    std::size_t first = 0, last = rhos.size();
    while (first < rhos.size() && rhos[first] <= 0.0) ++first;
    while (last > first && rhos[last - 1] <= 0.0) --last;
    if (first == last) throw SolverError("free_multiplicative_convolution: recovered density is identically zero", 0.0,
                                         diag.max_residual);
    const std::size_t b = first > 0 ? first - 1 : 0, e = std::min(last + 1, rhos.size());
    if (b < first && xs[b] < lo_b && lo_b < xs[first]) xs[b] = lo_b;
    if (e > last && xs[e - 1] > hi_b && hi_b > xs[last - 1]) xs[e - 1] = hi_b;
    xs = std::vector<double>(xs.begin() + static_cast<std::ptrdiff_t>(b), xs.begin() + static_cast<std::ptrdiff_t>(e));
    rhos = std::vector<double>(rhos.begin() + static_cast<std::ptrdiff_t>(b), rhos.begin() + static_cast<std::ptrdiff_t>(e));
  }

  res.density_grid = Measure::grid(std::move(xs), std::move(rhos));
  if (!(point1 || point2)) res.quantiles = res.density_grid.quantiles(n);
  return res;
}

/// Diagonal of quantiles used by the Haar oracle: entries gamma_mu(k - 1), k = 1..n.
inline Eigen::VectorXd quantile_diagonal(const Measure& mu, std::size_t n) {
  Eigen::VectorXd d(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) d(static_cast<Eigen::Index>(k)) = mu.quantile(k, n);
  return d;
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the signs of R's diagonal
/// moved into Q.
template <class Rng>
Eigen::MatrixXd haar_orthogonal(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd G(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) G(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
  Eigen::MatrixXd Q = qr.householderQ();
  const Eigen::MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index k = 0; k < n; ++k)
    if (R(k, k) < 0.0) Q.col(k) = -Q.col(k);
  return Q;
}

/// Monte-Carlo oracle for the convolution quantiles: average sorted eigenvalues of
/// Sigma2 U Sigma1 U^T over Haar U, with Sigma_k the quantile diagonals of the two measures.
inline std::vector<double> mc_free_conv(const Measure& mu1, const Measure& mu2, std::size_t n, std::size_t trials,
                                        std::uint64_t seed) {
  if (n < 10) throw ParameterError("mc_free_conv: n must be at least 10");
  if (trials == 0) throw ParameterError("mc_free_conv: need at least one trial");
  const Eigen::VectorXd a = quantile_diagonal(mu1, n);
  const Eigen::VectorXd b = quantile_diagonal(mu2, n);
  if (a.minCoeff() < 0.0 || b.minCoeff() < 0.0) throw ParameterError("mc_free_conv: negative quantiles");
  const Eigen::VectorXd sb = b.cwiseSqrt();
  const auto N = static_cast<Eigen::Index>(n);
  std::vector<double> acc(n, 0.0);
  std::mt19937_64 rng(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    const Eigen::MatrixXd U = haar_orthogonal(N, rng);
    // Same spectrum as Sigma2 U Sigma1 U^T, but symmetric.
    const Eigen::MatrixXd B = sb.asDiagonal() * U;
    const Eigen::MatrixXd H = B * a.asDiagonal() * B.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd ev = es.eigenvalues();  // ascending
    for (std::size_t j = 0; j < n; ++j) acc[j] += ev(N - 1 - static_cast<Eigen::Index>(j));
  }
  for (auto& v : acc) v /= static_cast<double>(trials);
  return acc;
}

}  // namespace fusion_spectra
