#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace fusion_spectra {

/// Squared Euclidean distances between the columns of P.
/// Each unordered pair is evaluated once from the column difference, so the result is exactly
/// symmetric with an exactly zero diagonal.
inline Eigen::MatrixXd pairwise_sq_dists(const Eigen::MatrixXd& P) {
  if (!P.allFinite()) throw InputError("pairwise_sq_dists: non-finite entry in point cloud");
  const Eigen::Index n = P.cols();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double d = (P.col(i) - P.col(j)).squaredNorm();
      out(i, j) = d;
      out(j, i) = d;
    }
  }
  return out;
}

/// Gaussian affinity exp(-upsilon * sq_dist / h), h in squared-distance units.
inline Eigen::MatrixXd affinity(const Eigen::MatrixXd& sq_dists, double h, double upsilon) {
  if (!(h > 0.0) || !std::isfinite(h)) throw ParameterError("affinity: bandwidth must be positive");
  if (!(upsilon > 0.0)) throw ParameterError("affinity: upsilon must be positive");
  Eigen::MatrixXd W = (-(upsilon / h) * sq_dists.array()).exp().matrix();
  W.diagonal().setOnes();
  return W;
}

/// Row sums of an affinity matrix.
inline Eigen::VectorXd degrees(const Eigen::MatrixXd& W) { return W.rowwise().sum(); }

/// D^{-1} W applied as a row scaling.
inline Eigen::MatrixXd row_normalize(const Eigen::MatrixXd& W) {
  const Eigen::VectorXd d = degrees(W);
  if (!(d.minCoeff() > 0.0) || !d.allFinite()) throw NumericalError("row_normalize: nonpositive degree");
  return d.cwiseInverse().asDiagonal() * W;
}

struct KernelStack {
  Eigen::MatrixXd W1, W2;
  Eigen::VectorXd D1, D2;
  Eigen::MatrixXd A1, A2;
  Eigen::MatrixXd N;        // A1 * A2^T (NCCA)
  Eigen::MatrixXd A_fused;  // A1 * A2   (alternating diffusion)
  double h1 = 0.0, h2 = 0.0;
};

/// Degrees, transition matrices and both fused products from two affinities.
inline KernelStack fuse(Eigen::MatrixXd W1, Eigen::MatrixXd W2, double h1 = 0.0, double h2 = 0.0) {
  if (W1.rows() != W1.cols() || W2.rows() != W2.cols() || W1.rows() != W2.rows())
    throw InputError("fuse: affinity matrices must be square and of equal size");
  KernelStack k;
  k.D1 = degrees(W1);
  k.D2 = degrees(W2);
  if (!(k.D1.minCoeff() > 0.0) || !(k.D2.minCoeff() > 0.0))
    throw NumericalError("fuse: zero degree encountered");
  k.A1 = k.D1.cwiseInverse().asDiagonal() * W1;
  k.A2 = k.D2.cwiseInverse().asDiagonal() * W2;
  k.N.noalias() = k.A1 * k.A2.transpose();
  k.A_fused.noalias() = k.A1 * k.A2;
  k.W1 = std::move(W1);
  k.W2 = std::move(W2);
  k.h1 = h1;
  k.h2 = h2;
  return k;
}

struct SpectrumResult {
  std::vector<double> eigen_real;  // descending real parts
  std::vector<double> eigen_imag;  // imaginary parts, aligned with eigen_real
  double eigen_imag_max = 0.0;
  std::vector<double> singular;    // descending
  double scale_applied = 1.0;
  bool imag_warning = false;       // eigen_imag_max > 1e-6 * spectral radius
};

/// Singular values of M, descending.
inline std::vector<double> singular_values(const Eigen::MatrixXd& M) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(M);
  const Eigen::VectorXd s = svd.singularValues();
  std::vector<double> out(s.data(), s.data() + s.size());
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

/// Eigenvalues of a general real matrix, sorted by descending real part
/// (ties broken by descending imaginary part so conjugate pairs stay adjacent).
inline std::vector<std::complex<double>> sorted_eigenvalues(const Eigen::MatrixXd& M) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(M, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver did not converge");
  const Eigen::VectorXcd ev = es.eigenvalues();
  std::vector<std::complex<double>> out(ev.data(), ev.data() + ev.size());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() > b.imag();
  });
  return out;
}

/// Spectrum of scale * M: real parts of the eigenvalues (general solver) plus singular values.
inline SpectrumResult spectrum(const Eigen::MatrixXd& M, double scale = 1.0) {
  if (!M.allFinite()) throw InputError("spectrum: non-finite matrix entry");
  if (M.rows() != M.cols()) throw InputError("spectrum: matrix must be square");
  const Eigen::MatrixXd S = scale * M;
  SpectrumResult r;
  r.scale_applied = scale;
  r.singular = singular_values(S);
  Eigen::EigenSolver<Eigen::MatrixXd> es(S, false);
  if (es.info() != Eigen::Success) throw NumericalError("spectrum: eigensolver did not converge", r.singular);
  const Eigen::VectorXcd ev = es.eigenvalues();
  std::vector<std::complex<double>> sorted(ev.data(), ev.data() + ev.size());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() > b.imag();
  });
  double radius = 0.0;
  for (const auto& z : sorted) {
    r.eigen_real.push_back(z.real());
    r.eigen_imag.push_back(z.imag());
    r.eigen_imag_max = std::max(r.eigen_imag_max, std::abs(z.imag()));
    radius = std::max(radius, std::abs(z));
  }
  r.imag_warning = r.eigen_imag_max > 1e-6 * radius;
  return r;
}

/// Largest singular value by power iteration on M^T M (relative tolerance on the estimate).
/// Falls back to a full SVD if the iteration has not settled after max_iter steps.
inline double spectral_norm(const Eigen::MatrixXd& M, double rel_tol = 1e-8, int max_iter = 2000) {
  if (M.size() == 0) return 0.0;
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(M.cols(), 1.0, 2.0);
  v.normalize();
  double prev = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd u = M * v;
    Eigen::VectorXd w = M.transpose() * u;
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    const double est = std::sqrt(wn);
    v = w / wn;
    if (it > 0 && std::abs(est - prev) <= rel_tol * est) return (M * v).norm();
    prev = est;
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(M);
  return svd.singularValues()(0);
}

/// Number of singular values above rel_threshold * largest.
inline std::size_t numerical_rank(const Eigen::MatrixXd& M, double rel_threshold = 1e-8) {
  const auto s = singular_values(M);
  if (s.empty() || s.front() == 0.0) return 0;
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [&](double x) { return x > rel_threshold * s.front(); }));
}

}  // namespace fusion_spectra
