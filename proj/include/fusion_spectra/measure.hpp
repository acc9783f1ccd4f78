#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "errors.hpp"

namespace fusion_spectra {

using cplx = std::complex<double>;

/// How the Marchenko-Pastur member is parametrised.
///
/// standard: ESD limit of the n x n matrix (s2/p) Z^T Z with c = n/p. Edges s2 (1 -+ sqrt c)^2,
///           density sqrt((l+ - x)(x - l-)) / (2 pi s2 c x), atom (1 - 1/c)_+ at zero.
/// verbatim: the textbook transcription with edges (1 -+ s2 sqrt c)^2, the same density formula and
///           atom (1 - c)_+ at zero, continuous part renormalised to 1 - atom on a fine grid.
/// For s2 = 1 and c <= 1 the two differ only in the atom.
enum class MpConvention { standard, verbatim };

inline std::string to_string(MpConvention c) { return c == MpConvention::standard ? "standard" : "verbatim"; }

enum class MeasureKind { mp, shifted, point, grid };

namespace detail {

// log((x1 - z) / (x0 - z)) without cancellation when the ratio is close to 1.
inline cplx log_ratio(double x0, double x1, cplx z) {
  const cplx w = (x1 - x0) / (x0 - z);
  if (std::abs(w) < 1e-3) {
    cplx term = w, sum = 0.0;
    for (int k = 1; k < 8; ++k) {
      sum += term / static_cast<double>(k);
      term *= -w;
    }
    return sum;
  }
  return std::log(x1 - z) - std::log(x0 - z);
}

}  // namespace detail

/// Probability measure on the nonnegative reals supporting Stieltjes / M-transform evaluation,
/// distribution function and upper-tail quantiles. Immutable after construction.
class Measure {
public:
  struct Mp {
    double c, s2;
    MpConvention convention;
    double lo, hi, atom;
  };
  struct Point {
    double location;
  };
  struct Grid {
    std::vector<double> x;        // ascending nodes
    std::vector<double> density;  // nonnegative, piecewise linear between nodes
    std::vector<double> cum;      // continuous mass on [x0, x_k]
    double atom_at_zero = 0.0;
  };
  struct Shifted {
    std::shared_ptr<const Measure> base;
    double a;
  };

  /// Marchenko-Pastur law nu_{c, s2}.
  static Measure mp(double c, double s2, MpConvention convention = MpConvention::standard) {
    if (!(c > 0.0) || !(s2 > 0.0)) throw ParameterError("mp: ratio and scale must be positive");
    Measure m;
    if (convention == MpConvention::standard) {
      const double rc = std::sqrt(c);
      m.rep_ = Mp{c, s2, convention, s2 * (1 - rc) * (1 - rc), s2 * (1 + rc) * (1 + rc),
                  std::max(0.0, 1.0 - 1.0 / c)};
      return m;
    }
    const double lo = (1 - s2 * std::sqrt(c)) * (1 - s2 * std::sqrt(c));
    const double hi = (1 + s2 * std::sqrt(c)) * (1 + s2 * std::sqrt(c));
    const double atom = std::max(0.0, 1.0 - c);
    m.rep_ = Mp{c, s2, convention, lo, hi, atom};
    // Chebyshev-like node clustering toward both edges keeps the square-root profile resolved.
    constexpr int K = 1201;
    std::vector<double> xs(K), ds(K);
    for (int k = 0; k < K; ++k) {
      const double t = std::numbers::pi * (1.0 - static_cast<double>(k) / (K - 1));
      xs[static_cast<std::size_t>(k)] = 0.5 * (lo + hi) + 0.5 * (hi - lo) * std::cos(t);
    }
    xs.front() = lo;
    xs.back() = hi;
    for (int k = 0; k < K; ++k) {
      const double x = xs[static_cast<std::size_t>(k)];
      const double r = (hi - x) * (x - lo);
      ds[static_cast<std::size_t>(k)] =
          (x > 0.0 && r > 0.0) ? std::sqrt(r) / (2 * std::numbers::pi * s2 * c * x) : 0.0;
    }
    m.verbatim_grid_ = std::make_shared<const Measure>(grid(std::move(xs), std::move(ds), atom));
    return m;
  }

  static Measure point(double location) {
    if (!(location >= 0.0) || !std::isfinite(location)) throw ParameterError("point mass must sit on [0, inf)");
    Measure m;
    m.rep_ = Point{location};
    return m;
  }

  /// Piecewise-linear density on the given nodes, renormalised so the continuous part has mass
  /// 1 - atom_at_zero.
  static Measure grid(std::vector<double> x, std::vector<double> density, double atom_at_zero = 0.0) {
    if (x.size() < 2 || x.size() != density.size()) throw ParameterError("grid: need >= 2 nodes with densities");
    if (!(atom_at_zero >= 0.0 && atom_at_zero < 1.0)) throw ParameterError("grid: atom must lie in [0,1)");
    for (std::size_t k = 1; k < x.size(); ++k)
      if (!(x[k] > x[k - 1])) throw ParameterError("grid: nodes must be strictly increasing");
    for (double& d : density) {
      if (!std::isfinite(d)) throw ParameterError("grid: non-finite density");
      d = std::max(d, 0.0);
    }
    Grid g{std::move(x), std::move(density), {}, atom_at_zero};
    g.cum.assign(g.x.size(), 0.0);
    for (std::size_t k = 1; k < g.x.size(); ++k)
      g.cum[k] = g.cum[k - 1] + 0.5 * (g.density[k] + g.density[k - 1]) * (g.x[k] - g.x[k - 1]);
    const double total = g.cum.back();
    if (!(total > 0.0)) throw ParameterError("grid: density has zero mass");
    const double scale = (1.0 - atom_at_zero) / total;
    for (auto& d : g.density) d *= scale;
    for (auto& c : g.cum) c *= scale;
    Measure m;
    m.rep_ = std::move(g);
    return m;
  }

  /// Uniform grid on [lo, hi].
  static Measure uniform_grid(double lo, double hi, std::vector<double> density, double atom_at_zero = 0.0) {
    const std::size_t K = density.size();
    if (K < 2 || !(hi > lo)) throw ParameterError("uniform_grid: need >= 2 samples on a proper interval");
    std::vector<double> x(K);
    for (std::size_t k = 0; k < K; ++k) x[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(K - 1);
    return grid(std::move(x), std::move(density), atom_at_zero);
  }

  /// T_a: translate by a.
  Measure shifted(double a) const {
    Measure m;
    m.rep_ = Shifted{std::make_shared<const Measure>(*this), a};
    return m;
  }

  MeasureKind kind() const {
    return std::visit(
        [](const auto& r) {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, Mp>) return MeasureKind::mp;
          else if constexpr (std::is_same_v<T, Point>) return MeasureKind::point;
          else if constexpr (std::is_same_v<T, Grid>) return MeasureKind::grid;
          else return MeasureKind::shifted;
        },
        rep_);
  }

  const Grid* as_grid() const { return std::get_if<Grid>(&rep_); }
  const Mp* as_mp() const { return std::get_if<Mp>(&rep_); }

  /// Mass of the atom (wherever it sits after shifts).
  double atom_mass() const {
    if (auto* mp = std::get_if<Mp>(&rep_)) return mp->atom;
    if (std::holds_alternative<Point>(rep_)) return 1.0;
    if (auto* g = std::get_if<Grid>(&rep_)) return g->atom_at_zero;
    return std::get<Shifted>(rep_).base->atom_mass();
  }

  /// Location of the atom (0 before shifting; the point for point masses).
  double atom_location() const {
    if (auto* p = std::get_if<Point>(&rep_)) return p->location;
    if (auto* s = std::get_if<Shifted>(&rep_)) return s->base->atom_location() + s->a;
    return 0.0;
  }

  /// Edges of the continuous part (or of the point).
  double continuous_lower() const {
    return std::visit(
        [](const auto& r) -> double {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, Mp>) return r.lo;
          else if constexpr (std::is_same_v<T, Point>) return r.location;
          else if constexpr (std::is_same_v<T, Grid>) return r.x.front();
          else return r.base->continuous_lower() + r.a;
        },
        rep_);
  }
  double continuous_upper() const {
    return std::visit(
        [](const auto& r) -> double {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, Mp>) return r.hi;
          else if constexpr (std::is_same_v<T, Point>) return r.location;
          else if constexpr (std::is_same_v<T, Grid>) return r.x.back();
          else return r.base->continuous_upper() + r.a;
        },
        rep_);
  }

  /// Smallest / largest point of the support, atom included.
  double lower_edge() const {
    double lo = continuous_lower();
    if (auto* g = std::get_if<Grid>(&rep_)) {
      for (std::size_t k = 0; k < g->x.size(); ++k)
        if (g->density[k] > 0.0) {
          lo = g->x[k > 0 ? k - 1 : 0];
          break;
        }
    }
    if (auto* s = std::get_if<Shifted>(&rep_)) lo = s->base->lower_edge() + s->a;
    if (atom_mass() > 0.0 && kind() != MeasureKind::shifted) lo = std::min(lo, atom_location());
    return lo;
  }
  double upper_edge() const {
    if (auto* g = std::get_if<Grid>(&rep_)) {
      for (std::size_t k = g->x.size(); k-- > 0;)
        if (g->density[k] > 0.0) return g->x[std::min(k + 1, g->x.size() - 1)];
      return g->atom_at_zero > 0.0 ? 0.0 : g->x.back();
    }
    if (auto* s = std::get_if<Shifted>(&rep_)) return s->base->upper_edge() + s->a;
    return continuous_upper();
  }

  /// Density of the continuous part at x.
  double density(double x) const {
    if (auto* mp = std::get_if<Mp>(&rep_)) {
      if (verbatim_grid_) return verbatim_grid_->density(x);
      if (x <= mp->lo || x >= mp->hi || x <= 0.0) return 0.0;
      return std::sqrt((mp->hi - x) * (x - mp->lo)) / (2 * std::numbers::pi * mp->s2 * mp->c * x);
    }
    if (std::holds_alternative<Point>(rep_)) return 0.0;
    if (auto* g = std::get_if<Grid>(&rep_)) {
      if (x < g->x.front() || x > g->x.back()) return 0.0;
      auto it = std::upper_bound(g->x.begin(), g->x.end(), x);
      std::size_t k = static_cast<std::size_t>(it - g->x.begin());
      if (k >= g->x.size()) return g->density.back();
      const double t = (x - g->x[k - 1]) / (g->x[k] - g->x[k - 1]);
      return (1 - t) * g->density[k - 1] + t * g->density[k];
    }
    const auto& s = std::get<Shifted>(rep_);
    return s.base->density(x - s.a);
  }

  /// Stieltjes transform m(z) = int dmu(x) / (x - z), z off the support.
  cplx stieltjes(cplx z) const {
    if (auto* mp = std::get_if<Mp>(&rep_)) {
      if (verbatim_grid_) return verbatim_grid_->stieltjes(z);
      const double s2 = mp->s2, c = mp->c;
      // The product of principal roots is analytic off [lo, hi] and behaves like z at infinity.
      const cplx root = std::sqrt(z - mp->hi) * std::sqrt(z - mp->lo);
      return (s2 * (1 - c) - z + root) / (2 * c * s2 * z);
    }
    if (auto* p = std::get_if<Point>(&rep_)) return 1.0 / (p->location - z);
    if (auto* g = std::get_if<Grid>(&rep_)) return grid_stieltjes(*g, z);
    const auto& s = std::get<Shifted>(rep_);
    return s.base->stieltjes(z - s.a);
  }

  /// M-transform z m(z) / (1 + z m(z)).
  cplx m_transform(cplx z) const {
    if (auto* p = std::get_if<Point>(&rep_)) {
      if (p->location == 0.0) return cplx(0.0, 0.0);  // z m = -1 identically; limit taken
      return z / p->location;
    }
    const cplx zm = z * stieltjes(z);
    return zm / (1.0 + zm);
  }

  /// mu((-inf, x]).
  double cdf(double x) const {
    if (auto* mp = std::get_if<Mp>(&rep_)) {
      if (verbatim_grid_) return verbatim_grid_->cdf(x);
      double out = x >= 0.0 ? mp->atom : 0.0;
      if (x <= mp->lo) return out;
      if (x >= mp->hi) return 1.0;
      return out + mp_continuous_mass(*mp, x);
    }
    if (auto* p = std::get_if<Point>(&rep_)) return x >= p->location ? 1.0 : 0.0;
    if (auto* g = std::get_if<Grid>(&rep_)) {
      double out = x >= 0.0 ? g->atom_at_zero : 0.0;
      if (x <= g->x.front()) return out;
      if (x >= g->x.back()) return out + g->cum.back();
      auto it = std::upper_bound(g->x.begin(), g->x.end(), x);
      const std::size_t k = static_cast<std::size_t>(it - g->x.begin());
      const double x0 = g->x[k - 1], dx = x - x0;
      const double slope = (g->density[k] - g->density[k - 1]) / (g->x[k] - x0);
      return out + g->cum[k - 1] + g->density[k - 1] * dx + 0.5 * slope * dx * dx;
    }
    const auto& s = std::get<Shifted>(rep_);
    return s.base->cdf(x - s.a);
  }

  double total_mass() const {
    if (auto* g = std::get_if<Grid>(&rep_)) return g->atom_at_zero + g->cum.back();
    if (auto* s = std::get_if<Shifted>(&rep_)) return s->base->total_mass();
    if (verbatim_grid_) return verbatim_grid_->total_mass();
    if (auto* mp = std::get_if<Mp>(&rep_)) return mp->atom + mp_continuous_mass(*mp, mp->hi);
    return 1.0;
  }

  double mean() const {
    if (auto* mp = std::get_if<Mp>(&rep_)) {
      if (verbatim_grid_) return verbatim_grid_->mean();
      return mp->s2;
    }
    if (auto* p = std::get_if<Point>(&rep_)) return p->location;
    if (auto* g = std::get_if<Grid>(&rep_)) {
      // exact for piecewise-linear density
      double m = 0.0;
      for (std::size_t k = 1; k < g->x.size(); ++k) {
        const double a = g->x[k - 1], b = g->x[k], fa = g->density[k - 1], fb = g->density[k];
        m += (b - a) * (fa * (2 * a + b) + fb * (a + 2 * b)) / 6.0;
      }
      return m;
    }
    const auto& s = std::get<Shifted>(rep_);
    return s.base->mean() + s.a;
  }

  /// gamma_mu(j): location with upper-tail mass j/n. j = 0 gives the upper support edge,
  /// j = n the lower one.
  double quantile(std::size_t j, std::size_t n) const {
    if (n == 0 || j > n) throw ParameterError("quantile: index outside [0, n]");
    if (auto* s = std::get_if<Shifted>(&rep_)) return s->base->quantile(j, n) + s->a;
    if (auto* p = std::get_if<Point>(&rep_)) return p->location;
    if (j == 0) return upper_edge();
    if (j == n) return lower_edge();
    const double target = 1.0 - static_cast<double>(j) / static_cast<double>(n);
    if (verbatim_grid_) return verbatim_grid_->quantile(j, n);
    if (auto* mp = std::get_if<Mp>(&rep_)) {
      if (target <= mp->atom) return 0.0;
      return invert_cdf(target, mp->lo, mp->hi);
    }
    const auto& g = std::get<Grid>(rep_);
    if (target <= g.atom_at_zero) return 0.0;
    const double t = target - g.atom_at_zero;
    auto it = std::lower_bound(g.cum.begin(), g.cum.end(), t);
    if (it == g.cum.begin()) return g.x.front();
    if (it == g.cum.end()) return g.x.back();
    const std::size_t k = static_cast<std::size_t>(it - g.cum.begin());
    const double x0 = g.x[k - 1], h = g.x[k] - x0, f0 = g.density[k - 1];
    const double slope = (g.density[k] - f0) / h;
    const double rem = t - g.cum[k - 1];
    double dx;
    if (std::abs(slope) * h < 1e-12 * std::max(f0, 1e-300)) {
      dx = f0 > 0.0 ? rem / f0 : 0.0;
    } else {
      // 0.5 slope dx^2 + f0 dx - rem = 0, stable root
      const double disc = std::max(0.0, f0 * f0 + 2.0 * slope * rem);
      dx = 2.0 * rem / (f0 + std::sqrt(disc));
    }
    return x0 + std::clamp(dx, 0.0, h);
  }

  /// Quantiles gamma(1..n), nonincreasing.
  std::vector<double> quantiles(std::size_t n) const {
    std::vector<double> out(n);
    for (std::size_t j = 1; j <= n; ++j) out[j - 1] = quantile(j, n);
    return out;
  }

private:
  std::variant<Mp, Point, Grid, Shifted> rep_;
  std::shared_ptr<const Measure> verbatim_grid_;

  // Continuous mass on [lo, x] for the standard MP density. With x = mid - r cos(t) the square-root
  // factor becomes r sin(t), leaving a smooth integrand on [0, t_x].
  static double mp_continuous_mass(const Mp& mp, double x) {
    if (x <= mp.lo) return 0.0;
    x = std::min(x, mp.hi);
    const double mid = 0.5 * (mp.hi + mp.lo), r = 0.5 * (mp.hi - mp.lo);
    const double tx = std::acos(std::clamp((mid - x) / r, -1.0, 1.0));
    const double k = r * r / (2 * std::numbers::pi * mp.s2 * mp.c);
    auto f = [&](double t) {
      const double xt = mid - r * std::cos(t);
      const double s = std::sin(t);
      return xt > 0.0 ? k * s * s / xt : 0.0;
    };
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, tx, 15, 1e-13);
  }

  double invert_cdf(double target, double lo, double hi) const {
    auto g = [&](double x) { return cdf(x) - target; };
    boost::math::tools::eps_tolerance<double> tol(48);
    std::uintmax_t it = 200;
    auto [a, b] = boost::math::tools::toms748_solve(g, lo, hi, g(lo), g(hi), tol, it);
    return 0.5 * (a + b);
  }

  static cplx grid_stieltjes(const Grid& g, cplx z) {
    cplx out = g.atom_at_zero > 0.0 ? g.atom_at_zero / (0.0 - z) : cplx(0.0);
    static constexpr double gl_x[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                                       0.8611363115940526};
    static constexpr double gl_w[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                                       0.3478548451374538};
    for (std::size_t k = 1; k < g.x.size(); ++k) {
      const double x0 = g.x[k - 1], x1 = g.x[k], f0 = g.density[k - 1], f1 = g.density[k];
      if (f0 == 0.0 && f1 == 0.0) continue;
      const double h = x1 - x0, mid = 0.5 * (x0 + x1);
      if (std::abs(z - mid) > 8.0 * h) {
        for (int q = 0; q < 4; ++q) {
          const double t = 0.5 * (gl_x[q] + 1.0);
          const double x = x0 + t * h;
          out += 0.5 * h * gl_w[q] * ((1 - t) * f0 + t * f1) / (x - z);
        }
      } else {
        const double slope = (f1 - f0) / h;
        const cplx gz = f0 + slope * (z - x0);
        out += gz * detail::log_ratio(x0, x1, z) + slope * h;
      }
    }
    return out;
  }
};

}  // namespace fusion_spectra
