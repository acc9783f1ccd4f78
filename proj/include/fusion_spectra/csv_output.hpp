#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "harness.hpp"
#include "measure.hpp"

namespace fusion_spectra {

/// Shortest round-trip decimal form; empty for NaN so CSV readers see a missing value.
inline std::string csv_number(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

namespace detail {

inline std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace detail

/// trial,index,empirical,predicted,abs_err,rel_err over the compared indices of every trial.
inline void write_spectra_csv(const std::filesystem::path& path, const RegimeReport& rep) {
  auto out = detail::open_csv(path);
  out << "trial,index,empirical,predicted,abs_err,rel_err\n";
  for (std::size_t t = 0; t < rep.trials.size(); ++t) {
    const auto& tr = rep.trials[t];
    for (std::size_t k = 0; k < tr.compared.size(); ++k) {
      const std::size_t i = tr.compared[k];
      out << t << ',' << i << ',' << csv_number(tr.empirical.eigen_real[i - 1]) << ','
          << csv_number(tr.predicted[i - 1]) << ',' << csv_number(tr.abs_err[k]) << ',' << csv_number(tr.rel_err[k])
          << '\n';
    }
  }
}

/// matrix,metric,n,value,slope,predicted_rate; one row per n, slope repeated on each row.
inline void write_rates_csv(const std::filesystem::path& path, const std::vector<std::pair<FusedMatrix, SweepResult>>& sweeps) {
  auto out = detail::open_csv(path);
  out << "matrix,metric,n,value,slope,predicted_rate\n";
  for (const auto& [m, s] : sweeps)
    for (const auto& pt : s.points)
      out << to_string(m) << ',' << s.metric << ',' << pt.n << ',' << csv_number(pt.report.headline) << ','
          << csv_number(s.slope) << ',' << csv_number(s.predicted_rate.value_or(std::nan(""))) << '\n';
}

inline void write_quantiles_csv(const std::filesystem::path& path, const std::vector<double>& q) {
  auto out = detail::open_csv(path);
  out << "j,gamma\n";
  for (std::size_t j = 0; j < q.size(); ++j) out << j + 1 << ',' << csv_number(q[j]) << '\n';
}

inline void write_density_csv(const std::filesystem::path& path, const Measure& grid) {
  const auto* g = grid.as_grid();
  if (!g) throw InputError("write_density_csv: measure is not a grid");
  auto out = detail::open_csv(path);
  out << "x,density\n";
  for (std::size_t k = 0; k < g->x.size(); ++k) out << csv_number(g->x[k]) << ',' << csv_number(g->density[k]) << '\n';
}

}  // namespace fusion_spectra
