#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <set>
#include <string>

#include <json.hpp>

#include "errors.hpp"
#include "harness.hpp"

namespace fusion_spectra {

using json = nlohmann::ordered_json;

namespace detail {

inline void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [k, v] : obj.items())
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

template <class T>
T get_or(const json& obj, const std::string& key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

inline NoiseKind noise_from_string(const std::string& s) {
  if (s == "gaussian") return NoiseKind::gaussian;
  if (s == "rademacher" || s == "rademacher-subgaussian") return NoiseKind::rademacher;
  throw ConfigError("model.noise must be gaussian or rademacher, got '" + s + "'");
}

inline SignalKind signal_from_string(const std::string& s) {
  if (s == "gaussian-spike" || s == "gaussian_spike") return SignalKind::gaussian_spike;
  if (s == "circle-manifold" || s == "circle_manifold") return SignalKind::circle_manifold;
  throw ConfigError("model.signal must be gaussian-spike or circle-manifold, got '" + s + "'");
}

inline std::string signal_name(SignalKind k) {
  return k == SignalKind::gaussian_spike ? "gaussian-spike" : "circle-manifold";
}

}  // namespace detail

inline BandwidthKind bandwidth_kind_from_string(const std::string& s) {
  if (s == "classic") return BandwidthKind::classic;
  if (s == "percentile") return BandwidthKind::percentile;
  throw ConfigError("bandwidth kind must be classic or percentile, got '" + s + "'");
}

inline MatrixSelection matrix_selection_from_string(const std::string& s) {
  if (s == "ncca") return MatrixSelection::ncca;
  if (s == "ad") return MatrixSelection::ad;
  if (s == "both") return MatrixSelection::both;
  throw ConfigError("matrix must be ncca, ad or both, got '" + s + "'");
}

inline MpConvention mp_convention_from_string(const std::string& s) {
  if (s == "standard") return MpConvention::standard;
  if (s == "verbatim") return MpConvention::verbatim;
  throw ConfigError("mp_convention must be standard or verbatim, got '" + s + "'");
}

inline json to_json(const ModelConfig& m) {
  return json{{"n", m.n},
              {"p1", m.p1},
              {"p2", m.p2},
              {"d1", m.d1},
              {"d2", m.d2},
              {"zeta1", m.zeta1},
              {"zeta2", m.zeta2},
              {"upsilon", m.upsilon},
              {"gamma", m.gamma},
              {"noise", to_string(m.noise)},
              {"signal", detail::signal_name(m.signal)},
              {"phi_warp", m.phi_warp}};
}

inline json to_json(const ExperimentConfig& c) {
  json bw{{"kind", to_string(c.bandwidth.kind)}, {"omega1", c.bandwidth.omega1}, {"omega2", c.bandwidth.omega2}};
  json rg{{"C", c.regime.params.C},
          {"s1", c.regime.params.s1},
          {"s2", c.regime.params.s2},
          {"delta_slack", c.regime.params.delta_slack},
          {"mp_convention", to_string(c.regime.mp_convention)},
          {"matrix", to_string(c.regime.matrix)},
          {"singular_values", c.regime.singular_values}};
  if (c.regime.expect) rg["expect"] = to_string(*c.regime.expect);
  return json{{"model", to_json(c.model)}, {"bandwidth", bw}, {"regime", rg}, {"trials", c.trials}, {"seed", c.seed}};
}

inline ModelConfig model_from_json(const json& j) {
  detail::reject_unknown(j, {"n", "p1", "p2", "d1", "d2", "zeta1", "zeta2", "upsilon", "gamma", "noise", "signal",
                             "phi_warp", "seed"},
                         "model");
  ModelConfig m;
  const std::string w = "model";
  m.n = detail::get_or<std::size_t>(j, "n", m.n, w);
  m.p1 = detail::get_or<std::size_t>(j, "p1", m.p1, w);
  m.p2 = detail::get_or<std::size_t>(j, "p2", m.p2, w);
  m.upsilon = detail::get_or<double>(j, "upsilon", m.upsilon, w);
  m.gamma = detail::get_or<double>(j, "gamma", m.gamma, w);
  m.phi_warp = detail::get_or<double>(j, "phi_warp", m.phi_warp, w);
  m.seed = detail::get_or<std::uint64_t>(j, "seed", m.seed, w);
  if (j.contains("noise")) m.noise = detail::noise_from_string(detail::get_or<std::string>(j, "noise", "", w));
  if (j.contains("signal")) m.signal = detail::signal_from_string(detail::get_or<std::string>(j, "signal", "", w));
  m.zeta1 = detail::get_or<std::vector<double>>(j, "zeta1", m.zeta1, w);
  m.zeta2 = detail::get_or<std::vector<double>>(j, "zeta2", m.zeta2, w);
  // d defaults to the zeta list length so a config only needs to list the exponents.
  m.d1 = detail::get_or<std::size_t>(j, "d1", m.zeta1.size(), w);
  m.d2 = detail::get_or<std::size_t>(j, "d2", m.zeta2.size(), w);
  return m;
}

inline ExperimentConfig experiment_from_json(const json& j) {
  detail::reject_unknown(j, {"model", "bandwidth", "regime", "trials", "seed"}, "config");
  ExperimentConfig c;
  if (j.contains("model")) c.model = model_from_json(j.at("model"));
  if (j.contains("bandwidth")) {
    const json& b = j.at("bandwidth");
    detail::reject_unknown(b, {"kind", "omega", "omega1", "omega2"}, "bandwidth");
    if (b.contains("kind")) c.bandwidth.kind = bandwidth_kind_from_string(b.at("kind").get<std::string>());
    const double omega = detail::get_or<double>(b, "omega", 0.5, "bandwidth");
    c.bandwidth.omega1 = detail::get_or<double>(b, "omega1", omega, "bandwidth");
    c.bandwidth.omega2 = detail::get_or<double>(b, "omega2", omega, "bandwidth");
  }
  if (j.contains("regime")) {
    const json& r = j.at("regime");
    const std::string w = "regime";
    detail::reject_unknown(r, {"C", "s1", "s2", "delta_slack", "mp_convention", "matrix", "expect", "singular_values"},
                           w);
    c.regime.params.C = detail::get_or<double>(r, "C", c.regime.params.C, w);
    c.regime.params.s1 = detail::get_or<std::size_t>(r, "s1", c.regime.params.s1, w);
    c.regime.params.s2 = detail::get_or<std::size_t>(r, "s2", c.regime.params.s2, w);
    c.regime.params.delta_slack = detail::get_or<double>(r, "delta_slack", c.regime.params.delta_slack, w);
    if (r.contains("mp_convention"))
      c.regime.mp_convention = mp_convention_from_string(r.at("mp_convention").get<std::string>());
    if (r.contains("matrix")) c.regime.matrix = matrix_selection_from_string(r.at("matrix").get<std::string>());
    if (r.contains("expect")) c.regime.expect = regime_from_string(r.at("expect").get<std::string>());
    c.regime.singular_values = detail::get_or<bool>(r, "singular_values", c.regime.singular_values, w);
  }
  c.trials = detail::get_or<std::size_t>(j, "trials", c.trials, "config");
  c.seed = detail::get_or<std::uint64_t>(j, "seed", c.seed, "config");
  return c;
}

inline ExperimentConfig load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return experiment_from_json(j);
}

namespace detail {

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json to_json(const std::optional<double>& v) { return v ? finite_or_null(*v) : json(nullptr); }

}  // namespace detail

inline json to_json(const RegimeThresholds& t) {
  return json{{"regime", to_string(t.regime)},
              {"zeta1", t.zeta1},
              {"zeta2", t.zeta2},
              {"swapped", t.swapped},
              {"T", t.T},
              {"S", t.S},
              {"R", detail::to_json(t.R)},
              {"e1", detail::to_json(t.e1)},
              {"e2", detail::to_json(t.e2)},
              {"d1_frak", t.d1_frak ? json(*t.d1_frak) : json(nullptr)},
              {"d2_frak", t.d2_frak ? json(*t.d2_frak) : json(nullptr)},
              {"rate", detail::to_json(t.rate)},
              {"delta", detail::to_json(t.delta)},
              {"extreme", t.extreme}};
}

inline json to_json(const RegimeReport& r) {
  json trials = json::array();
  for (std::size_t t = 0; t < r.trials.size(); ++t) {
    const auto& tr = r.trials[t];
    json norms = json::object();
    for (const auto& [k, v] : tr.norm_errors) norms[k] = detail::finite_or_null(v);
    trials.push_back(json{{"trial", t},
                          {"seed", tr.seed},
                          {"h1", tr.h1},
                          {"h2", tr.h2},
                          {"median_abs", detail::finite_or_null(tr.median_abs)},
                          {"median_rel", detail::finite_or_null(tr.median_rel)},
                          {"max_rel", detail::finite_or_null(tr.max_rel)},
                          {"norm_errors", norms},
                          {"tail_max", detail::finite_or_null(tr.tail_max)},
                          {"eigen_imag_max", tr.empirical.eigen_imag_max},
                          {"imag_warning", tr.empirical.imag_warning},
                          {"eigen_real", tr.empirical.eigen_real},
                          {"singular", tr.empirical.singular},
                          {"predicted", tr.predicted}});
  }
  json norms = json::object();
  for (const auto& [k, v] : r.norm_errors) norms[k] = detail::finite_or_null(v);
  return json{{"config", to_json(r.config)},
              {"matrix", to_string(r.matrix)},
              {"thresholds", to_json(r.thresholds)},
              {"scale", r.scale},
              {"prediction", r.prediction},
              {"compared_indices", json{{"from", r.index_lo + 1}, {"to", r.index_hi},
                                        {"count", r.index_hi - r.index_lo}}},
              {"summary", json{{"headline_metric", r.headline_metric},
                               {"headline", detail::finite_or_null(r.headline)},
                               {"median_abs", detail::finite_or_null(r.median_abs)},
                               {"median_rel", detail::finite_or_null(r.median_rel)},
                               {"max_rel", detail::finite_or_null(r.max_rel)},
                               {"tail_max", detail::finite_or_null(r.tail_max)},
                               {"norm_errors", norms}}},
              {"interpretation", json{{"taylor_branch_variable", "zeta1"},
                                      {"taylor_center", "tau1"},
                                      {"theorem_index", "i = j"},
                                      {"cross_branch_condition", "zeta1 >= 2"},
                                      {"mp_convention", to_string(r.config.regime.mp_convention)}}},
              {"trials", trials}};
}

}  // namespace fusion_spectra
