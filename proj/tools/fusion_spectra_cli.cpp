// fusion-spectra: generate point clouds, predict limiting spectra, simulate and compare regimes.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <openssl/evp.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "fusion_spectra.hpp"

namespace fs = std::filesystem;
using namespace fusion_spectra;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
  std::string out = ".";
  std::optional<std::string> matrix;
  std::optional<std::string> bandwidth;
  std::optional<double> omega, omega1, omega2;
  std::optional<std::size_t> trials;
};

void add_common(CLI::App* sub, CommonFlags& f, bool experiment_flags) {
  sub->add_option("--config", f.config, "JSON experiment config")->check(CLI::ExistingFile);
  sub->add_option("--seed", f.seed, "root RNG seed (overrides config)");
  sub->add_option("--out", f.out, "output directory");
  if (!experiment_flags) return;
  sub->add_option("--jobs", f.jobs, "worker threads for independent trials")->check(CLI::PositiveNumber);
  sub->add_option("--matrix", f.matrix, "ncca|ad|both")->check(CLI::IsMember({"ncca", "ad", "both"}));
  sub->add_option("--bandwidth", f.bandwidth, "classic|percentile")->check(CLI::IsMember({"classic", "percentile"}));
  sub->add_option("--omega", f.omega, "percentile for both sensors");
  sub->add_option("--omega1", f.omega1, "percentile for sensor 1");
  sub->add_option("--omega2", f.omega2, "percentile for sensor 2");
  sub->add_option("--trials", f.trials, "number of independent trials")->check(CLI::PositiveNumber);
}

ExperimentConfig resolve_config(const CommonFlags& f) {
  ExperimentConfig c = f.config.empty() ? ExperimentConfig{} : load_experiment(f.config);
  if (f.seed) c.seed = *f.seed;
  if (f.matrix) c.regime.matrix = matrix_selection_from_string(*f.matrix);
  if (f.bandwidth) c.bandwidth.kind = bandwidth_kind_from_string(*f.bandwidth);
  if (f.omega) c.bandwidth.omega1 = c.bandwidth.omega2 = *f.omega;
  if (f.omega1) c.bandwidth.omega1 = *f.omega1;
  if (f.omega2) c.bandwidth.omega2 = *f.omega2;
  if (f.trials) c.trials = *f.trials;
  c.validate();
  return c;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot hash '" + path.string() + "'");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", md[i]);
    hex += byte;
  }
  return hex;
}

class Manifest {
public:
  Manifest(std::string command, fs::path out) : command_(std::move(command)), out_(std::move(out)) {}

  template <class F>
  auto stage(const std::string& name, F&& body) {
    const auto t0 = std::chrono::steady_clock::now();
    auto finish = [&] {
      stages_[name] += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    if constexpr (std::is_void_v<decltype(body())>) {
      body();
      finish();
    } else {
      auto r = body();
      finish();
      return r;
    }
  }

  void add_output(const fs::path& p) { outputs_.push_back(p); }
  void set_config(json c) { config_ = std::move(c); }
  void set_seeds(std::uint64_t root, std::vector<std::uint64_t> trial) {
    root_seed_ = root;
    trial_seeds_ = std::move(trial);
  }

  void write() const {
    json files = json::array();
    for (const auto& p : outputs_)
      files.push_back(json{{"file", fs::relative(p, out_).generic_string()},
                           {"bytes", fs::file_size(p)},
                           {"sha256", sha256_file(p)}});
    json stages = json::object();
    for (const auto& [k, v] : stages_) stages[k] = v;
    json m{{"tool", "fusion-spectra"},
           {"version", FUSION_SPECTRA_VERSION},
           {"command", command_},
           {"config", config_},
           {"seeds", json{{"root", root_seed_}, {"trials", trial_seeds_}}},
           {"wall_clock_seconds", stages},
           {"outputs", files}};
    std::ofstream(out_ / "manifest.json") << m.dump(2) << '\n';
  }

private:
  std::string command_;
  fs::path out_;
  json config_ = json::object();
  std::uint64_t root_seed_ = 0;
  std::vector<std::uint64_t> trial_seeds_;
  std::map<std::string, double> stages_;
  std::vector<fs::path> outputs_;
};

void write_json(const fs::path& path, const json& j, Manifest& manifest) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
  out.close();
  manifest.add_output(path);
}

std::vector<std::uint64_t> trial_seeds(const ExperimentConfig& c) {
  std::vector<std::uint64_t> s;
  for (std::size_t t = 0; t < c.trials; ++t) s.push_back(derive_trial_seed(c.seed, t));
  return s;
}

void log_report(const RegimeReport& r) {
  spdlog::info("{} {}: {} = {:.6g}", to_string(r.matrix), to_string(r.thresholds.regime), r.headline_metric,
               r.headline);
  for (const auto& tr : r.trials)
    if (tr.empirical.imag_warning)
      spdlog::warn("trial seed {}: eigenvalue imaginary parts up to {:.3g}", tr.seed, tr.empirical.eigen_imag_max);
}

fs::path matrix_dir(const fs::path& out, const ExperimentConfig& c, FusedMatrix m) {
  return c.regime.matrix == MatrixSelection::both ? out / to_string(m) : out;
}

int cmd_generate(const CommonFlags& f) {
  const ExperimentConfig c = resolve_config(f);
  const fs::path out = f.out;
  Manifest manifest("generate", out);
  ModelConfig model = c.model;
  model.seed = derive_trial_seed(c.seed, 0);
  manifest.set_config(to_json(c));
  manifest.set_seeds(c.seed, {model.seed});
  const PointCloudPair pair = manifest.stage("generate", [&] { return generate(model); });
  const auto files = manifest.stage("write", [&] { return dump_pair(out, pair, model); });
  for (const auto& p : files) manifest.add_output(p);
  manifest.write();
  spdlog::info("wrote {} files to {}", files.size(), out.string());
  return kExitOk;
}

struct PredictFlags {
  std::optional<double> c1, c2, upsilon;
  std::optional<std::size_t> n;
  std::string mp_convention = "standard";
};

int cmd_predict(const CommonFlags& f, const PredictFlags& pf) {
  ExperimentConfig c = f.config.empty() ? ExperimentConfig{} : load_experiment(f.config);
  double c1 = c.model.c1(), c2 = c.model.c2(), ups = c.model.upsilon;
  std::size_t n = c.model.n;
  if (pf.c1) c1 = *pf.c1;
  if (pf.c2) c2 = *pf.c2;
  if (pf.upsilon) ups = *pf.upsilon;
  if (pf.n) n = *pf.n;
  if (!(c1 > 0.0) || !(c2 > 0.0)) throw ConfigError("--c1 and --c2 must be positive");
  if (!(ups > 0.0)) throw ConfigError("--upsilon must be positive");
  if (n < 1) throw ConfigError("--n must be positive");
  const MpConvention conv = mp_convention_from_string(pf.mp_convention);

  const fs::path out = f.out;
  fs::create_directories(out);
  Manifest manifest("predict", out);
  manifest.set_config(json{{"c1", c1}, {"c2", c2}, {"upsilon", ups}, {"n", n}, {"mp_convention", pf.mp_convention}});
  // Pure-noise limit with h = p: tau = 2 in both sensors.
  const double shift = isotropic_shift(ups, 2.0), eta = mp_scale(ups);
  const Measure nu1 = Measure::mp(c1, eta, conv).shifted(shift);
  const Measure nu2 = Measure::mp(c2, eta, conv).shifted(shift);
  const ConvolutionResult res =
      manifest.stage("free_convolution", [&] { return free_multiplicative_convolution(nu1, nu2, n); });
  spdlog::info("subordination: {} of {} grid points rejected, max residual {:.3g}", res.diagnostics.failed,
               res.diagnostics.points, res.diagnostics.max_residual);
  manifest.stage("write", [&] {
    write_quantiles_csv(out / "quantiles.csv", res.quantiles);
    write_density_csv(out / "density.csv", res.density_grid);
  });
  manifest.add_output(out / "quantiles.csv");
  manifest.add_output(out / "density.csv");
  manifest.write();
  return kExitOk;
}

int cmd_simulate(const CommonFlags& f, const std::string& command) {
  const ExperimentConfig c = resolve_config(f);
  const fs::path out = f.out;
  fs::create_directories(out);
  Manifest manifest(command, out);
  manifest.set_config(to_json(c));
  manifest.set_seeds(c.seed, trial_seeds(c));
  json summary = json::array();
  for (FusedMatrix m : matrices(c.regime.matrix)) {
    const RegimeReport rep = manifest.stage("run_" + to_string(m), [&] { return run_experiment(c, m, f.jobs); });
    log_report(rep);
    const fs::path dir = matrix_dir(out, c, m);
    fs::create_directories(dir);
    manifest.stage("write", [&] {
      write_json(dir / "report.json", to_json(rep), manifest);
      write_spectra_csv(dir / "spectra.csv", rep);
    });
    manifest.add_output(dir / "spectra.csv");
    summary.push_back(json{{"matrix", to_string(m)},
                           {"regime", to_string(rep.thresholds.regime)},
                           {"metric", rep.headline_metric},
                           {"value", rep.headline},
                           {"predicted_rate", rep.thresholds.rate ? json(*rep.thresholds.rate) : json(nullptr)}});
  }
  if (command == "compare") {
    write_json(out / "comparison.json", summary, manifest);
    for (const auto& row : summary)
      std::cout << row["matrix"].get<std::string>() << '\t' << row["regime"].get<std::string>() << '\t'
                << row["metric"].get<std::string>() << '\t' << csv_number(row["value"].get<double>()) << '\n';
  }
  manifest.write();
  return kExitOk;
}

std::vector<std::size_t> parse_ns(const std::string& list) {
  std::vector<std::size_t> ns;
  std::stringstream ss(list);
  for (std::string tok; std::getline(ss, tok, ',');) {
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(tok, &pos);
      if (pos != tok.size() || v < 2) throw std::invalid_argument(tok);
      ns.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ConfigError("--ns expects a comma-separated list of integers >= 2, got '" + list + "'");
    }
  }
  if (ns.empty()) throw ConfigError("--ns is empty");
  return ns;
}

int cmd_sweep(const CommonFlags& f, const std::string& ns_list) {
  const ExperimentConfig c = resolve_config(f);
  const auto ns = parse_ns(ns_list);
  const fs::path out = f.out;
  fs::create_directories(out);
  Manifest manifest("sweep", out);
  manifest.set_config(to_json(c));
  manifest.set_seeds(c.seed, trial_seeds(c));
  std::vector<std::pair<FusedMatrix, SweepResult>> results;
  for (FusedMatrix m : matrices(c.regime.matrix)) {
    SweepResult s = manifest.stage("sweep_" + to_string(m), [&] { return sweep(c, ns, m, f.jobs); });
    const fs::path dir = matrix_dir(out, c, m);
    fs::create_directories(dir);
    for (const auto& pt : s.points) {
      log_report(pt.report);
      const std::string tag = "n" + std::to_string(pt.n);
      write_json(dir / ("report_" + tag + ".json"), to_json(pt.report), manifest);
      write_spectra_csv(dir / ("spectra_" + tag + ".csv"), pt.report);
      manifest.add_output(dir / ("spectra_" + tag + ".csv"));
    }
    spdlog::info("{}: fitted slope of {} = {:.4f}", to_string(m), s.metric, s.slope);
    results.emplace_back(m, std::move(s));
  }
  write_rates_csv(out / "rates.csv", results);
  manifest.add_output(out / "rates.csv");
  manifest.write();
  return kExitOk;
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("fusion-spectra");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("FUSION_SPECTRA_LOG")) {
    const std::string lvl = env;
    if (lvl == "error") spdlog::set_level(spdlog::level::err);
    else if (lvl == "warn") spdlog::set_level(spdlog::level::warn);
    else if (lvl == "info") spdlog::set_level(spdlog::level::info);
    else if (lvl == "debug") spdlog::set_level(spdlog::level::debug);
    else spdlog::warn("ignoring FUSION_SPECTRA_LOG={} (expected error|warn|info|debug)", lvl);
  }
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Kernel sensor-fusion spectra: simulation and random-matrix predictions"};
  app.require_subcommand(1);
  app.set_version_flag("--version", FUSION_SPECTRA_VERSION);

  CommonFlags gen_f, pred_f, sim_f, cmp_f, swp_f;
  PredictFlags pf;
  std::string ns_list;

  auto* gen = app.add_subcommand("generate", "draw one point-cloud pair and dump it as raw matrices");
  add_common(gen, gen_f, false);
  auto* pred = app.add_subcommand("predict", "quantiles and density of the limiting low-SNR spectrum");
  add_common(pred, pred_f, false);
  pred->add_option("--c1", pf.c1, "aspect ratio n/p1");
  pred->add_option("--c2", pf.c2, "aspect ratio n/p2");
  pred->add_option("--upsilon", pf.upsilon, "kernel constant");
  pred->add_option("--n", pf.n, "number of quantiles");
  pred->add_option("--mp-convention", pf.mp_convention, "standard|verbatim")
      ->check(CLI::IsMember({"standard", "verbatim"}));
  auto* sim = app.add_subcommand("simulate", "run the regime pipeline and write report.json + spectra.csv");
  add_common(sim, sim_f, true);
  auto* cmp = app.add_subcommand("compare", "simulate and print headline errors per fused matrix");
  add_common(cmp, cmp_f, true);
  auto* swp = app.add_subcommand("sweep", "repeat the pipeline over several n and fit log-log rates");
  add_common(swp, swp_f, true);
  swp->add_option("--ns", ns_list, "comma-separated sample sizes")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return kExitConfig;
  }

  try {
    if (*gen) return cmd_generate(gen_f);
    if (*pred) return cmd_predict(pred_f, pf);
    if (*sim) return cmd_simulate(sim_f, "simulate");
    if (*cmp) {
      if (!cmp_f.matrix) cmp_f.matrix = "both";
      return cmd_simulate(cmp_f, "compare");
    }
    if (*swp) return cmd_sweep(swp_f, ns_list);
  } catch (const ConfigError& e) {
    spdlog::error("configuration error: {}", e.what());
    return kExitConfig;
  } catch (const RegimeError& e) {
    spdlog::error("regime error: {}", e.what());
    return kExitConfig;
  } catch (const InputError& e) {
    spdlog::error("input error: {}", e.what());
    return kExitConfig;
  } catch (const ParameterError& e) {
    spdlog::error("parameter error: {}", e.what());
    return kExitConfig;
  } catch (const NumericalError& e) {
    spdlog::error("numerical error: {}", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return kExitConfig;
}
