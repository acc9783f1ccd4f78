#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "fusion_spectra/config_json.hpp"
#include "fusion_spectra/csv_output.hpp"
#include "fusion_spectra/raw_io.hpp"

using namespace fusion_spectra;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("fusion_spectra_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST(ConfigJson, ExperimentRoundTrip) {
  ExperimentConfig c;
  c.model.n = 123;
  c.model.p1 = 200;
  c.model.p2 = 321;
  c.model.zeta1 = {0.4, 0.1};
  c.model.d1 = 2;
  c.model.zeta2 = {1.5};
  c.model.noise = NoiseKind::rademacher;
  c.model.upsilon = 0.75;
  c.bandwidth.kind = BandwidthKind::percentile;
  c.bandwidth.omega1 = 0.3;
  c.bandwidth.omega2 = 0.7;
  c.regime.params.C = 3.0;
  c.regime.mp_convention = MpConvention::verbatim;
  c.regime.matrix = MatrixSelection::both;
  c.regime.expect = Regime::Mixed;
  c.trials = 7;
  c.seed = 99;
  const auto back = experiment_from_json(to_json(c));
  EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
  EXPECT_EQ(back.model.zeta1, c.model.zeta1);
  EXPECT_EQ(back.regime.expect, Regime::Mixed);
}

TEST(ConfigJson, DefaultsAndDerivedSpikeCount) {
  const auto c = experiment_from_json(json::parse(R"({"model": {"n": 50, "p1": 100, "p2": 100, "zeta1": [0.1, 0.2, 0.3]}})"));
  EXPECT_EQ(c.model.d1, 3u);
  EXPECT_EQ(c.model.d2, 1u);
  EXPECT_EQ(c.bandwidth.kind, BandwidthKind::classic);
  EXPECT_EQ(c.trials, 1u);
}

TEST(ConfigJson, UnknownKeysAndBadValuesRejected) {
  EXPECT_THROW(experiment_from_json(json::parse(R"({"modle": {}})")), ConfigError);
  EXPECT_THROW(experiment_from_json(json::parse(R"({"model": {"zeta": [1]}})")), ConfigError);
  EXPECT_THROW(experiment_from_json(json::parse(R"({"model": {"n": "many"}})")), ConfigError);
  EXPECT_THROW(experiment_from_json(json::parse(R"({"bandwidth": {"kind": "median"}})")), ConfigError);
  EXPECT_THROW(experiment_from_json(json::parse(R"({"regime": {"expect": "BothMedium"}})")), ConfigError);
  EXPECT_THROW(load_experiment("/nonexistent/config.json"), ConfigError);
}

TEST(ConfigJson, MalformedFileIsConfigError) {
  const auto dir = scratch_dir("badjson");
  std::ofstream(dir / "c.json") << "{ not json";
  EXPECT_THROW(load_experiment((dir / "c.json").string()), ConfigError);
}

TEST(RawIo, BitExactRoundTrip) {
  const auto dir = scratch_dir("raw");
  Eigen::MatrixXd M(3, 2);
  M << 1.0, -0.0, 1e-300, std::nextafter(1.0, 2.0), -7.25, 3.0e200;
  write_raw_matrix(dir / "m.bin", M);
  EXPECT_EQ(fs::file_size(dir / "m.bin"), 48u);
  const auto R = read_raw_matrix(dir / "m.bin", 3, 2);
  EXPECT_EQ(std::memcmp(R.data(), M.data(), sizeof(double) * 6), 0);
  // column-major little endian: second stored value is M(1,0)
  std::ifstream in(dir / "m.bin", std::ios::binary);
  unsigned char bytes[16];
  in.read(reinterpret_cast<char*>(bytes), 16);
  EXPECT_EQ(bytes[15], 0x01);  // 1e-300 has high byte 0x01
  EXPECT_THROW(read_raw_matrix(dir / "m.bin", 4, 2), InputError);
}

TEST(RawIo, DumpAndLoadPair) {
  const auto dir = scratch_dir("pair");
  ModelConfig c;
  c.n = 12;
  c.p1 = 20;
  c.p2 = 24;
  c.zeta1 = {0.5};
  c.seed = 4;
  const auto pair = generate(c);
  const auto files = dump_pair(dir, pair, c);
  EXPECT_EQ(files.size(), 7u);
  const auto loaded = load_pair(dir);
  EXPECT_TRUE((loaded.pair.X.array() == pair.X.array()).all());
  EXPECT_TRUE((loaded.pair.Wn.array() == pair.Wn.array()).all());
  EXPECT_EQ(loaded.config.seed, 4u);
  EXPECT_EQ(loaded.config.p2, 24u);
  EXPECT_THROW(load_pair(dir / "missing"), InputError);
}

TEST(Csv, NumberFormatting) {
  EXPECT_EQ(csv_number(0.1), "0.1");
  EXPECT_EQ(csv_number(std::nan("")), "");
  EXPECT_EQ(std::strtod(csv_number(1.0 / 3.0).c_str(), nullptr), 1.0 / 3.0);
  EXPECT_EQ(std::strtod(csv_number(2.0 / 3.0 * 1e-7).c_str(), nullptr), 2.0 / 3.0 * 1e-7);
}

TEST(Csv, SpectraAndRatesSchemas) {
  const auto dir = scratch_dir("csv");
  ExperimentConfig cfg;
  cfg.model.n = 40;
  cfg.model.p1 = 80;
  cfg.model.p2 = 120;
  cfg.trials = 2;
  cfg.regime.singular_values = false;
  const auto rep = run_experiment(cfg);
  write_spectra_csv(dir / "spectra.csv", rep);
  const auto lines = read_lines(dir / "spectra.csv");
  EXPECT_EQ(lines.front(), "trial,index,empirical,predicted,abs_err,rel_err");
  EXPECT_EQ(lines.size(), 1 + rep.trials[0].compared.size() + rep.trials[1].compared.size());
  std::stringstream row(lines[1]);
  std::string cell;
  std::vector<std::string> cells;
  while (std::getline(row, cell, ',')) cells.push_back(cell);
  ASSERT_EQ(cells.size(), 6u);
  EXPECT_EQ(cells[0], "0");
  EXPECT_EQ(std::stoul(cells[1]), rep.index_lo + 1);

  cfg.trials = 1;
  const auto s = sweep(cfg, {40, 60});
  write_rates_csv(dir / "rates.csv", {{FusedMatrix::ncca, s}});
  const auto r = read_lines(dir / "rates.csv");
  EXPECT_EQ(r.front(), "matrix,metric,n,value,slope,predicted_rate");
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[1].rfind("ncca,median_rel,40,", 0), 0u);
}

TEST(Csv, QuantilesAndDensity) {
  const auto dir = scratch_dir("q");
  write_quantiles_csv(dir / "q.csv", {3.0, 2.0, 1.0});
  const auto q = read_lines(dir / "q.csv");
  ASSERT_EQ(q.size(), 4u);
  EXPECT_EQ(q[1], "1,3");
  write_density_csv(dir / "d.csv", Measure::uniform_grid(0.0, 1.0, {1.0, 1.0, 1.0}));
  EXPECT_EQ(read_lines(dir / "d.csv")[2], "0.5,1");
  EXPECT_THROW(write_density_csv(dir / "e.csv", Measure::point(1.0)), InputError);
}
