#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "config_json.hpp"
#include "errors.hpp"
#include "synthetic_model.hpp"

namespace fusion_spectra {

// Matrices on disk: raw little-endian float64, column-major, no header. Shapes live in manifest.json.

namespace detail {

inline std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  else return __builtin_bswap64(v);
}

}  // namespace detail

inline void write_raw_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& M) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  std::vector<std::uint64_t> buf(static_cast<std::size_t>(M.size()));
  for (Eigen::Index k = 0; k < M.size(); ++k)
    buf[static_cast<std::size_t>(k)] = detail::to_little_endian(std::bit_cast<std::uint64_t>(M.data()[k]));
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 8));
  if (!out) throw InputError("short write to '" + path.string() + "'");
}

inline Eigen::MatrixXd read_raw_matrix(const std::filesystem::path& path, Eigen::Index rows, Eigen::Index cols) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw InputError("cannot read '" + path.string() + "'");
  const auto bytes = static_cast<std::uint64_t>(in.tellg());
  if (bytes != static_cast<std::uint64_t>(rows * cols) * 8)
    throw InputError("'" + path.string() + "' has " + std::to_string(bytes) + " bytes, expected " +
                     std::to_string(rows * cols * 8));
  in.seekg(0);
  std::vector<std::uint64_t> buf(static_cast<std::size_t>(rows * cols));
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
  Eigen::MatrixXd M(rows, cols);
  for (Eigen::Index k = 0; k < M.size(); ++k)
    M.data()[k] = std::bit_cast<double>(detail::to_little_endian(buf[static_cast<std::size_t>(k)]));
  if (!M.allFinite()) throw InputError("'" + path.string() + "' contains non-finite values");
  return M;
}

/// Write every matrix of the pair plus manifest.json into dir. Returns the files written.
inline std::vector<std::filesystem::path> dump_pair(const std::filesystem::path& dir, const PointCloudPair& pair,
                                                    const ModelConfig& config) {
  std::filesystem::create_directories(dir);
  const std::pair<const char*, const Eigen::MatrixXd*> mats[] = {{"X", &pair.X},   {"Y", &pair.Y},
                                                                 {"Ux", &pair.Ux}, {"Uy", &pair.Uy},
                                                                 {"Z", &pair.Z},   {"Wn", &pair.Wn}};
  json manifest{{"format", "float64-le-colmajor"}, {"seed", config.seed}, {"config", to_json(config)}};
  json entries = json::object();
  std::vector<std::filesystem::path> written;
  for (const auto& [name, M] : mats) {
    const std::string file = std::string(name) + ".bin";
    write_raw_matrix(dir / file, *M);
    entries[name] = json{{"file", file}, {"rows", M->rows()}, {"cols", M->cols()}};
    written.push_back(dir / file);
  }
  manifest["matrices"] = entries;
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
  written.push_back(dir / "manifest.json");
  return written;
}

struct LoadedPair {
  PointCloudPair pair;
  ModelConfig config;
};

inline LoadedPair load_pair(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw InputError("no manifest.json in '" + dir.string() + "'");
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("manifest.json is not valid JSON: ") + e.what());
  }
  if (manifest.value("format", "") != "float64-le-colmajor") throw InputError("unsupported raw-matrix format");
  LoadedPair out;
  out.config = model_from_json(manifest.at("config"));
  out.config.seed = manifest.value("seed", std::uint64_t{0});
  auto load = [&](const char* name) {
    const json& e = manifest.at("matrices").at(name);
    return read_raw_matrix(dir / e.at("file").get<std::string>(), e.at("rows").get<Eigen::Index>(),
                           e.at("cols").get<Eigen::Index>());
  };
  out.pair.X = load("X");
  out.pair.Y = load("Y");
  out.pair.Ux = load("Ux");
  out.pair.Uy = load("Uy");
  out.pair.Z = load("Z");
  out.pair.Wn = load("Wn");
  return out;
}

}  // namespace fusion_spectra
