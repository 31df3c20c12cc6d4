#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>

#include "movsrc/grid.hpp"

namespace movsrc {

/// On-disk field: `<path>` holds raw little-endian float64 values in
/// row-major order (complex values interleaved re, im) and `<path>.json`
/// holds {dim, n_per_axis, L_half, kind} plus free-form metadata.
struct FieldFile {
  SpatialGrid grid;
  std::string kind;  // "real" | "spectral"
  std::vector<double> real_values;
  std::vector<complex> spectral_values;
  nlohmann::json meta = nlohmann::json::object();
};

inline std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

namespace detail {

inline void write_raw(const std::filesystem::path& path, const void* data, std::size_t bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!out) throw Error("short write to " + path.string());
}

inline void write_sidecar(const std::filesystem::path& path, const SpatialGrid& grid,
                          const std::string& kind, nlohmann::json meta) {
  meta["dim"] = grid.dim();
  meta["n_per_axis"] = grid.n();
  meta["L_half"] = grid.half_width();
  meta["kind"] = kind;
  std::ofstream out(sidecar_path(path));
  if (!out) throw Error("cannot open " + sidecar_path(path).string() + " for writing");
  out << meta.dump(2) << '\n';
}

}  // namespace detail

inline void write_field(const std::filesystem::path& path, const SpatialGrid& grid,
                        std::span<const double> values, nlohmann::json meta = nlohmann::json::object()) {
  if (values.size() != grid.size()) throw Error("write_field: size mismatch");
  detail::write_raw(path, values.data(), values.size_bytes());
  detail::write_sidecar(path, grid, "real", std::move(meta));
}

inline void write_field(const std::filesystem::path& path, const SpectralField& spec,
                        nlohmann::json meta = nlohmann::json::object()) {
  if (spec.values.size() != spec.grid.size()) throw Error("write_field: size mismatch");
  detail::write_raw(path, spec.values.data(), spec.values.size() * sizeof(complex));
  meta["convention"] = SpectralField::convention;
  detail::write_sidecar(path, spec.grid, "spectral", std::move(meta));
}

inline FieldFile read_field(const std::filesystem::path& path) {
  std::ifstream side(sidecar_path(path));
  if (!side) throw ValidationError("missing field sidecar " + sidecar_path(path).string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(side);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed field sidecar " + sidecar_path(path).string() + ": " + e.what());
  }
  for (const char* key : {"dim", "n_per_axis", "L_half", "kind"})
    if (!meta.contains(key)) throw ValidationError(std::string("field sidecar lacks '") + key + "'");

  FieldFile f;
  f.grid = make_grid(meta.at("dim").get<int>(), meta.at("n_per_axis").get<int>(),
                     meta.at("L_half").get<double>());
  f.kind = meta.at("kind").get<std::string>();
  if (f.kind != "real" && f.kind != "spectral")
    throw ValidationError("field sidecar 'kind' must be real or spectral");
  const std::size_t doubles = f.grid.size() * (f.kind == "spectral" ? 2 : 1);

  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("missing field file " + path.string());
  in.seekg(0, std::ios::end);
  if (static_cast<std::size_t>(in.tellg()) != doubles * sizeof(double))
    throw ValidationError("field file " + path.string() + " size does not match its sidecar");
  in.seekg(0);
  if (f.kind == "real") {
    f.real_values.resize(doubles);
    in.read(reinterpret_cast<char*>(f.real_values.data()), static_cast<std::streamsize>(doubles * sizeof(double)));
  } else {
    f.spectral_values.resize(f.grid.size());
    in.read(reinterpret_cast<char*>(f.spectral_values.data()),
            static_cast<std::streamsize>(doubles * sizeof(double)));
  }
  f.meta = std::move(meta);
  return f;
}

}  // namespace movsrc
