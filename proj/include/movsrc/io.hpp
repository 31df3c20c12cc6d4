#pragma once

#include "movsrc/field_io.hpp"
#include "movsrc/forward.hpp"
#include "movsrc/model_io.hpp"

namespace movsrc {

/// Writes final data with its horizon, provenance and noise record in the
/// sidecar.
inline void write_final_field(const std::filesystem::path& path, const FinalField& u,
                              nlohmann::json meta = nlohmann::json::object()) {
  meta["horizon"] = u.horizon;
  meta["provenance"] = to_string(u.provenance);
  if (u.noise) {
    meta["noise"] = {{"sigma_rel", u.noise->sigma_rel}, {"sigma_abs", u.noise->sigma_abs}, {"seed", u.noise->seed}};
  }
  write_field(path, u.grid, u.values, std::move(meta));
}

inline FinalField read_final_field(const std::filesystem::path& path) {
  auto f = read_field(path);
  if (f.kind != "real") throw ValidationError(path.string() + ": final data must be a real field");
  if (!f.meta.contains("horizon") || !f.meta.at("horizon").is_number())
    throw ValidationError(sidecar_path(path).string() + ": horizon: missing");
  FinalField u;
  u.grid = f.grid;
  u.values = std::move(f.real_values);
  u.horizon = f.meta.at("horizon").get<double>();
  u.provenance = Provenance::file;
  if (f.meta.contains("noise")) {
    const auto& n = f.meta.at("noise");
    u.noise = NoiseRecord{n.value("sigma_rel", 0.0), n.value("sigma_abs", 0.0), n.value("seed", std::uint64_t{0})};
  }
  return u;
}

}  // namespace movsrc
