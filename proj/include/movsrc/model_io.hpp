#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>

#include "movsrc/field_io.hpp"
#include "movsrc/model.hpp"

namespace movsrc {

/// Schema violation in a JSON document; the message starts with the dotted
/// path of the offending field.
struct SchemaError : ValidationError {
  using ValidationError::ValidationError;
};

namespace detail {

/// Typed access into a JSON object that reports failures by dotted path,
/// e.g. "model.orbit.velocity: expected an array of 2 numbers".
class JsonReader {
 public:
  JsonReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  [[noreturn]] static void fail(const std::string& field, const std::string& what) {
    throw SchemaError(field + ": " + what);
  }

  std::string field(const std::string& key) const { return path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key); }

  const nlohmann::json& at(const std::string& key) const {
    if (!j_.contains(key)) fail(field(key), "missing");
    return j_.at(key);
  }

  JsonReader object(const std::string& key) const { return JsonReader(at(key), field(key)); }

  double number(const std::string& key) const {
    const auto& v = at(key);
    if (!v.is_number()) fail(field(key), "expected a number");
    return v.get<double>();
  }

  double number_or(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

  int integer(const std::string& key) const {
    const auto& v = at(key);
    if (!v.is_number_integer()) fail(field(key), "expected an integer");
    return v.get<int>();
  }

  std::string string(const std::string& key) const {
    const auto& v = at(key);
    if (!v.is_string()) fail(field(key), "expected a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const std::string& key, std::size_t exact = 0) const {
    return numbers_of(at(key), field(key), exact);
  }

  std::vector<std::vector<double>> number_lists(const std::string& key, std::size_t count) const {
    const auto& v = at(key);
    if (!v.is_array() || v.size() != count)
      fail(field(key), "expected an array of " + std::to_string(count) + " arrays");
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < v.size(); ++i)
      out.push_back(numbers_of(v[i], field(key) + "[" + std::to_string(i) + "]", 0));
    return out;
  }

  Point point(const std::string& key, int dim) const {
    const auto v = numbers(key, static_cast<std::size_t>(dim));
    Point p{0.0, 0.0, 0.0};
    std::copy(v.begin(), v.end(), p.begin());
    return p;
  }

 private:
  static std::vector<double> numbers_of(const nlohmann::json& v, const std::string& name, std::size_t exact) {
    const std::string want =
        exact ? "expected an array of " + std::to_string(exact) + " numbers" : "expected an array of numbers";
    if (!v.is_array() || (exact && v.size() != exact)) fail(name, want);
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) fail(name, want);
      out.push_back(x.get<double>());
    }
    return out;
  }

  const nlohmann::json& j_;
  std::string path_;
};

template <class Fn>
auto rethrow_as(const std::string& field, Fn&& fn) {
  try {
    return fn();
  } catch (const SchemaError&) {
    throw;
  } catch (const ValidationError& e) {
    throw ValidationError(field + ": " + e.what());
  }
}

}  // namespace detail

/**
 * Builds a SourceModel from its JSON description (schema in README.md).
 * Relative paths of grid-sampled profile fields resolve against base_dir.
 */
inline SourceModel model_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  const detail::JsonReader root(j, "model");
  const int dim = root.integer("dim");
  if (dim != 2 && dim != 3) detail::JsonReader::fail(root.field("dim"), "must be 2 or 3");
  const double margin = root.number_or("margin", 0.05);

  const auto pj = root.object("profile");
  const std::string pkind = pj.string("kind");
  auto profile = detail::rethrow_as("model.profile", [&] {
    if (pkind == "gaussian") {
      std::optional<double> r1;
      if (pj.has("support_radius")) r1 = pj.number("support_radius");
      return SourceProfile::gaussian(dim, pj.has("center") ? pj.point("center", dim) : Point{}, pj.number("sigma"),
                                     pj.number_or("amplitude", 1.0), r1);
    }
    if (pkind == "compact-bump")
      return SourceProfile::compact_bump(dim, pj.has("center") ? pj.point("center", dim) : Point{},
                                         pj.number("width"), pj.number_or("amplitude", 1.0));
    if (pkind == "grid-sampled") {
      std::filesystem::path file = pj.string("field");
      if (file.is_relative()) file = base_dir / file;
      auto field = read_field(file.string());
      if (field.kind != "real") detail::JsonReader::fail(pj.field("field"), "must be a real field");
      if (field.grid.dim() != dim) detail::JsonReader::fail(pj.field("field"), "dimension differs from model.dim");
      return SourceProfile::grid_sampled(field.grid, std::move(field.real_values), pj.number("support_radius"));
    }
    detail::JsonReader::fail(pj.field("kind"), "unknown kind '" + pkind + "' (gaussian | compact-bump | grid-sampled)");
  });

  const auto tj = root.object("temporal");
  const std::string tkind = tj.string("kind");
  auto temporal = detail::rethrow_as("model.temporal", [&] {
    if (tkind == "constant") return TemporalFunction::constant(tj.number("value"), tj.number("horizon"));
    if (tkind == "polynomial") return TemporalFunction::polynomial(tj.numbers("coefficients"), tj.number("horizon"));
    if (tkind == "grid-sampled") return TemporalFunction::grid_sampled(tj.numbers("times"), tj.numbers("values"));
    detail::JsonReader::fail(tj.field("kind"), "unknown kind '" + tkind + "' (constant | polynomial | grid-sampled)");
  });

  const auto oj = root.object("orbit");
  const std::string okind = oj.string("kind");
  auto orbit = detail::rethrow_as("model.orbit", [&] {
    const double bound = oj.number("bound");
    if (okind == "linear")
      return OrbitFunction::linear(dim, oj.point("velocity", dim), bound,
                                   oj.has("offset") ? oj.point("offset", dim) : Point{});
    if (okind == "polynomial")
      return OrbitFunction::polynomial(dim, oj.number_lists("coefficients", static_cast<std::size_t>(dim)), bound);
    if (okind == "piecewise-linear")
      return OrbitFunction::piecewise_linear(dim, oj.numbers("times"),
                                             oj.number_lists("values", static_cast<std::size_t>(dim)), bound);
    detail::JsonReader::fail(oj.field("kind"),
                             "unknown kind '" + okind + "' (linear | polynomial | piecewise-linear)");
  });

  return detail::rethrow_as("model", [&] { return SourceModel(profile, temporal, orbit, margin); });
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path + ": malformed JSON (" + e.what() + ")");
  }
}

inline SourceModel read_model(const std::string& path) {
  return model_from_json(read_json_file(path), std::filesystem::path(path).parent_path());
}

}  // namespace movsrc
