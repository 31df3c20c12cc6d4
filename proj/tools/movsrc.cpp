#include <CLI11.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "movsrc/io.hpp"
#include "movsrc/ip1.hpp"
#include "movsrc/ip2.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace movsrc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;
constexpr int kExitNoConvergence = 3;

/// Thrown when a solver ends without converging; artifacts are already on disk.
struct NotConverged : Error {
  using Error::Error;
};

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 digest failed");
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return out.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string sha256_file(const fs::path& p) { return sha256_hex(slurp(p)); }

struct CommonOptions {
  std::string out;
  int threads = 1;
  std::uint64_t seed = 0;
  int panels = 8;
  int order = 8;
};

void add_common(CLI::App* sub, CommonOptions& c) {
  sub->add_option("--out", c.out, "Output directory (created if missing)")->required();
  sub->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--seed", c.seed, "Random seed, recorded in every artifact")->capture_default_str();
  sub->add_option("--quad-panels", c.panels, "Composite Gauss-Legendre panels on [0,T]")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--quad-order", c.order, "Gauss-Legendre nodes per panel")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

/**
 * Bookkeeping for one command: the canonical config (parameters plus hashes
 * of every input file) is hashed, the hash is embedded in each artifact, and
 * run.json lists the artifacts with their SHA-256 digests.
 */
class Run {
 public:
  Run(std::string subcommand, const CommonOptions& c) : c_(c) {
    config_["subcommand"] = std::move(subcommand);
    config_["seed"] = c.seed;
    config_["threads"] = c.threads;
    config_["quadrature"] = {{"panels", c.panels}, {"order", c.order}};
    fs::create_directories(c.out);
  }

  void param(const std::string& key, json value) { config_["params"][key] = std::move(value); }

  void input(const std::string& key, const fs::path& p) {
    json entry = {{"path", p.string()}, {"sha256", sha256_file(p)}};
    if (fs::exists(sidecar_path(p))) entry["sidecar_sha256"] = sha256_file(sidecar_path(p));
    config_["inputs"][key] = std::move(entry);
  }

  const std::string& config_hash() {
    if (hash_.empty()) hash_ = sha256_hex(config_.dump());
    return hash_;
  }

  json stamp() { return {{"config_hash", config_hash()}, {"seed", c_.seed}}; }

  fs::path path(const std::string& name) const { return fs::path(c_.out) / name; }

  TimeQuadrature quadrature(double horizon) const {
    return TimeQuadrature::composite_gauss_legendre(horizon, c_.panels, c_.order);
  }

  void artifact(const std::string& name) { artifacts_.push_back(name); }

  void write_json(const std::string& name, json j) {
    j["config_hash"] = config_hash();
    j["seed"] = c_.seed;
    std::ofstream(path(name)) << j.dump(2) << '\n';
    artifact(name);
  }

  void write_field(const std::string& name, const FinalField& u) {
    write_final_field(path(name), u, stamp());
    artifact(name);
    artifact(name + ".json");
  }

  /// CSV with a leading "# config_hash=..." line and full double precision.
  void write_csv(const std::string& name, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path(name));
    out << "# config_hash=" << config_hash() << " seed=" << c_.seed << '\n';
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n' << std::setprecision(17);
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
      out << '\n';
    }
    artifact(name);
  }

  template <class Fn>
  auto timed(const std::string& name, Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    auto r = fn();
    timings_[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
  }

  void finish() {
    json run = {{"config", config_}, {"config_hash", config_hash()}, {"seed", c_.seed}, {"threads", c_.threads},
                {"timings_s", timings_}};
    for (const auto& a : artifacts_) run["artifacts"][a] = sha256_file(path(a));
    std::ofstream(path("run.json")) << run.dump(2) << '\n';
  }

 private:
  CommonOptions c_;
  json config_ = json::object();
  std::string hash_;
  std::vector<std::string> artifacts_;
  json timings_ = json::object();
};

Point parse_point(const std::vector<double>& v, int dim, const std::string& flag) {
  if (static_cast<int>(v.size()) != dim)
    throw ValidationError(flag + ": expected " + std::to_string(dim) + " components");
  Point p{0.0, 0.0, 0.0};
  std::copy(v.begin(), v.end(), p.begin());
  return p;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateOptions {
  std::string model;
  int n = 64;
  double half_width = 0.0;
  int alias_images = 2;
  double noise = 0.0;
};

int run_simulate(const SimulateOptions& o, const CommonOptions& c) {
  Run run("simulate", c);
  run.input("model", o.model);
  run.param("n", o.n);
  run.param("L_half", o.half_width);
  run.param("alias_images", o.alias_images);
  run.param("noise", o.noise);

  const auto model = read_model(o.model);
  const double L = o.half_width > 0.0 ? o.half_width : default_half_width(model);
  const auto grid = make_grid(model.dim(), o.n, L);
  const auto quad = run.quadrature(model.horizon());
  auto u = run.timed("solve", [&] {
    return solve_spectral(model, grid, quad, SpectralOptions{o.alias_images, c.threads});
  });
  if (o.noise > 0.0) u = add_noise(u, o.noise, c.seed);
  run.write_field("field.bin", u);

  const double expected = model.temporal.integral() * model.profile.integral();
  run.write_json("diagnostics.json", {{"L_half", L},
                                      {"n_per_axis", o.n},
                                      {"quadrature", quad.describe()},
                                      {"mass", u.integral()},
                                      {"expected_mass", expected},
                                      {"max_abs", u.max_abs()}});
  run.finish();
  std::cout << "simulate: wrote " << run.path("field.bin").string() << " (L_half=" << L << ")\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// transfer / verify-growth
// ---------------------------------------------------------------------------

struct RayOptions {
  std::string model;
  std::vector<double> eta;
  std::vector<double> radii{2.0, 4.0, 8.0, 16.0, 32.0};
};

TransferSamples ray_samples(Run& run, const RayOptions& o, const SourceModel& model) {
  run.input("model", o.model);
  run.param("eta", o.eta);
  run.param("radii", o.radii);
  const Point eta = parse_point(o.eta, model.dim(), "--eta");
  auto samples = run.timed("transfer", [&] {
    return transfer_ray_log(model, eta, o.radii, run.quadrature(model.horizon()));
  });
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < samples.radii.size(); ++i) rows.push_back({samples.radii[i], samples.log_values[i]});
  run.write_csv("transfer.csv", {"r", "logF"}, rows);
  return samples;
}

int run_transfer(const RayOptions& o, const CommonOptions& c) {
  Run run("transfer", c);
  const auto model = read_model(o.model);
  require_valid(model, Purpose::ip1);
  ray_samples(run, o, model);
  run.finish();
  return kExitOk;
}

int run_verify_growth(const RayOptions& o, const CommonOptions& c) {
  Run run("verify-growth", c);
  const auto model = read_model(o.model);
  require_valid(model, Purpose::ip2);
  const auto samples = ray_samples(run, o, model);
  const auto fit = verify_growth(samples);
  run.write_json("growth.json", {{"slope", fit.slope},
                                 {"intercept", fit.intercept},
                                 {"residual", fit.residual},
                                 {"passed", fit.passed},
                                 {"horizon", model.horizon()},
                                 {"slope_over_T", fit.slope / model.horizon()}});
  run.finish();
  std::cout << "verify-growth: slope=" << fit.slope << " (" << (fit.passed ? "PASS" : "FAIL") << ")\n";
  return fit.passed ? kExitOk : kExitInvalid;
}

// ---------------------------------------------------------------------------
// invert-profile
// ---------------------------------------------------------------------------

struct InvertProfileOptions {
  std::string data;
  std::string model;
  std::string method = "tikhonov";
  double lambda = 1e-10;
  double epsilon = 0.0;
  bool discrepancy = false;
  double noise_level = 0.0;
  bool project_support = false;
};

int run_invert_profile(const InvertProfileOptions& o, const CommonOptions& c) {
  Run run("invert-profile", c);
  run.input("data", o.data);
  run.input("model", o.model);
  run.param("method", o.method);
  run.param("lambda", o.lambda);
  run.param("epsilon", o.epsilon);
  run.param("discrepancy", o.discrepancy);
  run.param("noise_level", o.noise_level);
  run.param("project_support", o.project_support);

  const auto model = read_model(o.model);
  require_valid(model, Purpose::ip1);
  const auto data = read_final_field(o.data);
  const auto quad = run.quadrature(model.horizon());

  DeconvolutionConfig cfg;
  cfg.method = o.method == "cutoff" ? DeconvolutionMethod::spectral_cutoff : DeconvolutionMethod::tikhonov;
  cfg.lambda = o.lambda;
  cfg.epsilon = o.epsilon;
  cfg.support_radius = model.profile.support_radius();
  cfg.project_support = o.project_support;
  cfg.threads = c.threads;

  json diag = json::object();
  if (o.discrepancy) {
    double level = o.noise_level;
    if (!(level > 0.0)) {
      if (!data.noise || !(data.noise->sigma_abs > 0.0))
        throw ValidationError("--discrepancy: data carry no noise record; pass --noise-level");
      level = data.noise->sigma_abs * std::sqrt(static_cast<double>(data.grid.size()) * data.grid.cell_volume());
    }
    const auto choice = choose_lambda_discrepancy(data, model.orbit, model.temporal, level, quad, c.threads);
    cfg.method = DeconvolutionMethod::tikhonov;
    cfg.lambda = choice.lambda;
    diag["discrepancy"] = {{"noise_level", level}, {"residual", choice.residual}, {"at_boundary", choice.at_boundary}};
  }
  const auto est = run.timed("invert", [&] {
    return reconstruct_profile(data, model.orbit, model.temporal, cfg, quad);
  });

  FinalField profile{data.grid, est.values, data.horizon, Provenance::file, std::nullopt};
  write_field(run.path("profile.bin"), data.grid, profile.values, run.stamp());
  run.artifact("profile.bin");
  run.artifact("profile.bin.json");
  diag["method"] = cfg.method == DeconvolutionMethod::tikhonov ? "tikhonov" : "cutoff";
  diag["lambda"] = cfg.lambda;
  diag["epsilon"] = cfg.epsilon;
  diag["regularized_fraction"] = est.regularized_fraction;
  diag["relative_residual"] = est.relative_residual;
  diag["residual_norm"] = est.residual_norm;
  run.write_json("diagnostics.json", diag);
  run.finish();
  std::cout << "invert-profile: lambda=" << cfg.lambda << " relative residual=" << est.relative_residual << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// invert-orbit / moments / moment-solve
// ---------------------------------------------------------------------------

struct InvertOrbitOptions {
  std::string data;
  std::string model;
  int nodes = 8;
  std::string freqs = "sobol:200";
  std::vector<int> signs;
  double delta = 0.05;
  int max_iterations = 200;
};

/// "sobol:COUNT[:RADIUS]" or "grid:COUNT[:RADIUS]"; RADIUS defaults to 8 / R2.
std::vector<Point> parse_freqs(const std::string& spec, const FinalField& data, const SourceModel& model) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.size() < 2 || parts.size() > 3 || (parts[0] != "sobol" && parts[0] != "grid"))
    throw ValidationError("--freqs: expected sobol:COUNT[:RADIUS] or grid:COUNT[:RADIUS]");
  std::size_t count = 0;
  double radius = 8.0 / model.orbit.bound();
  try {
    count = std::stoul(parts[1]);
    if (parts.size() == 3) radius = std::stod(parts[2]);
  } catch (const std::exception&) {
    throw ValidationError("--freqs: COUNT and RADIUS must be numbers");
  }
  if (count == 0 || !(radius > 0.0)) throw ValidationError("--freqs: COUNT and RADIUS must be positive");
  const auto raw = parts[0] == "sobol" ? frequency_samples_sobol(model.dim(), count, radius)
                                       : frequency_samples_grid(data.grid, radius, count);
  return drop_profile_zeros(model.profile, raw);
}

int run_invert_orbit(const InvertOrbitOptions& o, const CommonOptions& c) {
  Run run("invert-orbit", c);
  run.input("data", o.data);
  run.input("model", o.model);
  run.param("nodes", o.nodes);
  run.param("freqs", o.freqs);
  run.param("signs", o.signs);
  run.param("delta", o.delta);
  run.param("max_iterations", o.max_iterations);

  const auto model = read_model(o.model);
  require_valid(model, Purpose::ip2);
  const auto data = read_final_field(o.data);
  if (data.grid.dim() != model.dim()) throw ValidationError("--data: dimension differs from the model");
  const auto freqs = parse_freqs(o.freqs, data, model);

  OrbitFitOptions opt;
  opt.moment_delta = o.delta;
  opt.threads = c.threads;
  opt.gauss_newton.max_iterations = o.max_iterations;
  if (!o.signs.empty()) {
    if (static_cast<int>(o.signs.size()) != model.dim())
      throw ValidationError("--sign: expected one sign per component");
    std::array<int, 3> s{1, 1, 1};
    std::copy(o.signs.begin(), o.signs.end(), s.begin());
    opt.signs = s;
  }
  const auto est = run.timed("invert", [&] {
    return reconstruct_orbit(data, model.profile, model.temporal, o.nodes, freqs,
                             run.quadrature(model.horizon()), opt);
  });

  std::vector<std::string> header{"t"};
  for (int j = 0; j < model.dim(); ++j) header.push_back("a" + std::to_string(j + 1));
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < est.times.size(); ++k) {
    rows.push_back({est.times[k]});
    for (int j = 0; j < model.dim(); ++j) rows.back().push_back(est.values[j][k]);
  }
  run.write_csv("orbit.csv", header, rows);
  run.write_json("diagnostics.json", {{"converged", est.converged},
                                      {"iterations", est.iterations},
                                      {"accepted_steps", est.accepted_steps},
                                      {"residual", est.residual},
                                      {"relative_residual", est.relative_residual},
                                      {"signs", std::vector<int>(est.signs.begin(), est.signs.begin() + model.dim())},
                                      {"frequency_samples", freqs.size()}});
  run.finish();
  std::cout << "invert-orbit: converged=" << (est.converged ? "true" : "false")
            << " relative residual=" << est.relative_residual << '\n';
  if (!est.converged) throw NotConverged("invert-orbit: Gauss-Newton did not converge");
  return kExitOk;
}

struct MomentsOptions {
  std::string data;
  std::string model;
  int component = 1;
  double delta = 0.05;
};

int run_moments(const MomentsOptions& o, const CommonOptions& c) {
  Run run("moments", c);
  run.input("data", o.data);
  run.input("model", o.model);
  run.param("component", o.component);
  run.param("delta", o.delta);

  const auto model = read_model(o.model);
  const auto data = read_final_field(o.data);
  if (o.component < 1 || o.component > model.dim()) throw ValidationError("--component: out of range");
  const auto m = extract_low_moments(data, model.profile, model.temporal, o.component - 1, o.delta);
  run.write_json("moments.json", {{"component", o.component},
                                  {"delta", o.delta},
                                  {"m1", m.m1},
                                  {"m2", m.m2},
                                  {"m1_wide", m.m1_wide},
                                  {"m2_wide", m.m2_wide},
                                  {"m1_error_estimate", m.m1_error_estimate()},
                                  {"m2_error_estimate", m.m2_error_estimate()}});
  run.finish();
  std::cout << std::setprecision(10) << "m1=" << m.m1 << " m2=" << m.m2 << '\n';
  return kExitOk;
}

struct MomentSolveOptionsCli {
  std::string moments;
  std::string model;
  double horizon = 1.0;
  int sign = 1;
  int nodes = 6;
  double bound = 0.0;
  double start = 0.0;
};

/// CSV with header "n,mu" and rows n = 0..N in order.
MomentVector read_moments_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  MomentVector m;
  m.provenance = MomentVector::Provenance::extracted;
  std::string line;
  bool header = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line.rfind("n,mu", 0) != 0) throw ValidationError(path + ": header must be 'n,mu'");
      header = true;
      continue;
    }
    std::stringstream ss(line);
    std::string n_str, mu_str;
    std::getline(ss, n_str, ',');
    std::getline(ss, mu_str, ',');
    try {
      if (std::stoi(n_str) != static_cast<int>(m.values.size()))
        throw ValidationError(path + ": line " + std::to_string(line_no) + ": orders must run 0, 1, 2, ...");
      m.values.push_back(std::stod(mu_str));
    } catch (const std::logic_error&) {
      throw ValidationError(path + ": line " + std::to_string(line_no) + ": expected 'n,mu' numbers");
    }
  }
  if (m.values.size() < 2) throw ValidationError(path + ": need at least mu_0 and mu_1");
  return m;
}

int run_moment_solve(const MomentSolveOptionsCli& o, const CommonOptions& c) {
  Run run("moment-solve", c);
  run.input("moments", o.moments);
  if (!o.model.empty()) run.input("model", o.model);
  run.param("horizon", o.horizon);
  run.param("sign", o.sign);
  run.param("nodes", o.nodes);
  run.param("bound", o.bound);
  run.param("start", o.start);

  const auto moments = read_moments_csv(o.moments);
  const auto temporal =
      o.model.empty() ? TemporalFunction::constant(1.0, o.horizon) : read_model(o.model).temporal;
  MomentSolveOptions opt;
  opt.bound = o.bound;
  opt.start_value = o.start;
  const auto est = run.timed("solve", [&] { return moment_solve(moments, temporal, o.sign, o.nodes, opt); });

  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < est.times.size(); ++k) rows.push_back({est.times[k], est.values[k]});
  run.write_csv("function.csv", {"t", "f"}, rows);
  run.write_json("diagnostics.json", {{"converged", est.converged},
                                      {"consistent", est.consistent},
                                      {"iterations", est.iterations},
                                      {"residual", est.residual}});
  run.finish();
  std::cout << "moment-solve: residual=" << est.residual << " consistent=" << (est.consistent ? "true" : "false")
            << '\n';
  if (!est.converged || !est.consistent)
    throw NotConverged("moment-solve: no monotone function reproduces the moments (residual stalled)");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

/// The config hash each artifact carries, or empty when it has none.
std::string embedded_hash(const fs::path& p) {
  const std::string name = p.filename().string();
  if (name.ends_with(".json")) {
    const auto j = read_json_file(p.string());
    return j.is_object() && j.contains("config_hash") ? j.at("config_hash").get<std::string>() : "";
  }
  if (name.ends_with(".csv")) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    const std::string key = "# config_hash=";
    if (line.rfind(key, 0) != 0) return "";
    return line.substr(key.size(), line.find(' ', key.size()) - key.size());
  }
  return embedded_hash(sidecar_path(p));  // raw field: the hash lives in its sidecar
}

int run_verify(const std::string& dir) {
  const fs::path root(dir);
  const auto run = read_json_file((root / "run.json").string());
  const std::string hash = run.at("config_hash").get<std::string>();
  bool ok = sha256_hex(run.at("config").dump()) == hash;
  std::cout << (ok ? "OK       " : "MISMATCH ") << "config_hash " << hash << '\n';
  for (const auto& [name, digest] : run.at("artifacts").items()) {
    const fs::path p = root / name;
    const bool exists = fs::exists(p);
    const bool digest_ok = exists && sha256_file(p) == digest.get<std::string>();
    const bool stamp_ok = exists && embedded_hash(p) == hash;
    std::cout << (digest_ok && stamp_ok ? "OK       " : "MISMATCH ") << name
              << (exists ? (digest_ok ? "" : " (sha256 differs)") : " (missing)")
              << (exists && !stamp_ok ? " (config hash differs)" : "") << '\n';
    ok = ok && digest_ok && stamp_ok;
  }
  return ok ? kExitOk : kExitInvalid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"movsrc: forward and inverse problems for the heat equation with a moving source f(x - a(t)) g(t)"};
  app.require_subcommand(1);
  CommonOptions common;

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Final data u(., T) on a grid (spectral solver)");
  add_common(simulate, common);
  simulate->add_option("--model", sim.model, "Model JSON file")->required()->check(CLI::ExistingFile);
  simulate->add_option("--n", sim.n, "Grid nodes per axis (even, factors 2/3/5)")->capture_default_str();
  simulate->add_option("--L", sim.half_width, "Half-width of the box; default R + 4 sqrt(2T)");
  simulate->add_option("--alias-images", sim.alias_images, "Periodic images folded per axis (Gaussian profiles)")
      ->capture_default_str();
  simulate->add_option("--noise", sim.noise, "Relative Gaussian noise level sigma_rel (uses --seed)")
      ->capture_default_str();

  RayOptions ray;
  auto* transfer = app.add_subcommand("transfer", "log F(i r eta) along an imaginary ray -> transfer.csv");
  auto* growth = app.add_subcommand("verify-growth", "Fit log F(i r eta) against r^2 |eta|^2 -> growth.json");
  for (auto* sub : {transfer, growth}) {
    add_common(sub, common);
    sub->add_option("--model", ray.model, "Model JSON file")->required()->check(CLI::ExistingFile);
    sub->add_option("--eta", ray.eta, "Ray direction eta (dim components)")->required()->delimiter(',');
    sub->add_option("--radii", ray.radii, "Radii r > 1")->delimiter(',')->capture_default_str();
  }

  InvertProfileOptions ip;
  auto* invert_profile = app.add_subcommand("invert-profile", "Recover the profile f with a and g known");
  add_common(invert_profile, common);
  invert_profile->add_option("--data", ip.data, "Final data field file")->required()->check(CLI::ExistingFile);
  invert_profile->add_option("--model", ip.model, "Model JSON supplying a, g and the support radius")
      ->required()
      ->check(CLI::ExistingFile);
  invert_profile->add_option("--method", ip.method, "tikhonov | cutoff")
      ->check(CLI::IsMember({"tikhonov", "cutoff"}))
      ->capture_default_str();
  invert_profile->add_option("--lambda", ip.lambda, "Tikhonov weight")->capture_default_str();
  invert_profile->add_option("--epsilon", ip.epsilon, "Cutoff threshold on |F|");
  invert_profile->add_flag("--discrepancy", ip.discrepancy, "Choose lambda by the discrepancy principle");
  invert_profile->add_option("--noise-level", ip.noise_level,
                             "L2 noise norm for --discrepancy; default from the data's noise record");
  invert_profile->add_flag("--project-support", ip.project_support, "Zero the estimate outside |x| < R1");

  InvertOrbitOptions io;
  auto* invert_orbit = app.add_subcommand("invert-orbit", "Recover the orbit a with f and g known -> orbit.csv");
  add_common(invert_orbit, common);
  invert_orbit->add_option("--data", io.data, "Final data field file")->required()->check(CLI::ExistingFile);
  invert_orbit->add_option("--model", io.model, "Model JSON supplying f, g and R2 (its orbit is ignored)")
      ->required()
      ->check(CLI::ExistingFile);
  invert_orbit->add_option("--nodes", io.nodes, "Piecewise-linear intervals P")->capture_default_str();
  invert_orbit->add_option("--freqs", io.freqs, "sobol:COUNT[:RADIUS] | grid:COUNT[:RADIUS]; RADIUS defaults to 8/R2")
      ->capture_default_str();
  invert_orbit->add_option("--sign", io.signs, "Per-component signs (+1/-1); default from m1")->delimiter(',');
  invert_orbit->add_option("--delta", io.delta, "Moment-extraction step")->capture_default_str();
  invert_orbit->add_option("--max-iterations", io.max_iterations, "Gauss-Newton iteration cap")
      ->capture_default_str();

  MomentsOptions mo;
  auto* moments = app.add_subcommand("moments", "First and second orbit moments from final data");
  add_common(moments, common);
  moments->add_option("--data", mo.data, "Final data field file")->required()->check(CLI::ExistingFile);
  moments->add_option("--model", mo.model, "Model JSON supplying f and g")->required()->check(CLI::ExistingFile);
  moments->add_option("--component", mo.component, "Component j (1-based)")->capture_default_str();
  moments->add_option("--delta", mo.delta, "Finite-difference step in tau")->capture_default_str();

  MomentSolveOptionsCli ms;
  auto* moment_solve_cmd = app.add_subcommand("moment-solve", "Monotone f from moments \\int f^n g -> function.csv");
  add_common(moment_solve_cmd, common);
  moment_solve_cmd->add_option("--moments", ms.moments, "CSV with header n,mu")->required()->check(CLI::ExistingFile);
  moment_solve_cmd->add_option("--model", ms.model, "Model JSON supplying g (default g = 1 on [0, --horizon])")
      ->check(CLI::ExistingFile);
  moment_solve_cmd->add_option("--horizon", ms.horizon, "T when no model is given")->capture_default_str();
  moment_solve_cmd->add_option("--sign", ms.sign, "+1 increasing, -1 decreasing")
      ->check(CLI::IsMember({-1, 1}))
      ->capture_default_str();
  moment_solve_cmd->add_option("--nodes", ms.nodes, "Piecewise-linear intervals P (<= N)")->capture_default_str();
  moment_solve_cmd->add_option("--bound", ms.bound, "A-priori bound c on max|f|; 0 estimates it")
      ->capture_default_str();
  moment_solve_cmd->add_option("--start", ms.start, "Known value f(0)")->capture_default_str();

  std::string verify_dir;
  auto* verify = app.add_subcommand("verify", "Re-check the artifact hashes of a run directory");
  verify->add_option("--run", verify_dir, "Run directory containing run.json")->required()->check(CLI::ExistingDirectory);

  if (argc > 1 && argv[1][0] != '-') {
    const std::string name = argv[1];
    const auto subs = app.get_subcommands([](CLI::App*) { return true; });
    if (std::none_of(subs.begin(), subs.end(), [&](CLI::App* s) { return s->get_name() == name; })) {
      std::cerr << "error: unknown subcommand '" << name << "'; run with --help for the list\n";
      return kExitInvalid;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }

  try {
    if (*simulate) return run_simulate(sim, common);
    if (*transfer) return run_transfer(ray, common);
    if (*growth) return run_verify_growth(ray, common);
    if (*invert_profile) return run_invert_profile(ip, common);
    if (*invert_orbit) return run_invert_orbit(io, common);
    if (*moments) return run_moments(mo, common);
    if (*moment_solve_cmd) return run_moment_solve(ms, common);
    if (*verify) return run_verify(verify_dir);
  } catch (const NotConverged& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNoConvergence;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitInvalid;
}
