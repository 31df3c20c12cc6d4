// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "movsrc/ip1.hpp"
#include "movsrc/ip2.hpp"
#include "movsrc/model_io.hpp"
#include "oracles.hpp"

using namespace movsrc;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[1024];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

oracle::Vec vec(const Point& p) { return {p[0], p[1], p[2]}; }

/// Mass of every forward run made by the suite, for the mass-balance criterion.
struct MassRecord {
  std::string label;
  double mass = 0.0;
  double expected = 0.0;
};
std::vector<MassRecord> g_mass;

FinalField forward(const std::string& label, const SourceModel& m, const SpatialGrid& grid, const TimeQuadrature& quad,
                   const SpectralOptions& opt = {}) {
  auto u = solve_spectral(m, grid, quad, opt);
  g_mass.push_back({label, u.integral(), m.profile.integral() * m.temporal.integral()});
  return u;
}

SourceModel sample_model(const std::string& name) { return read_model((fs::path(MOVSRC_SAMPLES) / name).string()); }

/// u_hat(xi) = f_hat(xi) \int e^{-(T-s)|xi|^2} e^{i a(s).xi} g(s) ds by adaptive quadrature.
SpectrumFunction exact_spectrum(const SourceModel& m) {
  return [&m](const Point& xi) {
    const int d = m.dim();
    const double T = m.horizon(), k2 = norm2(xi, d);
    const complex F = oracle::integrate_complex(
        [&](double s) { return std::exp(-(T - s) * k2) * std::polar(1.0, dot(m.orbit(s), xi, d)) * m.temporal(s); },
        0.0, T, 1e-13);
    return m.profile.spectrum_at(xi) * F;
  };
}

double relative_l2(const std::vector<double>& x, const std::vector<double>& ref) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - ref[i]) * (x[i] - ref[i]);
    den += ref[i] * ref[i];
  }
  return std::sqrt(num / den);
}

// ============================================================================
// 1. Forward correctness against the Gaussian closed form
// ============================================================================

Verdict forward_closed_form() {
  const SourceModel m(SourceProfile::gaussian(3, {}, 0.1), TemporalFunction::constant(1.0, 0.1),
                      OrbitFunction::linear(3, {0.0, 0.0, 0.0}, 0.01), 0.01);
  const auto grid = make_grid(3, 48, default_half_width(m));
  const auto u = forward("criterion 1", m, grid, TimeQuadrature::composite_gauss_legendre(0.1));
  // the exact field is radial: one 1-D integral per distinct |x|^2
  std::map<double, double> cache;
  std::vector<double> ref(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Point x = grid.point(i);
    const double r2 = norm2(x, 3);
    auto it = cache.find(r2);
    if (it == cache.end())
      it = cache.emplace(r2, oracle::gaussian_final_field(3, vec(x), 0.1, 1.0, 0.1, [](double) { return oracle::Vec{}; },
                                                          [](double) { return 1.0; }))
               .first;
    ref[i] = it->second;
  }
  const double err = relative_l2(u.values, ref);
  return {err < 1e-4, fmt("relative L2 error %.3e (gate 1e-4) on 48^3, L_half=%.4f", err, grid.half_width())};
}

// ============================================================================
// 2. Spectral solver against the direct-quadrature oracle
// ============================================================================

Verdict forward_cross_validation() {
  const SourceModel m(SourceProfile::gaussian(3, {}, 0.1), TemporalFunction::constant(1.0, 0.2),
                      OrbitFunction::linear(3, {0.5, 0.25, 0.0}, 0.15));
  const auto grid = make_grid(3, 48, default_half_width(m));
  const auto quad = TimeQuadrature::composite_gauss_legendre(0.2);
  const auto u = forward("criterion 2", m, grid, quad);

  // 20 random grid nodes inside the source ball B_R
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> pick(0, grid.size() - 1);
  std::vector<Point> pts;
  std::vector<double> spectral;
  while (pts.size() < 20) {
    const std::size_t i = pick(rng);
    if (norm(grid.point(i), 3) >= m.radius()) continue;
    pts.push_back(grid.point(i));
    spectral.push_back(u.values[i]);
  }
  const auto direct = solve_oracle(m, grid, quad, pts, {.resolved_widths = 2.0});
  const double err = relative_l2(direct, spectral);
  return {err < 2e-3, fmt("relative difference %.3e (gate 2e-3) at 20 random nodes in B_R, 48^3", err)};
}

// ============================================================================
// 4. Transfer function closed forms
// ============================================================================

Verdict transfer_closed_forms() {
  const double T = 0.5;
  const auto still = OrbitFunction::linear(3, {0.0, 0.0, 0.0}, 0.1);
  const auto g = TemporalFunction::constant(1.0, T);
  const auto grid = make_grid(3, 16, 2.0);
  // T |xi|^2 reaches ~240 at the grid corners; panels graded toward s = T
  // resolve the boundary layer there
  const auto F = transfer_real(still, g, grid, TimeQuadrature::graded_gauss_legendre(T, 12, 8));
  double err = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double ref = oracle::stationary_transfer(T, norm2(grid.frequency(i), 3));
    err = std::max(err, std::abs(F.values[i] - ref) / ref);
  }
  const auto ray = transfer_ray_log(still, TemporalFunction::constant(1.0, 1.0), {1.0, 0.0, 0.0}, {10.0},
                                    TimeQuadrature::composite_gauss_legendre(1.0, 32, 16));
  const double log_err = std::abs(ray.log_values[0] - oracle::stationary_ray_log(1.0, 100.0));
  return {err < 1e-10 && log_err < 1e-8,
          fmt("max relative F error %.2e (gate 1e-10); ray log error at r=10 %.2e (gate 1e-8)", err, log_err)};
}

// ============================================================================
// 5. Growth of the transfer function on the imaginary ray
// ============================================================================

Verdict transfer_growth() {
  const std::vector<double> radii{2.0, 4.0, 8.0, 16.0, 32.0};
  const std::vector<Point> etas{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.6, -0.8, 0.0}, {-0.3, 0.5, 0.8}};
  std::vector<SourceModel> models;
  for (const char* name : {"linear_orbit_2d.json", "quadratic_orbit_2d.json", "moving_bump_3d.json"})
    models.push_back(sample_model(name));
  models.emplace_back(SourceProfile::gaussian(3, {}, 0.1), TemporalFunction::polynomial({0.2, 1.0, -0.5}, 1.5),
                      OrbitFunction::polynomial(3, {{0.0, 0.0, 0.3}, {0.0, -0.4}, {0.0, 0.1, 0.1}}, 2.0));
  double min_slope = std::numeric_limits<double>::infinity();
  int fits = 0;
  for (const auto& m : models) {
    require_valid(m, Purpose::ip2);
    for (const auto& eta : etas) {
      const auto s = transfer_ray_log(m, eta, radii, TimeQuadrature::composite_gauss_legendre(m.horizon(), 16, 8));
      min_slope = std::min(min_slope, verify_growth(s).slope);
      ++fits;
    }
  }
  const double T = 0.7;
  const auto s = transfer_ray_log(OrbitFunction::linear(3, {0.0, 0.0, 0.0}, 0.1), TemporalFunction::constant(1.0, T),
                                  {0.0, 1.0, 0.0}, radii, TimeQuadrature::composite_gauss_legendre(T, 32, 16));
  const double slope = verify_growth(s).slope;
  const bool pass = min_slope > 0.0 && slope >= 0.9 * T && slope <= 1.0 * T;
  return {pass, fmt("min slope %.4f over %d validated (model, eta) pairs; closed-form case slope/T = %.5f", min_slope,
                    fits, slope / T)};
}

// ============================================================================
// 6. Profile round trip
// ============================================================================

Verdict profile_round_trip() {
  const SourceModel m(SourceProfile::gaussian(2, {}, 0.12), TemporalFunction::constant(1.0, 0.5),
                      OrbitFunction::linear(2, {0.3, 0.0, 0.0}, 0.2));
  const auto grid = make_grid(2, 128, default_half_width(m));
  // data with a 16x10 time rule, inversion with 8x8
  const auto data = forward("criterion 6", m, grid, TimeQuadrature::composite_gauss_legendre(0.5, 16, 10));
  const auto quad = TimeQuadrature::composite_gauss_legendre(0.5, 8, 8);
  const auto truth = m.profile.sample(grid);

  const auto clean = reconstruct_profile(data, m.orbit, m.temporal, {.lambda = 1e-10}, quad);
  const double clean_err = relative_l2(clean.values, truth);

  const auto noisy = add_noise(data, 0.01, 7);
  const double level = noisy.noise->sigma_abs * std::sqrt(grid.size() * grid.cell_volume());
  const auto choice = choose_lambda_discrepancy(noisy, m.orbit, m.temporal, level, quad);
  DeconvolutionConfig cfg{.lambda = choice.lambda,
                          .support_radius = m.profile.support_radius(),
                          .project_support = true};
  const auto rec = reconstruct_profile(noisy, m.orbit, m.temporal, cfg, quad);
  const double noisy_err = relative_l2(rec.values, truth);
  return {clean_err < 0.02 && noisy_err < 0.15,
          fmt("noiseless error %.4f (gate 0.02); 1%% noise error %.4f (gate 0.15) at discrepancy lambda %.3e", clean_err,
              noisy_err, choice.lambda)};
}

// ============================================================================
// 7. Moment identity
// ============================================================================

Verdict moment_identity() {
  const double v = 0.4, T = 1.0;
  const SourceModel m(SourceProfile::gaussian(2, {}, 0.12), TemporalFunction::constant(1.0, T),
                      OrbitFunction::linear(2, {v, 0.3, 0.0}, 1.0));
  const auto u = exact_spectrum(m);
  const double m1 = v * T * T / 2.0, m2 = v * v * T * T * T / 3.0;
  const auto at = extract_low_moments(u, m.profile, m.temporal, 0, 0.05);
  const double e1 = std::abs(at.m1 - m1) / m1, e2 = std::abs(at.m2 - m2) / m2;
  // order check at steps where the truncation error dominates round-off
  const auto wide = extract_low_moments(u, m.profile, m.temporal, 0, 0.2);
  const auto narrow = extract_low_moments(u, m.profile, m.temporal, 0, 0.1);
  const double r1 = std::abs(wide.m1 - m1) / std::abs(narrow.m1 - m1);
  const double r2 = std::abs(wide.m2 - m2) / std::abs(narrow.m2 - m2);
  const bool pass = e1 < 0.01 && e2 < 0.01 && r1 > 3.0 && r1 < 5.0 && r2 > 3.0 && r2 < 5.0;
  return {pass, fmt("relative errors m1 %.2e, m2 %.2e at delta=0.05 (gate 1e-2); error ratio on halving delta: "
                    "m1 %.2f, m2 %.2f (expect ~4)",
                    e1, e2, r1, r2)};
}

// ============================================================================
// 8. Orbit round trip
// ============================================================================

Verdict orbit_round_trip() {
  const auto inversion = TimeQuadrature::composite_gauss_legendre(1.0, 8, 8);
  std::string detail;
  bool pass = true;
  for (const auto& [name, gate] : {std::pair{"linear_orbit_2d.json", 0.01}, std::pair{"quadratic_orbit_2d.json", 0.03}}) {
    const auto m = sample_model(name);
    const double R2 = m.orbit.bound();
    const auto grid = make_grid(2, 128, default_half_width(m));
    const auto data = forward(std::string("criterion 8 ") + name, m, grid,
                              TimeQuadrature::composite_gauss_legendre(m.horizon(), 16, 10));
    const auto freqs = frequency_samples_sobol(2, 200, 8.0 / R2);
    const auto est = reconstruct_orbit(data, m.profile, m.temporal, 8, freqs, inversion);
    double err = 0.0;
    for (std::size_t k = 0; k < est.times.size(); ++k)
      for (int j = 0; j < 2; ++j) err = std::max(err, std::abs(est.values[j][k] - m.orbit(est.times[k])[j]));
    pass = pass && err < gate * R2;
    detail += fmt("%s max node error %.2e R2 (gate %.2f R2); ", name, err / R2, gate);
  }
  return {pass, detail.substr(0, detail.size() - 2)};
}

// ============================================================================
// 9. Monotone function from moments
// ============================================================================

Verdict moment_solver() {
  MomentVector mu;
  for (int n = 0; n <= 12; ++n) mu.values.push_back(1.0 / (n + 1));
  const auto g = TemporalFunction::constant(1.0, 1.0);
  auto sup_error = [](const MonotoneEstimate& a, const std::function<double(double)>& f) {
    double e = 0.0;
    for (int i = 0; i <= 1000; ++i) e = std::max(e, std::abs(a(i / 1000.0) - f(i / 1000.0)));
    return e;
  };
  const auto base = moment_solve(mu, g, 1, 6);
  const double err = sup_error(base, [](double s) { return s; });

  // random monotone starts: f(0) = 0 plus sorted positive increments
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> inc(0.05, 1.0);
  std::vector<MonotoneEstimate> runs;
  double worst = 0.0;
  for (int r = 0; r < 5; ++r) {
    MomentSolveOptions opt;
    std::vector<double> init{0.0};
    for (int k = 1; k <= 6; ++k) init.push_back(init.back() + inc(rng) * 0.4);
    opt.init = init;
    runs.push_back(moment_solve(mu, g, 1, 6, opt));
    worst = std::max(worst, sup_error(runs.back(), [](double s) { return s; }));
  }
  double spread = 0.0;
  for (const auto& a : runs)
    for (const auto& b : runs) spread = std::max(spread, sup_error(a, [&](double s) { return b(s); }));
  return {err < 0.01 && spread < 0.01,
          fmt("sup error %.2e (gate 1e-2); 5 random starts: worst error %.2e, sup spread %.2e (gate 1e-2)", err, worst,
              spread)};
}

// ============================================================================
// 10. Jacobian integrity
// ============================================================================

template <class Problem>
double jacobian_mismatch(const Problem& p, const Eigen::VectorXd& theta) {
  const Eigen::MatrixXd J = p.jacobian(theta);
  Eigen::MatrixXd fd(J.rows(), J.cols());
  const double h = 1e-6;
  for (int c = 0; c < theta.size(); ++c) {
    Eigen::VectorXd tp = theta, tm = theta;
    tp[c] += h;
    tm[c] -= h;
    fd.col(c) = (p.residual(tp) - p.residual(tm)) / (2.0 * h);
  }
  return (J - fd).norm() / J.norm();
}

Verdict jacobian_integrity() {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> unif(0.1, 0.5);
  double worst_orbit = 0.0, worst_moment = 0.0;

  const auto m = sample_model("moving_bump_3d.json");
  const auto quad = TimeQuadrature::composite_gauss_legendre(m.horizon(), 8, 8);
  const auto freqs = drop_profile_zeros(m.profile, frequency_samples_sobol(3, 100, 8.0 / m.orbit.bound()));
  const auto u = exact_spectrum(m);
  std::vector<complex> data;
  for (const auto& xi : freqs) data.push_back(u(xi));
  const OrbitFitProblem orbit(m.profile, m.temporal, quad, freqs, data, 8, {1, -1, 1});

  MomentVector mu;
  for (int n = 0; n <= 12; ++n) mu.values.push_back(1.0 / (n + 1));
  const MomentFitProblem moments(mu, TemporalFunction::constant(1.0, 1.0), 1, 6, 0.0, 0.0);

  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd a(orbit.parameters()), b(6);
    for (auto& x : a) x = unif(rng);
    for (auto& x : b) x = unif(rng);
    worst_orbit = std::max(worst_orbit, jacobian_mismatch(orbit, a));
    worst_moment = std::max(worst_moment, jacobian_mismatch(moments, b));
  }
  return {worst_orbit < 1e-6 && worst_moment < 1e-6,
          fmt("worst relative mismatch over 5 random points: orbit fit %.2e, moment fit %.2e (gate 1e-6)", worst_orbit,
              worst_moment)};
}

// ============================================================================
// 11. Determinism
// ============================================================================

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(const std::string& args) {
  const std::string cmd = std::string("\"") + MOVSRC_CLI + "\" " + args + " > /dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

Verdict determinism() {
  const fs::path dir = fs::temp_directory_path() / "movsrc_acceptance_determinism";
  const std::string model = (fs::path(MOVSRC_SAMPLES) / "quadratic_orbit_2d.json").string();
  std::map<std::string, std::string> first;
  int compared = 0, differing = 0;
  for (int pass = 0; pass < 2; ++pass) {
    fs::remove_all(dir);
    const std::string sim = (dir / "sim").string(), inv = (dir / "inv").string();
    if (cli("simulate --model " + model + " --n 64 --noise 0.001 --seed 11 --threads 2 --quad-panels 12 --out " + sim) != 0 ||
        cli("invert-orbit --data " + sim + "/field.bin --model " + model + " --seed 11 --threads 2 --out " + inv) != 0)
      return {false, "CLI pipeline failed"};
    for (const auto& sub : {"sim", "inv"}) {
      const auto run = nlohmann::json::parse(slurp(dir / sub / "run.json"));
      for (const auto& [name, sha] : run.at("artifacts").items()) {
        const std::string key = std::string(sub) + "/" + name;
        if (pass == 0) {
          first[key] = sha;
        } else {
          ++compared;
          if (first[key] != sha.get<std::string>()) ++differing;
        }
      }
    }
  }
  fs::remove_all(dir);

  // in-process: threaded solvers repeated with identical settings
  const auto m = sample_model("quadratic_orbit_2d.json");
  const auto grid = make_grid(2, 128, default_half_width(m));
  const auto quad = TimeQuadrature::composite_gauss_legendre(m.horizon());
  const auto u1 = forward("criterion 11 (a)", m, grid, quad, {.threads = 2});
  const auto u2 = forward("criterion 11 (b)", m, grid, quad, {.threads = 2});
  const auto freqs = frequency_samples_sobol(2, 200, 8.0);
  OrbitFitOptions opt;
  opt.threads = 2;
  const auto e1 = reconstruct_orbit(u1, m.profile, m.temporal, 8, freqs, quad, opt);
  const auto e2 = reconstruct_orbit(u2, m.profile, m.temporal, 8, freqs, quad, opt);
  const bool same = u1.values == u2.values && e1.values == e2.values;
  return {differing == 0 && compared > 0 && same,
          fmt("%d CLI artifacts compared across two runs, %d differ (sha256); threaded in-process repeats %s", compared,
              differing, same ? "bit-identical" : "DIFFER")};
}

// ============================================================================
// 3. Mass balance over every forward run above
// ============================================================================

Verdict mass_balance() {
  double worst = 0.0;
  std::string where;
  for (const auto& r : g_mass) {
    const double e = std::abs(r.mass - r.expected) / std::abs(r.expected);
    if (e >= worst) {
      worst = e;
      where = r.label;
    }
  }
  return {!g_mass.empty() && worst < 1e-6,
          fmt("worst relative mass error %.2e (gate 1e-6) over %zu forward runs (%s)", worst, g_mass.size(), where.c_str())};
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Verdict()>>> criteria{
      {1, forward_closed_form}, {2, forward_cross_validation}, {4, transfer_closed_forms}, {5, transfer_growth},
      {6, profile_round_trip},  {7, moment_identity},          {8, orbit_round_trip},      {9, moment_solver},
      {10, jacobian_integrity}, {11, determinism},             {3, mass_balance}};
  std::map<int, std::string> lines;
  int failures = 0;
  for (const auto& [id, check] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!v.pass) ++failures;
    lines[id] = fmt("ACCEPTANCE %d: %s - %s [%.2f s]", id, v.pass ? "PASS" : "FAIL", v.detail.c_str(), secs);
  }
  for (const auto& [id, line] : lines) std::cout << line << "\n";
  std::cout << (failures == 0 ? "ALL ACCEPTANCE CRITERIA PASSED" : fmt("%d ACCEPTANCE CRITERIA FAILED", failures))
            << std::endl;
  return failures == 0 ? 0 : 1;
}
