#include <gtest/gtest.h>

#include <filesystem>

#include "movsrc/model_io.hpp"
#include "oracles.hpp"

using namespace movsrc;

namespace {

SourceModel unit_model(OrbitFunction a, TemporalFunction g = TemporalFunction::constant(1.0, 1.0)) {
  return SourceModel(SourceProfile::gaussian(a.dim(), {0.0, 0.0, 0.0}, 0.1), std::move(g), std::move(a), 0.05);
}

OrbitFunction sampled_orbit(const std::function<Point(double)>& a, double T, int nodes, double bound) {
  std::vector<double> t(nodes + 1);
  std::vector<std::vector<double>> v(3, std::vector<double>(nodes + 1));
  for (int k = 0; k <= nodes; ++k) {
    t[k] = T * k / nodes;
    for (int j = 0; j < 3; ++j) v[j][k] = a(t[k])[j];
  }
  return OrbitFunction::piecewise_linear(3, t, v, bound);
}

}  // namespace

// ============================================================================
// Profiles
// ============================================================================

TEST(Profile, GaussianIsNormalizedAndTransformsAnalytically) {
  const auto f = SourceProfile::gaussian(3, {0.1, 0.0, -0.2}, 0.1, 2.5);
  EXPECT_DOUBLE_EQ(f.integral(), 2.5);
  const Point xi{3.0, -1.0, 2.0};
  const complex expect = 2.5 * std::exp(-0.5 * 0.01 * 14.0) * std::polar(1.0, 0.3 - 0.4);
  EXPECT_LT(std::abs(f.spectrum_at(xi) - expect), 1e-14);
  EXPECT_NEAR(f.support_radius(), std::hypot(0.1, 0.2) + 0.1 * std::sqrt(2.0 * std::log(1e12)), 1e-14);
}

TEST(Profile, CompactBumpIntegralAndTransformMatchRadialQuadrature) {
  for (int dim : {2, 3}) {
    const double w = 0.4;
    const auto f = SourceProfile::compact_bump(dim, {0.0, 0.0, 0.0}, w, 1.5);
    auto radial = [&](double r) { return 1.5 * oracle::bump(r / w); };
    EXPECT_NEAR(f.integral(), oracle::radial_integral(dim, radial, w), 1e-10) << "dim " << dim;
    for (double k : {1.0, 7.5, 20.0}) {
      Point xi{0.0, 0.0, 0.0};
      xi[0] = k * 0.6;
      xi[1] = k * 0.8;
      EXPECT_NEAR(f.spectrum_at(xi).real(), oracle::radial_transform(dim, radial, w, k), 1e-10)
          << "dim " << dim << " k " << k;
    }
  }
}

TEST(Profile, CompactBumpVanishesOutsideItsSupport) {
  const auto f = SourceProfile::compact_bump(2, {0.2, 0.0, 0.0}, 0.3);
  EXPECT_EQ(f({0.55, 0.0, 0.0}), 0.0);
  EXPECT_NEAR(f({0.2, 0.0, 0.0}), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(f.support_radius(), 0.5);
}

TEST(Profile, GridSampledInterpolatesLinearFunctionsExactly) {
  const auto g = make_grid(2, 16, 1.0);
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 + 0.5 * g.point(i)[0] - 0.25 * g.point(i)[1];
  const auto f = SourceProfile::grid_sampled(g, v, 0.9);
  EXPECT_NEAR(f({0.13, -0.41, 0.0}), 1.0 + 0.065 + 0.1025, 1e-14);
  EXPECT_THROW(SourceProfile::grid_sampled(g, std::vector<double>(3), 0.5), ValidationError);
}

// ============================================================================
// Temporal functions and orbits
// ============================================================================

TEST(Temporal, PolynomialAndSampledIntegrals) {
  const auto g = TemporalFunction::polynomial({1.0, 0.0, 3.0}, 2.0);
  EXPECT_NEAR(g.integral(), 2.0 + 8.0, 1e-13);
  EXPECT_NEAR(g.integrate([](double s) { return s; }), 2.0 + 12.0, 1e-12);
  const auto h = TemporalFunction::grid_sampled({0.0, 0.5, 1.0}, {0.0, 1.0, 0.0});
  EXPECT_DOUBLE_EQ(h.horizon(), 1.0);
  EXPECT_NEAR(h(0.25), 0.5, 1e-15);
  EXPECT_NEAR(h.integral(), 0.5, 1e-14);
  EXPECT_THROW(TemporalFunction::grid_sampled({0.1, 1.0}, {1.0, 1.0}), ValidationError);
}

TEST(Orbit, EvaluatesEachKind) {
  const auto lin = OrbitFunction::linear(2, {0.4, -0.3, 0.0}, 1.0, {0.1, 0.0, 0.0});
  EXPECT_NEAR(lin(0.5)[0], 0.3, 1e-15);
  EXPECT_NEAR(lin(0.5)[1], -0.15, 1e-15);
  const auto poly = OrbitFunction::polynomial(2, {{0.0, 0.0, 0.5}, {0.0, 1.0}}, 1.0);
  EXPECT_NEAR(poly(0.4)[0], 0.08, 1e-15);
  const auto pl = OrbitFunction::piecewise_linear(2, {0.0, 1.0, 2.0}, {{0.0, 1.0, 1.5}, {0.0, 0.0, 1.0}}, 2.0);
  EXPECT_NEAR(pl(1.5)[0], 1.25, 1e-15);
  EXPECT_NEAR(pl(3.0)[1], 1.0, 1e-15);  // held constant past the last node
}

// ============================================================================
// Source evaluation and validation
// ============================================================================

TEST(Source, ZeroIntensityGivesZero) {
  const auto m = unit_model(OrbitFunction::linear(3, {1.0, 0.0, 0.0}, 2.0), TemporalFunction::constant(0.0, 1.0));
  EXPECT_EQ(eval_source(m, {0.1, 0.2, 0.3}, 0.4), 0.0);
}

TEST(Source, StationaryCaseSeparates) {
  const auto m = unit_model(OrbitFunction::linear(3, {0.0, 0.0, 0.0}, 0.5), TemporalFunction::polynomial({1.0, 2.0}, 1.0));
  const Point x{0.05, 0.0, -0.1};
  EXPECT_DOUBLE_EQ(eval_source(m, x, 0.3), m.profile(x) * 1.6);
}

TEST(Source, MovingGaussianAtItsCenter) {
  const auto m = unit_model(OrbitFunction::linear(3, {1.0, 0.0, 0.0}, 2.0));
  EXPECT_NEAR(eval_source(m, {0.5, 0.0, 0.0}, 0.5), std::pow(2.0 * pi * 0.01, -1.5), 1e-9);
  EXPECT_THROW(eval_source(m, {0.0, 0.0, 0.0}, 1.5), ValidationError);
}

TEST(Validation, LinearDiagonalOrbitPassesIp2) {
  const auto m = unit_model(OrbitFunction::linear(3, {1.0, 1.0, 1.0}, 2.0));
  const auto rep = validate(m, Purpose::ip2);
  EXPECT_TRUE(rep.passed()) << rep.failures();
}

TEST(Validation, OscillatingComponentFailsMonotonicity) {
  const auto a = sampled_orbit([](double t) { return Point{std::sin(2.0 * pi * t), t, t}; }, 1.0, 64, 2.0);
  const auto rep = validate(unit_model(a), Purpose::ip2);
  EXPECT_FALSE(rep.passed());
  ASSERT_NE(rep.find("orbit-monotone-1"), nullptr);
  EXPECT_FALSE(rep.find("orbit-monotone-1")->passed);
  EXPECT_TRUE(rep.find("orbit-monotone-1")->witness.has_value());
  EXPECT_TRUE(rep.find("orbit-monotone-2")->passed);
}

TEST(Validation, SignChangingIntensityFailsPositivity) {
  const auto m = unit_model(OrbitFunction::linear(3, {1.0, 1.0, 1.0}, 2.0), TemporalFunction::polynomial({-0.5, 1.0}, 1.0));
  const auto rep = validate(m, Purpose::ip2);
  ASSERT_NE(rep.find("temporal-positive"), nullptr);
  EXPECT_FALSE(rep.find("temporal-positive")->passed);
  EXPECT_TRUE(validate(m, Purpose::ip1).passed());
}

TEST(Validation, OrbitLeavingItsBallFails) {
  const auto m = unit_model(OrbitFunction::linear(3, {3.0, 0.0, 0.0}, 2.0));
  const auto rep = validate(m, Purpose::ip1);
  EXPECT_FALSE(rep.find("orbit-bounded")->passed);
  EXPECT_THROW(require_valid(m, Purpose::ip1), ValidationError);
}

TEST(Validation, OrbitNotStartingAtOriginFailsIp2Only) {
  const auto m = unit_model(OrbitFunction::linear(3, {0.5, 0.5, 0.5}, 2.0, {0.1, 0.0, 0.0}));
  EXPECT_TRUE(validate(m, Purpose::ip1).passed());
  EXPECT_FALSE(validate(m, Purpose::ip2).find("orbit-origin")->passed);
}

// ============================================================================
// Model files
// ============================================================================

namespace {

nlohmann::json base_model() {
  return nlohmann::json::parse(R"({
    "dim": 2, "margin": 0.05,
    "profile": {"kind": "gaussian", "center": [0.0, 0.0], "sigma": 0.12},
    "temporal": {"kind": "constant", "value": 1.0, "horizon": 1.0},
    "orbit": {"kind": "linear", "velocity": [0.4, 0.3], "bound": 1.0}
  })");
}

std::string error_of(const nlohmann::json& j) {
  try {
    model_from_json(j);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(ModelFile, ParsesEveryKind) {
  const auto m = model_from_json(base_model());
  EXPECT_EQ(m.dim(), 2);
  EXPECT_NEAR(m.orbit(1.0)[0], 0.4, 1e-15);

  auto j = base_model();
  j["profile"] = {{"kind", "compact-bump"}, {"width", 0.3}};
  j["temporal"] = {{"kind", "grid-sampled"}, {"times", {0.0, 0.5, 1.0}}, {"values", {1.0, 2.0, 1.0}}};
  j["orbit"] = {{"kind", "piecewise-linear"}, {"times", {0.0, 1.0}}, {"values", {{0.0, 0.2}, {0.0, 0.1}}}, {"bound", 1.0}};
  const auto m2 = model_from_json(j);
  EXPECT_EQ(m2.profile.kind(), ProfileKind::compact_bump);
  EXPECT_NEAR(m2.temporal(0.25), 1.5, 1e-15);
}

TEST(ModelFile, ErrorsNameTheOffendingField) {
  auto j = base_model();
  j["profile"].erase("sigma");
  EXPECT_EQ(error_of(j), "model.profile.sigma: missing");

  j = base_model();
  j["orbit"]["velocity"] = {1.0};
  EXPECT_EQ(error_of(j), "model.orbit.velocity: expected an array of 2 numbers");

  j = base_model();
  j["temporal"]["kind"] = "sinusoid";
  EXPECT_NE(error_of(j).find("model.temporal.kind"), std::string::npos);

  j = base_model();
  j["dim"] = 4;
  EXPECT_EQ(error_of(j), "model.dim: must be 2 or 3");

  j = base_model();
  j["profile"]["sigma"] = -1.0;
  EXPECT_NE(error_of(j).find("model.profile"), std::string::npos);
}

TEST(ModelFile, ReadsBundledSamples) {
  const std::filesystem::path samples = std::filesystem::path(__FILE__).parent_path().parent_path().parent_path() / "samples";
  for (const char* name : {"linear_orbit_2d.json", "quadratic_orbit_2d.json", "profile_ip1_2d.json",
                           "stationary_3d.json", "moving_bump_3d.json", "zero_source_2d.json"}) {
    EXPECT_NO_THROW(read_model((samples / name).string())) << name;
  }
}
