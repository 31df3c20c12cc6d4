#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "movsrc/field_io.hpp"
#include "oracles.hpp"

using namespace movsrc;

namespace {

std::vector<double> gaussian_samples(const SpatialGrid& grid, double sigma, const Point& c = {0.0, 0.0, 0.0}) {
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Point x = grid.point(i);
    Point d{x[0] - c[0], x[1] - c[1], x[2] - c[2]};
    v[i] = std::pow(2.0 * pi * sigma * sigma, -0.5 * grid.dim()) *
           std::exp(-norm2(d, grid.dim()) / (2.0 * sigma * sigma));
  }
  return v;
}

/// Direct Riemann sum h^d sum v(x) e^{i x.xi}, written out without the
/// library's separable evaluation.
complex riemann_transform(const SpatialGrid& grid, const std::vector<double>& v, const Point& xi) {
  complex s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * std::polar(1.0, dot(grid.point(i), xi, grid.dim()));
  return s * grid.cell_volume();
}

}  // namespace

// ============================================================================
// Grid construction
// ============================================================================

TEST(Grid, SpacingAndNyquist3D) {
  const auto g = make_grid(3, 8, 1.0);
  EXPECT_DOUBLE_EQ(g.spacing(), 0.25);
  EXPECT_DOUBLE_EQ(g.freq_max(), 4.0 * pi);
  EXPECT_EQ(g.size(), 512u);
}

TEST(Grid, SpacingAndSize2D) {
  const auto g = make_grid(2, 16, 2.0);
  EXPECT_DOUBLE_EQ(g.spacing(), 0.25);
  EXPECT_EQ(g.size(), 256u);
  EXPECT_DOUBLE_EQ(g.coordinates().front(), -2.0);
  EXPECT_DOUBLE_EQ(g.coordinates().back(), 2.0 - 0.25);
  EXPECT_DOUBLE_EQ(g.frequencies()[8], 0.0);
  EXPECT_DOUBLE_EQ(g.frequencies()[0], -8.0 * pi / 2.0);
}

TEST(Grid, RejectsBadSizes) {
  EXPECT_THROW(make_grid(3, 7, 1.0), ValidationError);
  EXPECT_THROW(make_grid(3, 14, 1.0), ValidationError);  // factor 7
  EXPECT_THROW(make_grid(4, 8, 1.0), ValidationError);
  EXPECT_THROW(make_grid(2, 8, 0.0), ValidationError);
  EXPECT_NO_THROW(make_grid(3, 48, 1.0));
  EXPECT_NO_THROW(make_grid(2, 128, 1.0));
}

TEST(Grid, RavelRoundTripAndMirror) {
  const auto g = make_grid(3, 8, 1.0);
  for (std::size_t i = 0; i < g.size(); i += 37) {
    EXPECT_EQ(g.ravel(g.unravel(i)), i);
    const Point xi = g.frequency(i), m = g.frequency(g.mirror(i));
    for (int k = 0; k < 3; ++k) {
      // -xi, except at the Nyquist node which maps to itself
      if (g.unravel(i)[k] != 0) EXPECT_DOUBLE_EQ(m[k], -xi[k]);
      else EXPECT_DOUBLE_EQ(m[k], xi[k]);
    }
  }
}

// ============================================================================
// Forward and inverse DFT
// ============================================================================

TEST(Dft, ZeroMapsToZero) {
  const auto g = make_grid(2, 16, 1.0);
  const std::vector<double> v(g.size(), 0.0);
  const auto s = forward_dft(g, v);
  for (const auto& z : s.values) EXPECT_EQ(z, 0.0);
  const auto back = inverse_dft(s);
  for (double x : back) EXPECT_EQ(x, 0.0);
}

TEST(Dft, CenteredGaussianMatchesAnalyticPair) {
  const double sigma = 0.1;
  const auto g = make_grid(3, 32, 1.0);
  const auto v = gaussian_samples(g, sigma);
  const auto s = forward_dft(g, v);
  // Interior: |xi_k| <= xi_max / 2, where the periodic alias images of the
  // transform are below e^{-sigma^2 (1.5 xi_max)^2 / 2} ~ 1e-12.
  double err = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Point xi = g.frequency(i);
    if (std::max({std::abs(xi[0]), std::abs(xi[1]), std::abs(xi[2])}) > 0.5 * g.freq_max()) continue;
    err = std::max(err, std::abs(s.values[i] - std::exp(-0.5 * sigma * sigma * norm2(xi, 3))));
  }
  EXPECT_LT(err, 1e-8);
}

TEST(Dft, AgreesWithDirectRiemannSumAtRandomFrequencies) {
  const auto g = make_grid(3, 16, 1.0);
  const auto v = gaussian_samples(g, 0.15, {0.1, -0.2, 0.05});
  const auto s = forward_dft(g, v);
  std::mt19937 rng(11);
  std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1);
  for (int r = 0; r < 10; ++r) {
    const std::size_t i = pick(rng);
    const complex ref = riemann_transform(g, v, g.frequency(i));
    EXPECT_LT(std::abs(s.values[i] - ref), 1e-12) << "frequency index " << i;
    EXPECT_LT(std::abs(spectrum_at(g, v, g.frequency(i)) - ref), 1e-12);
  }
}

TEST(Dft, ShiftTheorem) {
  const double sigma = 0.1;
  const Point c{0.2, -0.1, 0.0};
  const auto g = make_grid(2, 64, 1.0);
  const auto s0 = forward_dft(g, gaussian_samples(g, sigma));
  const auto s1 = forward_dft(g, gaussian_samples(g, sigma, c));
  double err = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    err = std::max(err, std::abs(s1.values[i] - s0.values[i] * std::polar(1.0, dot(c, g.frequency(i), 2))));
  EXPECT_LT(err, 1e-8);
}

TEST(Dft, InverseRoundTripIsExact) {
  const auto g = make_grid(2, 48, 1.5);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  std::vector<double> v(g.size());
  for (auto& x : v) x = normal(rng);
  const auto back = inverse_dft(forward_dft(g, v));
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(back[i], v[i], 1e-12);
}

TEST(Dft, ParsevalHolds) {
  const auto g = make_grid(3, 16, 1.0);
  const auto v = gaussian_samples(g, 0.2, {0.1, 0.0, 0.0});
  EXPECT_NEAR(l2_norm(forward_dft(g, v)), l2_norm(g, v), 1e-12 * l2_norm(g, v));
}

TEST(Dft, InverseRejectsNonHermitianSpectrum) {
  const auto g = make_grid(2, 16, 1.0);
  SpectralField s{g, std::vector<complex>(g.size(), 0.0)};
  s.values[g.ravel({9, 8, 0})] = complex(0.0, 1.0);  // no conjugate partner
  EXPECT_THROW(inverse_dft(s), ValidationError);
}

// ============================================================================
// Field files
// ============================================================================

class FieldFileTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = std::filesystem::temp_directory_path() /
          ("movsrc_grid_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
           ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(dir);
  }
  void TearDown() override { std::filesystem::remove_all(dir); }

  std::filesystem::path dir;
};

TEST_F(FieldFileTest, RealRoundTripIsBitExact) {
  const auto g = make_grid(3, 8, 1.3);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(g.size());
  for (auto& x : v) x = u(rng) * 1e-300 + u(rng);
  write_field(dir / "f.bin", g, v, {{"note", "x"}});
  const auto f = read_field(dir / "f.bin");
  EXPECT_EQ(f.kind, "real");
  EXPECT_TRUE(f.grid == g);
  EXPECT_EQ(f.meta.at("note"), "x");
  ASSERT_EQ(f.real_values.size(), v.size());
  EXPECT_EQ(std::memcmp(f.real_values.data(), v.data(), v.size() * sizeof(double)), 0);
}

TEST_F(FieldFileTest, SpectralRoundTripIsBitExact) {
  const auto g = make_grid(2, 16, 1.0);
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(0.1 * static_cast<double>(i));
  const auto s = forward_dft(g, v);
  write_field(dir / "s.bin", s);
  const auto f = read_field(dir / "s.bin");
  EXPECT_EQ(f.kind, "spectral");
  ASSERT_EQ(f.spectral_values.size(), s.values.size());
  EXPECT_EQ(std::memcmp(f.spectral_values.data(), s.values.data(), s.values.size() * sizeof(complex)), 0);
}

TEST_F(FieldFileTest, TruncatedFileIsRejected) {
  const auto g = make_grid(2, 8, 1.0);
  std::vector<double> v(g.size(), 1.0);
  write_field(dir / "t.bin", g, v);
  std::filesystem::resize_file(dir / "t.bin", 8 * 10);
  EXPECT_THROW(read_field(dir / "t.bin"), ValidationError);
}

TEST_F(FieldFileTest, MissingSidecarIsRejected) {
  EXPECT_THROW(read_field(dir / "nothing.bin"), ValidationError);
}
