#pragma once

#include <Eigen/Eigenvalues>

#include <optional>
#include <random>

#include "movsrc/transfer.hpp"

namespace movsrc {

enum class Provenance { spectral, oracle, file };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::spectral: return "spectral";
    case Provenance::oracle: return "oracle";
    case Provenance::file: return "file";
  }
  return "unknown";
}

struct NoiseRecord {
  double sigma_rel = 0.0;
  double sigma_abs = 0.0;
  std::uint64_t seed = 0;
};

/// Final-time data u(., T) on a grid.
struct FinalField {
  SpatialGrid grid;
  std::vector<double> values;
  double horizon = 0.0;
  Provenance provenance = Provenance::spectral;
  std::optional<NoiseRecord> noise;

  double max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }

  /// \int u(x, T) dx by the midpoint rule.
  double integral() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * grid.cell_volume();
  }
};

namespace detail {

inline void require_grid_holds_model(const SourceModel& model, const SpatialGrid& grid) {
  if (grid.dim() != model.dim()) throw ValidationError("grid dimension does not match the model");
  if (!(grid.half_width() > model.radius()))
    throw ValidationError("grid half-width " + std::to_string(grid.half_width()) +
                          " does not contain the source ball R = " + std::to_string(model.radius()));
}

}  // namespace detail

struct SpectralOptions {
  /// For separable (Gaussian) profiles, fold the periodic images
  /// xi + 2 xi_max p, |p_k| <= alias_images, into each frequency node so the
  /// inverse transform returns exact point samples of u(., T). Zero gives the
  /// plain product of the sampled profile's DFT with F.
  int alias_images = 2;
  int threads = 1;
};

namespace detail {

// Separable evaluation of sum_p f_hat(xi + P p) F(xi + P p) on the grid.
inline std::vector<complex> folded_spectrum(const SourceModel& model, const SpatialGrid& grid,
                                            const TimeQuadrature& quad, const SpectralOptions& opt) {
  const int d = grid.dim(), n = grid.n();
  const std::size_t M = quad.size();
  const double T = model.horizon();
  const double period = 2.0 * grid.freq_max();
  const auto& xi = grid.frequencies();

  std::vector<complex> coef(M);
  std::array<std::vector<complex>, 3> axis;
  for (int k = 0; k < d; ++k) axis[k].assign(M * n, 0.0);
  for (std::size_t q = 0; q < M; ++q) {
    const double s = quad.nodes[q];
    coef[q] = model.profile.amplitude() * quad.weights[q] * model.temporal(s);
    const Point a = model.orbit(s);
    for (int k = 0; k < d; ++k)
      for (int i = 0; i < n; ++i)
        for (int p = -opt.alias_images; p <= opt.alias_images; ++p) {
          const double w = xi[i] + p * period;
          axis[k][q * n + i] += model.profile.axis_spectrum(k, w) * std::exp(-(T - s) * w * w) *
                                std::polar(1.0, a[k] * w);
        }
  }

  std::vector<complex> out(grid.size());
  parallel_for(static_cast<std::size_t>(n), opt.threads, [&](std::size_t i0) {
    std::vector<complex> partial(M);
    if (d == 2) {
      for (std::size_t q = 0; q < M; ++q) partial[q] = coef[q] * axis[0][q * n + i0];
      for (int i1 = 0; i1 < n; ++i1) {
        complex acc = 0.0;
        for (std::size_t q = 0; q < M; ++q) acc += partial[q] * axis[1][q * n + i1];
        out[i0 * n + i1] = acc;
      }
      return;
    }
    for (int i1 = 0; i1 < n; ++i1) {
      for (std::size_t q = 0; q < M; ++q) partial[q] = coef[q] * axis[0][q * n + i0] * axis[1][q * n + i1];
      for (int i2 = 0; i2 < n; ++i2) {
        complex acc = 0.0;
        for (std::size_t q = 0; q < M; ++q) acc += partial[q] * axis[2][q * n + i2];
        out[(i0 * n + i1) * n + i2] = acc;
      }
    }
  });
  return out;
}

}  // namespace detail

/// Spectrum u_hat(., T) = f_hat . F on the grid's frequency nodes. Nyquist
/// rows are symmetrized so the spectrum belongs to a real field.
inline SpectralField final_spectrum(const SourceModel& model, const SpatialGrid& grid,
                                    const TimeQuadrature& quad, const SpectralOptions& opt = {}) {
  require_valid(model, Purpose::ip1);
  detail::require_grid_holds_model(model, grid);
  detail::require_matching_horizon(model.temporal, quad);
  if (opt.alias_images < 0) throw ValidationError("alias_images must be non-negative");
  SpectralField spec;
  if (opt.alias_images > 0 && model.profile.separable_spectrum()) {
    spec.grid = grid;
    spec.values = detail::folded_spectrum(model, grid, quad, opt);
  } else {
    spec = forward_dft(grid, model.profile.sample(grid));
    const auto F = transfer_grid_values(model.orbit, model.temporal, grid, quad, opt.threads);
    for (std::size_t i = 0; i < F.size(); ++i) spec.values[i] *= F[i];
  }
  symmetrize(spec);
  return spec;
}

/// u(., T) through the Fourier representation of the Duhamel integral.
inline FinalField solve_spectral(const SourceModel& model, const SpatialGrid& grid,
                                 const TimeQuadrature& quad, const SpectralOptions& opt = {}) {
  FinalField out;
  out.grid = grid;
  out.values = inverse_dft(final_spectrum(model, grid, quad, opt));
  out.horizon = model.horizon();
  out.provenance = Provenance::spectral;
  return out;
}

/// Gauss-Hermite rule for \int e^{-z^2} phi(z) dz (Golub-Welsch).
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussHermite(int n) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(0.5 * k);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(J);
    nodes.resize(n);
    weights.resize(n);
    for (int k = 0; k < n; ++k) {
      nodes[k] = eig.eigenvalues()(k);
      const double v0 = eig.eigenvectors()(0, k);
      weights[k] = std::sqrt(pi) * v0 * v0;
    }
  }
};

struct OracleOptions {
  /// Kernel widths sqrt(2 tau) below this many grid spacings switch from the
  /// midpoint rule to the scaled Gauss-Hermite form.
  double resolved_widths = 2.0;
  int hermite_nodes = 32;
  int threads = 1;
};

/**
 * Direct quadrature of u(x, T) = \int_0^T \int G(x - y, T - s) f(y - a(s)) g(s) dy ds
 * at the given points, with G(x, t) = (4 pi t)^{-d/2} e^{-|x|^2 / 4t}.
 *
 * Time: the rule `quad` is mapped onto q in [0, sqrt(T)] with T - s = q^2.
 * Space: when the kernel is resolved on the grid, the midpoint rule over the
 * grid nodes y; otherwise the substitution y = x - 2q z turns the kernel into
 * e^{-|z|^2} and the inner integral is done by tensor Gauss-Hermite.
 * No Fourier transforms are involved.
 */
inline std::vector<double> solve_oracle(const SourceModel& model, const SpatialGrid& grid,
                                        const TimeQuadrature& quad, std::span<const Point> points,
                                        const OracleOptions& opt = {}) {
  if (points.empty()) throw ValidationError("solve_oracle: empty evaluation point list");
  require_valid(model, Purpose::ip1);
  detail::require_grid_holds_model(model, grid);
  detail::require_matching_horizon(model.temporal, quad);

  const int d = grid.dim(), n = grid.n();
  const double T = model.horizon();
  const double h = grid.spacing();
  const double sqrtT = std::sqrt(T);
  const auto& y = grid.coordinates();
  const GaussHermite gh(opt.hermite_nodes);
  const int K = opt.hermite_nodes;
  const double gh_norm = std::pow(pi, -0.5 * d);

  std::vector<double> out(points.size(), 0.0);
  std::vector<double> fs(grid.size());

  for (std::size_t j = 0; j < quad.size(); ++j) {
    const double q = sqrtT * quad.nodes[j] / T;
    const double wq = sqrtT * quad.weights[j] / T;
    const double tau = q * q;
    const double s = T - tau;
    const double gs = model.temporal(s);
    const double time_weight = wq * 2.0 * q * gs;
    if (time_weight == 0.0) continue;
    const Point a = model.orbit(s);

    if (std::sqrt(2.0 * tau) >= opt.resolved_widths * h) {
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const Point p = grid.point(i);
        fs[i] = model.profile(Point{p[0] - a[0], p[1] - a[1], p[2] - a[2]});
      }
      parallel_for(points.size(), opt.threads, [&](std::size_t pi_) {
        const Point& x = points[pi_];
        std::array<std::vector<double>, 3> ker;
        for (int k = 0; k < d; ++k) {
          ker[k].resize(n);
          for (int i = 0; i < n; ++i)
            ker[k][i] = h * std::exp(-(x[k] - y[i]) * (x[k] - y[i]) / (4.0 * tau)) / std::sqrt(4.0 * pi * tau);
        }
        double acc = 0.0;
        if (d == 2) {
          for (int i0 = 0; i0 < n; ++i0) {
            double row = 0.0;
            for (int i1 = 0; i1 < n; ++i1) row += fs[static_cast<std::size_t>(i0) * n + i1] * ker[1][i1];
            acc += row * ker[0][i0];
          }
        } else {
          for (int i0 = 0; i0 < n; ++i0) {
            double plane = 0.0;
            for (int i1 = 0; i1 < n; ++i1) {
              double row = 0.0;
              const std::size_t base = (static_cast<std::size_t>(i0) * n + i1) * n;
              for (int i2 = 0; i2 < n; ++i2) row += fs[base + i2] * ker[2][i2];
              plane += row * ker[1][i1];
            }
            acc += plane * ker[0][i0];
          }
        }
        out[pi_] += time_weight * acc;
      });
    } else {
      const double scale = 2.0 * q;
      parallel_for(points.size(), opt.threads, [&](std::size_t pi_) {
        const Point& x = points[pi_];
        double acc = 0.0;
        if (d == 2) {
          for (int i0 = 0; i0 < K; ++i0)
            for (int i1 = 0; i1 < K; ++i1)
              acc += gh.weights[i0] * gh.weights[i1] *
                     model.profile(Point{x[0] - a[0] - scale * gh.nodes[i0], x[1] - a[1] - scale * gh.nodes[i1], 0.0});
        } else {
          for (int i0 = 0; i0 < K; ++i0)
            for (int i1 = 0; i1 < K; ++i1) {
              double row = 0.0;
              for (int i2 = 0; i2 < K; ++i2)
                row += gh.weights[i2] * model.profile(Point{x[0] - a[0] - scale * gh.nodes[i0],
                                                            x[1] - a[1] - scale * gh.nodes[i1],
                                                            x[2] - a[2] - scale * gh.nodes[i2]});
              acc += gh.weights[i0] * gh.weights[i1] * row;
            }
        }
        out[pi_] += time_weight * gh_norm * acc;
      });
    }
  }
  return out;
}

/// Adds i.i.d. N(0, (sigma_rel max|u|)^2) noise, reproducible from `seed`.
inline FinalField add_noise(const FinalField& field, double sigma_rel, std::uint64_t seed) {
  if (!(sigma_rel >= 0.0)) throw ValidationError("add_noise: sigma_rel must be non-negative");
  FinalField out = field;
  const double sigma = sigma_rel * field.max_abs();
  if (sigma > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, sigma);
    for (double& v : out.values) v += normal(rng);
  }
  out.noise = NoiseRecord{sigma_rel, sigma, seed};
  return out;
}

}  // namespace movsrc
