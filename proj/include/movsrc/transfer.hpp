#pragma once

#include "movsrc/model.hpp"

namespace movsrc {

/**
 * Samples of the transfer function
 *
 *   F(xi) = \int_0^T e^{-(T-s)|xi|^2} e^{i a(s).xi} g(s) ds,
 *
 * either on the frequency nodes of a grid (complex values) or along the
 * imaginary ray zeta = i r eta (log-magnitudes, since F(i r eta) grows like
 * e^{T r^2 |eta|^2}).
 */
struct TransferSamples {
  enum class Domain { real_grid, imaginary_ray };

  Domain domain = Domain::real_grid;
  std::string quadrature;

  SpatialGrid grid;
  std::vector<complex> values;

  Point eta{0.0, 0.0, 0.0};
  std::vector<double> radii;
  std::vector<double> log_values;
};

/// F at one real frequency.
inline complex transfer_at(const OrbitFunction& orbit, const TemporalFunction& temporal,
                           const TimeQuadrature& quad, const Point& xi) {
  const double T = temporal.horizon();
  const double k2 = norm2(xi, orbit.dim());
  complex sum = 0.0;
  for (std::size_t q = 0; q < quad.size(); ++q) {
    const double s = quad.nodes[q];
    const double c = quad.weights[q] * temporal(s);
    sum += c * std::exp(-(T - s) * k2) * std::polar(1.0, dot(orbit(s), xi, orbit.dim()));
  }
  return sum;
}

namespace detail {

inline void require_matching_horizon(const TemporalFunction& g, const TimeQuadrature& quad) {
  if (std::abs(quad.horizon - g.horizon()) > 1e-12 * g.horizon())
    throw ValidationError("time quadrature horizon does not match the temporal function's T");
}

}  // namespace detail

/// F on every centered frequency node of `grid`. The exponentials factor
/// per axis, so the cost is one complex multiply-add per (node, time node).
inline std::vector<complex> transfer_grid_values(const OrbitFunction& orbit, const TemporalFunction& temporal,
                                                 const SpatialGrid& grid, const TimeQuadrature& quad,
                                                 int threads = 1) {
  if (grid.dim() != orbit.dim()) throw ValidationError("orbit dimension does not match grid");
  detail::require_matching_horizon(temporal, quad);
  const int d = grid.dim(), n = grid.n();
  const std::size_t M = quad.size();
  const double T = temporal.horizon();
  const auto& xi = grid.frequencies();

  std::vector<complex> coef(M);
  std::array<std::vector<complex>, 3> axis;
  for (int k = 0; k < d; ++k) axis[k].resize(M * n);
  for (std::size_t q = 0; q < M; ++q) {
    const double s = quad.nodes[q];
    coef[q] = quad.weights[q] * temporal(s);
    const Point a = orbit(s);
    for (int k = 0; k < d; ++k)
      for (int i = 0; i < n; ++i)
        axis[k][q * n + i] = std::exp(-(T - s) * xi[i] * xi[i]) * std::polar(1.0, a[k] * xi[i]);
  }

  std::vector<complex> out(grid.size());
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i0) {
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

inline TransferSamples transfer_real(const OrbitFunction& orbit, const TemporalFunction& temporal,
                                     const SpatialGrid& grid, const TimeQuadrature& quad, int threads = 1) {
  TransferSamples s;
  s.domain = TransferSamples::Domain::real_grid;
  s.quadrature = quad.describe();
  s.grid = grid;
  s.values = transfer_grid_values(orbit, temporal, grid, quad, threads);
  return s;
}

inline TransferSamples transfer_real(const SourceModel& model, const SpatialGrid& grid,
                                     const TimeQuadrature& quad, int threads = 1) {
  require_valid(model, Purpose::ip1);
  return transfer_real(model.orbit, model.temporal, grid, quad, threads);
}

/// log F(i r eta) for each radius, by log-sum-exp over the time nodes:
/// log sum_j exp[(T - s_j) r^2 |eta|^2 - r a(s_j).eta + log(w_j g(s_j))].
inline TransferSamples transfer_ray_log(const OrbitFunction& orbit, const TemporalFunction& temporal,
                                        const Point& eta, const std::vector<double>& radii,
                                        const TimeQuadrature& quad) {
  const int d = orbit.dim();
  const double eta2 = norm2(eta, d);
  if (!(eta2 > 0.0)) throw ValidationError("transfer_ray_log: eta must be nonzero");
  if (radii.empty()) throw ValidationError("transfer_ray_log: no radii");
  for (double r : radii)
    if (!(r > 1.0)) throw ValidationError("transfer_ray_log: radii must exceed 1");
  detail::require_matching_horizon(temporal, quad);
  const double T = temporal.horizon();

  std::vector<double> logw(quad.size());
  std::vector<double> proj(quad.size());
  for (std::size_t q = 0; q < quad.size(); ++q) {
    const double s = quad.nodes[q];
    const double gs = temporal(s);
    if (!(gs > 0.0))
      throw ValidationError("transfer_ray_log: g(" + std::to_string(s) + ") <= 0 at a quadrature node");
    logw[q] = std::log(quad.weights[q] * gs);
    proj[q] = dot(orbit(s), eta, d);
  }

  TransferSamples out;
  out.domain = TransferSamples::Domain::imaginary_ray;
  out.quadrature = quad.describe();
  out.eta = eta;
  out.radii = radii;
  out.log_values.reserve(radii.size());
  std::vector<double> expo(quad.size());
  for (double r : radii) {
    double emax = -std::numeric_limits<double>::infinity();
    for (std::size_t q = 0; q < quad.size(); ++q) {
      expo[q] = (T - quad.nodes[q]) * r * r * eta2 - r * proj[q] + logw[q];
      emax = std::max(emax, expo[q]);
    }
    double acc = 0.0;
    for (double e : expo) acc += std::exp(e - emax);
    out.log_values.push_back(emax + std::log(acc));
  }
  return out;
}

inline TransferSamples transfer_ray_log(const SourceModel& model, const Point& eta,
                                        const std::vector<double>& radii, const TimeQuadrature& quad) {
  return transfer_ray_log(model.orbit, model.temporal, eta, radii, quad);
}

struct GrowthFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // max |deviation| / (slope * x_max)
  bool passed = false;
};

/// Least-squares line through (r^2 |eta|^2, log F(i r eta)). Growth of the
/// form C e^{C |zeta|^2} shows up as a positive slope with a small relative
/// residual.
inline GrowthFit verify_growth(const TransferSamples& samples, double residual_tol = 0.05) {
  if (samples.domain != TransferSamples::Domain::imaginary_ray)
    throw ValidationError("verify_growth: samples are not on an imaginary ray");
  const auto& r = samples.radii;
  if (r.size() < 5) throw ValidationError("verify_growth: need at least 5 radii");
  const auto [rmin, rmax] = std::minmax_element(r.begin(), r.end());
  if (*rmax < 4.0 * *rmin) throw ValidationError("verify_growth: radii must span at least a factor of 4");

  const double eta2 = norm2(samples.eta, 3);
  const std::size_t m = r.size();
  std::vector<double> x(m);
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    x[i] = r[i] * r[i] * eta2;
    sx += x[i];
    sy += samples.log_values[i];
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (samples.log_values[i] - my);
  }
  GrowthFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double dev = 0.0, xmax = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    dev = std::max(dev, std::abs(samples.log_values[i] - (fit.intercept + fit.slope * x[i])));
    xmax = std::max(xmax, x[i]);
  }
  fit.residual = fit.slope > 0.0 ? dev / (fit.slope * xmax) : std::numeric_limits<double>::infinity();
  fit.passed = fit.slope > 0.0 && fit.residual < residual_tol;
  return fit;
}

}  // namespace movsrc
