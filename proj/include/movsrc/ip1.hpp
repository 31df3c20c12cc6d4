#pragma once

#include <optional>

#include "movsrc/forward.hpp"

namespace movsrc {

enum class DeconvolutionMethod { tikhonov, spectral_cutoff };

struct DeconvolutionConfig {
  DeconvolutionMethod method = DeconvolutionMethod::tikhonov;
  double lambda = 1e-10;   // tikhonov weight
  double epsilon = 0.0;    // cutoff threshold on |F|
  double support_radius = 0.0;
  bool project_support = false;
  /// When set, the data must live on exactly this grid.
  std::optional<SpatialGrid> grid;
  int threads = 1;
};

struct ProfileEstimate {
  SpectralField spectrum;
  std::vector<double> values;
  /// Fraction of frequencies where the filter suppressed the data
  /// (|F|^2 < lambda, or |F| <= epsilon).
  double regularized_fraction = 0.0;
  /// ||u_hat - f_hat_rec F|| / ||u_hat||.
  double relative_residual = 0.0;
  /// ||u_hat - f_hat_rec F|| in the L2(R^d) norm (Parseval).
  double residual_norm = 0.0;
};

namespace detail {

struct Ip1Setup {
  SpectralField data;
  std::vector<complex> transfer;
};

inline Ip1Setup ip1_setup(const FinalField& data, const OrbitFunction& orbit, const TemporalFunction& temporal,
                          const TimeQuadrature& quad, int threads) {
  if (data.grid.dim() != orbit.dim()) throw ValidationError("data grid dimension does not match the orbit");
  if (std::abs(data.horizon - temporal.horizon()) > 1e-12 * temporal.horizon())
    throw ValidationError("data horizon T does not match the temporal function");
  Ip1Setup s{forward_dft(data.grid, data.values),
             transfer_grid_values(orbit, temporal, data.grid, quad, threads)};
  const bool all_zero = std::all_of(s.transfer.begin(), s.transfer.end(), [](complex z) { return z == 0.0; });
  if (all_zero) throw ValidationError("transfer function vanishes identically (g = 0): data carry no information");
  return s;
}

inline double residual_l2(const SpatialGrid& grid, const std::vector<complex>& data,
                          const std::vector<complex>& F, const std::vector<complex>& fhat) {
  double s = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) s += std::norm(data[i] - fhat[i] * F[i]);
  return std::sqrt(s / std::pow(2.0 * grid.half_width(), grid.dim()));
}

}  // namespace detail

/**
 * Recovers the profile from final data with the orbit and temporal function
 * known, by filtered division u_hat / F:
 *   tikhonov: f_hat = conj(F) u_hat / (|F|^2 + lambda)
 *   cutoff:   f_hat = u_hat / F where |F| > epsilon, 0 elsewhere.
 * With project_support, the estimate is zeroed outside |x| < support_radius
 * and transformed back.
 */
inline ProfileEstimate reconstruct_profile(const FinalField& data, const OrbitFunction& orbit,
                                           const TemporalFunction& temporal, const DeconvolutionConfig& cfg,
                                           const TimeQuadrature& quad) {
  if (cfg.grid && !(*cfg.grid == data.grid))
    throw ValidationError("reconstruct_profile: data grid differs from the requested reconstruction grid");
  if (cfg.method == DeconvolutionMethod::tikhonov && !(cfg.lambda > 0.0))
    throw ValidationError("reconstruct_profile: tikhonov needs lambda > 0");
  if (cfg.method == DeconvolutionMethod::spectral_cutoff && !(cfg.epsilon > 0.0))
    throw ValidationError("reconstruct_profile: spectral cutoff needs epsilon > 0");
  if (cfg.support_radius > 0.0 && !(data.grid.half_width() > cfg.support_radius + orbit.bound()))
    throw ValidationError("reconstruct_profile: data grid does not contain the source ball");
  if (cfg.project_support && !(cfg.support_radius > 0.0))
    throw ValidationError("reconstruct_profile: support projection needs support_radius > 0");

  const auto setup = detail::ip1_setup(data, orbit, temporal, quad, cfg.threads);
  const auto& uhat = setup.data.values;
  const auto& F = setup.transfer;
  const std::size_t N = uhat.size();

  ProfileEstimate est;
  est.spectrum.grid = data.grid;
  est.spectrum.values.resize(N);
  std::size_t suppressed = 0;
  for (std::size_t i = 0; i < N; ++i) {
    const double f2 = std::norm(F[i]);
    if (cfg.method == DeconvolutionMethod::tikhonov) {
      est.spectrum.values[i] = std::conj(F[i]) * uhat[i] / (f2 + cfg.lambda);
      if (f2 < cfg.lambda) ++suppressed;
    } else if (std::sqrt(f2) > cfg.epsilon) {
      est.spectrum.values[i] = uhat[i] / F[i];
    } else {
      est.spectrum.values[i] = 0.0;
      ++suppressed;
    }
  }
  symmetrize(est.spectrum);
  est.values = inverse_dft(est.spectrum);

  if (cfg.project_support) {
    for (std::size_t i = 0; i < N; ++i)
      if (!(norm(data.grid.point(i), data.grid.dim()) < cfg.support_radius)) est.values[i] = 0.0;
    est.spectrum = forward_dft(data.grid, est.values);
  }

  est.regularized_fraction = static_cast<double>(suppressed) / static_cast<double>(N);
  est.residual_norm = detail::residual_l2(data.grid, uhat, F, est.spectrum.values);
  const double unorm = l2_norm(setup.data);
  est.relative_residual = unorm > 0.0 ? est.residual_norm / unorm : 0.0;
  return est;
}

struct LambdaChoice {
  double lambda = 0.0;
  double residual = 0.0;
  /// Set when the residual never matched the noise level and a boundary
  /// value of the search interval was returned.
  bool at_boundary = false;
};

/// Tikhonov residual ||u_hat - f_hat_lambda F|| as a function of lambda,
/// evaluated without transforming back to space.
class TikhonovResidual {
 public:
  TikhonovResidual(const FinalField& data, const OrbitFunction& orbit, const TemporalFunction& temporal,
                   const TimeQuadrature& quad, int threads = 1)
      : grid_(data.grid) {
    auto setup = detail::ip1_setup(data, orbit, temporal, quad, threads);
    power_.resize(setup.data.values.size());
    f2_.resize(power_.size());
    for (std::size_t i = 0; i < power_.size(); ++i) {
      power_[i] = std::norm(setup.data.values[i]);
      f2_[i] = std::norm(setup.transfer[i]);
    }
  }

  double operator()(double lambda) const {
    double s = 0.0;
    for (std::size_t i = 0; i < power_.size(); ++i) {
      const double r = lambda / (f2_[i] + lambda);
      s += r * r * power_[i];
    }
    return std::sqrt(s / std::pow(2.0 * grid_.half_width(), grid_.dim()));
  }

 private:
  SpatialGrid grid_;
  std::vector<double> power_;
  std::vector<double> f2_;
};

/// Discrepancy principle: bisection over log10(lambda) in [-16, 0] for the
/// residual that matches `noise_level` (an L2 norm, same scale as
/// ProfileEstimate::residual_norm). Among the evaluated lambdas whose
/// residual lies within 10% of the noise level, the largest is returned.
inline LambdaChoice choose_lambda_discrepancy(const FinalField& data, const OrbitFunction& orbit,
                                              const TemporalFunction& temporal, double noise_level,
                                              const TimeQuadrature& quad, int threads = 1) {
  if (!(noise_level > 0.0)) throw ValidationError("choose_lambda_discrepancy: noise_level must be positive");
  const TikhonovResidual residual(data, orbit, temporal, quad, threads);
  double lo = -16.0, hi = 0.0;
  const double r_lo = residual(std::pow(10.0, lo));
  const double r_hi = residual(std::pow(10.0, hi));
  if (r_hi < noise_level) return {1.0, r_hi, true};
  if (r_lo > noise_level) return {1e-16, r_lo, true};

  std::optional<LambdaChoice> best;
  auto consider = [&](double log_lambda, double r) {
    if (std::abs(r / noise_level - 1.0) <= 0.1) {
      const double lam = std::pow(10.0, log_lambda);
      if (!best || lam > best->lambda) best = LambdaChoice{lam, r, false};
    }
  };
  consider(lo, r_lo);
  consider(hi, r_hi);
  for (int it = 0; it < 60 && hi - lo > 1e-4; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double r = residual(std::pow(10.0, mid));
    consider(mid, r);
    (r < noise_level ? lo : hi) = mid;
  }
  if (best) return *best;
  const double lam = std::pow(10.0, lo);
  return {lam, residual(lam), false};
}

}  // namespace movsrc
