#pragma once

#include <boost/random/sobol.hpp>

#include <functional>
#include <optional>

#include "movsrc/forward.hpp"
#include "movsrc/gauss_newton.hpp"

namespace movsrc {

// ---------------------------------------------------------------------------
// Moments
// ---------------------------------------------------------------------------

/// mu_n = \int_0^T a_j(s)^n g(s) ds for n = 0..N.
struct MomentVector {
  enum class Provenance { analytic, extracted };

  int component = 0;  // zero-based
  std::vector<double> values;
  Provenance provenance = Provenance::analytic;

  int order() const { return static_cast<int>(values.size()) - 1; }
};

/// Moments of a known orbit component by quadrature.
inline MomentVector orbit_moments(const OrbitFunction& orbit, const TemporalFunction& temporal, int component,
                                  int max_order) {
  if (component < 0 || component >= orbit.dim()) throw ValidationError("orbit_moments: component out of range");
  MomentVector m;
  m.component = component;
  m.provenance = MomentVector::Provenance::analytic;
  for (int n = 0; n <= max_order; ++n)
    m.values.push_back(temporal.integrate([&](double s) { return std::pow(orbit(s)[component], n); }));
  return m;
}

using SpectrumFunction = std::function<complex(const Point&)>;

/// Spectrum of grid data at arbitrary frequencies (trigonometric interpolation).
inline SpectrumFunction data_spectrum(const FinalField& data) {
  return [&data](const Point& xi) { return spectrum_at(data.grid, data.values, xi); };
}

struct LowMoments {
  int component = 0;
  double delta = 0.0;
  double m1 = 0.0;  // \int a_j g ds
  double m2 = 0.0;  // \int a_j^2 g ds
  /// The same differences taken with step 2 delta; (m - m_wide) / 3 is a
  /// Richardson estimate of the O(delta^2) truncation error.
  double m1_wide = 0.0;
  double m2_wide = 0.0;

  double m1_error_estimate() const { return std::abs(m1 - m1_wide) / 3.0; }
  double m2_error_estimate() const { return std::abs(m2 - m2_wide) / 3.0; }
};

/**
 * First and second orbit moments of component j from the data spectrum near
 * zero. With H(tau) = u_hat(tau e_j, T) / f_hat(tau e_j), expanding
 * e^{-(T-s) tau^2} e^{i tau a_j(s)} gives
 *   H(tau) = mu_0 + i tau \int a_j g - tau^2 (1/2 \int a_j^2 g + \int (T-s) g) + O(tau^3),
 * so m1 = Im H'(0) and m2 = -Re H''(0) - 2 \int (T-s) g. The orbit-free part
 * H_0(tau) = \int e^{-(T-s) tau^2} g ds is known, and differencing H - H_0
 * instead of H removes the heat-lag terms from the truncation error. Both
 * derivatives are central differences on tau in {0, +-delta, +-2 delta}.
 */
inline LowMoments extract_low_moments(const SpectrumFunction& spectrum, const SourceProfile& profile,
                                      const TemporalFunction& temporal, int component, double delta) {
  if (!(delta > 0.0)) throw ValidationError("extract_low_moments: delta must be positive");
  if (component < 0 || component >= profile.dim())
    throw ValidationError("extract_low_moments: component out of range");

  auto axis_point = [&](double tau) {
    Point xi{0.0, 0.0, 0.0};
    xi[component] = tau;
    return xi;
  };
  double fmax = 0.0, fmin = std::numeric_limits<double>::infinity();
  for (int i = -8; i <= 8; ++i) {
    const double v = std::abs(profile.spectrum_at(axis_point(2.0 * delta * i / 8.0)));
    fmax = std::max(fmax, v);
    fmin = std::min(fmin, v);
  }
  if (!(fmin > 1e-12 * fmax) || fmax == 0.0)
    throw ValidationError("extract_low_moments: profile transform vanishes in the sampling window");

  const double T = temporal.horizon();
  std::array<complex, 5> H;
  for (int i = -2; i <= 2; ++i) {
    const double tau = i * delta;
    const Point xi = axis_point(tau);
    const double H0 = temporal.integrate([&](double s) { return std::exp(-(T - s) * tau * tau); });
    H[i + 2] = spectrum(xi) / profile.spectrum_at(xi) - H0;
  }

  LowMoments out;
  out.component = component;
  out.delta = delta;
  out.m1 = ((H[3] - H[1]) / (2.0 * delta)).imag();
  out.m2 = -((H[3] - 2.0 * H[2] + H[1]) / (delta * delta)).real();
  out.m1_wide = ((H[4] - H[0]) / (4.0 * delta)).imag();
  out.m2_wide = -((H[4] - 2.0 * H[2] + H[0]) / (4.0 * delta * delta)).real();
  return out;
}

inline LowMoments extract_low_moments(const FinalField& data, const SourceProfile& profile,
                                      const TemporalFunction& temporal, int component, double delta) {
  return extract_low_moments(data_spectrum(data), profile, temporal, component, delta);
}

// ---------------------------------------------------------------------------
// Frequency sample sets
// ---------------------------------------------------------------------------

/// Quasi-random (Sobol) frequencies in the ball |xi| <= radius.
inline std::vector<Point> frequency_samples_sobol(int dim, std::size_t count, double radius) {
  boost::random::sobol gen(static_cast<std::size_t>(dim));
  const double scale = 1.0 / (static_cast<double>(boost::random::sobol::max()) + 1.0);
  std::vector<Point> out;
  while (out.size() < count) {
    Point xi{0.0, 0.0, 0.0};
    for (int k = 0; k < dim; ++k) xi[k] = radius * (2.0 * (static_cast<double>(gen()) * scale) - 1.0);
    if (norm(xi, dim) <= radius) out.push_back(xi);
  }
  return out;
}

/// Grid frequencies inside |xi| <= radius, nearest first, at most max_count.
inline std::vector<Point> frequency_samples_grid(const SpatialGrid& grid, double radius, std::size_t max_count) {
  std::vector<Point> out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Point xi = grid.frequency(i);
    if (norm(xi, grid.dim()) <= radius) out.push_back(xi);
  }
  std::stable_sort(out.begin(), out.end(),
                   [&](const Point& a, const Point& b) { return norm2(a, grid.dim()) < norm2(b, grid.dim()); });
  if (out.size() > max_count) out.resize(max_count);
  return out;
}

/// Drops frequencies where |f_hat| < rel_tol max |f_hat| over the set.
inline std::vector<Point> drop_profile_zeros(const SourceProfile& profile, const std::vector<Point>& freqs,
                                             double rel_tol = 1e-12) {
  double fmax = 0.0;
  std::vector<double> mag(freqs.size());
  for (std::size_t i = 0; i < freqs.size(); ++i) fmax = std::max(fmax, mag[i] = std::abs(profile.spectrum_at(freqs[i])));
  std::vector<Point> out;
  for (std::size_t i = 0; i < freqs.size(); ++i)
    if (mag[i] >= rel_tol * fmax) out.push_back(freqs[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Orbit recovery
// ---------------------------------------------------------------------------

/**
 * Least-squares fit of a monotone piecewise-linear orbit to spectrum data:
 *   minimize sum_l |f_hat(xi_l) F(xi_l; a_theta) - u_hat(xi_l)|^2.
 *
 * Each component lives on nodes t_k = k T / P with a_j(0) = 0 and
 * a_j(t_k) = sign_j sum_{l <= k} theta_{j,l}^2, so every parameter vector
 * gives a strictly monotone orbit pinned at the origin. Parameters are laid
 * out component-major: theta[j * P + (l - 1)].
 */
class OrbitFitProblem {
 public:
  OrbitFitProblem(const SourceProfile& profile, const TemporalFunction& temporal, const TimeQuadrature& quad,
                  std::vector<Point> freqs, std::vector<complex> data, int nodes, std::array<int, 3> signs,
                  int threads = 1)
      : dim_(profile.dim()), P_(nodes), T_(temporal.horizon()), signs_(signs), freqs_(std::move(freqs)),
        data_(std::move(data)), threads_(threads) {
    if (P_ < 2) throw ValidationError("reconstruct_orbit: need P >= 2 nodes");
    if (freqs_.empty() || freqs_.size() != data_.size())
      throw ValidationError("reconstruct_orbit: frequency samples and data differ in size");
    detail::require_matching_horizon(temporal, quad);
    for (int j = 0; j < dim_; ++j)
      if (signs_[j] != 1 && signs_[j] != -1) throw ValidationError("reconstruct_orbit: component signs must be +-1");

    double fmax = 0.0;
    fhat_.resize(freqs_.size());
    for (std::size_t l = 0; l < freqs_.size(); ++l) fmax = std::max(fmax, std::abs(fhat_[l] = profile.spectrum_at(freqs_[l])));
    for (std::size_t l = 0; l < freqs_.size(); ++l)
      if (std::abs(fhat_[l]) < 1e-12 * fmax)
        throw ValidationError("reconstruct_orbit: frequency sample at a zero of the profile transform");

    for (std::size_t q = 0; q < quad.size(); ++q) {
      const double s = quad.nodes[q];
      QuadNode node;
      node.s = s;
      node.weight = quad.weights[q] * temporal(s);
      const double u = std::clamp(s / T_ * P_, 0.0, static_cast<double>(P_));
      node.interval = std::min(static_cast<int>(std::floor(u)), P_ - 1);
      node.frac = u - node.interval;
      nodes_.push_back(node);
    }
  }

  int dim() const { return dim_; }
  int nodes() const { return P_; }
  int parameters() const { return dim_ * P_; }
  std::size_t residuals() const { return 2 * freqs_.size(); }
  const std::array<int, 3>& signs() const { return signs_; }
  const std::vector<Point>& frequencies() const { return freqs_; }
  const std::vector<complex>& data() const { return data_; }

  std::vector<double> node_times() const {
    std::vector<double> t(P_ + 1);
    for (int k = 0; k <= P_; ++k) t[k] = T_ * k / P_;
    return t;
  }

  /// values[j][k] = a_j(t_k), k = 0..P.
  std::vector<std::vector<double>> node_values(const Eigen::VectorXd& theta) const {
    std::vector<std::vector<double>> v(dim_, std::vector<double>(P_ + 1, 0.0));
    for (int j = 0; j < dim_; ++j)
      for (int k = 1; k <= P_; ++k) {
        const double t = theta[j * P_ + k - 1];
        v[j][k] = v[j][k - 1] + signs_[j] * t * t;
      }
    return v;
  }

  /// Inverse of node_values for a monotone orbit matching the signs.
  Eigen::VectorXd parameters_for(const std::vector<std::vector<double>>& values) const {
    Eigen::VectorXd theta(parameters());
    for (int j = 0; j < dim_; ++j) {
      if (static_cast<int>(values[j].size()) != P_ + 1)
        throw ValidationError("orbit initialization has the wrong number of nodes");
      for (int k = 1; k <= P_; ++k) {
        const double inc = signs_[j] * (values[j][k] - values[j][k - 1]);
        if (!(inc > 0.0))
          throw ValidationError("orbit initialization is not strictly monotone in component " + std::to_string(j + 1));
        theta[j * P_ + k - 1] = std::sqrt(inc);
      }
    }
    return theta;
  }

  /// Stacked [Re; Im] of f_hat F(a_theta) - u_hat.
  Eigen::VectorXd residual(const Eigen::VectorXd& theta) const {
    const auto A = node_values(theta);
    const std::size_t L = freqs_.size();
    Eigen::VectorXd r(2 * L);
    parallel_for(L, threads_, [&](std::size_t l) {
      const complex z = fhat_[l] * transfer(freqs_[l], A, nullptr) - data_[l];
      r[l] = z.real();
      r[L + l] = z.imag();
    });
    return r;
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& theta) const {
    const auto A = node_values(theta);
    const std::size_t L = freqs_.size();
    Eigen::MatrixXd J(2 * L, parameters());
    parallel_for(L, threads_, [&](std::size_t l) {
      std::vector<complex> hat(P_ + 1, 0.0);
      transfer(freqs_[l], A, &hat);
      // suffix sums: d a_j(t_k) / d theta_{j,l} is nonzero for k >= l
      std::vector<complex> suffix(P_ + 2, 0.0);
      for (int k = P_; k >= 1; --k) suffix[k] = suffix[k + 1] + hat[k];
      const Point& xi = freqs_[l];
      for (int j = 0; j < dim_; ++j)
        for (int k = 1; k <= P_; ++k) {
          const double t = theta[j * P_ + k - 1];
          const complex d = fhat_[l] * complex(0.0, xi[j]) * suffix[k] * (2.0 * signs_[j] * t);
          J(l, j * P_ + k - 1) = d.real();
          J(L + l, j * P_ + k - 1) = d.imag();
        }
    });
    return J;
  }

  double data_norm() const {
    double s = 0.0;
    for (const auto& z : data_) s += std::norm(z);
    return std::sqrt(s);
  }

 private:
  struct QuadNode {
    double s;
    double weight;  // w_q g(s_q)
    int interval;
    double frac;
  };

  // F(xi; a) for piecewise-linear node values A; optionally accumulates
  // hat[k] = sum_q w_q g_q e^{-(T-s_q)|xi|^2} e^{i xi.a(s_q)} phi_k(s_q).
  complex transfer(const Point& xi, const std::vector<std::vector<double>>& A, std::vector<complex>* hat) const {
    const double k2 = norm2(xi, dim_);
    complex F = 0.0;
    for (const auto& q : nodes_) {
      double phase = 0.0;
      for (int j = 0; j < dim_; ++j)
        phase += xi[j] * ((1.0 - q.frac) * A[j][q.interval] + q.frac * A[j][q.interval + 1]);
      const complex term = q.weight * std::exp(-(T_ - q.s) * k2) * std::polar(1.0, phase);
      F += term;
      if (hat) {
        (*hat)[q.interval] += (1.0 - q.frac) * term;
        (*hat)[q.interval + 1] += q.frac * term;
      }
    }
    return F;
  }

  int dim_;
  int P_;
  double T_;
  std::array<int, 3> signs_;
  std::vector<Point> freqs_;
  std::vector<complex> data_;
  std::vector<complex> fhat_;
  std::vector<QuadNode> nodes_;
  int threads_;
};

struct OrbitEstimate {
  std::vector<double> times;
  std::vector<std::vector<double>> values;  // [component][node]
  std::array<int, 3> signs{1, 1, 1};
  double residual = 0.0;           // ||f_hat F(a) - u_hat|| over the samples
  double relative_residual = 0.0;  // residual / ||u_hat||
  int iterations = 0;
  int accepted_steps = 0;
  bool converged = false;
  std::vector<double> cost_history;

  OrbitFunction to_orbit(double bound) const {
    return OrbitFunction::piecewise_linear(static_cast<int>(values.size()), times, values, bound);
  }
};

struct OrbitFitOptions {
  GaussNewtonOptions gauss_newton;
  /// Per-component signs; when absent they come from the sign of m1.
  std::optional<std::array<int, 3>> signs;
  /// Initial node values [component][node]; when absent a linear orbit is
  /// built from the first moments.
  std::optional<std::vector<std::vector<double>>> init;
  double moment_delta = 0.05;
  /// Stop once ||residual|| <= relative_target ||u_hat||.
  double relative_target = 1e-10;
  int threads = 1;
};

/**
 * Recovers the orbit from final data, given the profile and g. The data
 * spectrum is sampled at `freqs`; signs and the linear initial guess come from
 * the extracted first moments unless supplied.
 */
inline OrbitEstimate reconstruct_orbit(const SpectrumFunction& spectrum, const SourceProfile& profile,
                                       const TemporalFunction& temporal, int nodes, const std::vector<Point>& freqs,
                                       const TimeQuadrature& quad, const OrbitFitOptions& opt = {}) {
  if (!(temporal.integral() > 0.0)) throw ValidationError("reconstruct_orbit: g must be positive");
  const int d = profile.dim();

  std::array<int, 3> signs{1, 1, 1};
  std::vector<double> m1(d, 0.0);
  if (!opt.signs || !opt.init) {
    for (int j = 0; j < d; ++j) m1[j] = extract_low_moments(spectrum, profile, temporal, j, opt.moment_delta).m1;
  }
  if (opt.signs) {
    signs = *opt.signs;
  } else {
    const double mu0 = temporal.integral();
    for (int j = 0; j < d; ++j) {
      if (std::abs(m1[j]) <= 1e-12 * mu0)
        throw ValidationError("reconstruct_orbit: first moment of component " + std::to_string(j + 1) +
                              " is zero; pass the component sign explicitly");
      signs[j] = m1[j] > 0.0 ? 1 : -1;
    }
  }

  std::vector<complex> data(freqs.size());
  for (std::size_t l = 0; l < freqs.size(); ++l) data[l] = spectrum(freqs[l]);
  const OrbitFitProblem problem(profile, temporal, quad, freqs, std::move(data), nodes, signs, opt.threads);

  std::vector<std::vector<double>> init;
  if (opt.init) {
    init = *opt.init;
  } else {
    const double t_moment = temporal.integrate([](double s) { return s; });
    const auto times = problem.node_times();
    init.assign(d, std::vector<double>(nodes + 1, 0.0));
    for (int j = 0; j < d; ++j) {
      double v = m1[j] / t_moment;
      if (!(v * signs[j] > 0.0)) v = signs[j] * 1e-3 / temporal.horizon();
      for (int k = 0; k <= nodes; ++k) init[j][k] = v * times[k];
    }
  }
  if (static_cast<int>(init.size()) != d) throw ValidationError("orbit initialization has the wrong dimension");

  GaussNewtonOptions gn = opt.gauss_newton;
  const double target = opt.relative_target * problem.data_norm();
  gn.target_cost = std::max(gn.target_cost, 0.5 * target * target);
  const auto res = damped_gauss_newton(problem, problem.parameters_for(init), gn);

  OrbitEstimate est;
  est.times = problem.node_times();
  est.values = problem.node_values(res.x);
  est.signs = signs;
  est.residual = std::sqrt(2.0 * res.cost);
  est.relative_residual = est.residual / problem.data_norm();
  est.iterations = res.iterations;
  est.accepted_steps = res.accepted_steps;
  est.converged = res.converged;
  est.cost_history = res.cost_history;
  return est;
}

inline OrbitEstimate reconstruct_orbit(const FinalField& data, const SourceProfile& profile,
                                       const TemporalFunction& temporal, int nodes, const std::vector<Point>& freqs,
                                       const TimeQuadrature& quad, const OrbitFitOptions& opt = {}) {
  if (data.grid.dim() != profile.dim()) throw ValidationError("data grid dimension does not match the profile");
  return reconstruct_orbit(data_spectrum(data), profile, temporal, nodes, freqs, quad, opt);
}

// ---------------------------------------------------------------------------
// Finite-moment recovery of a monotone function
// ---------------------------------------------------------------------------

struct MonotoneEstimate {
  std::vector<double> times;
  std::vector<double> values;
  double residual = 0.0;  // scaled moment misfit ||r||
  int iterations = 0;
  bool converged = false;
  /// False when the misfit stalls above the consistency tolerance: no
  /// monotone piecewise-linear function reproduces the moments.
  bool consistent = false;

  double operator()(double t) const {
    if (t <= times.front()) return values.front();
    if (t >= times.back()) return values.back();
    const auto i = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) - times.begin()) - 1;
    const double u = (t - times[i]) / (times[i + 1] - times[i]);
    return (1.0 - u) * values[i] + u * values[i + 1];
  }
};

struct MomentSolveOptions {
  /// A-priori bound c on max |f|; 0 estimates it from the moments.
  double bound = 0.0;
  double start_value = 0.0;  // f(0)
  std::optional<std::vector<double>> init;  // node values, P + 1 entries
  /// Per continuation stage; the high-order fit crawls along a curved valley
  /// from poor starts, so the budget is larger than for orbit fits.
  GaussNewtonOptions gauss_newton{.max_iterations = 1000};
  double consistency_tol = 1e-6;
};

/**
 * Moment misfit for a monotone piecewise-linear f on [0, T]:
 *   r_n = (\int_0^T f^n g ds - mu_n) / max(|mu_n|, mu_0 c^n),  n = 0..N,
 * with f(t_k) = f(0) + sign sum_{l <= k} theta_l^2.
 */
class MomentFitProblem {
 public:
  /// Only moments n <= active_order enter the residual (all when negative).
  MomentFitProblem(const MomentVector& moments, const TemporalFunction& temporal, int sign, int nodes,
                   double bound, double start_value, int active_order = -1)
      : mu_(moments.values), sign_(sign), P_(nodes), T_(temporal.horizon()), f0_(start_value) {
    const int N = moments.order();
    if (P_ < 1) throw ValidationError("moment_solve: need at least one interval");
    if (N < P_) throw ValidationError("moment_solve: need N >= P moments");
    if (sign != 1 && sign != -1) throw ValidationError("moment_solve: sign must be +-1");
    const GaussLegendre gl(std::max(8, N / 2 + 6));
    for (int k = 0; k < P_; ++k) {
      const double a = T_ * k / P_, b = T_ * (k + 1) / P_;
      for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
        const double s = 0.5 * (a + b) + 0.5 * (b - a) * gl.nodes[i];
        quad_.push_back({0.5 * (b - a) * gl.weights[i] * temporal(s), k, (s - a) / (b - a)});
      }
    }
    double c = bound;
    if (!(c > 0.0)) {
      for (int n = 1; n <= N; ++n) c = std::max(c, std::pow(std::abs(mu_[n]) / mu_[0], 1.0 / n));
      if (!(c > 0.0)) c = 1.0;
    }
    scale_.resize(N + 1);
    for (int n = 0; n <= N; ++n) scale_[n] = std::max(std::abs(mu_[n]), mu_[0] * std::pow(c, n));
    if (active_order >= 0 && active_order < N) {
      mu_.resize(active_order + 1);
      scale_.resize(active_order + 1);
    }
  }

  int parameters() const { return P_; }

  std::vector<double> node_values(const Eigen::VectorXd& theta) const {
    std::vector<double> v(P_ + 1, f0_);
    for (int k = 1; k <= P_; ++k) v[k] = v[k - 1] + sign_ * theta[k - 1] * theta[k - 1];
    return v;
  }

  Eigen::VectorXd parameters_for(const std::vector<double>& values) const {
    if (static_cast<int>(values.size()) != P_ + 1) throw ValidationError("moment_solve: init has wrong size");
    Eigen::VectorXd theta(P_);
    for (int k = 1; k <= P_; ++k) {
      const double inc = sign_ * (values[k] - values[k - 1]);
      if (!(inc > 0.0)) throw ValidationError("moment_solve: init is not strictly monotone");
      theta[k - 1] = std::sqrt(inc);
    }
    return theta;
  }

  Eigen::VectorXd residual(const Eigen::VectorXd& theta) const {
    const auto v = node_values(theta);
    const int N = static_cast<int>(mu_.size()) - 1;
    Eigen::VectorXd r = Eigen::VectorXd::Zero(N + 1);
    for (const auto& q : quad_) {
      const double f = (1.0 - q.frac) * v[q.interval] + q.frac * v[q.interval + 1];
      double fn = 1.0;
      for (int n = 0; n <= N; ++n, fn *= f) r[n] += q.weight * fn;
    }
    for (int n = 0; n <= N; ++n) r[n] = (r[n] - mu_[n]) / scale_[n];
    return r;
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& theta) const {
    const auto v = node_values(theta);
    const int N = static_cast<int>(mu_.size()) - 1;
    Eigen::MatrixXd dnode = Eigen::MatrixXd::Zero(N + 1, P_ + 1);  // d/d f(t_k)
    for (const auto& q : quad_) {
      const double f = (1.0 - q.frac) * v[q.interval] + q.frac * v[q.interval + 1];
      double fn1 = 1.0;  // f^{n-1}
      for (int n = 1; n <= N; ++n, fn1 *= f) {
        const double g = q.weight * n * fn1;
        dnode(n, q.interval) += g * (1.0 - q.frac);
        dnode(n, q.interval + 1) += g * q.frac;
      }
    }
    Eigen::MatrixXd J(N + 1, P_);
    for (int n = 0; n <= N; ++n) {
      double suffix = 0.0;
      for (int k = P_; k >= 1; --k) {
        suffix += dnode(n, k);
        J(n, k - 1) = suffix * 2.0 * sign_ * theta[k - 1] / scale_[n];
      }
    }
    return J;
  }

  std::vector<double> node_times() const {
    std::vector<double> t(P_ + 1);
    for (int k = 0; k <= P_; ++k) t[k] = T_ * k / P_;
    return t;
  }

 private:
  struct Node {
    double weight;
    int interval;
    double frac;
  };

  std::vector<double> mu_;
  int sign_;
  int P_;
  double T_;
  double f0_;
  std::vector<Node> quad_;
  std::vector<double> scale_;
};

/// Recovers a monotone f with f(0) known from finitely many weighted moments
/// mu_n = \int_0^T f^n g ds, by damped Gauss-Newton on MomentFitProblem.
inline MonotoneEstimate moment_solve(const MomentVector& moments, const TemporalFunction& temporal, int sign,
                                     int nodes, const MomentSolveOptions& opt = {}) {
  if (moments.values.empty() || !(moments.values[0] > 0.0))
    throw ValidationError("moment_solve: mu_0 = \\int g must be positive");
  for (int i = 0; i < kValidationSamples; ++i) {
    const double t = temporal.horizon() * (i + 0.5) / kValidationSamples;
    if (!(temporal(t) > 0.0)) throw ValidationError("moment_solve: g must be positive on (0, T)");
  }
  const MomentFitProblem problem(moments, temporal, sign, nodes, opt.bound, opt.start_value);

  std::vector<double> init;
  if (opt.init) {
    init = *opt.init;
  } else {
    const double mu0 = moments.values[0], mu1 = moments.values[1];
    double slope = (mu1 - opt.start_value * mu0) / temporal.integrate([](double s) { return s; });
    if (!(slope * sign > 0.0)) slope = sign * 1e-3 / temporal.horizon();
    for (double t : problem.node_times()) init.push_back(opt.start_value + slope * t);
  }
  Eigen::VectorXd theta = problem.parameters_for(init);

  GaussNewtonOptions gn = opt.gauss_newton;
  gn.target_cost = std::max(gn.target_cost, 0.5 * 1e-28);
  int iterations = 0;

  // theta_k = 0 is a spurious stationary set of the squared-increment
  // parameterization. A stage that stalls there is restarted from a blend
  // with the straight line between the end values, which reopens every
  // interval and keeps the start monotone.
  auto run_stage = [&](const MomentFitProblem& stage) {
    auto res = damped_gauss_newton(stage, theta, gn);
    iterations += res.iterations;
    for (int restart = 0; restart < 3 && res.cost > gn.target_cost; ++restart) {
      const double mean_inc = res.x.squaredNorm() / static_cast<double>(res.x.size());
      if (!((res.x.array().square() < 1e-2 * mean_inc).any())) break;
      auto v = stage.node_values(res.x);
      const double v0 = v.front(), vP = v.back();
      for (int k = 0; k <= nodes; ++k) v[k] = 0.5 * v[k] + 0.5 * (v0 + (vP - v0) * k / nodes);
      auto retry = damped_gauss_newton(stage, stage.parameters_for(v), gn);
      iterations += retry.iterations;
      if (retry.cost < res.cost) res = std::move(retry);
    }
    theta = res.x;
    return res;
  };

  // Continuation in the moment order: low orders are well conditioned and
  // move a poor start close to the solution before the steep high powers
  // enter.
  for (int order = 2; order < moments.order(); ++order)
    run_stage(MomentFitProblem(moments, temporal, sign, nodes, opt.bound, opt.start_value, order));
  auto res = run_stage(problem);
  res.iterations = iterations;

  MonotoneEstimate est;
  est.times = problem.node_times();
  est.values = problem.node_values(res.x);
  est.residual = std::sqrt(2.0 * res.cost);
  est.iterations = res.iterations;
  est.converged = res.converged;
  est.consistent = est.residual <= opt.consistency_tol;
  return est;
}

}  // namespace movsrc
