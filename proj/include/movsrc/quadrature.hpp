#pragma once

#include "movsrc/common.hpp"

namespace movsrc {

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on P_n.
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussLegendre(int n) : nodes(n), weights(n) {
    if (n < 1) throw ValidationError("Gauss-Legendre order must be >= 1");
    for (int i = 0; i < (n + 1) / 2; ++i) {
      double x = std::cos(pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        if (n == 1) p0 = 1.0;
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      // recompute the derivative at the converged root
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = (n == 1) ? 1.0 : n * (x * p1 - p0) / (x * x - 1.0);
      const double w = 2.0 / ((1.0 - x * x) * dp * dp);
      nodes[i] = -x;
      nodes[n - 1 - i] = x;
      weights[i] = weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) nodes[n / 2] = 0.0;
  }
};

enum class QuadratureRule { gauss_legendre, trapezoid };

/// Time quadrature on [0, T]: sum_j w_j phi(s_j) ~ \int_0^T phi(s) ds.
struct TimeQuadrature {
  QuadratureRule rule = QuadratureRule::gauss_legendre;
  double horizon = 0.0;
  int panels = 0;
  int order = 0;
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }

  /// Composite Gauss-Legendre on `panels` panels. Passing `breaks` (strictly
  /// increasing, from 0 to T) overrides the uniform panel layout.
  static TimeQuadrature composite_gauss_legendre(double horizon, int panels = 8, int order = 8,
                                                 std::vector<double> breaks = {}) {
    if (!(horizon > 0.0)) throw ValidationError("quadrature: horizon T must be positive");
    if (breaks.empty()) {
      if (panels < 1) throw ValidationError("quadrature: panels must be >= 1");
      breaks.resize(panels + 1);
      for (int p = 0; p <= panels; ++p) breaks[p] = horizon * p / panels;
      breaks.back() = horizon;
    }
    TimeQuadrature q;
    q.rule = QuadratureRule::gauss_legendre;
    q.horizon = horizon;
    q.panels = static_cast<int>(breaks.size()) - 1;
    q.order = order;
    const GaussLegendre gl(order);
    for (int p = 0; p < q.panels; ++p) {
      const double a = breaks[p], b = breaks[p + 1];
      if (!(b > a)) throw ValidationError("quadrature: panel breaks must increase");
      for (int i = 0; i < order; ++i) {
        q.nodes.push_back(0.5 * (a + b) + 0.5 * (b - a) * gl.nodes[i]);
        q.weights.push_back(0.5 * (b - a) * gl.weights[i]);
      }
    }
    return q;
  }

  /// Gauss-Legendre panels halving toward s = T: breaks at T (1 - 2^{-k}),
  /// k = 0..levels. Resolves the e^{-(T-s)|xi|^2} layer of width 1/|xi|^2 for
  /// |xi|^2 up to about 2^levels / T at a cost linear in levels.
  static TimeQuadrature graded_gauss_legendre(double horizon, int levels = 12, int order = 8) {
    if (levels < 1) throw ValidationError("quadrature: levels must be >= 1");
    std::vector<double> breaks{0.0};
    for (int k = 1; k <= levels; ++k) breaks.push_back(horizon * (1.0 - std::ldexp(1.0, -k)));
    breaks.push_back(horizon);
    return composite_gauss_legendre(horizon, 0, order, std::move(breaks));
  }

  static TimeQuadrature trapezoid(double horizon, int points) {
    if (!(horizon > 0.0)) throw ValidationError("quadrature: horizon T must be positive");
    if (points < 2) throw ValidationError("quadrature: trapezoid needs >= 2 points");
    TimeQuadrature q;
    q.rule = QuadratureRule::trapezoid;
    q.horizon = horizon;
    q.panels = points - 1;
    q.order = 2;
    const double dt = horizon / (points - 1);
    for (int i = 0; i < points; ++i) {
      q.nodes.push_back(i == points - 1 ? horizon : i * dt);
      q.weights.push_back((i == 0 || i == points - 1) ? 0.5 * dt : dt);
    }
    return q;
  }

  template <class Fn>
  auto integrate(Fn&& fn) const {
    decltype(fn(0.0)) sum{};
    for (std::size_t j = 0; j < nodes.size(); ++j) sum += weights[j] * fn(nodes[j]);
    return sum;
  }

  std::string describe() const {
    return (rule == QuadratureRule::gauss_legendre ? "gauss-legendre " : "trapezoid ") +
           std::to_string(panels) + "x" + std::to_string(order);
  }
};

}  // namespace movsrc
