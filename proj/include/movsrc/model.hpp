#pragma once

#include <optional>
#include <sstream>
#include <variant>

#include "movsrc/grid.hpp"
#include "movsrc/quadrature.hpp"

namespace movsrc {

// ---------------------------------------------------------------------------
// Profile f
// ---------------------------------------------------------------------------

enum class ProfileKind { gaussian_bump, compact_bump, grid_sampled };

/**
 * Spatial profile f of the moving source.
 *
 * gaussian_bump: A (2 pi sigma^2)^{-d/2} exp(-|x-c|^2 / (2 sigma^2)), so that
 *   \int f = A. The declared support radius R1 is the radius beyond which
 *   |f| < 1e-12 max|f|.
 * compact_bump: A exp(1 - 1/(1 - |x-c|^2/w^2)) inside |x-c| < w, zero outside.
 * grid_sampled: values on a SpatialGrid, multilinear interpolation between
 *   nodes and zero outside the box.
 */
class SourceProfile {
 public:
  /// Radius multiple of sigma past which a Gaussian drops below 1e-12 of its peak.
  static double gaussian_tail_factor() { return std::sqrt(2.0 * std::log(1e12)); }

  static SourceProfile gaussian(int dim, Point center, double sigma, double amplitude = 1.0,
                                std::optional<double> support_radius = std::nullopt) {
    if (!(sigma > 0.0)) throw ValidationError("profile.sigma must be positive");
    SourceProfile p(ProfileKind::gaussian_bump, dim);
    p.center_ = center;
    p.width_ = sigma;
    p.amplitude_ = amplitude;
    p.support_radius_ = support_radius.value_or(norm(center, dim) + gaussian_tail_factor() * sigma);
    return p;
  }

  static SourceProfile compact_bump(int dim, Point center, double width, double amplitude = 1.0) {
    if (!(width > 0.0)) throw ValidationError("profile.width must be positive");
    SourceProfile p(ProfileKind::compact_bump, dim);
    p.center_ = center;
    p.width_ = width;
    p.amplitude_ = amplitude;
    p.support_radius_ = norm(center, dim) + width;
    return p;
  }

  static SourceProfile grid_sampled(SpatialGrid grid, std::vector<double> values, double support_radius) {
    if (values.size() != grid.size()) throw ValidationError("profile grid values do not match grid");
    if (!(support_radius > 0.0)) throw ValidationError("profile.support_radius must be positive");
    SourceProfile p(ProfileKind::grid_sampled, grid.dim());
    p.grid_ = std::move(grid);
    p.samples_ = std::move(values);
    p.support_radius_ = support_radius;
    return p;
  }

  ProfileKind kind() const { return kind_; }
  int dim() const { return dim_; }
  const Point& center() const { return center_; }
  double width() const { return width_; }
  double amplitude() const { return amplitude_; }
  double support_radius() const { return support_radius_; }
  const SpatialGrid& sample_grid() const { return grid_; }
  const std::vector<double>& samples() const { return samples_; }

  double operator()(const Point& x) const {
    switch (kind_) {
      case ProfileKind::gaussian_bump: {
        Point d{x[0] - center_[0], x[1] - center_[1], x[2] - center_[2]};
        const double s2 = width_ * width_;
        return amplitude_ * std::pow(2.0 * pi * s2, -0.5 * dim_) * std::exp(-norm2(d, dim_) / (2.0 * s2));
      }
      case ProfileKind::compact_bump: {
        Point d{x[0] - center_[0], x[1] - center_[1], x[2] - center_[2]};
        return amplitude_ * bump(std::sqrt(norm2(d, dim_)) / width_);
      }
      case ProfileKind::grid_sampled:
        return interpolate(x);
    }
    return 0.0;
  }

  /// \int f dx.
  double integral() const {
    switch (kind_) {
      case ProfileKind::gaussian_bump:
        return amplitude_;
      case ProfileKind::compact_bump:
        return amplitude_ * radial_transform(0.0);
      case ProfileKind::grid_sampled: {
        double s = 0.0;
        for (double v : samples_) s += v;
        return s * grid_.cell_volume();
      }
    }
    return 0.0;
  }

  /// f_hat(xi) at an arbitrary frequency.
  complex spectrum_at(const Point& xi) const {
    switch (kind_) {
      case ProfileKind::gaussian_bump:
        return amplitude_ * std::exp(-0.5 * width_ * width_ * norm2(xi, dim_)) *
               std::polar(1.0, dot(center_, xi, dim_));
      case ProfileKind::compact_bump:
        return amplitude_ * radial_transform(norm(xi, dim_)) * std::polar(1.0, dot(center_, xi, dim_));
      case ProfileKind::grid_sampled:
        return movsrc::spectrum_at(grid_, samples_, xi);
    }
    return 0.0;
  }

  /// True when f_hat factors into per-axis terms (Gaussian profiles).
  bool separable_spectrum() const { return kind_ == ProfileKind::gaussian_bump; }

  /// Per-axis factor of f_hat for separable profiles, without the amplitude:
  /// f_hat(xi) = A prod_k axis_spectrum(k, xi_k).
  complex axis_spectrum(int axis, double xi) const {
    return std::exp(-0.5 * width_ * width_ * xi * xi) * std::polar(1.0, center_[axis] * xi);
  }

  std::vector<double> sample(const SpatialGrid& grid) const {
    if (grid.dim() != dim_) throw ValidationError("profile dimension does not match grid");
    std::vector<double> out(grid.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*this)(grid.point(i));
    return out;
  }

  bool identically_zero() const {
    if (kind_ != ProfileKind::grid_sampled) return amplitude_ == 0.0;
    return std::all_of(samples_.begin(), samples_.end(), [](double v) { return v == 0.0; });
  }

 private:
  SourceProfile(ProfileKind kind, int dim) : kind_(kind), dim_(dim) {
    if (dim != 2 && dim != 3) throw ValidationError("profile dimension must be 2 or 3");
  }

  static double bump(double r) {
    if (r >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - r * r));
  }

  // \int_{|y|<w} bump(|y|/w) e^{i y.xi} dy for a radial bump, as a 1-D
  // integral over the radius with the d-dimensional angular average.
  double radial_transform(double k) const {
    static const GaussLegendre gl(96);
    double sum = 0.0;
    for (int panel = 0; panel < 4; ++panel) {
      const double a = width_ * panel / 4.0, b = width_ * (panel + 1) / 4.0;
      for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
        const double r = 0.5 * (a + b) + 0.5 * (b - a) * gl.nodes[i];
        const double w = 0.5 * (b - a) * gl.weights[i];
        double angular;
        if (dim_ == 3) {
          const double kr = k * r;
          angular = 4.0 * pi * r * r * (kr == 0.0 ? 1.0 : std::sin(kr) / kr);
        } else {
          angular = 2.0 * pi * r * std::cyl_bessel_j(0.0, k * r);
        }
        sum += w * bump(r / width_) * angular;
      }
    }
    return sum;
  }

  double interpolate(const Point& x) const {
    const double h = grid_.spacing();
    const int n = grid_.n();
    std::array<int, 3> base{0, 0, 0};
    std::array<double, 3> frac{0.0, 0.0, 0.0};
    for (int k = 0; k < dim_; ++k) {
      const double u = (x[k] + grid_.half_width()) / h;
      if (u < 0.0 || u > n - 1) return 0.0;
      base[k] = std::min(static_cast<int>(std::floor(u)), n - 2);
      frac[k] = u - base[k];
    }
    double out = 0.0;
    for (int corner = 0; corner < (1 << dim_); ++corner) {
      double w = 1.0;
      std::array<int, 3> idx{0, 0, 0};
      for (int k = 0; k < dim_; ++k) {
        const int bit = (corner >> k) & 1;
        idx[k] = base[k] + bit;
        w *= bit ? frac[k] : 1.0 - frac[k];
      }
      if (w != 0.0) out += w * samples_[grid_.ravel(idx)];
    }
    return out;
  }

  ProfileKind kind_;
  int dim_;
  Point center_{0.0, 0.0, 0.0};
  double width_ = 0.0;
  double amplitude_ = 0.0;
  double support_radius_ = 0.0;
  SpatialGrid grid_;
  std::vector<double> samples_;
};

// ---------------------------------------------------------------------------
// Temporal function g
// ---------------------------------------------------------------------------

enum class TemporalKind { constant, polynomial, grid_sampled };

/// Temporal intensity g on [0, T]. Grid-sampled functions interpolate
/// linearly between their nodes.
class TemporalFunction {
 public:
  static TemporalFunction constant(double value, double horizon) {
    return polynomial_impl(TemporalKind::constant, {value}, horizon);
  }

  /// g(t) = sum_k c_k t^k.
  static TemporalFunction polynomial(std::vector<double> coefficients, double horizon) {
    if (coefficients.empty()) throw ValidationError("temporal.coefficients must not be empty");
    return polynomial_impl(TemporalKind::polynomial, std::move(coefficients), horizon);
  }

  static TemporalFunction grid_sampled(std::vector<double> times, std::vector<double> values) {
    if (times.size() < 2 || times.size() != values.size())
      throw ValidationError("temporal.times and temporal.values must have equal length >= 2");
    if (times.front() != 0.0) throw ValidationError("temporal.times must start at 0");
    for (std::size_t i = 1; i < times.size(); ++i)
      if (!(times[i] > times[i - 1])) throw ValidationError("temporal.times must increase strictly");
    TemporalFunction g;
    g.kind_ = TemporalKind::grid_sampled;
    g.horizon_ = times.back();
    g.times_ = std::move(times);
    g.values_ = std::move(values);
    return g;
  }

  TemporalKind kind() const { return kind_; }
  double horizon() const { return horizon_; }
  const std::vector<double>& coefficients() const { return values_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& values() const { return values_; }

  double operator()(double t) const {
    if (kind_ == TemporalKind::grid_sampled) {
      if (t <= times_.front()) return values_.front();
      if (t >= times_.back()) return values_.back();
      const auto it = std::upper_bound(times_.begin(), times_.end(), t);
      const std::size_t i = static_cast<std::size_t>(it - times_.begin()) - 1;
      const double u = (t - times_[i]) / (times_[i + 1] - times_[i]);
      return (1.0 - u) * values_[i] + u * values_[i + 1];
    }
    double acc = 0.0;
    for (auto c = values_.rbegin(); c != values_.rend(); ++c) acc = acc * t + *c;
    return acc;
  }

  /// \int_0^T weight(s) g(s) ds with a rule exact for polynomial g times
  /// low-degree weights.
  template <class Fn>
  double integrate(Fn&& weight) const {
    static const GaussLegendre gl(24);
    const std::vector<double> breaks = panel_breaks();
    double sum = 0.0;
    for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
      const double a = breaks[p], b = breaks[p + 1];
      for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
        const double s = 0.5 * (a + b) + 0.5 * (b - a) * gl.nodes[i];
        sum += 0.5 * (b - a) * gl.weights[i] * weight(s) * (*this)(s);
      }
    }
    return sum;
  }

  double integral() const {
    return integrate([](double) { return 1.0; });
  }

 private:
  static TemporalFunction polynomial_impl(TemporalKind kind, std::vector<double> c, double horizon) {
    if (!(horizon > 0.0)) throw ValidationError("temporal.horizon must be positive");
    TemporalFunction g;
    g.kind_ = kind;
    g.horizon_ = horizon;
    g.values_ = std::move(c);
    return g;
  }

  std::vector<double> panel_breaks() const {
    if (kind_ == TemporalKind::grid_sampled) return times_;
    std::vector<double> b(9);
    for (int i = 0; i <= 8; ++i) b[i] = horizon_ * i / 8.0;
    return b;
  }

  TemporalKind kind_ = TemporalKind::constant;
  double horizon_ = 0.0;
  std::vector<double> times_;
  std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Orbit a
// ---------------------------------------------------------------------------

enum class OrbitKind { linear, polynomial, piecewise_linear };

/// Orbit a(t) in R^dim with declared bound |a(t)| < R2. Piecewise-linear
/// orbits are held constant outside their node range.
class OrbitFunction {
 public:
  /// a(t) = offset + velocity t.
  static OrbitFunction linear(int dim, Point velocity, double bound, Point offset = {0.0, 0.0, 0.0}) {
    OrbitFunction a(OrbitKind::linear, dim, bound);
    a.coeffs_.resize(dim);
    for (int k = 0; k < dim; ++k) a.coeffs_[k] = {offset[k], velocity[k]};
    return a;
  }

  /// a_j(t) = sum_k coefficients[j][k] t^k.
  static OrbitFunction polynomial(int dim, std::vector<std::vector<double>> coefficients, double bound) {
    if (static_cast<int>(coefficients.size()) != dim)
      throw ValidationError("orbit.coefficients must have one list per component");
    for (const auto& c : coefficients)
      if (c.empty()) throw ValidationError("orbit.coefficients lists must not be empty");
    OrbitFunction a(OrbitKind::polynomial, dim, bound);
    a.coeffs_ = std::move(coefficients);
    return a;
  }

  /// values[j][k] = a_j(times[k]).
  static OrbitFunction piecewise_linear(int dim, std::vector<double> times,
                                        std::vector<std::vector<double>> values, double bound) {
    if (times.size() < 2) throw ValidationError("orbit.times needs at least two nodes");
    for (std::size_t i = 1; i < times.size(); ++i)
      if (!(times[i] > times[i - 1])) throw ValidationError("orbit.times must increase strictly");
    if (static_cast<int>(values.size()) != dim)
      throw ValidationError("orbit.values must have one list per component");
    for (const auto& v : values)
      if (v.size() != times.size()) throw ValidationError("orbit.values lists must match orbit.times");
    OrbitFunction a(OrbitKind::piecewise_linear, dim, bound);
    a.times_ = std::move(times);
    a.coeffs_ = std::move(values);
    return a;
  }

  OrbitKind kind() const { return kind_; }
  int dim() const { return dim_; }
  double bound() const { return bound_; }
  const std::vector<double>& times() const { return times_; }
  /// Polynomial coefficients, or node values for piecewise-linear orbits.
  const std::vector<std::vector<double>>& data() const { return coeffs_; }

  Point operator()(double t) const {
    Point p{0.0, 0.0, 0.0};
    if (kind_ == OrbitKind::piecewise_linear) {
      std::size_t i = 0;
      double u = 0.0;
      if (t <= times_.front()) {
        i = 0;
      } else if (t >= times_.back()) {
        i = times_.size() - 2;
        u = 1.0;
      } else {
        i = static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), t) - times_.begin()) - 1;
        u = (t - times_[i]) / (times_[i + 1] - times_[i]);
      }
      for (int k = 0; k < dim_; ++k) p[k] = (1.0 - u) * coeffs_[k][i] + u * coeffs_[k][i + 1];
      return p;
    }
    for (int k = 0; k < dim_; ++k) {
      double acc = 0.0;
      for (auto c = coeffs_[k].rbegin(); c != coeffs_[k].rend(); ++c) acc = acc * t + *c;
      p[k] = acc;
    }
    return p;
  }

 private:
  OrbitFunction(OrbitKind kind, int dim, double bound) : kind_(kind), dim_(dim), bound_(bound) {
    if (dim != 2 && dim != 3) throw ValidationError("orbit dimension must be 2 or 3");
    if (!(bound > 0.0)) throw ValidationError("orbit.bound must be positive");
  }

  OrbitKind kind_;
  int dim_;
  double bound_;
  std::vector<double> times_;
  std::vector<std::vector<double>> coeffs_;
};

// ---------------------------------------------------------------------------
// Source model F(x, t) = f(x - a(t)) g(t)
// ---------------------------------------------------------------------------

struct SourceModel {
  SourceProfile profile;
  TemporalFunction temporal;
  OrbitFunction orbit;
  double margin = 0.05;

  SourceModel(SourceProfile f, TemporalFunction g, OrbitFunction a, double margin_ = 0.05)
      : profile(std::move(f)), temporal(std::move(g)), orbit(std::move(a)), margin(margin_) {
    if (profile.dim() != orbit.dim()) throw ValidationError("profile and orbit dimensions differ");
    if (!(margin > 0.0)) throw ValidationError("model.margin must be positive");
  }

  int dim() const { return profile.dim(); }
  double horizon() const { return temporal.horizon(); }
  /// Radius R of the ball that contains supp_x F(., t) for every t.
  double radius() const { return profile.support_radius() + orbit.bound() + margin; }
};

/// Half-width R + 4 sqrt(2T) for a box around the model, which keeps the
/// periodic images of the heat kernel far from the source region.
inline double default_half_width(const SourceModel& m) {
  return m.radius() + 4.0 * std::sqrt(2.0 * m.horizon());
}

inline double eval_source(const SourceModel& m, const Point& x, double t) {
  if (!(t >= 0.0 && t <= m.horizon()))
    throw ValidationError("eval_source: t outside [0, T]");
  const Point a = m.orbit(t);
  return m.profile(Point{x[0] - a[0], x[1] - a[1], x[2] - a[2]}) * m.temporal(t);
}

// ---------------------------------------------------------------------------
// Hypothesis validation
// ---------------------------------------------------------------------------

enum class Purpose { ip1, ip2 };

struct HypothesisCheck {
  std::string name;
  bool passed = true;
  std::string detail;
  std::optional<double> witness;  // time (or radius) at which the check failed
};

struct ValidationReport {
  std::vector<HypothesisCheck> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
  }

  const HypothesisCheck* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }

  std::string failures() const {
    std::ostringstream os;
    for (const auto& c : checks)
      if (!c.passed) os << c.name << ": " << c.detail << "; ";
    return os.str();
  }
};

inline constexpr int kValidationSamples = 1024;

namespace detail {

inline HypothesisCheck check_monotone(const std::vector<double>& values, int component) {
  HypothesisCheck c{"orbit-monotone-" + std::to_string(component + 1), true, "", std::nullopt};
  int sign = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    const double d = values[i] - values[i - 1];
    const int s = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
    if (s == 0 || (sign != 0 && s != sign)) {
      c.passed = false;
      c.detail = "component " + std::to_string(component + 1) + " is not strictly monotone";
      c.witness = static_cast<double>(i);
      return c;
    }
    sign = s;
  }
  c.detail = sign > 0 ? "increasing" : "decreasing";
  return c;
}

}  // namespace detail

/// Checks the structural hypotheses on (f, g, a) by dense sampling. For
/// ip2 it additionally checks g > 0 on (0, T), a(0) = 0 and strict
/// monotonicity of every orbit component.
inline ValidationReport validate(const SourceModel& m, Purpose purpose) {
  ValidationReport rep;
  const double T = m.horizon();
  const int d = m.dim();
  const int ns = kValidationSamples;
  auto fmt = [](double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  };

  rep.checks.push_back({"profile-nonzero", !m.profile.identically_zero(),
                        m.profile.identically_zero() ? "profile is identically zero" : "", std::nullopt});

  {
    HypothesisCheck c{"profile-support", true, "", std::nullopt};
    const double R1 = m.profile.support_radius();
    switch (m.profile.kind()) {
      case ProfileKind::gaussian_bump: {
        const double need = norm(m.profile.center(), d) + SourceProfile::gaussian_tail_factor() * m.profile.width();
        if (R1 < need) {
          c.passed = false;
          c.detail = "declared R1 " + fmt(R1) + " below numerical support " + fmt(need);
          c.witness = need;
        }
        break;
      }
      case ProfileKind::compact_bump:
        break;
      case ProfileKind::grid_sampled: {
        const auto& g = m.profile.sample_grid();
        const auto& v = m.profile.samples();
        double vmax = 0.0;
        for (double x : v) vmax = std::max(vmax, std::abs(x));
        for (std::size_t i = 0; i < v.size(); ++i) {
          const double r = norm(g.point(i), d);
          if (r >= R1 && std::abs(v[i]) > 1e-12 * vmax) {
            c.passed = false;
            c.detail = "nonzero sample outside declared R1 at radius " + fmt(r);
            c.witness = r;
            break;
          }
        }
        break;
      }
    }
    rep.checks.push_back(c);
  }

  {
    HypothesisCheck c{"temporal-bounded", true, "", std::nullopt};
    for (int i = 0; i <= ns; ++i) {
      const double t = T * i / ns;
      if (!std::isfinite(m.temporal(t))) {
        c.passed = false;
        c.detail = "g is not finite";
        c.witness = t;
        break;
      }
    }
    rep.checks.push_back(c);
  }

  {
    HypothesisCheck c{"orbit-bounded", true, "", std::nullopt};
    std::vector<double> ts;
    for (int i = 0; i <= ns; ++i) ts.push_back(T * i / ns);
    if (m.orbit.kind() == OrbitKind::piecewise_linear)
      ts.insert(ts.end(), m.orbit.times().begin(), m.orbit.times().end());
    for (double t : ts) {
      const double r = norm(m.orbit(t), d);
      if (!(r < m.orbit.bound())) {
        c.passed = false;
        c.detail = "|a(t)| = " + fmt(r) + " reaches bound R2 = " + fmt(m.orbit.bound());
        c.witness = t;
        break;
      }
    }
    rep.checks.push_back(c);
  }

  {
    const double R = m.radius(), need = m.profile.support_radius() + m.orbit.bound();
    rep.checks.push_back({"domain-radius", R > need, R > need ? "" : "R must exceed R1 + R2", std::nullopt});
  }

  if (purpose == Purpose::ip2) {
    HypothesisCheck pos{"temporal-positive", true, "", std::nullopt};
    for (int i = 0; i < ns; ++i) {
      const double t = T * (i + 0.5) / ns;
      if (!(m.temporal(t) > 0.0)) {
        pos.passed = false;
        pos.detail = "g(" + fmt(t) + ") = " + fmt(m.temporal(t)) + " is not positive";
        pos.witness = t;
        break;
      }
    }
    rep.checks.push_back(pos);

    const double a0 = norm(m.orbit(0.0), d);
    rep.checks.push_back({"orbit-origin", a0 <= 1e-12, a0 <= 1e-12 ? "" : "a(0) = " + fmt(a0) + " is not the origin",
                          a0 <= 1e-12 ? std::nullopt : std::optional<double>(0.0)});

    for (int j = 0; j < d; ++j) {
      std::vector<double> vals;
      std::vector<double> ts;
      if (m.orbit.kind() == OrbitKind::piecewise_linear) {
        vals = m.orbit.data()[j];
        ts = m.orbit.times();
      } else {
        for (int i = 0; i <= ns; ++i) {
          ts.push_back(T * i / ns);
          vals.push_back(m.orbit(ts.back())[j]);
        }
      }
      auto c = detail::check_monotone(vals, j);
      if (c.witness) c.witness = ts[static_cast<std::size_t>(*c.witness)];
      rep.checks.push_back(c);
    }
  }
  return rep;
}

inline void require_valid(const SourceModel& m, Purpose purpose) {
  const auto rep = validate(m, purpose);
  if (!rep.passed()) throw ValidationError("model validation failed: " + rep.failures());
}

}  // namespace movsrc
