#pragma once

#include <fftw3.h>

#include <mutex>
#include <span>

#include "movsrc/common.hpp"

namespace movsrc {

/**
 * Uniform periodic box [-L, L)^dim with n nodes per axis.
 *
 * Node k sits at x_k = -L + k h with h = 2L/n. Frequencies are stored in
 * centered order: index i carries xi_i = (i - n/2) * pi / L, so the zero
 * frequency lives at index n/2 and xi_max = pi / h.
 */
class SpatialGrid {
 public:
  SpatialGrid() = default;

  int dim() const { return dim_; }
  int n() const { return n_; }
  double half_width() const { return half_width_; }
  double spacing() const { return 2.0 * half_width_ / n_; }
  double freq_step() const { return pi / half_width_; }
  double freq_max() const { return pi / spacing(); }
  /// h^dim, the volume of one cell.
  double cell_volume() const { return std::pow(spacing(), dim_); }

  std::size_t size() const {
    std::size_t s = 1;
    for (int k = 0; k < dim_; ++k) s *= static_cast<std::size_t>(n_);
    return s;
  }

  const std::vector<double>& coordinates() const { return coords_; }
  const std::vector<double>& frequencies() const { return freqs_; }

  /// Row-major multi-index of a flat index; unused axes are zero.
  std::array<int, 3> unravel(std::size_t flat) const {
    std::array<int, 3> idx{0, 0, 0};
    for (int k = dim_ - 1; k >= 0; --k) {
      idx[k] = static_cast<int>(flat % n_);
      flat /= n_;
    }
    return idx;
  }

  std::size_t ravel(const std::array<int, 3>& idx) const {
    std::size_t flat = 0;
    for (int k = 0; k < dim_; ++k) flat = flat * n_ + static_cast<std::size_t>(idx[k]);
    return flat;
  }

  Point point(std::size_t flat) const {
    const auto idx = unravel(flat);
    Point p{0.0, 0.0, 0.0};
    for (int k = 0; k < dim_; ++k) p[k] = coords_[idx[k]];
    return p;
  }

  Point frequency(std::size_t flat) const {
    const auto idx = unravel(flat);
    Point p{0.0, 0.0, 0.0};
    for (int k = 0; k < dim_; ++k) p[k] = freqs_[idx[k]];
    return p;
  }

  /// Flat index of the frequency -xi modulo the grid period.
  std::size_t mirror(std::size_t flat) const {
    auto idx = unravel(flat);
    for (int k = 0; k < dim_; ++k) idx[k] = (n_ - idx[k]) % n_;
    return ravel(idx);
  }

  bool operator==(const SpatialGrid& o) const {
    return dim_ == o.dim_ && n_ == o.n_ && half_width_ == o.half_width_;
  }

  friend SpatialGrid make_grid(int dim, int n_per_axis, double half_width);

 private:
  int dim_ = 0;
  int n_ = 0;
  double half_width_ = 0.0;
  std::vector<double> coords_;
  std::vector<double> freqs_;
};

/// Even sizes >= 8 built from the factors 2, 3 and 5 (powers of two and
/// sizes such as 48 or 96).
inline bool fft_friendly(int n) {
  if (n < 8 || n % 2 != 0) return false;
  for (int p : {2, 3, 5})
    while (n % p == 0) n /= p;
  return n == 1;
}

inline SpatialGrid make_grid(int dim, int n_per_axis, double half_width) {
  if (dim != 2 && dim != 3) throw ValidationError("grid: dim must be 2 or 3");
  if (!fft_friendly(n_per_axis))
    throw ValidationError("grid: n_per_axis must be an even number >= 8 with no prime factors above 5, got " +
                          std::to_string(n_per_axis));
  if (!(half_width > 0.0) || !std::isfinite(half_width))
    throw ValidationError("grid: L_half must be positive");
  SpatialGrid g;
  g.dim_ = dim;
  g.n_ = n_per_axis;
  g.half_width_ = half_width;
  g.coords_.resize(n_per_axis);
  g.freqs_.resize(n_per_axis);
  const double h = 2.0 * half_width / n_per_axis;
  for (int i = 0; i < n_per_axis; ++i) {
    g.coords_[i] = -half_width + i * h;
    g.freqs_[i] = (i - n_per_axis / 2) * pi / half_width;
  }
  return g;
}

/// Samples of v_hat(xi) = \int v(x) e^{+i x.xi} dx on the centered frequency
/// nodes of `grid`, approximated by h^dim times the discrete sum.
struct SpectralField {
  static constexpr const char* convention = "exp(+i x.xi), scaled by h^dim, centered";

  SpatialGrid grid;
  std::vector<complex> values;
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// Unscaled multi-dimensional DFT in FFTW order; sign is FFTW_FORWARD (-1) or
// FFTW_BACKWARD (+1).
inline void fftw_transform(const SpatialGrid& grid, std::vector<complex>& data, int sign) {
  std::array<int, 3> dims{grid.n(), grid.n(), grid.n()};
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft(grid.dim(), dims.data(), buf, buf, sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::lock_guard lock(fftw_planner_mutex());
  fftw_destroy_plan(plan);
}

// Maps a centered multi-index to the FFTW index and returns the (-1)^m phase
// that moves the origin from x = 0 to the box corner x = -L.
inline std::pair<std::size_t, double> centered_to_fftw(const SpatialGrid& grid, std::size_t flat) {
  auto idx = grid.unravel(flat);
  const int n = grid.n();
  int parity = 0;
  for (int k = 0; k < grid.dim(); ++k) {
    parity += idx[k] - n / 2;
    idx[k] = (idx[k] + n / 2) % n;
  }
  return {grid.ravel(idx), (std::abs(parity) % 2 == 0) ? 1.0 : -1.0};
}

}  // namespace detail

inline SpectralField forward_dft(const SpatialGrid& grid, std::span<const double> field) {
  if (field.size() != grid.size()) throw Error("forward_dft: field size does not match grid");
  std::vector<complex> work(field.begin(), field.end());
  detail::fftw_transform(grid, work, FFTW_BACKWARD);
  SpectralField out{grid, std::vector<complex>(grid.size())};
  const double vol = grid.cell_volume();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto [p, phase] = detail::centered_to_fftw(grid, i);
    out.values[i] = vol * phase * work[p];
  }
  return out;
}

/// Largest |v(xi) - conj(v(-xi))| relative to max |v|.
inline double conjugate_asymmetry(const SpectralField& spec) {
  double amax = 0.0, dev = 0.0;
  for (std::size_t i = 0; i < spec.values.size(); ++i) {
    amax = std::max(amax, std::abs(spec.values[i]));
    dev = std::max(dev, std::abs(spec.values[i] - std::conj(spec.values[spec.grid.mirror(i)])));
  }
  return amax > 0.0 ? dev / amax : 0.0;
}

/// Projects onto the spectra of real fields. The Nyquist rows have no
/// partner inside the centered range and become real.
inline void symmetrize(SpectralField& spec) {
  std::vector<complex> out(spec.values.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = 0.5 * (spec.values[i] + std::conj(spec.values[spec.grid.mirror(i)]));
  spec.values = std::move(out);
}

inline std::vector<double> inverse_dft(const SpectralField& spec, double symmetry_tol = 1e-10) {
  const auto& grid = spec.grid;
  if (spec.values.size() != grid.size()) throw ValidationError("inverse_dft: spectrum size does not match grid");
  if (const double asym = conjugate_asymmetry(spec); asym > symmetry_tol)
    throw ValidationError("inverse_dft: spectrum is not conjugate-symmetric (relative deviation " +
                std::to_string(asym) + ")");
  std::vector<complex> work(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto [p, phase] = detail::centered_to_fftw(grid, i);
    work[p] = phase * spec.values[i];
  }
  detail::fftw_transform(grid, work, FFTW_FORWARD);
  const double scale = 1.0 / std::pow(2.0 * grid.half_width(), grid.dim());
  std::vector<double> out(grid.size());
  for (std::size_t p = 0; p < grid.size(); ++p) out[p] = scale * work[p].real();
  return out;
}

/// Continuous L2 norm of a grid field, sqrt(h^dim sum |v|^2).
inline double l2_norm(const SpatialGrid& grid, std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(grid.cell_volume() * s);
}

/// The same norm evaluated from a spectrum through Parseval.
inline double l2_norm(const SpectralField& spec) {
  double s = 0.0;
  for (const auto& z : spec.values) s += std::norm(z);
  return std::sqrt(s / std::pow(2.0 * spec.grid.half_width(), spec.grid.dim()));
}

/// Trigonometric interpolation of a grid field's spectrum at an arbitrary
/// frequency: h^dim sum_k v(x_k) e^{i x_k.xi}.
inline complex spectrum_at(const SpatialGrid& grid, std::span<const double> v, const Point& xi) {
  const int n = grid.n();
  const auto& x = grid.coordinates();
  std::array<std::vector<complex>, 3> phase;
  for (int k = 0; k < grid.dim(); ++k) {
    phase[k].resize(n);
    for (int i = 0; i < n; ++i) phase[k][i] = std::polar(1.0, x[i] * xi[k]);
  }
  complex sum = 0.0;
  if (grid.dim() == 2) {
    for (int i = 0; i < n; ++i) {
      complex row = 0.0;
      for (int j = 0; j < n; ++j) row += v[static_cast<std::size_t>(i) * n + j] * phase[1][j];
      sum += row * phase[0][i];
    }
  } else {
    for (int i = 0; i < n; ++i) {
      complex plane = 0.0;
      for (int j = 0; j < n; ++j) {
        complex row = 0.0;
        const std::size_t base = (static_cast<std::size_t>(i) * n + j) * n;
        for (int l = 0; l < n; ++l) row += v[base + l] * phase[2][l];
        plane += row * phase[1][j];
      }
      sum += plane * phase[0][i];
    }
  }
  return grid.cell_volume() * sum;
}

}  // namespace movsrc
