#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace movsrc {

using complex = std::complex<double>;

/// Points and frequencies always carry three slots; components past the
/// problem dimension stay zero.
using Point = std::array<double, 3>;

inline constexpr double pi = std::numbers::pi;

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A hypothesis or precondition on the inputs does not hold.
class ValidationError : public Error {
 public:
  using Error::Error;
};

inline double dot(const Point& a, const Point& b, int dim) {
  double s = 0.0;
  for (int k = 0; k < dim; ++k) s += a[k] * b[k];
  return s;
}

inline double norm2(const Point& a, int dim) { return dot(a, a, dim); }

inline double norm(const Point& a, int dim) { return std::sqrt(norm2(a, dim)); }

/// Runs fn(i) for i in [0, count) split into contiguous chunks, one per
/// thread. Each index is computed independently, so results do not depend on
/// the thread count.
template <class Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  const std::size_t nthreads =
      std::clamp<std::size_t>(threads > 0 ? static_cast<std::size_t>(threads) : 1, 1,
                              std::max<std::size_t>(count, 1));
  if (nthreads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(nthreads);
  const std::size_t chunk = (count + nthreads - 1) / nthreads;
  for (std::size_t t = 0; t < nthreads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([begin, end, &fn] {
      for (std::size_t i = begin; i < end; ++i) fn(i);
    });
  }
}

}  // namespace movsrc
