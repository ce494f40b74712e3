#pragma once

// Bessel J_alpha by its ascending series, its first positive zero, and the
// Euclidean ball constants built on it.

#include <cmath>
#include <numbers>

#include <json.hpp>

#include "nlab/error.hpp"

namespace nlab {

/// J_alpha(x) for alpha >= 0 and moderate x (the series is summed in long
/// double; cancellation stays below ~1e-14 relative for x <= 10).
inline long double bessel_j_series(long double alpha, long double x) {
  if (x == 0.0L) return alpha == 0.0L ? 1.0L : 0.0L;
  const long double half = x / 2.0L;
  const long double q = -half * half;
  long double term = std::pow(half, alpha) / std::tgamma(alpha + 1.0L);
  long double sum = term;
  for (int m = 0; m < 500; ++m) {
    term *= q / ((m + 1.0L) * (m + 1.0L + alpha));
    sum += term;
    if (m > half && std::abs(term) < 1e-18L * std::abs(sum)) break;
    if (term == 0.0L) break;
  }
  return sum;
}

/// First positive zero of J_alpha, alpha in [0, 2]. The first sign change on
/// a 0.01-step scan of (0, 10] is bisected to an absolute width below 1e-13.
inline double bessel_first_zero(double alpha) {
  require(alpha >= 0.0 && alpha <= 2.0 && std::isfinite(alpha), ErrorKind::InvalidParameter,
          "bessel_first_zero supports alpha in [0, 2]");
  const long double a = alpha;
  long double lo = 0.01L;
  long double f_lo = bessel_j_series(a, lo);
  for (int step = 2; step <= 1000; ++step) {
    const long double hi = 0.01L * step;
    const long double f_hi = bessel_j_series(a, hi);
    if ((f_lo > 0) != (f_hi > 0)) {
      long double left = lo;
      long double right = hi;
      for (int it = 0; it < 200 && right - left > 1e-15L; ++it) {
        const long double mid = 0.5L * (left + right);
        const long double f_mid = bessel_j_series(a, mid);
        if ((f_mid > 0) == (f_lo > 0))
          left = mid;
        else
          right = mid;
      }
      return static_cast<double>(0.5L * (left + right));
    }
    lo = hi;
    f_lo = f_hi;
  }
  throw Error(ErrorKind::NonConvergence, "no sign change of J_alpha found in (0, 10]");
}

/// Volume of the unit ball in R^N.
inline double unit_ball_volume(int dimension) {
  require(dimension >= 1, ErrorKind::InvalidParameter, "dimension must be positive");
  const double n = dimension;
  return std::pow(std::numbers::pi, n / 2) / std::tgamma(n / 2 + 1);
}

/// Constants of the N-dimensional Euclidean model.
struct SpectralConstants {
  int dimension = 2;
  double omega = 0.0;          ///< unit-ball volume omega_N
  double bessel_index = 0.0;   ///< (N-2)/N
  double j_first_zero = 0.0;   ///< first positive zero of J_{(N-2)/N}
  double pleijel_constant = 0.0;  ///< (2 pi)^N / (omega_N^2 j^N)
};

inline SpectralConstants spectral_constants(int dimension) {
  require(dimension >= 2, ErrorKind::InvalidParameter, "spectral constants need N >= 2");
  SpectralConstants c;
  c.dimension = dimension;
  c.omega = unit_ball_volume(dimension);
  c.bessel_index = static_cast<double>(dimension - 2) / dimension;
  c.j_first_zero = bessel_first_zero(c.bessel_index);
  c.pleijel_constant = std::pow(2 * std::numbers::pi, dimension) /
                       (c.omega * c.omega * std::pow(c.j_first_zero, dimension));
  return c;
}

inline nlohmann::json to_json(const SpectralConstants& c) {
  return {{"N", c.dimension},
          {"omega_N", c.omega},
          {"bessel_index", c.bessel_index},
          {"j", c.j_first_zero},
          {"pleijel_constant", c.pleijel_constant}};
}

/// First Dirichlet eigenvalue of the ball with the given volume:
/// (omega_N / volume)^{2/N} j^2_{(N-2)/N}.
inline double ball_dirichlet_eigenvalue(double volume, int dimension = 2) {
  require(volume > 0 && std::isfinite(volume), ErrorKind::InvalidParameter,
          "ball volume must be positive");
  const SpectralConstants c = spectral_constants(dimension);
  return std::pow(c.omega / volume, 2.0 / dimension) * c.j_first_zero * c.j_first_zero;
}

}  // namespace nlab
