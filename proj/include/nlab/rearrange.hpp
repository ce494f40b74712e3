#pragma once

// Distribution functions, the Euclidean monotone rearrangement and the
// inequality checks built on them (Polya-Szego, Faber-Krahn, Weyl).

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include "nlab/bessel.hpp"
#include "nlab/domains.hpp"
#include "nlab/eigensolver.hpp"
#include "nlab/error.hpp"

namespace nlab {

namespace detail {
inline void require_nonnegative(const GridDomain& d, std::span<const double> u) {
  require(static_cast<int>(u.size()) == d.size(), ErrorKind::DimensionMismatch,
          "function length differs from the domain size");
  for (double v : u)
    require(v >= 0.0 && std::isfinite(v), ErrorKind::NegativeValues,
            "rearrangement needs a nonnegative function");
}
}  // namespace detail

/// mu(t) = m({u > t}) evaluated exactly from the cell values.
class DistributionFunction {
 public:
  DistributionFunction(std::vector<double> values, double cell_area, double total_mass)
      : sorted_(std::move(values)), cell_area_(cell_area), total_mass_(total_mass) {
    std::sort(sorted_.begin(), sorted_.end(), std::greater<>());
    thresholds_.push_back(0.0);
    for (auto it = sorted_.rbegin(); it != sorted_.rend(); ++it)
      if (*it > thresholds_.back()) thresholds_.push_back(*it);
    mu_.reserve(thresholds_.size());
    for (double t : thresholds_) mu_.push_back((*this)(t));
  }

  double operator()(double t) const {
    // sorted_ is descending; count entries strictly above t.
    const auto it = std::lower_bound(sorted_.begin(), sorted_.end(), t, std::greater<>());
    return static_cast<double>(it - sorted_.begin()) * cell_area_;
  }

  /// Ascending sample levels: 0 and every distinct positive value.
  [[nodiscard]] const std::vector<double>& thresholds() const noexcept { return thresholds_; }
  [[nodiscard]] const std::vector<double>& mu() const noexcept { return mu_; }
  [[nodiscard]] double total_mass() const noexcept { return total_mass_; }
  [[nodiscard]] double max_value() const noexcept { return sorted_.empty() ? 0.0 : sorted_.front(); }
  [[nodiscard]] double cell_area() const noexcept { return cell_area_; }
  [[nodiscard]] const std::vector<double>& sorted_descending() const noexcept { return sorted_; }

  /// Generalized inverse: u#(0) = max u, u#(s) = inf{t : mu(t) < s} for s > 0.
  /// Left-continuous and nonincreasing.
  [[nodiscard]] double inverse(double s) const {
    if (s <= 0.0) return max_value();
    const double cells = s / cell_area_;
    const auto i = static_cast<std::size_t>(std::ceil(cells - 1e-12 * std::max(1.0, cells)));
    if (i == 0) return max_value();
    return i <= sorted_.size() ? sorted_[i - 1] : 0.0;
  }

 private:
  std::vector<double> sorted_;
  double cell_area_;
  double total_mass_;
  std::vector<double> thresholds_;
  std::vector<double> mu_;
};

inline DistributionFunction distribution_function(const GridDomain& d, std::span<const double> u) {
  detail::require_nonnegative(d, u);
  return DistributionFunction(std::vector<double>(u.begin(), u.end()), d.cell_area(), d.area());
}

/// Radially nonincreasing function on the ball of volume m(Omega):
/// v(r) = u#(omega_N r^N). Evaluation is exact; `radii`/`values` are uniform
/// samples of the interpolated profile, used for plotting and for the radial
/// energy.
class RadialProfile {
 public:
  RadialProfile(DistributionFunction dist, int dimension, int samples)
      : dist_(std::move(dist)), dimension_(dimension), omega_(unit_ball_volume(dimension)) {
    outer_radius_ = std::pow(dist_.total_mass() / omega_, 1.0 / dimension_);
    radii_.resize(samples + 1);
    values_.resize(samples + 1);
    for (int j = 0; j <= samples; ++j) {
      radii_[j] = outer_radius_ * j / samples;
      values_[j] = j < samples ? interpolated(radii_[j]) : dist_.sorted_descending().back();
    }
  }

  [[nodiscard]] double operator()(double r) const {
    if (r >= outer_radius_) return 0.0;
    return dist_.inverse(omega_ * std::pow(std::max(r, 0.0), dimension_));
  }

  /// Piecewise-linear version of the profile through the mass midpoints: the
  /// i-th largest cell value sits at the radius enclosing (i - 1/2) cells, and
  /// the smallest value is held from the last midpoint to the outer radius.
  /// Stays within one cell of mass of the exact step profile.
  [[nodiscard]] double interpolated(double r) const {
    if (r >= outer_radius_) return 0.0;
    const auto& s = dist_.sorted_descending();
    const double a = dist_.cell_area();
    const double cells = omega_ * std::pow(std::max(r, 0.0), dimension_) / a;  // mass in cells
    const double pos = cells - 0.5;  // 0-based fractional index of the mass midpoints
    if (pos <= 0.0) return s.front();
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const auto radius_at = [&](double c) { return std::pow(c * a / omega_, 1.0 / dimension_); };
    if (i + 1 >= s.size()) return s.back();
    const double v0 = s[i];
    const double v1 = s[i + 1];
    const double r0 = radius_at(static_cast<double>(i) + 0.5);
    const double r1 = radius_at(static_cast<double>(i) + 1.5);
    if (!(r1 > r0)) return v0;
    return v0 + (v1 - v0) * (r - r0) / (r1 - r0);
  }

  /// sup{r : v(r) > t}, found by bisection on the exact profile.
  [[nodiscard]] double level_radius(double t) const {
    if (!((*this)(0.0) > t)) return 0.0;
    double lo = 0.0;
    double hi = outer_radius_;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if ((*this)(mid) > t)
        lo = mid;
      else
        hi = mid;
    }
    return hi;
  }

  [[nodiscard]] int dimension() const noexcept { return dimension_; }
  [[nodiscard]] double outer_radius() const noexcept { return outer_radius_; }
  [[nodiscard]] const std::vector<double>& radii() const noexcept { return radii_; }
  [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }
  [[nodiscard]] const DistributionFunction& distribution() const noexcept { return dist_; }

  /// Surface measure of the sphere of radius r: N omega_N r^{N-1}.
  [[nodiscard]] double shell(double r) const {
    return dimension_ * omega_ * std::pow(r, dimension_ - 1);
  }

  /// int v^p over the ball, exactly from the step representation.
  [[nodiscard]] double lp_integral(double p) const {
    double s = 0.0;
    for (double v : dist_.sorted_descending()) s += std::pow(v, p);
    return s * dist_.cell_area();
  }

  /// int v^p over the ball by trapezoid quadrature of the samples.
  [[nodiscard]] double lp_integral_sampled(double p) const {
    double s = 0.0;
    for (std::size_t j = 0; j + 1 < radii_.size(); ++j) {
      const double a = std::pow(values_[j], p) * shell(radii_[j]);
      const double b = std::pow(values_[j + 1], p) * shell(radii_[j + 1]);
      s += 0.5 * (a + b) * (radii_[j + 1] - radii_[j]);
    }
    return s;
  }

  /// int |v'|^2 over the ball. Centered differences with a half-width of one
  /// grid cell (the radial resolution the cell data actually carries; finer
  /// differences pick up the steps between cell values), one-sided at the
  /// endpoints, trapezoid in r. The last sample holds the left limit at the
  /// outer radius, so a jump to zero there is not counted.
  [[nodiscard]] double dirichlet_energy() const {
    const std::size_t n = radii_.size();
    if (n < 3) return 0.0;
    const double dr = radii_[1] - radii_[0];
    const auto m = static_cast<std::size_t>(
        std::clamp(std::round(std::sqrt(dist_.cell_area()) / dr), 1.0, static_cast<double>(n - 1)));
    std::vector<double> g(n);
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t lo = j >= m ? j - m : 0;
      const std::size_t hi = std::min(n - 1, j + m);
      g[j] = (values_[hi] - values_[lo]) / (radii_[hi] - radii_[lo]);
    }
    double s = 0.0;
    for (std::size_t j = 0; j + 1 < n; ++j)
      s += 0.5 * (g[j] * g[j] * shell(radii_[j]) + g[j + 1] * g[j + 1] * shell(radii_[j + 1])) * dr;
    return s;
  }

 private:
  DistributionFunction dist_;
  int dimension_;
  double omega_;
  double outer_radius_ = 0.0;
  std::vector<double> radii_;
  std::vector<double> values_;
};

inline constexpr int kMinProfileSamples = 1000;

/// Euclidean monotone rearrangement of a nonnegative grid function. The grid
/// is planar, but the target dimension N only enters through omega_N and the
/// radius map, so other N are accepted.
inline RadialProfile euclidean_rearrangement(const GridDomain& d, std::span<const double> u,
                                             int dimension = 2) {
  require(dimension >= 2, ErrorKind::InvalidParameter, "rearrangement needs N >= 2");
  auto dist = distribution_function(d, u);
  require(dist.max_value() > 0.0, ErrorKind::ZeroVector, "rearrangement of the zero function");
  const double r_star = std::pow(d.area() / unit_ball_volume(dimension), 1.0 / dimension);
  const int samples = std::max(kMinProfileSamples, 4 * static_cast<int>(std::ceil(r_star / d.h())));
  return RadialProfile(std::move(dist), dimension, samples);
}

/// Face energy sum (u_a - u_b)^2 with zero extension outside the domain, the
/// discrete int |grad u|^2.
inline double dirichlet_face_energy(const GridDomain& d, std::span<const double> u) {
  require(static_cast<int>(u.size()) == d.size(), ErrorKind::DimensionMismatch,
          "function length differs from the domain size");
  double e = 0.0;
  for (int k = 0; k < d.size(); ++k) {
    const auto& nb = d.neighbors(k);
    for (int dir : {East, North, West, South}) {
      const int n = nb[dir];
      if (n == GridDomain::kOutside) {
        e += u[k] * u[k];
      } else if (dir == East || dir == North) {
        const double diff = u[k] - u[n];
        e += diff * diff;
      }
    }
  }
  return e;
}

struct PolyaSzegoResult {
  double energy_original = 0.0;
  double energy_rearranged = 0.0;
  bool holds = false;
};

inline constexpr double kPolyaSzegoSlack = 0.03;

/// Checks int |grad u*|^2 <= (1 + slack) int |grad u|^2 for nonnegative u
/// with zero boundary data.
inline PolyaSzegoResult polya_szego_check(const GridDomain& d, std::span<const double> u,
                                          int dimension = 2, double slack = kPolyaSzegoSlack) {
  const RadialProfile profile = euclidean_rearrangement(d, u, dimension);
  PolyaSzegoResult r;
  r.energy_original = dirichlet_face_energy(d, u);
  r.energy_rearranged = profile.dirichlet_energy();
  r.holds = r.energy_rearranged <= r.energy_original * (1.0 + slack);
  return r;
}

struct FaberKrahnResult {
  double ball_eigenvalue = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

inline constexpr double kFaberKrahnSlack = 0.02;

/// lambda_1 >= (1 - eps) lambda_1(ball of the same volume).
inline FaberKrahnResult faber_krahn_check(double lambda1, double volume, int dimension = 2,
                                          double eps = kFaberKrahnSlack) {
  require(lambda1 > 0 && volume > 0, ErrorKind::InvalidParameter,
          "Faber-Krahn check needs positive eigenvalue and volume");
  require(eps >= 0.0 && eps < 1.0, ErrorKind::InvalidParameter, "slack must lie in [0, 1)");
  FaberKrahnResult r;
  r.ball_eigenvalue = ball_dirichlet_eigenvalue(volume, dimension);
  r.rhs = (1.0 - eps) * r.ball_eigenvalue;
  r.holds = lambda1 >= r.rhs;
  return r;
}

struct WeylAnalysis {
  std::vector<double> lambdas;
  std::vector<int> counts;         ///< N(lambda_k) = #{j : lambda_j <= lambda_k}
  std::vector<double> normalized;  ///< N(lambda_k) / lambda_k^{N/2}
  double limit_estimate = 0.0;
  double target = 0.0;
  double relative_deviation = 0.0;
};

inline constexpr int kWeylMinEigenvalues = 50;

/// Counting function of the computed spectrum against omega_N |Omega| / (2 pi)^N.
/// The estimate is the median of N(lambda)/lambda^{N/2} over the top third.
inline WeylAnalysis weyl_analysis(std::span<const double> eigenvalues, double area,
                                  int dimension = 2) {
  const int k = static_cast<int>(eigenvalues.size());
  require(k >= kWeylMinEigenvalues, ErrorKind::InvalidParameter,
          "Weyl analysis needs at least 50 eigenvalues");
  require(area > 0, ErrorKind::InvalidParameter, "area must be positive");
  WeylAnalysis w;
  w.lambdas.assign(eigenvalues.begin(), eigenvalues.end());
  std::sort(w.lambdas.begin(), w.lambdas.end());
  for (int i = 0; i < k; ++i) {
    const double l = w.lambdas[i];
    const int count = static_cast<int>(std::upper_bound(w.lambdas.begin(), w.lambdas.end(), l) -
                                       w.lambdas.begin());
    w.counts.push_back(count);
    w.normalized.push_back(l > 0 ? count / std::pow(l, dimension / 2.0) : 0.0);
  }
  std::vector<double> tail(w.normalized.begin() + (2 * k) / 3, w.normalized.end());
  std::sort(tail.begin(), tail.end());
  const std::size_t t = tail.size();
  w.limit_estimate = t % 2 ? tail[t / 2] : 0.5 * (tail[t / 2 - 1] + tail[t / 2]);
  w.target = unit_ball_volume(dimension) * area / std::pow(2 * std::numbers::pi, dimension);
  w.relative_deviation = w.limit_estimate / w.target - 1.0;
  return w;
}

inline WeylAnalysis weyl_analysis(const Spectrum& s, double area, int dimension = 2) {
  return weyl_analysis(std::span<const double>(s.eigenvalues), area, dimension);
}

}  // namespace nlab
