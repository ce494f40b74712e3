#pragma once

// Exact spectra of the square [0, pi]^2: continuum lattice modes and the
// closed-form spectrum of the five-point grid Laplacian on the cell-centered
// n x n grid. Used as oracles and by `oracle lattice`.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "nlab/error.hpp"

namespace nlab::lattice {

struct Mode {
  int m = 0;
  int n = 0;
  double lambda = 0.0;
};

/// Continuum modes with m^2 + n^2 <= lambda_max, m, n >= 1 (Dirichlet) or
/// m, n >= 0 (Neumann), sorted by (lambda, m).
inline std::vector<Mode> square_modes(double lambda_max, bool neumann = false) {
  require(lambda_max >= 0, ErrorKind::InvalidParameter, "lambda_max must be nonnegative");
  std::vector<Mode> out;
  const int lo = neumann ? 0 : 1;
  const int top = static_cast<int>(std::floor(std::sqrt(lambda_max)));
  for (int m = lo; m <= top; ++m)
    for (int n = lo; n <= top; ++n)
      if (m * m + n * n <= lambda_max) out.push_back({m, n, static_cast<double>(m * m + n * n)});
  std::sort(out.begin(), out.end(), [](const Mode& a, const Mode& b) {
    return a.lambda != b.lambda ? a.lambda < b.lambda : a.m < b.m;
  });
  return out;
}

/// First `count` continuum Dirichlet eigenvalues of [0, pi]^2 with multiplicity.
inline std::vector<double> square_dirichlet_eigenvalues(int count) {
  double lmax = 2.0 * count + 16.0;
  for (;;) {
    auto modes = square_modes(lmax);
    if (static_cast<int>(modes.size()) >= count) {
      std::vector<double> out;
      for (int i = 0; i < count; ++i) out.push_back(modes[i].lambda);
      return out;
    }
    lmax *= 2;
  }
}

inline std::vector<double> square_neumann_eigenvalues(int count) {
  double lmax = 2.0 * count + 16.0;
  for (;;) {
    auto modes = square_modes(lmax, true);
    if (static_cast<int>(modes.size()) >= count) {
      std::vector<double> out;
      for (int i = 0; i < count; ++i) out.push_back(modes[i].lambda);
      return out;
    }
    lmax *= 2;
  }
}

inline long dirichlet_count(double lambda) { return static_cast<long>(square_modes(lambda).size()); }
inline long neumann_count(double lambda) {
  return static_cast<long>(square_modes(lambda, true).size());
}

/// #{(m, n) in Z^2 : m^2 + n^2 <= lambda} / 4: the Gauss circle count on one
/// quadrant, which carries no boundary term.
inline double quarter_gauss_count(double lambda) {
  require(lambda >= 0, ErrorKind::InvalidParameter, "lambda must be nonnegative");
  const long top = static_cast<long>(std::floor(std::sqrt(lambda)));
  long total = 0;
  for (long m = -top; m <= top; ++m) {
    const double rest = lambda - static_cast<double>(m * m);
    const long span = static_cast<long>(std::floor(std::sqrt(rest)));
    total += 2 * span + 1;
  }
  return static_cast<double>(total) / 4.0;
}

/// Grid eigenvalues of the five-point Dirichlet Laplacian on n x n cells of
/// width h (ghost zeros one cell outside): sum of 1D values
/// (4/h^2) sin^2(m pi / (2(n+1))).
inline std::vector<Mode> grid_dirichlet_modes(int cells, double h, int count) {
  require(cells > 0 && h > 0 && count > 0, ErrorKind::InvalidParameter, "bad grid parameters");
  auto one_d = [&](int m) {
    const double s = std::sin(m * std::numbers::pi / (2.0 * (cells + 1)));
    return 4.0 / (h * h) * s * s;
  };
  std::vector<Mode> all;
  const int top = std::min(cells, static_cast<int>(std::ceil(std::sqrt(4.0 * count))) + 4);
  for (int m = 1; m <= top; ++m)
    for (int n = 1; n <= top; ++n) all.push_back({m, n, one_d(m) + one_d(n)});
  std::sort(all.begin(), all.end(), [](const Mode& a, const Mode& b) {
    return a.lambda != b.lambda ? a.lambda < b.lambda : a.m < b.m;
  });
  all.resize(std::min<std::size_t>(all.size(), count));
  return all;
}

/// Nodal counts M(k) = max m*n over the cluster of k (relative gap rule) for
/// the product modes sorted as given.
inline std::vector<int> tensor_cluster_counts(const std::vector<Mode>& modes, double rel_gap) {
  const int k = static_cast<int>(modes.size());
  std::vector<int> out(k, 0);
  int first = 0;
  while (first < k) {
    int last = first;
    while (last + 1 < k &&
           std::abs(modes[last + 1].lambda - modes[last].lambda) /
                   std::max(modes[last + 1].lambda, 1e-300) <
               rel_gap)
      ++last;
    int best = 0;
    for (int i = first; i <= last; ++i) best = std::max(best, modes[i].m * modes[i].n);
    for (int i = first; i <= last; ++i) out[i] = best;
    first = last + 1;
  }
  return out;
}

}  // namespace nlab::lattice
