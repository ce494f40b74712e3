#pragma once

// Nodal domains of grid eigenvectors and the counting checks built on them:
// Courant, Pleijel ratios, nodal Rayleigh quotients and the disjoint-volume
// counting certificate.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include "nlab/bessel.hpp"
#include "nlab/domains.hpp"
#include "nlab/eigensolver.hpp"
#include "nlab/error.hpp"
#include "nlab/laplacian.hpp"
#include "nlab/rearrange.hpp"

namespace nlab {

struct NodalDecomposition {
  /// Per interior cell: 0 = nodal set, 1..count = domain id.
  std::vector<int> labels;
  int count = 0;
  std::vector<double> areas;     ///< indexed by id - 1
  std::vector<int> signs;        ///< +1 / -1, indexed by id - 1
  std::vector<double> rayleigh;  ///< Rayleigh quotient of u restricted to the domain
  double threshold = 0.0;        ///< tau_nodal used
  double nodal_set_area = 0.0;
  double domain_area = 0.0;

  /// Interior indices of the cells carrying `id`, ascending.
  [[nodiscard]] std::vector<int> cells_of(int id) const {
    std::vector<int> out;
    for (int k = 0; k < static_cast<int>(labels.size()); ++k)
      if (labels[k] == id) out.push_back(k);
    return out;
  }
};

namespace detail {

class UnionFind {
 public:
  explicit UnionFind(int n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    // Smaller index becomes the root so roots are first-touch cells.
    if (a < b)
      parent_[b] = a;
    else
      parent_[a] = b;
  }

 private:
  std::vector<int> parent_;
};

}  // namespace detail

/// Partition of {|u| > tau max|u|} into maximal 4-connected constant-sign
/// components. Ids follow first touch in row-major scan order. Cells exactly
/// at the threshold go to the nodal set.
///
/// Per-domain Rayleigh quotients use the energy of `bc`: faces to cells
/// outside the nodal domain count as zero extension, faces to the exterior
/// count only for Dirichlet.
inline NodalDecomposition nodal_decompose(const GridDomain& d, std::span<const double> u,
                                          double tau = 0.0,
                                          BoundaryCondition bc = BoundaryCondition::Dirichlet) {
  const int n = d.size();
  require(static_cast<int>(u.size()) == n, ErrorKind::DimensionMismatch,
          "eigenvector length differs from the domain size");
  require(tau >= 0.0 && tau <= 0.05, ErrorKind::InvalidParameter, "tau_nodal must lie in [0, 0.05]");
  double umax = 0.0;
  for (double v : u) umax = std::max(umax, std::abs(v));
  require(umax > 0.0, ErrorKind::ZeroVector, "nodal decomposition of the zero vector");
  const double threshold = tau * umax;

  std::vector<int> sign(n);
  for (int k = 0; k < n; ++k) sign[k] = u[k] > threshold ? 1 : (u[k] < -threshold ? -1 : 0);

  detail::UnionFind uf(n);
  for (int k = 0; k < n; ++k) {
    if (sign[k] == 0) continue;
    const auto& nb = d.neighbors(k);
    for (int dir : {West, South}) {
      const int m = nb[dir];
      if (m != GridDomain::kOutside && sign[m] == sign[k]) uf.unite(k, m);
    }
  }

  NodalDecomposition out;
  out.threshold = tau;
  out.domain_area = d.area();
  out.labels.assign(n, 0);
  std::vector<int> id_of_root(n, 0);
  for (int k = 0; k < n; ++k) {
    if (sign[k] == 0) continue;
    const int r = uf.find(k);
    if (id_of_root[r] == 0) {
      id_of_root[r] = ++out.count;
      out.signs.push_back(sign[k]);
    }
    out.labels[k] = id_of_root[r];
  }

  const double h2 = d.cell_area();
  out.areas.assign(out.count, 0.0);
  std::vector<double> energy(out.count, 0.0);
  std::vector<double> mass(out.count, 0.0);
  for (int k = 0; k < n; ++k) {
    const int id = out.labels[k];
    if (id == 0) {
      out.nodal_set_area += h2;
      continue;
    }
    out.areas[id - 1] += h2;
    mass[id - 1] += u[k] * u[k];
    const auto& nb = d.neighbors(k);
    for (int dir : {East, West, North, South}) {
      const int m = nb[dir];
      if (m == GridDomain::kOutside) {
        if (bc == BoundaryCondition::Dirichlet) energy[id - 1] += u[k] * u[k];
      } else if (out.labels[m] != id) {
        energy[id - 1] += u[k] * u[k];
      } else if (dir == East || dir == North) {
        const double diff = u[k] - u[m];
        energy[id - 1] += diff * diff;
      }
    }
  }
  out.rayleigh.resize(out.count);
  for (int i = 0; i < out.count; ++i) out.rayleigh[i] = energy[i] / (mass[i] * h2);
  return out;
}

struct IndexRange {
  int first = 1;  ///< 1-based, inclusive
  int last = 1;   ///< 1-based, inclusive
  [[nodiscard]] int size() const noexcept { return last - first + 1; }
};

inline constexpr double kClusterRelGap = 1e-4;

/// Maximal run of indices around k (1-based) whose consecutive relative gaps
/// are below rel_gap: one numerical eigenspace.
inline IndexRange eigenspace_cluster(std::span<const double> eigenvalues, int k,
                                     double rel_gap = kClusterRelGap) {
  const int count = static_cast<int>(eigenvalues.size());
  require(k >= 1 && k <= count, ErrorKind::InvalidParameter, "cluster index outside the spectrum");
  auto close = [&](int a, int b) {  // 0-based neighbors a, b = a + 1
    const double scale = std::max({std::abs(eigenvalues[a]), std::abs(eigenvalues[b]), 1e-300});
    return std::abs(eigenvalues[b] - eigenvalues[a]) / scale < rel_gap;
  };
  IndexRange r{k, k};
  while (r.first > 1 && close(r.first - 2, r.first - 1)) --r.first;
  while (r.last < count && close(r.last - 1, r.last)) ++r.last;
  return r;
}

inline IndexRange eigenspace_cluster(const Spectrum& s, int k, double rel_gap = kClusterRelGap) {
  return eigenspace_cluster(std::span<const double>(s.eigenvalues), k, rel_gap);
}

/// M(k): the largest nodal count over the computed eigenvectors of k's
/// cluster. A lower bound for the supremum over the whole eigenspace.
inline std::vector<int> cluster_max_counts(const Spectrum& s,
                                           std::span<const NodalDecomposition> decompositions,
                                           double rel_gap = kClusterRelGap) {
  const int k = static_cast<int>(decompositions.size());
  require(k <= s.k(), ErrorKind::DimensionMismatch, "more decompositions than eigenpairs");
  std::vector<int> m(k, 0);
  for (int i = 1; i <= k; ++i) {
    const IndexRange c = eigenspace_cluster(s, i, rel_gap);
    for (int j = c.first; j <= std::min(c.last, k); ++j)
      m[i - 1] = std::max(m[i - 1], decompositions[j - 1].count);
  }
  return m;
}

struct CourantRow {
  int k = 0;
  int nodal_count = 0;  ///< M(k)
  int cluster_last = 0;
  bool ok = false;
};

struct CourantReport {
  std::vector<CourantRow> rows;
  std::vector<int> violations;  ///< k values with M(k) > last index of the cluster
  [[nodiscard]] bool passed() const noexcept { return violations.empty(); }
};

/// M(k) <= max index of k's cluster, for k = 1..K. Violations are data.
inline CourantReport courant_check(const Spectrum& s,
                                   std::span<const NodalDecomposition> decompositions,
                                   double rel_gap = kClusterRelGap) {
  const auto m = cluster_max_counts(s, decompositions, rel_gap);
  CourantReport r;
  for (int k = 1; k <= static_cast<int>(m.size()); ++k) {
    const IndexRange c = eigenspace_cluster(s, k, rel_gap);
    CourantRow row{k, m[k - 1], c.last, m[k - 1] <= c.last};
    if (!row.ok) r.violations.push_back(k);
    r.rows.push_back(row);
  }
  return r;
}

struct PleijelSeries {
  BoundaryCondition bc = BoundaryCondition::Dirichlet;
  std::vector<int> ks;
  std::vector<int> nodal_counts;  ///< M(k)
  std::vector<double> ratios;     ///< M(k) / k
  double pleijel_constant = 0.0;

  /// Max and mean of M(k)/k over k in [lo, hi].
  [[nodiscard]] std::pair<double, double> window(int lo, int hi) const {
    double mx = 0.0;
    double sum = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < ks.size(); ++i) {
      if (ks[i] < lo || ks[i] > hi) continue;
      mx = std::max(mx, ratios[i]);
      sum += ratios[i];
      ++n;
    }
    return {mx, n ? sum / n : 0.0};
  }
};

inline constexpr int kPleijelMinK = 20;

inline PleijelSeries pleijel_series(const Spectrum& s,
                                    std::span<const NodalDecomposition> decompositions,
                                    double rel_gap = kClusterRelGap) {
  require(static_cast<int>(decompositions.size()) >= kPleijelMinK, ErrorKind::InvalidParameter,
          "Pleijel series needs K >= 20");
  PleijelSeries p;
  p.bc = s.bc;
  p.pleijel_constant = spectral_constants(2).pleijel_constant;
  p.nodal_counts = cluster_max_counts(s, decompositions, rel_gap);
  for (int k = 1; k <= static_cast<int>(p.nodal_counts.size()); ++k) {
    p.ks.push_back(k);
    p.ratios.push_back(static_cast<double>(p.nodal_counts[k - 1]) / k);
  }
  return p;
}

struct NodalDomainCheck {
  int id = 0;
  double area = 0.0;
  double rayleigh = 0.0;          ///< R_i
  double lambda1 = 0.0;           ///< lambda_1 of the domain's sub-operator
  double green_deviation = 0.0;   ///< |R_i - lambda| / lambda
  bool green_ok = false;
  bool lambda1_ok = false;        ///< lambda_1 <= R_i + 1e-9
  bool converged = true;          ///< false flags a failed sub-eigenproblem
};

struct NodalRayleighReport {
  double lambda = 0.0;
  double tolerance = 0.0;
  std::vector<NodalDomainCheck> domains;
  [[nodiscard]] bool passed() const {
    return std::all_of(domains.begin(), domains.end(),
                       [](const auto& d) { return d.converged && d.green_ok && d.lambda1_ok; });
  }
};

inline constexpr double kGreenTolerance = 0.05;
inline constexpr double kLambda1Slack = 1e-9;

/// Smallest eigenvalue of a principal submatrix, dense below the Krylov limit.
inline double sub_ground_eigenvalue(const SparseSymOperator& sub, double cell_area,
                                    double tol_eig = 1e-10) {
  if (sub.n() < 64) return smallest_eigenpairs_dense(sub, 1, cell_area).eigenvalues[0];
  SolverOptions opt;
  opt.k = 1;
  opt.tol_eig = tol_eig;
  opt.cell_area = cell_area;
  return smallest_eigenpairs(sub, opt).eigenvalues[0];
}

/// Green identity on each nodal domain (R_i = lambda within tolerance) and
/// lambda_1(Omega_i) <= R_i, where Omega_i carries the principal submatrix of
/// the parent operator: Dirichlet on the nodal boundary, the parent condition
/// on the outer boundary.
inline NodalRayleighReport nodal_rayleigh_check(const GridDomain& d, const SparseSymOperator& op,
                                                double lambda, double residual,
                                                const NodalDecomposition& dec) {
  require(op.n() == d.size(), ErrorKind::DimensionMismatch, "operator does not match domain");
  NodalRayleighReport r;
  r.lambda = lambda;
  r.tolerance = std::max(kGreenTolerance, 10.0 * residual / std::max(lambda, 1e-300));
  for (int id = 1; id <= dec.count; ++id) {
    NodalDomainCheck c;
    c.id = id;
    c.area = dec.areas[id - 1];
    c.rayleigh = dec.rayleigh[id - 1];
    c.green_deviation = std::abs(c.rayleigh - lambda) / lambda;
    c.green_ok = c.green_deviation <= r.tolerance;
    const auto cells = dec.cells_of(id);
    try {
      c.lambda1 = sub_ground_eigenvalue(op.principal_submatrix(cells), d.cell_area());
      c.lambda1_ok = c.lambda1 <= c.rayleigh + kLambda1Slack;
    } catch (const Error&) {
      c.converged = false;
    }
    r.domains.push_back(c);
  }
  return r;
}

struct CertificateResult {
  long bound = 0;
  int nodal_count = 0;
  bool holds = false;
};

/// Sharp Euclidean Faber-Krahn constant omega_N^{2/N} j^2_{(N-2)/N}.
inline double sharp_faber_krahn_constant(int dimension = 2) {
  const auto c = spectral_constants(dimension);
  return std::pow(c.omega, 2.0 / dimension) * c.j_first_zero * c.j_first_zero;
}

/// Disjoint-volume count limit: every nodal domain has volume at least
/// (C/lambda)^{N/2}, so M <= floor(m(Omega) (lambda/C)^{N/2}).
inline CertificateResult pleijel_certificate(const NodalDecomposition& dec, double lambda,
                                             double c_fk, int dimension = 2) {
  require(c_fk > 0 && std::isfinite(c_fk), ErrorKind::InvalidParameter,
          "Faber-Krahn constant must be positive");
  require(lambda >= 0, ErrorKind::InvalidParameter, "eigenvalue must be nonnegative");
  CertificateResult r;
  r.nodal_count = dec.count;
  r.bound = static_cast<long>(
      std::floor(dec.domain_area * std::pow(lambda / c_fk, dimension / 2.0) + 1e-12));
  r.holds = r.nodal_count <= r.bound;
  return r;
}

}  // namespace nlab
