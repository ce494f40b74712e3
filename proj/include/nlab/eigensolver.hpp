#pragma once

// Smallest eigenpairs of a symmetric positive semidefinite sparse operator.
//
// Thick-restart Lanczos with full reorthogonalization on the shift-inverted
// operator (A + sigma I)^{-1}. The shift sigma = max(tol_eig, 1e-6 max diag A)
// keeps the factorization well conditioned on Neumann kernels and is removed
// when eigenvalues are reported (they are Rayleigh quotients of A itself).

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <json.hpp>

#include "nlab/error.hpp"
#include "nlab/sparse.hpp"

namespace nlab {

enum class BoundaryCondition { Dirichlet, Neumann };

inline std::string to_string(BoundaryCondition bc) {
  return bc == BoundaryCondition::Dirichlet ? "dirichlet" : "neumann";
}

struct SolverOptions {
  int k = 10;
  double tol_eig = 1e-8;
  /// Upper bound on applications of the shift-inverted operator.
  int max_iter = 20000;
  std::uint64_t seed = 0;
  /// Grid cell area h^2; eigenvectors are scaled so that sum u_c^2 h^2 = 1.
  double cell_area = 1.0;
  int threads = 1;
};

struct SolverInfo {
  int iterations = 0;
  int restarts = 0;
  int basis_size = 0;
  double shift = 0.0;
  double seconds = 0.0;
  std::vector<bool> converged;
};

/// Ordered eigenpairs with residuals. Eigenvectors are stored column-major as
/// one flat block of n * k values.
struct Spectrum {
  BoundaryCondition bc = BoundaryCondition::Dirichlet;
  int n = 0;
  double cell_area = 1.0;
  std::vector<double> eigenvalues;
  std::vector<double> eigenvectors;
  std::vector<double> residual_norms;
  nlohmann::json domain_ref = nlohmann::json::object();
  SolverInfo info;

  [[nodiscard]] int k() const noexcept { return static_cast<int>(eigenvalues.size()); }

  [[nodiscard]] std::span<const double> eigenvector(int i) const {
    return {eigenvectors.data() + static_cast<std::size_t>(i) * n, static_cast<std::size_t>(n)};
  }

  /// First `count` pairs as a new spectrum.
  [[nodiscard]] Spectrum prefix(int count) const {
    Spectrum s = *this;
    count = std::clamp(count, 0, k());
    s.eigenvalues.resize(count);
    s.residual_norms.resize(count);
    s.eigenvectors.resize(static_cast<std::size_t>(count) * n);
    if (static_cast<int>(s.info.converged.size()) > count) s.info.converged.resize(count);
    return s;
  }
};

/// Raised when the solver exhausts max_iter. Carries the converged prefix.
class PartialSpectrumError : public Error {
 public:
  PartialSpectrumError(const std::string& what, Spectrum partial)
      : Error(ErrorKind::NonConvergence, what), partial_(std::move(partial)) {}
  [[nodiscard]] const Spectrum& partial() const noexcept { return partial_; }

 private:
  Spectrum partial_;
};

/// Measured deviations from the Spectrum invariants.
struct SpectrumDiagnostics {
  double max_orthogonality = 0.0;        // max |<u_i,u_j> h^2| over i != j
  double max_normalization_error = 0.0;  // max |<u_i,u_i> h^2 - 1|
  double max_scaled_residual = 0.0;      // max residual_i / max(1, lambda_i)
  bool nondecreasing = true;
  double min_eigenvalue = 0.0;
  /// Neumann only: max relative deviation of eigenvector 0 from its mean.
  double kernel_constant_deviation = 0.0;
};

inline SpectrumDiagnostics diagnose(const Spectrum& s) {
  SpectrumDiagnostics d;
  const int k = s.k();
  if (k == 0) return d;
  d.min_eigenvalue = s.eigenvalues.front();
  for (int i = 0; i < k; ++i) {
    if (i > 0 && s.eigenvalues[i] < s.eigenvalues[i - 1]) d.nondecreasing = false;
    d.max_scaled_residual =
        std::max(d.max_scaled_residual, s.residual_norms[i] / std::max(1.0, s.eigenvalues[i]));
    const auto ui = s.eigenvector(i);
    for (int j = i; j < k; ++j) {
      const auto uj = s.eigenvector(j);
      double dot = 0.0;
      for (int c = 0; c < s.n; ++c) dot += ui[c] * uj[c];
      dot *= s.cell_area;
      if (i == j)
        d.max_normalization_error = std::max(d.max_normalization_error, std::abs(dot - 1.0));
      else
        d.max_orthogonality = std::max(d.max_orthogonality, std::abs(dot));
    }
  }
  if (s.bc == BoundaryCondition::Neumann) {
    const auto u0 = s.eigenvector(0);
    const double mean = std::accumulate(u0.begin(), u0.end(), 0.0) / s.n;
    for (double v : u0)
      d.kernel_constant_deviation = std::max(d.kernel_constant_deviation, std::abs(v - mean) / std::abs(mean));
  }
  return d;
}

namespace detail {

/// Deterministic uniform(-1, 1) stream; identical on every platform for a seed.
class StartVectorStream {
 public:
  explicit StartVectorStream(std::uint64_t seed) : engine_(seed) {}
  double next() {
    const std::uint64_t bits = engine_() >> 11;
    return 2.0 * (static_cast<double>(bits) * 0x1.0p-53) - 1.0;
  }

 private:
  std::mt19937_64 engine_;
};

inline Eigen::SparseMatrix<double> to_eigen(const SparseSymOperator& a, double shift) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(a.nnz() + a.n());
  const auto off = a.row_offsets();
  const auto col = a.col_indices();
  const auto val = a.values();
  for (int i = 0; i < a.n(); ++i) {
    for (int p = off[i]; p < off[i + 1]; ++p) t.emplace_back(i, col[p], val[p]);
    if (shift != 0.0) t.emplace_back(i, i, shift);
  }
  Eigen::SparseMatrix<double> m(a.n(), a.n());
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

/// Flips the sign so the first entry of largest magnitude is positive.
inline void canonical_sign(std::span<double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[best]) * (1.0 + 1e-12)) best = i;
  if (v[best] < 0)
    for (double& x : v) x = -x;
}

}  // namespace detail

/// The k algebraically smallest eigenpairs of a symmetric PSD operator.
///
/// Converged means ||A u - lambda u||_2 <= tol_eig * max(1, lambda) for the
/// Euclidean-unit eigenvector (equivalently the grid-L2 residual of the grid
/// normalized one). Multiplicities are not resolved here.
inline Spectrum smallest_eigenpairs(const SparseSymOperator& a, const SolverOptions& opt,
                                    BoundaryCondition bc = BoundaryCondition::Dirichlet) {
  const auto t0 = std::chrono::steady_clock::now();
  const int n = a.n();
  const int k = opt.k;
  require(k >= 1 && 4 * k <= n, ErrorKind::InvalidParameter,
          "need 1 <= k <= n/4 (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
  require(opt.tol_eig >= 1e-12 && opt.tol_eig <= 1e-4, ErrorKind::InvalidParameter,
          "tol_eig must lie in [1e-12, 1e-4]");
  require(opt.cell_area > 0, ErrorKind::InvalidParameter, "cell area must be positive");
  require(opt.max_iter > 0, ErrorKind::InvalidParameter, "max_iter must be positive");

  // A shift of tol_eig alone leaves (A + sigma I) with condition ~1/tol_eig
  // on a singular A, which puts a residual floor above tol_eig on every pair.
  const auto diag = a.diag();
  const double diag_max = diag.empty() ? 1.0 : *std::max_element(diag.begin(), diag.end());
  const double shift = std::max(opt.tol_eig, 1e-6 * diag_max);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
  ldlt.compute(detail::to_eigen(a, shift));
  require(ldlt.info() == Eigen::Success, ErrorKind::NonConvergence,
          "factorization of the shifted operator failed");

  const int m = std::min(n - 1, std::max(2 * k + 10, k + 24));
  const int keep = std::min(m - 1, k + (m - k) / 2);

  Eigen::MatrixXd basis(n, m + 1);
  Eigen::MatrixXd projected = Eigen::MatrixXd::Zero(m, m);
  detail::StartVectorStream rng(opt.seed);

  auto random_orthogonal = [&](int col) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = rng.next();
    for (int pass = 0; pass < 2 && col > 0; ++pass)
      v -= basis.leftCols(col) * (basis.leftCols(col).transpose() * v);
    basis.col(col) = v.normalized();
  };
  random_orthogonal(0);

  SolverInfo info;
  info.shift = shift;
  info.basis_size = m;

  Eigen::VectorXd w(n);
  Eigen::VectorXd au(n);
  std::vector<double> xbuf(n);
  std::vector<double> ybuf(n);
  int filled = 0;
  double beta = 0.0;

  Eigen::MatrixXd ritz_vectors;
  std::vector<double> ritz_lambda;
  std::vector<double> ritz_residual;
  int converged_prefix = 0;

  while (true) {
    for (int col = filled; col < m; ++col) {
      w = ldlt.solve(basis.col(col));
      ++info.iterations;
      Eigen::VectorXd coeff = basis.leftCols(col + 1).transpose() * w;
      w -= basis.leftCols(col + 1) * coeff;
      Eigen::VectorXd again = basis.leftCols(col + 1).transpose() * w;
      w -= basis.leftCols(col + 1) * again;
      coeff += again;
      for (int i = 0; i <= col; ++i) {
        projected(i, col) = coeff[i];
        projected(col, i) = coeff[i];
      }
      beta = w.norm();
      if (beta <= 1e-14 * std::abs(coeff[col])) {
        // Invariant subspace: continue with a fresh direction, no coupling.
        beta = 0.0;
        random_orthogonal(col + 1);
      } else {
        basis.col(col + 1) = w / beta;
      }
    }
    filled = m;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(projected);
    // Largest theta first: they map to the smallest lambda.
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int p, int q) {
      return eig.eigenvalues()[p] > eig.eigenvalues()[q];
    });

    // Check the wanted pairs against the true residual of A.
    ritz_vectors.resize(n, k);
    ritz_lambda.assign(k, 0.0);
    ritz_residual.assign(k, 0.0);
    for (int i = 0; i < k; ++i) {
      ritz_vectors.col(i) = basis.leftCols(m) * eig.eigenvectors().col(order[i]);
      ritz_vectors.col(i).normalize();
      Eigen::Map<const Eigen::VectorXd> x(ritz_vectors.col(i).data(), n);
      std::copy(x.data(), x.data() + n, xbuf.begin());
      matvec(a, xbuf, ybuf, opt.threads);
      Eigen::Map<const Eigen::VectorXd> ax(ybuf.data(), n);
      const double lambda = x.dot(ax);
      ritz_lambda[i] = lambda;
      ritz_residual[i] = (ax - lambda * x).norm();
    }
    converged_prefix = 0;
    while (converged_prefix < k &&
           ritz_residual[converged_prefix] <= opt.tol_eig * std::max(1.0, ritz_lambda[converged_prefix]))
      ++converged_prefix;
    if (converged_prefix == k || info.iterations + (m - keep) > opt.max_iter) break;

    // Thick restart: keep the best `keep` Ritz vectors plus the residual direction.
    Eigen::MatrixXd y(m, keep);
    for (int i = 0; i < keep; ++i) y.col(i) = eig.eigenvectors().col(order[i]);
    Eigen::MatrixXd kept = basis.leftCols(m) * y;
    const Eigen::VectorXd residual_dir = basis.col(m);
    basis.leftCols(keep) = kept;
    basis.col(keep) = residual_dir;
    projected.setZero();
    for (int i = 0; i < keep; ++i) {
      projected(i, i) = eig.eigenvalues()[order[i]];
      const double coupling = beta * y(m - 1, i);
      projected(i, keep) = coupling;
      projected(keep, i) = coupling;
    }
    // Column `keep` is rebuilt on the next sweep, including its diagonal.
    filled = keep;
    ++info.restarts;
  }

  // Ascending by Rayleigh quotient; near-degenerate pairs can come out of
  // the theta ordering slightly permuted.
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int p, int q) { return ritz_lambda[p] < ritz_lambda[q]; });

  Spectrum s;
  s.bc = bc;
  s.n = n;
  s.cell_area = opt.cell_area;
  s.eigenvalues.resize(k);
  s.residual_norms.resize(k);
  s.eigenvectors.resize(static_cast<std::size_t>(n) * k);
  const double scale = 1.0 / std::sqrt(opt.cell_area);
  info.converged.assign(k, false);
  for (int r = 0; r < k; ++r) {
    const int i = order[r];
    s.eigenvalues[r] = ritz_lambda[i];
    s.residual_norms[r] = ritz_residual[i];
    info.converged[r] = ritz_residual[i] <= opt.tol_eig * std::max(1.0, ritz_lambda[i]);
    std::span<double> dst(s.eigenvectors.data() + static_cast<std::size_t>(r) * n, n);
    for (int c = 0; c < n; ++c) dst[c] = ritz_vectors(c, i) * scale;
    detail::canonical_sign(dst);
  }
  info.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  s.info = info;

  if (converged_prefix < k) {
    int prefix = 0;
    while (prefix < k && s.info.converged[prefix]) ++prefix;
    throw PartialSpectrumError("eigensolver did not converge within " +
                                   std::to_string(opt.max_iter) + " iterations (" +
                                   std::to_string(prefix) + " of " + std::to_string(k) +
                                   " pairs converged)",
                               s.prefix(prefix));
  }
  return s;
}

/// Dense fallback for operators too small for the Krylov solver (n < 4k).
inline Spectrum smallest_eigenpairs_dense(const SparseSymOperator& a, int k, double cell_area,
                                          BoundaryCondition bc = BoundaryCondition::Dirichlet) {
  const int n = a.n();
  require(k >= 1 && k <= n, ErrorKind::InvalidParameter, "need 1 <= k <= n");
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(n, n);
  const auto off = a.row_offsets();
  const auto col = a.col_indices();
  const auto val = a.values();
  for (int i = 0; i < n; ++i)
    for (int p = off[i]; p < off[i + 1]; ++p) dense(i, col[p]) = val[p];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense);
  Spectrum s;
  s.bc = bc;
  s.n = n;
  s.cell_area = cell_area;
  s.info.converged.assign(k, true);
  const double scale = 1.0 / std::sqrt(cell_area);
  for (int r = 0; r < k; ++r) {
    const Eigen::VectorXd x = eig.eigenvectors().col(r);
    s.eigenvalues.push_back(eig.eigenvalues()[r]);
    s.residual_norms.push_back((dense * x - eig.eigenvalues()[r] * x).norm());
    for (int c = 0; c < n; ++c) s.eigenvectors.push_back(x[c] * scale);
    detail::canonical_sign({s.eigenvectors.data() + static_cast<std::size_t>(r) * n,
                            static_cast<std::size_t>(n)});
  }
  return s;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const Spectrum& s) {
  nlohmann::json j;
  j["bc"] = to_string(s.bc);
  j["k"] = s.k();
  j["n"] = s.n;
  j["eigenvalues"] = s.eigenvalues;
  j["residuals"] = s.residual_norms;
  j["domain"] = s.domain_ref;
  j["solver"] = {{"iterations", s.info.iterations},
                 {"restarts", s.info.restarts},
                 {"basis_size", s.info.basis_size},
                 {"shift", s.info.shift},
                 {"seconds", s.info.seconds},
                 {"converged", s.info.converged}};
  return j;
}

inline constexpr char kEigenvectorMagic[8] = {'N', 'L', 'A', 'B', 'E', 'V', 'E', 'C'};

namespace detail {
template <class T>
void write_le(std::ostream& os, T value) {
  static_assert(sizeof(T) == 8);
  std::uint64_t bits;
  std::memcpy(&bits, &value, 8);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  char bytes[8];
  std::memcpy(bytes, &bits, 8);
  os.write(bytes, 8);
}
template <class T>
T read_le(std::istream& is) {
  char bytes[8];
  is.read(bytes, 8);
  require(static_cast<bool>(is), ErrorKind::Io, "truncated eigenvector file");
  std::uint64_t bits;
  std::memcpy(&bits, bytes, 8);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  T value;
  std::memcpy(&value, &bits, 8);
  return value;
}
}  // namespace detail

/// Binary eigenvector block: 32-byte header (magic "NLABEVEC", u64 n, u64 k,
/// f64 h) followed by n*k little-endian doubles, row-major (row = grid cell).
inline void write_eigenvectors(std::ostream& os, const Spectrum& s) {
  os.write(kEigenvectorMagic, 8);
  detail::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(s.n));
  detail::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(s.k()));
  detail::write_le<double>(os, std::sqrt(s.cell_area));
  for (int c = 0; c < s.n; ++c)
    for (int i = 0; i < s.k(); ++i) detail::write_le<double>(os, s.eigenvector(i)[c]);
}

struct EigenvectorBlock {
  std::uint64_t n = 0;
  std::uint64_t k = 0;
  double h = 0.0;
  std::vector<double> row_major;
};

inline EigenvectorBlock read_eigenvectors(std::istream& is) {
  char magic[8];
  is.read(magic, 8);
  require(static_cast<bool>(is) && std::memcmp(magic, kEigenvectorMagic, 8) == 0, ErrorKind::Io,
          "not an eigenvector file");
  EigenvectorBlock b;
  b.n = detail::read_le<std::uint64_t>(is);
  b.k = detail::read_le<std::uint64_t>(is);
  b.h = detail::read_le<double>(is);
  b.row_major.resize(b.n * b.k);
  for (auto& v : b.row_major) v = detail::read_le<double>(is);
  return b;
}

}  // namespace nlab
