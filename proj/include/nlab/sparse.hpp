#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <thread>
#include <tuple>
#include <vector>

#include "nlab/error.hpp"

namespace nlab {

/// Symmetric sparse matrix in compressed-row layout. The full pattern is
/// stored (both (i,j) and (j,i)), columns sorted within each row.
class SparseSymOperator {
 public:
  struct Triplet {
    int row;
    int col;
    double value;
  };

  SparseSymOperator() = default;

  /// Assembles from triplets; duplicates are summed. Throws if the result is
  /// not symmetric to 1e-14 relative.
  SparseSymOperator(int n, std::vector<Triplet> triplets) : n_(n) {
    require(n > 0, ErrorKind::InvalidParameter, "operator dimension must be positive");
    std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    row_offsets_.assign(static_cast<std::size_t>(n) + 1, 0);
    for (std::size_t t = 0; t < triplets.size();) {
      const Triplet& first = triplets[t];
      require(first.row >= 0 && first.row < n && first.col >= 0 && first.col < n,
              ErrorKind::DimensionMismatch, "triplet index out of range");
      double sum = 0.0;
      std::size_t u = t;
      for (; u < triplets.size() && triplets[u].row == first.row && triplets[u].col == first.col; ++u)
        sum += triplets[u].value;
      col_indices_.push_back(first.col);
      values_.push_back(sum);
      ++row_offsets_[first.row + 1];
      t = u;
    }
    for (int i = 0; i < n; ++i) row_offsets_[i + 1] += row_offsets_[i];
    diag_.assign(n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p)
        if (col_indices_[p] == i) diag_[i] = values_[p];
    require(is_symmetric(1e-14), ErrorKind::InvalidParameter, "assembled operator is not symmetric");
  }

  [[nodiscard]] int n() const noexcept { return n_; }
  [[nodiscard]] std::size_t nnz() const noexcept { return values_.size(); }
  [[nodiscard]] std::span<const int> row_offsets() const noexcept { return row_offsets_; }
  [[nodiscard]] std::span<const int> col_indices() const noexcept { return col_indices_; }
  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  [[nodiscard]] std::span<const double> diag() const noexcept { return diag_; }

  /// Entry (i, j), zero if not stored.
  [[nodiscard]] double at(int i, int j) const {
    const auto begin = col_indices_.begin() + row_offsets_[i];
    const auto end = col_indices_.begin() + row_offsets_[i + 1];
    auto it = std::lower_bound(begin, end, j);
    if (it == end || *it != j) return 0.0;
    return values_[static_cast<std::size_t>(it - col_indices_.begin())];
  }

  [[nodiscard]] bool is_symmetric(double rel_tol) const {
    for (int i = 0; i < n_; ++i) {
      for (int p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) {
        const int j = col_indices_[p];
        const double a = values_[p];
        const double b = at(j, i);
        if (std::abs(a - b) > rel_tol * std::max(std::abs(a), std::abs(b))) return false;
        if (b == 0.0 && a != 0.0) return false;
      }
    }
    return true;
  }

  /// Principal submatrix on the given (sorted, unique) rows.
  [[nodiscard]] SparseSymOperator principal_submatrix(std::span<const int> rows) const {
    std::vector<int> local(n_, -1);
    for (std::size_t r = 0; r < rows.size(); ++r) local.at(rows[r]) = static_cast<int>(r);
    std::vector<Triplet> t;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const int i = rows[r];
      for (int p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p)
        if (local[col_indices_[p]] >= 0)
          t.push_back({static_cast<int>(r), local[col_indices_[p]], values_[p]});
    }
    return SparseSymOperator(static_cast<int>(rows.size()), std::move(t));
  }

  /// Coordinate-format text in the Matrix Market layout (lower triangle).
  void write_matrix_market(std::ostream& os) const {
    std::size_t lower = 0;
    for (int i = 0; i < n_; ++i)
      for (int p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p)
        if (col_indices_[p] <= i) ++lower;
    os << "%%MatrixMarket matrix coordinate real symmetric\n";
    os << n_ << ' ' << n_ << ' ' << lower << '\n';
    os.precision(17);
    for (int i = 0; i < n_; ++i)
      for (int p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p)
        if (col_indices_[p] <= i) os << i + 1 << ' ' << col_indices_[p] + 1 << ' ' << values_[p] << '\n';
  }

 private:
  int n_ = 0;
  std::vector<int> row_offsets_;
  std::vector<int> col_indices_;
  std::vector<double> values_;
  std::vector<double> diag_;
};

/// y = A x. Rows are reduced in storage order, so the result does not depend
/// on `threads`.
inline void matvec(const SparseSymOperator& a, std::span<const double> x, std::span<double> y,
                   int threads = 1) {
  require(static_cast<int>(x.size()) == a.n() && static_cast<int>(y.size()) == a.n(),
          ErrorKind::DimensionMismatch, "matvec dimension mismatch");
  const auto offsets = a.row_offsets();
  const auto cols = a.col_indices();
  const auto vals = a.values();
  auto rows = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      double s = 0.0;
      for (int p = offsets[i]; p < offsets[i + 1]; ++p) s += vals[p] * x[cols[p]];
      y[i] = s;
    }
  };
  const int n = a.n();
  if (threads <= 1 || n < 4096) {
    rows(0, n);
    return;
  }
  std::vector<std::jthread> pool;
  const int chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const int begin = t * chunk;
    const int end = std::min(n, begin + chunk);
    if (begin < end) pool.emplace_back(rows, begin, end);
  }
}

inline std::vector<double> matvec(const SparseSymOperator& a, std::span<const double> x,
                                  int threads = 1) {
  std::vector<double> y(x.size());
  matvec(a, x, y, threads);
  return y;
}

/// <Au, u> / <u, u>. The grid cell area cancels, so it is not needed here.
inline double rayleigh_quotient(const SparseSymOperator& a, std::span<const double> u) {
  require(static_cast<int>(u.size()) == a.n(), ErrorKind::DimensionMismatch,
          "rayleigh quotient dimension mismatch");
  double uu = 0.0;
  for (double v : u) uu += v * v;
  require(uu > 0.0, ErrorKind::ZeroVector, "rayleigh quotient of the zero vector");
  const auto au = matvec(a, u);
  double num = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) num += au[i] * u[i];
  return num / uu;
}

}  // namespace nlab
