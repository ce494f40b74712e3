#pragma once

// Five-point finite-difference Laplacians on a GridDomain.

#include <vector>

#include "nlab/domains.hpp"
#include "nlab/eigensolver.hpp"
#include "nlab/sparse.hpp"

namespace nlab {

/// -Delta with homogeneous Dirichlet data: every cell keeps the full 4/h^2
/// diagonal, and only interior neighbors couple (zero extension outside).
inline SparseSymOperator assemble_dirichlet(const GridDomain& d) {
  const double s = 1.0 / (d.h() * d.h());
  std::vector<SparseSymOperator::Triplet> t;
  t.reserve(static_cast<std::size_t>(d.size()) * 5);
  for (int k = 0; k < d.size(); ++k) {
    t.push_back({k, k, 4.0 * s});
    for (int n : d.neighbors(k))
      if (n != GridDomain::kOutside) t.push_back({k, n, -s});
  }
  return SparseSymOperator(d.size(), std::move(t));
}

/// -Delta with reflecting boundary: the graph Laplacian of the interior-cell
/// adjacency, i.e. the Euler-Lagrange operator of sum over interior faces of
/// (u_a - u_b)^2 / h^2. Constants on each component span the kernel.
inline SparseSymOperator assemble_neumann(const GridDomain& d) {
  const double s = 1.0 / (d.h() * d.h());
  std::vector<SparseSymOperator::Triplet> t;
  t.reserve(static_cast<std::size_t>(d.size()) * 5);
  for (int k = 0; k < d.size(); ++k) {
    int degree = 0;
    for (int n : d.neighbors(k)) {
      if (n == GridDomain::kOutside) continue;
      ++degree;
      t.push_back({k, n, -s});
    }
    t.push_back({k, k, degree * s});
  }
  return SparseSymOperator(d.size(), std::move(t));
}

inline SparseSymOperator assemble(const GridDomain& d, BoundaryCondition bc) {
  return bc == BoundaryCondition::Dirichlet ? assemble_dirichlet(d) : assemble_neumann(d);
}

/// Assembles and solves in one step; the spectrum carries the domain descriptor.
inline Spectrum solve_laplacian(const GridDomain& d, BoundaryCondition bc, SolverOptions opt) {
  opt.cell_area = d.cell_area();
  Spectrum s = smallest_eigenpairs(assemble(d, bc), opt, bc);
  s.domain_ref = to_json(d);
  return s;
}

}  // namespace nlab
