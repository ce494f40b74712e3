#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include "nlab/laplacian.hpp"
#include "oracles.hpp"

using namespace nlab;

namespace {

void expect_dense_agreement(const GridDomain& d, BoundaryCondition bc, int k) {
  const auto a = assemble(d, bc);
  ASSERT_LE(a.n(), 400);
  const auto expect = oracle::jacobi_eigenvalues(oracle::dense(a), a.n());
  SolverOptions opt;
  opt.k = k;
  opt.tol_eig = 1e-10;
  opt.cell_area = d.cell_area();
  const auto s = smallest_eigenpairs(a, opt, bc);
  ASSERT_EQ(s.k(), k);
  const double scale = *std::max_element(expect.begin(), expect.end());
  for (int i = 0; i < k; ++i)
    EXPECT_NEAR(s.eigenvalues[i], expect[i], 1e-8 * std::max(std::abs(expect[i]), 1e-3 * scale))
        << to_string(bc) << " i " << i << " n " << a.n();
}

}  // namespace

TEST(Eigensolver, DenseOracleOnBuiltInShapes) {
  expect_dense_agreement(rasterize_lshape(1.0, 0.5, 20), BoundaryCondition::Dirichlet, 20);
  expect_dense_agreement(rasterize_lshape(1.0, 0.5, 20), BoundaryCondition::Neumann, 20);
  expect_dense_agreement(rasterize_disk(1.0, 10), BoundaryCondition::Dirichlet, 25);
  expect_dense_agreement(rasterize_disk(1.0, 10), BoundaryCondition::Neumann, 25);
  expect_dense_agreement(rasterize_koch(1, 13), BoundaryCondition::Dirichlet, 10);
}

TEST(Eigensolver, DenseOracleOnRandomMasks) {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 10; ++t) {
    const int nx = 8 + static_cast<int>(rng() % 12);
    const int ny = 8 + static_cast<int>(rng() % 12);
    const auto d = oracle::random_mask_domain(nx, ny, 0.7, rng);
    if (d.size() < 40) continue;
    const int k = std::min(10, d.size() / 4);
    expect_dense_agreement(d, BoundaryCondition::Dirichlet, k);
    expect_dense_agreement(d, BoundaryCondition::Neumann, k);
  }
}

TEST(Eigensolver, EigenpairInvariants) {
  const auto d = rasterize_lshape(1.0, 0.5, 60);
  for (auto bc : {BoundaryCondition::Dirichlet, BoundaryCondition::Neumann}) {
    SolverOptions opt;
    opt.k = 20;
    const auto s = solve_laplacian(d, bc, opt);
    const auto dg = diagnose(s);
    EXPECT_TRUE(dg.nondecreasing);
    EXPECT_LT(dg.max_orthogonality, 1e-8);
    EXPECT_LT(dg.max_normalization_error, 1e-8);
    EXPECT_LT(dg.max_scaled_residual, 1e-6);
    const auto a = assemble(d, bc);
    for (int i = 0; i < s.k(); ++i)
      EXPECT_NEAR(rayleigh_quotient(a, s.eigenvector(i)), s.eigenvalues[i],
                  1e-8 * std::max(1.0, s.eigenvalues[i]));
    if (bc == BoundaryCondition::Neumann) {
      EXPECT_NEAR(s.eigenvalues[0], 0.0, 1e-8);
      EXPECT_LT(dg.kernel_constant_deviation, 1e-6);
    } else {
      EXPECT_GT(s.eigenvalues[0], 0.0);
    }
  }
}

TEST(Eigensolver, SameSeedSameBits) {
  const auto d = rasterize_disk(1.0, 30);
  SolverOptions opt;
  opt.k = 12;
  opt.seed = 99;
  const auto a = solve_laplacian(d, BoundaryCondition::Dirichlet, opt);
  const auto b = solve_laplacian(d, BoundaryCondition::Dirichlet, opt);
  EXPECT_EQ(a.eigenvalues, b.eigenvalues);
  EXPECT_EQ(a.eigenvectors, b.eigenvectors);
}

TEST(Eigensolver, DomainMonotonicity) {
  // Dirichlet eigenvalues decrease when the domain grows.
  const auto small = rasterize_disk(0.8, 30);
  const auto big = rasterize_disk(1.0, 30);
  SolverOptions opt;
  opt.k = 10;
  const auto a = solve_laplacian(small, BoundaryCondition::Dirichlet, opt);
  const auto b = solve_laplacian(big, BoundaryCondition::Dirichlet, opt);
  for (int i = 0; i < 10; ++i) EXPECT_GE(a.eigenvalues[i], b.eigenvalues[i]);
}

TEST(Eigensolver, RejectsBadParameters) {
  const auto d = rasterize_rectangle(1.0, 1.0, 10);
  const auto a = assemble_dirichlet(d);
  SolverOptions opt;
  opt.k = 26;  // > n / 4
  EXPECT_THROW(smallest_eigenpairs(a, opt), Error);
  opt.k = 0;
  EXPECT_THROW(smallest_eigenpairs(a, opt), Error);
  opt.k = 5;
  opt.tol_eig = 1e-3;
  EXPECT_THROW(smallest_eigenpairs(a, opt), Error);
  opt.tol_eig = 1e-13;
  EXPECT_THROW(smallest_eigenpairs(a, opt), Error);
}

TEST(Eigensolver, IterationCapGivesPartialSpectrum) {
  const auto d = rasterize_disk(1.0, 40);
  SolverOptions opt;
  opt.k = 30;
  opt.max_iter = 20;
  opt.cell_area = d.cell_area();
  try {
    smallest_eigenpairs(assemble_dirichlet(d), opt);
    FAIL() << "expected PartialSpectrumError";
  } catch (const PartialSpectrumError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonConvergence);
    EXPECT_LT(e.partial().k(), 30);
  }
}

TEST(Eigensolver, DenseFallbackMatchesJacobi) {
  const auto d = rasterize_disk(1.0, 4);
  const auto a = assemble_dirichlet(d);
  const auto s = smallest_eigenpairs_dense(a, a.n(), d.cell_area());
  const auto expect = oracle::jacobi_eigenvalues(oracle::dense(a), a.n());
  for (int i = 0; i < a.n(); ++i) EXPECT_NEAR(s.eigenvalues[i], expect[i], 1e-9 * expect.back());
}

TEST(Eigensolver, CanonicalSignConvention) {
  const auto d = rasterize_lshape(1.0, 0.5, 30);
  SolverOptions opt;
  opt.k = 8;
  const auto s = solve_laplacian(d, BoundaryCondition::Dirichlet, opt);
  for (int i = 0; i < s.k(); ++i) {
    const auto v = s.eigenvector(i);
    std::size_t best = 0;
    for (std::size_t c = 1; c < v.size(); ++c)
      if (std::abs(v[c]) > std::abs(v[best]) * (1.0 + 1e-12)) best = c;
    EXPECT_GT(v[best], 0.0);
  }
}

TEST(Eigensolver, BinaryRoundTrip) {
  const auto d = rasterize_disk(1.0, 20);
  SolverOptions opt;
  opt.k = 5;
  const auto s = solve_laplacian(d, BoundaryCondition::Neumann, opt);
  std::stringstream ss;
  write_eigenvectors(ss, s);
  EXPECT_EQ(ss.str().size(), 32 + 8 * static_cast<std::size_t>(s.n) * 5);
  EXPECT_EQ(ss.str().substr(0, 8), "NLABEVEC");
  const auto b = read_eigenvectors(ss);
  EXPECT_EQ(b.n, static_cast<std::uint64_t>(s.n));
  EXPECT_EQ(b.k, 5u);
  EXPECT_DOUBLE_EQ(b.h, d.h());
  for (int c = 0; c < s.n; ++c)
    for (int i = 0; i < 5; ++i) EXPECT_EQ(b.row_major[c * 5 + i], s.eigenvector(i)[c]);
  std::stringstream bad("NOTAFILE");
  EXPECT_THROW(read_eigenvectors(bad), Error);
}

TEST(Eigensolver, SpectrumJson) {
  const auto d = rasterize_disk(1.0, 20);
  SolverOptions opt;
  opt.k = 3;
  const auto j = to_json(solve_laplacian(d, BoundaryCondition::Dirichlet, opt));
  EXPECT_EQ(j["bc"], "dirichlet");
  EXPECT_EQ(j["k"], 3);
  EXPECT_EQ(j["eigenvalues"].size(), 3u);
}
