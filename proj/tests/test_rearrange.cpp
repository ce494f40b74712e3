#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "nlab/experiment.hpp"
#include "nlab/laplacian.hpp"
#include "nlab/rearrange.hpp"
#include "oracles.hpp"

using namespace nlab;

namespace {

constexpr double kPi = std::numbers::pi;

// m{(x, y) in (0, pi)^2 : sin x sin y > t}: for each x with sin x > t, the y
// range has length pi - 2 asin(t / sin x). Midpoint rule in x.
double sine_level_area(double t) {
  const int n = 200000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = (i + 0.5) * kPi / n;
    const double sx = std::sin(x);
    if (sx > t) s += kPi - 2 * std::asin(t / sx);
  }
  return s * kPi / n;
}

}  // namespace

TEST(Bessel, FirstZeroOfJ0AgainstIntegralOracle) {
  const double j = bessel_first_zero(0.0);
  const double oracle_j = oracle::bisect_first_zero(oracle::bessel_j0_integral);
  EXPECT_NEAR(j, oracle_j, 1e-10);
  EXPECT_NEAR(j, 2.404825557695773, 1e-12);
}

TEST(Bessel, HalfOrderIsPi) {
  // J_{1/2}(x) = sqrt(2 / (pi x)) sin x.
  EXPECT_NEAR(bessel_first_zero(0.5), kPi, 1e-10);
}

TEST(Bessel, ThirdOrderAgainstSeriesOracle) {
  const double j = bessel_first_zero(1.0 / 3.0);
  const double oracle_j =
      oracle::bisect_first_zero([](double x) { return oracle::bessel_series(1.0 / 3.0, x); });
  EXPECT_NEAR(j, oracle_j, 1e-10);
  EXPECT_GT(j, bessel_first_zero(0.0));
  EXPECT_LT(j, kPi);
}

TEST(Bessel, ZeroIncreasesWithOrder) {
  double previous = 0.0;
  for (int i = 0; i <= 10; ++i) {
    const double z = bessel_first_zero(0.2 * i);
    EXPECT_GT(z, previous);
    previous = z;
  }
  EXPECT_NEAR(bessel_first_zero(1.0), 3.831705970207512, 1e-10);
  EXPECT_THROW(bessel_first_zero(-0.1), Error);
  EXPECT_THROW(bessel_first_zero(2.5), Error);
}

TEST(Constants, BallAndPleijel) {
  EXPECT_NEAR(unit_ball_volume(2), kPi, 1e-15);
  EXPECT_NEAR(unit_ball_volume(3), 4 * kPi / 3, 1e-14);
  const auto c2 = spectral_constants(2);
  EXPECT_DOUBLE_EQ(c2.bessel_index, 0.0);
  EXPECT_NEAR(c2.pleijel_constant, 4.0 / (c2.j_first_zero * c2.j_first_zero), 1e-14);
  EXPECT_NEAR(c2.pleijel_constant, 0.69166, 1e-4);
  const auto c3 = spectral_constants(3);
  EXPECT_NEAR(c3.bessel_index, 1.0 / 3.0, 1e-15);
  EXPECT_LT(c3.pleijel_constant, c2.pleijel_constant);
  EXPECT_THROW(spectral_constants(1), Error);
  // lambda_1(unit disk) = j0^2.
  EXPECT_NEAR(ball_dirichlet_eigenvalue(kPi), c2.j_first_zero * c2.j_first_zero, 1e-12);
  EXPECT_THROW(ball_dirichlet_eigenvalue(0.0), Error);
}

TEST(Distribution, SineProductMatchesQuadrature) {
  const auto d = rasterize_rectangle(kPi, kPi, 200 / kPi);
  std::vector<double> u(d.size());
  for (int k = 0; k < d.size(); ++k) {
    const Point p = d.center(k);
    u[k] = std::sin(p.x) * std::sin(p.y);
  }
  const auto mu = distribution_function(d, u);
  EXPECT_NEAR(mu(0.0), d.area(), 1e-12);
  EXPECT_EQ(mu(1.0), 0.0);
  for (double t : {0.1, 0.25, 0.5, 0.75, 0.9}) {
    // Level set boundary length is below 4 pi, so the cell error is O(h).
    EXPECT_NEAR(mu(t), sine_level_area(t), 4 * kPi * d.h()) << "t " << t;
  }
}

TEST(Distribution, IndicatorAndInverse) {
  const auto d = rasterize_rectangle(1.0, 1.0, 10);
  std::vector<double> u(d.size(), 0.0);
  for (int k = 0; k < 30; ++k) u[k] = 2.0;
  const auto mu = distribution_function(d, u);
  EXPECT_NEAR(mu(0.0), 0.3, 1e-12);
  EXPECT_NEAR(mu(1.99), 0.3, 1e-12);
  EXPECT_EQ(mu(2.0), 0.0);
  EXPECT_EQ(mu.inverse(0.0), 2.0);
  EXPECT_EQ(mu.inverse(0.3), 2.0);
  EXPECT_EQ(mu.inverse(0.31), 0.0);
  std::vector<double> bad(d.size(), 1.0);
  bad[3] = -1e-3;
  try {
    distribution_function(d, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NegativeValues);
  }
}

TEST(Rearrangement, IndicatorBecomesDisk) {
  const auto d = rasterize_rectangle(1.0, 1.0, 20);
  std::vector<double> u(d.size(), 0.0);
  for (int k = 0; k < 100; ++k) u[k] = 1.0;
  const auto v = euclidean_rearrangement(d, u);
  const double r = std::sqrt(0.25 / kPi);
  EXPECT_NEAR(v.outer_radius(), std::sqrt(1.0 / kPi), 1e-12);
  EXPECT_EQ(v(0.0), 1.0);
  EXPECT_EQ(v(r * 0.999), 1.0);
  EXPECT_EQ(v(r * 1.001), 0.0);
  EXPECT_NEAR(v.level_radius(0.5), r, 1e-9);
  EXPECT_THROW(euclidean_rearrangement(d, std::vector<double>(d.size(), 0.0)), Error);
}

TEST(Rearrangement, PreservesLpNormsAndIsIdempotent) {
  std::mt19937_64 rng(8);
  const auto d = rasterize_lshape(1.0, 0.5, 60);
  for (int t = 0; t < 5; ++t) {
    const auto u = random_bump_function(d, rng);
    const auto v = euclidean_rearrangement(d, u);
    for (double p : {1.0, 2.0, 3.5}) {
      double direct = 0.0;
      for (double x : u) direct += std::pow(x, p) * d.cell_area();
      EXPECT_NEAR(v.lp_integral(p), direct, 1e-9 * direct);
    }
    // Rearranging the rearrangement on a disk grid is a fixed point up to
    // one cell of mass per level.
    const auto disk = rasterize_disk(v.outer_radius(), 60);
    std::vector<double> w(disk.size());
    const double cx = disk.origin().x + 0.5 * disk.nx() * disk.h();
    const double cy = disk.origin().y + 0.5 * disk.ny() * disk.h();
    for (int k = 0; k < disk.size(); ++k) {
      const Point p = disk.center(k);
      w[k] = v(std::hypot(p.x - cx, p.y - cy));
    }
    const auto vv = euclidean_rearrangement(disk, w);
    for (double frac : {0.2, 0.5, 0.8}) {
      const double level = frac * v(0.0);
      EXPECT_NEAR(vv.level_radius(level), v.level_radius(level), 3 * disk.h());
    }
  }
}

TEST(Rearrangement, EquimeasurableLevels) {
  std::mt19937_64 rng(9);
  const auto d = rasterize_koch(2, 80);
  const auto u = random_bump_function(d, rng);
  const auto v = euclidean_rearrangement(d, u);
  const auto& mu = v.distribution();
  for (double frac : {0.1, 0.25, 0.5, 0.75, 0.9}) {
    const double t = frac * mu.max_value();
    const double r = v.level_radius(t);
    EXPECT_LE(std::abs(kPi * r * r - mu(t)), d.cell_area() * (1 + 1e-9));
  }
}

TEST(PolyaSzego, EqualityCaseForRadialFunctions) {
  for (double res : {100.0, 200.0}) {
    const auto d = rasterize_disk(1.0, res);
    const double cx = d.origin().x + 0.5 * d.nx() * d.h();
    const double cy = d.origin().y + 0.5 * d.ny() * d.h();
    const double j0 = bessel_first_zero(0.0);
    std::vector<double> paraboloid(d.size());
    std::vector<double> bessel(d.size());
    for (int k = 0; k < d.size(); ++k) {
      const Point p = d.center(k);
      const double r = std::hypot(p.x - cx, p.y - cy);
      paraboloid[k] = std::max(0.0, 1 - r * r);
      bessel[k] = std::max(0.0, static_cast<double>(bessel_j_series(0.0L, j0 * r)));
    }
    for (const auto* u : {&paraboloid, &bessel}) {
      const auto ps = polya_szego_check(d, *u);
      EXPECT_NEAR(ps.energy_rearranged / ps.energy_original, 1.0, 0.03) << "res " << res;
    }
  }
}

TEST(PolyaSzego, RandomBumpsOnEveryShape) {
  std::vector<GridDomain> shapes;
  shapes.push_back(rasterize_rectangle(kPi, kPi, 64 / kPi));
  shapes.push_back(rasterize_disk(1.0, 50));
  shapes.push_back(rasterize_lshape(1.0, 0.5, 64));
  shapes.push_back(rasterize_koch(2, 80));
  std::mt19937_64 rng(31);
  for (const auto& d : shapes)
    for (int t = 0; t < 10; ++t) {
      const auto u = random_bump_function(d, rng);
      const auto ps = polya_szego_check(d, u);
      EXPECT_TRUE(ps.holds) << to_string(d.shape()) << " " << ps.energy_rearranged << " > "
                            << ps.energy_original;
    }
}

TEST(PolyaSzego, FaceEnergyOfExplicitFunction) {
  const GridDomain d(2, 1, 1.0, {0, 0}, {1, 1}, ShapeTag::Custom);
  const std::vector<double> u{1.0, 3.0};
  // Interior face (1 - 3)^2 plus six boundary faces.
  EXPECT_DOUBLE_EQ(dirichlet_face_energy(d, u), 4.0 + 3 * 1.0 + 3 * 9.0);
  EXPECT_DOUBLE_EQ(dirichlet_face_energy(d, u),
                   rayleigh_quotient(assemble_dirichlet(d), u) * 10.0);
}

TEST(FaberKrahn, DiskIsSharp) {
  const double lambda = ball_dirichlet_eigenvalue(kPi);
  EXPECT_TRUE(faber_krahn_check(lambda, kPi).holds);
  EXPECT_TRUE(faber_krahn_check(0.99 * lambda, kPi).holds);
  EXPECT_FALSE(faber_krahn_check(0.97 * lambda, kPi).holds);
  // The square of side pi has lambda_1 = 2 > pi j0^2 / pi^2.
  EXPECT_TRUE(faber_krahn_check(2.0, kPi * kPi, 2, 0.0).holds);
  EXPECT_THROW(faber_krahn_check(0.0, 1.0), Error);
  EXPECT_THROW(faber_krahn_check(1.0, 1.0, 2, 1.0), Error);
}

TEST(Weyl, TargetAndCounting) {
  std::vector<double> ev;
  for (int i = 1; i <= 60; ++i) ev.push_back(i);
  const auto w = weyl_analysis(ev, 4 * kPi);
  EXPECT_NEAR(w.target, 1.0, 1e-12);  // pi * 4 pi / (2 pi)^2
  EXPECT_EQ(w.counts[9], 10);
  EXPECT_NEAR(w.limit_estimate, 1.0, 1e-12);
  EXPECT_NEAR(w.relative_deviation, 0.0, 1e-12);
  EXPECT_THROW(weyl_analysis(std::vector<double>(49, 1.0), 1.0), Error);
  // Repeated values count together.
  std::vector<double> pairs;
  for (int i = 1; i <= 30; ++i) pairs.insert(pairs.end(), {double(i), double(i)});
  EXPECT_EQ(weyl_analysis(pairs, 1.0).counts[0], 2);
}
