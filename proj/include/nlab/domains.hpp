#pragma once

// Rasterized planar domains on a uniform square grid, cell sets over them and
// the discrete geometric measurements (area, perimeter, isoperimetric ratio,
// ball coarea integral) used by the spectral checks.
//
// Grid convention: cell (i, j) has its center at (x0 + (i + 1/2) h, y0 + (j + 1/2) h)
// and belongs to the domain iff that center lies strictly inside the shape.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nlab/error.hpp"

namespace nlab {

enum class ShapeTag { Rectangle, Disk, Annulus, LShape, KochPrefractal, Custom };

inline std::string to_string(ShapeTag tag) {
  switch (tag) {
    case ShapeTag::Rectangle: return "rectangle";
    case ShapeTag::Disk: return "disk";
    case ShapeTag::Annulus: return "annulus";
    case ShapeTag::LShape: return "lshape";
    case ShapeTag::KochPrefractal: return "koch";
    case ShapeTag::Custom: return "custom";
  }
  return "custom";
}

inline ShapeTag shape_tag_from_string(const std::string& name) {
  static const std::map<std::string, ShapeTag> table{
      {"rectangle", ShapeTag::Rectangle}, {"disk", ShapeTag::Disk},
      {"annulus", ShapeTag::Annulus},     {"lshape", ShapeTag::LShape},
      {"koch", ShapeTag::KochPrefractal}, {"custom", ShapeTag::Custom}};
  auto it = table.find(name);
  require(it != table.end(), ErrorKind::InvalidGeometry, "unknown shape '" + name + "'");
  return it->second;
}

/// Neighbor directions in the fixed order used by every stencil loop.
enum Direction : int { East = 0, West = 1, North = 2, South = 3 };

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// A rasterized open set. Immutable after construction; the true cells are
/// enumerated densely in row-major order (j outer, i inner).
class GridDomain {
 public:
  static constexpr int kOutside = -1;

  GridDomain(int nx, int ny, double h, Point origin, std::vector<std::uint8_t> mask,
             ShapeTag tag, std::map<std::string, double> parameters = {}, double resolution = 0.0)
      : nx_(nx), ny_(ny), h_(h), origin_(origin), mask_(std::move(mask)), tag_(tag),
        parameters_(std::move(parameters)), resolution_(resolution > 0 ? resolution : 1.0 / h) {
    require(nx_ > 0 && ny_ > 0, ErrorKind::InvalidGeometry, "grid must have positive size");
    require(h_ > 0, ErrorKind::InvalidGeometry, "cell width must be positive");
    require(mask_.size() == static_cast<std::size_t>(nx_) * ny_, ErrorKind::DimensionMismatch,
            "mask size does not match nx*ny");
    cell_to_index_.assign(mask_.size(), kOutside);
    for (std::size_t c = 0; c < mask_.size(); ++c) {
      if (mask_[c]) {
        cell_to_index_[c] = static_cast<int>(index_to_cell_.size());
        index_to_cell_.push_back(static_cast<int>(c));
      }
    }
    require(!index_to_cell_.empty(), ErrorKind::EmptySet, "domain has no interior cells");
    neighbors_.resize(index_to_cell_.size());
    for (std::size_t k = 0; k < index_to_cell_.size(); ++k) {
      const int c = index_to_cell_[k];
      const int i = c % nx_;
      const int j = c / nx_;
      neighbors_[k] = {lookup(i + 1, j), lookup(i - 1, j), lookup(i, j + 1), lookup(i, j - 1)};
    }
  }

  [[nodiscard]] int nx() const noexcept { return nx_; }
  [[nodiscard]] int ny() const noexcept { return ny_; }
  [[nodiscard]] double h() const noexcept { return h_; }
  [[nodiscard]] Point origin() const noexcept { return origin_; }
  [[nodiscard]] ShapeTag shape() const noexcept { return tag_; }
  [[nodiscard]] double resolution() const noexcept { return resolution_; }
  [[nodiscard]] const std::map<std::string, double>& parameters() const noexcept {
    return parameters_;
  }
  [[nodiscard]] const std::vector<std::uint8_t>& mask() const noexcept { return mask_; }

  /// Number of interior cells M.
  [[nodiscard]] int size() const noexcept { return static_cast<int>(index_to_cell_.size()); }
  [[nodiscard]] double cell_area() const noexcept { return h_ * h_; }
  [[nodiscard]] double area() const noexcept { return size() * cell_area(); }

  [[nodiscard]] bool inside(int i, int j) const noexcept {
    return i >= 0 && j >= 0 && i < nx_ && j < ny_ && mask_[static_cast<std::size_t>(j) * nx_ + i];
  }
  /// Interior index of grid cell (i, j), or kOutside.
  [[nodiscard]] int lookup(int i, int j) const noexcept {
    if (i < 0 || j < 0 || i >= nx_ || j >= ny_) return kOutside;
    return cell_to_index_[static_cast<std::size_t>(j) * nx_ + i];
  }
  [[nodiscard]] int cell_of(int index) const { return index_to_cell_.at(index); }
  [[nodiscard]] std::pair<int, int> ij(int index) const {
    const int c = cell_of(index);
    return {c % nx_, c / nx_};
  }
  [[nodiscard]] Point center(int index) const {
    auto [i, j] = ij(index);
    return {origin_.x + (i + 0.5) * h_, origin_.y + (j + 0.5) * h_};
  }
  /// The four neighbor indices (East, West, North, South); kOutside where the
  /// neighbor is off-grid or not in the domain.
  [[nodiscard]] const std::array<int, 4>& neighbors(int index) const { return neighbors_[index]; }

  /// Number of 4-connected components of the interior cells.
  [[nodiscard]] int component_count() const {
    std::vector<int> seen(size(), 0);
    std::vector<int> stack;
    int count = 0;
    for (int s = 0; s < size(); ++s) {
      if (seen[s]) continue;
      ++count;
      seen[s] = 1;
      stack.push_back(s);
      while (!stack.empty()) {
        const int k = stack.back();
        stack.pop_back();
        for (int n : neighbors_[k]) {
          if (n != kOutside && !seen[n]) {
            seen[n] = 1;
            stack.push_back(n);
          }
        }
      }
    }
    return count;
  }

 private:
  int nx_;
  int ny_;
  double h_;
  Point origin_;
  std::vector<std::uint8_t> mask_;
  ShapeTag tag_;
  std::map<std::string, double> parameters_;
  double resolution_;
  std::vector<int> cell_to_index_;
  std::vector<int> index_to_cell_;
  std::vector<std::array<int, 4>> neighbors_;
};

/// Subset of a domain's interior cells. Holds a non-owning reference to its
/// parent; the parent must outlive the set.
class CellSet {
 public:
  explicit CellSet(const GridDomain& parent, bool fill = false)
      : parent_(&parent), member_(parent.size(), fill ? 1 : 0) {}

  CellSet(const GridDomain& parent, std::vector<std::uint8_t> member)
      : parent_(&parent), member_(std::move(member)) {
    require(member_.size() == static_cast<std::size_t>(parent.size()),
            ErrorKind::DimensionMismatch, "cell set length differs from parent interior size");
  }

  template <class Pred>
  static CellSet from_predicate(const GridDomain& parent, Pred&& pred) {
    CellSet s(parent);
    for (int k = 0; k < parent.size(); ++k) s.member_[k] = pred(k) ? 1 : 0;
    return s;
  }

  [[nodiscard]] const GridDomain& parent() const noexcept { return *parent_; }
  [[nodiscard]] bool contains(int index) const { return member_[index] != 0; }
  void insert(int index) { member_.at(index) = 1; }
  void erase(int index) { member_.at(index) = 0; }
  [[nodiscard]] const std::vector<std::uint8_t>& members() const noexcept { return member_; }

  [[nodiscard]] int count() const {
    return static_cast<int>(std::count(member_.begin(), member_.end(), std::uint8_t{1}));
  }
  [[nodiscard]] double area() const { return count() * parent_->cell_area(); }
  [[nodiscard]] bool empty() const { return count() == 0; }

  [[nodiscard]] CellSet complement() const {
    CellSet c(*parent_);
    for (std::size_t k = 0; k < member_.size(); ++k) c.member_[k] = member_[k] ? 0 : 1;
    return c;
  }

  [[nodiscard]] CellSet intersect(const CellSet& other) const {
    require(other.parent_ == parent_, ErrorKind::InvalidParameter,
            "cell sets belong to different domains");
    CellSet c(*parent_);
    for (std::size_t k = 0; k < member_.size(); ++k) c.member_[k] = member_[k] && other.member_[k];
    return c;
  }

 private:
  const GridDomain* parent_;
  std::vector<std::uint8_t> member_;
};

namespace detail {

struct Box {
  double xmin, xmax, ymin, ymax;
};

/// Builds a grid whose cell corners include `anchor` and that covers `box`
/// with one padding cell, then masks cell centers by `inside`. Only the
/// largest 4-connected component is retained.
template <class Inside>
GridDomain rasterize(const Box& box, Point anchor, double h, Inside&& inside, ShapeTag tag,
                     std::map<std::string, double> params, double resolution) {
  const auto lo_i = static_cast<long>(std::floor((box.xmin - anchor.x) / h)) - 1;
  const auto lo_j = static_cast<long>(std::floor((box.ymin - anchor.y) / h)) - 1;
  const Point origin{anchor.x + static_cast<double>(lo_i) * h,
                     anchor.y + static_cast<double>(lo_j) * h};
  const int nx = static_cast<int>(std::ceil((box.xmax - origin.x) / h)) + 1;
  const int ny = static_cast<int>(std::ceil((box.ymax - origin.y) / h)) + 1;
  require(static_cast<double>(nx) * ny < 4.0e8, ErrorKind::InvalidParameter,
          "grid too large for the requested resolution");
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(nx) * ny, 0);
  inside(origin, nx, ny, mask);
  require(std::any_of(mask.begin(), mask.end(), [](auto m) { return m != 0; }),
          ErrorKind::InvalidGeometry, "shape contains no cell centers at this resolution");

  // Keep the largest 4-connected component (thin fractal spikes can strand cells).
  std::vector<int> comp(mask.size(), -1);
  std::vector<int> sizes;
  std::vector<int> stack;
  for (int c = 0; c < nx * ny; ++c) {
    if (!mask[c] || comp[c] >= 0) continue;
    const int id = static_cast<int>(sizes.size());
    int n = 0;
    comp[c] = id;
    stack.push_back(c);
    while (!stack.empty()) {
      const int q = stack.back();
      stack.pop_back();
      ++n;
      const int i = q % nx;
      const int j = q / nx;
      const std::array<std::pair<int, int>, 4> nb{{{i + 1, j}, {i - 1, j}, {i, j + 1}, {i, j - 1}}};
      for (auto [a, b] : nb) {
        if (a < 0 || b < 0 || a >= nx || b >= ny) continue;
        const int r = b * nx + a;
        if (mask[r] && comp[r] < 0) {
          comp[r] = id;
          stack.push_back(r);
        }
      }
    }
    sizes.push_back(n);
  }
  if (sizes.size() > 1) {
    const int keep = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    for (std::size_t c = 0; c < mask.size(); ++c) mask[c] = (mask[c] && comp[c] == keep) ? 1 : 0;
    int dropped = 0;
    for (std::size_t s = 0; s < sizes.size(); ++s)
      if (static_cast<int>(s) != keep) dropped += sizes[s];
    params["dropped_cells"] = dropped;
  }
  return GridDomain(nx, ny, h, origin, std::move(mask), tag, std::move(params), resolution);
}

inline double cell_width(double resolution) {
  require(std::isfinite(resolution) && resolution > 0, ErrorKind::InvalidGeometry,
          "resolution must be positive");
  return 1.0 / resolution;
}

}  // namespace detail

/// Axis-aligned rectangle (0, width) x (0, height).
inline GridDomain rasterize_rectangle(double width, double height, double resolution) {
  require(width > 0 && height > 0, ErrorKind::InvalidGeometry,
          "rectangle dimensions must be positive");
  const double h = detail::cell_width(resolution);
  auto fill = [&](Point o, int nx, int ny, std::vector<std::uint8_t>& mask) {
    for (int j = 0; j < ny; ++j) {
      const double y = o.y + (j + 0.5) * h;
      for (int i = 0; i < nx; ++i) {
        const double x = o.x + (i + 0.5) * h;
        mask[static_cast<std::size_t>(j) * nx + i] = (x > 0 && x < width && y > 0 && y < height);
      }
    }
  };
  return detail::rasterize({0, width, 0, height}, {0, 0}, h, fill, ShapeTag::Rectangle,
                           {{"width", width}, {"height", height}}, resolution);
}

/// Open disk of the given radius centered at the origin, which sits on a cell corner.
inline GridDomain rasterize_disk(double radius, double resolution) {
  require(radius > 0, ErrorKind::InvalidGeometry, "disk radius must be positive");
  const double h = detail::cell_width(resolution);
  auto fill = [&](Point o, int nx, int ny, std::vector<std::uint8_t>& mask) {
    for (int j = 0; j < ny; ++j) {
      const double y = o.y + (j + 0.5) * h;
      for (int i = 0; i < nx; ++i) {
        const double x = o.x + (i + 0.5) * h;
        mask[static_cast<std::size_t>(j) * nx + i] = (x * x + y * y < radius * radius);
      }
    }
  };
  return detail::rasterize({-radius, radius, -radius, radius}, {0, 0}, h, fill, ShapeTag::Disk,
                           {{"radius", radius}}, resolution);
}

inline GridDomain rasterize_annulus(double inner, double outer, double resolution) {
  require(inner > 0 && outer > inner, ErrorKind::InvalidGeometry,
          "annulus needs 0 < inner < outer");
  const double h = detail::cell_width(resolution);
  auto fill = [&](Point o, int nx, int ny, std::vector<std::uint8_t>& mask) {
    for (int j = 0; j < ny; ++j) {
      const double y = o.y + (j + 0.5) * h;
      for (int i = 0; i < nx; ++i) {
        const double x = o.x + (i + 0.5) * h;
        const double r2 = x * x + y * y;
        mask[static_cast<std::size_t>(j) * nx + i] = (r2 < outer * outer && r2 > inner * inner);
      }
    }
  };
  return detail::rasterize({-outer, outer, -outer, outer}, {0, 0}, h, fill, ShapeTag::Annulus,
                           {{"inner", inner}, {"outer", outer}}, resolution);
}

/// Union of [0,arm]x[0,thickness] and [0,thickness]x[0,arm].
inline GridDomain rasterize_lshape(double arm, double thickness, double resolution) {
  require(thickness > 0 && arm > 0, ErrorKind::InvalidGeometry,
          "L-shape dimensions must be positive");
  require(thickness < arm, ErrorKind::InvalidGeometry, "L-shape needs thickness < arm");
  const double h = detail::cell_width(resolution);
  auto fill = [&](Point o, int nx, int ny, std::vector<std::uint8_t>& mask) {
    for (int j = 0; j < ny; ++j) {
      const double y = o.y + (j + 0.5) * h;
      for (int i = 0; i < nx; ++i) {
        const double x = o.x + (i + 0.5) * h;
        const bool horizontal = x > 0 && x < arm && y > 0 && y < thickness;
        const bool vertical = x > 0 && x < thickness && y > 0 && y < arm;
        mask[static_cast<std::size_t>(j) * nx + i] = horizontal || vertical;
      }
    }
  };
  return detail::rasterize({0, arm, 0, arm}, {0, 0}, h, fill, ShapeTag::LShape,
                           {{"arm", arm}, {"thickness", thickness}}, resolution);
}

/// Vertices (counterclockwise) of the level-`level` Koch snowflake built on the
/// equilateral triangle (0,0), (side,0), (side/2, side*sqrt(3)/2).
inline std::vector<Point> koch_polygon(int level, double side = 1.0) {
  require(level >= 0 && level <= 6, ErrorKind::InvalidParameter, "Koch level must be in [0, 6]");
  const double s3 = std::sqrt(3.0);
  std::vector<Point> poly{{0, 0}, {side, 0}, {side / 2, side * s3 / 2}};
  for (int l = 0; l < level; ++l) {
    std::vector<Point> next;
    next.reserve(poly.size() * 4);
    for (std::size_t e = 0; e < poly.size(); ++e) {
      const Point p = poly[e];
      const Point q = poly[(e + 1) % poly.size()];
      const double dx = (q.x - p.x) / 3;
      const double dy = (q.y - p.y) / 3;
      const Point a{p.x + dx, p.y + dy};
      const Point b{p.x + 2 * dx, p.y + 2 * dy};
      // Rotate the middle third by -60 degrees: outward for a CCW polygon.
      const double c = 0.5;
      const double s = -s3 / 2;
      const Point peak{a.x + c * dx - s * dy, a.y + s * dx + c * dy};
      next.push_back(p);
      next.push_back(a);
      next.push_back(peak);
      next.push_back(b);
    }
    poly = std::move(next);
  }
  return poly;
}

/// Closed-form area of the level-k snowflake on a unit-side triangle.
inline double koch_area(int level, double side = 1.0) {
  return std::sqrt(3.0) / 4 * side * side * (1.0 + 0.6 * (1.0 - std::pow(4.0 / 9.0, level)));
}

/// Smallest resolution (exclusive) the Koch rasterizer accepts at this level.
inline double koch_minimal_resolution(int level, double side = 1.0) {
  return 4.0 * std::pow(3.0, level) / side;
}

/// Level-`level` Koch snowflake prefractal, masked by an even-odd scanline
/// point-in-polygon test. The snowflake center lies on a cell corner so the
/// grid keeps both axis reflections of the shape.
inline GridDomain rasterize_koch(int level, double resolution, double side = 1.0) {
  require(level >= 0 && level <= 6, ErrorKind::InvalidParameter, "Koch level must be in [0, 6]");
  require(side > 0, ErrorKind::InvalidGeometry, "Koch side must be positive");
  const double h = detail::cell_width(resolution);
  const double minimal = koch_minimal_resolution(level, side);
  if (!(resolution > minimal)) {
    throw ResolutionTooCoarse("Koch level " + std::to_string(level) +
                                  " needs resolution > " + std::to_string(minimal) + " (got " +
                                  std::to_string(resolution) + ")",
                              minimal);
  }
  const auto poly = koch_polygon(level, side);
  detail::Box box{poly[0].x, poly[0].x, poly[0].y, poly[0].y};
  for (const auto& p : poly) {
    box.xmin = std::min(box.xmin, p.x);
    box.xmax = std::max(box.xmax, p.x);
    box.ymin = std::min(box.ymin, p.y);
    box.ymax = std::max(box.ymax, p.y);
  }
  const Point centroid{side / 2, side * std::sqrt(3.0) / 6};
  auto fill = [&](Point o, int nx, int ny, std::vector<std::uint8_t>& mask) {
    std::vector<double> xs;
    for (int j = 0; j < ny; ++j) {
      const double y = o.y + (j + 0.5) * h;
      xs.clear();
      for (std::size_t e = 0; e < poly.size(); ++e) {
        const Point p = poly[e];
        const Point q = poly[(e + 1) % poly.size()];
        if ((p.y > y) != (q.y > y)) xs.push_back(p.x + (y - p.y) * (q.x - p.x) / (q.y - p.y));
      }
      std::sort(xs.begin(), xs.end());
      for (std::size_t m = 0; m + 1 < xs.size(); m += 2) {
        const int i0 = std::max(0, static_cast<int>(std::ceil((xs[m] - o.x) / h - 0.5)));
        const int i1 = std::min(nx - 1, static_cast<int>(std::floor((xs[m + 1] - o.x) / h - 0.5)));
        for (int i = i0; i <= i1; ++i) {
          const double x = o.x + (i + 0.5) * h;
          if (x > xs[m] && x < xs[m + 1]) mask[static_cast<std::size_t>(j) * nx + i] = 1;
        }
      }
    }
  };
  return detail::rasterize(box, centroid, h, fill, ShapeTag::KochPrefractal,
                           {{"level", level}, {"side", side}}, resolution);
}

/// Domain consisting of exactly the cells of `set`, on the parent's grid.
inline GridDomain restrict_to(const CellSet& set) {
  const GridDomain& d = set.parent();
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(d.nx()) * d.ny(), 0);
  for (int k = 0; k < d.size(); ++k)
    if (set.contains(k)) mask[d.cell_of(k)] = 1;
  return GridDomain(d.nx(), d.ny(), d.h(), d.origin(), std::move(mask), ShapeTag::Custom, {},
                    d.resolution());
}

// ---------------------------------------------------------------------------
// Perimeter, isoperimetry, coarea

/// Face-count perimeter. `corrected` applies the pi/4 lattice-anisotropy
/// factor that maps Manhattan length of smooth convex curves to Euclidean.
struct Perimeter {
  long faces = 0;
  double raw = 0.0;
  double corrected = 0.0;
};

inline constexpr double kAnisotropyCorrection = std::numbers::pi / 4.0;

/// Counts faces between a member cell and a non-member or exterior cell.
inline Perimeter discrete_perimeter(const CellSet& set) {
  const GridDomain& d = set.parent();
  long faces = 0;
  bool any = false;
  for (int k = 0; k < d.size(); ++k) {
    if (!set.contains(k)) continue;
    any = true;
    for (int n : d.neighbors(k))
      if (n == GridDomain::kOutside || !set.contains(n)) ++faces;
  }
  require(any, ErrorKind::EmptySet, "perimeter of an empty cell set");
  const double raw = static_cast<double>(faces) * d.h();
  return {faces, raw, raw * kAnisotropyCorrection};
}

/// Faces separating a member from a non-member where both cells are interior.
inline long interior_face_count(const CellSet& set) {
  const GridDomain& d = set.parent();
  long faces = 0;
  for (int k = 0; k < d.size(); ++k) {
    if (!set.contains(k)) continue;
    for (int n : d.neighbors(k))
      if (n != GridDomain::kOutside && !set.contains(n)) ++faces;
  }
  return faces;
}

struct IsoperimetricRatio {
  double raw = 0.0;
  double corrected = 0.0;
  /// N * omega_N^{1/N}; the ball attains it.
  double extremal = 0.0;
};

/// Perimeter / area^{(N-1)/N}. Only the planar case N = 2 is meaningful on a
/// square grid.
inline IsoperimetricRatio isoperimetric_ratio(const CellSet& set, int dimension = 2) {
  require(dimension == 2, ErrorKind::InvalidParameter,
          "isoperimetric ratio on a planar grid needs N = 2");
  const Perimeter p = discrete_perimeter(set);
  const double scale = std::sqrt(set.area());
  return {p.raw / scale, p.corrected / scale, 2.0 * std::sqrt(std::numbers::pi)};
}

struct CoareaResult {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

inline constexpr double kCoareaSlack = 0.05;

/// Discrete form of  int_0^R Per(B_r(x), A) dr <= m(B_R(x) cap A).
///
/// Radii partition (0, R] into J = ceil(R/h) equal steps and are sampled at
/// the step midpoints. Balls are {cells with center distance < r}. The
/// relative perimeter counts only faces with both cells in A, scaled by the
/// anisotropy correction.
inline CoareaResult coarea_check(const GridDomain& domain, int x, const CellSet& a, double radius,
                                 double slack = kCoareaSlack) {
  require(radius > 0 && std::isfinite(radius), ErrorKind::InvalidParameter,
          "coarea radius must be positive");
  require(x >= 0 && x < domain.size(), ErrorKind::InvalidParameter,
          "coarea center must be an interior cell");
  require(&a.parent() == &domain, ErrorKind::InvalidParameter, "cell set from another domain");
  const double h = domain.h();
  const long steps = std::max<long>(1, static_cast<long>(std::ceil(radius / h - 1e-12)));
  const double dr = radius / static_cast<double>(steps);
  const Point c = domain.center(x);
  auto dist = [&](int k) {
    const Point p = domain.center(k);
    return std::hypot(p.x - c.x, p.y - c.y);
  };
  // Number of midpoint radii r_j = (j - 1/2) dr, j = 1..steps, in (lo, hi].
  auto radii_in = [&](double lo, double hi) -> long {
    auto upto = [&](double t) -> long {  // #{j : r_j <= t}
      if (t < 0.5 * dr) return 0;
      return std::min(steps, static_cast<long>(std::floor(t / dr + 0.5)));
    };
    return std::max<long>(0, upto(hi) - upto(lo));
  };
  long weighted = 0;
  long inside = 0;
  for (int k = 0; k < domain.size(); ++k) {
    if (!a.contains(k)) continue;
    const double dk = dist(k);
    if (dk < radius) ++inside;
    // East and North faces only, so each interior face is seen once.
    for (int dir : {East, North}) {
      const int n = domain.neighbors(k)[dir];
      if (n == GridDomain::kOutside || !a.contains(n)) continue;
      const double dn = dist(n);
      // Face is on the ball boundary for r in (min, max]: the nearer cell is
      // inside (d < r), the farther one is not (d >= r).
      weighted += radii_in(std::min(dk, dn), std::max(dk, dn));
    }
  }
  CoareaResult out;
  out.lhs = static_cast<double>(weighted) * h * kAnisotropyCorrection * dr;
  out.rhs = static_cast<double>(inside) * domain.cell_area();
  out.holds = out.lhs <= out.rhs * (1.0 + slack);
  return out;
}

// ---------------------------------------------------------------------------
// JSON descriptors

/// Run-length encoding of the mask: alternating run lengths starting with a
/// run of false cells (possibly zero), row-major.
inline std::vector<long> encode_mask(const std::vector<std::uint8_t>& mask) {
  std::vector<long> runs;
  std::uint8_t current = 0;
  long run = 0;
  for (auto m : mask) {
    const std::uint8_t v = m ? 1 : 0;
    if (v != current) {
      runs.push_back(run);
      run = 0;
      current = v;
    }
    ++run;
  }
  runs.push_back(run);
  return runs;
}

inline std::vector<std::uint8_t> decode_mask(const std::vector<long>& runs, std::size_t size) {
  std::vector<std::uint8_t> mask;
  mask.reserve(size);
  std::uint8_t current = 0;
  for (long r : runs) {
    require(r >= 0, ErrorKind::InvalidGeometry, "negative run length in mask");
    mask.insert(mask.end(), static_cast<std::size_t>(r), current);
    current ^= 1;
  }
  require(mask.size() == size, ErrorKind::DimensionMismatch, "mask runs do not cover the grid");
  return mask;
}

inline nlohmann::json to_json(const GridDomain& d, bool include_mask = false) {
  nlohmann::json j;
  j["shape_tag"] = to_string(d.shape());
  j["parameters"] = d.parameters();
  j["resolution"] = d.resolution();
  j["h"] = d.h();
  j["nx"] = d.nx();
  j["ny"] = d.ny();
  j["origin"] = {d.origin().x, d.origin().y};
  j["cells"] = d.size();
  j["area"] = d.area();
  if (include_mask) j["mask_rle"] = encode_mask(d.mask());
  return j;
}

/// Rebuilds a domain from a descriptor. Built-in shapes are re-rasterized from
/// their parameters; custom shapes need the mask field.
inline GridDomain domain_from_json(const nlohmann::json& j) {
  try {
    const ShapeTag tag = shape_tag_from_string(j.at("shape_tag").get<std::string>());
    const auto& p = j.contains("parameters") ? j.at("parameters") : nlohmann::json::object();
    auto param = [&](const char* key) { return p.at(key).get<double>(); };
    const double res = j.contains("resolution") ? j.at("resolution").get<double>()
                                                : 1.0 / j.at("h").get<double>();
    switch (tag) {
      case ShapeTag::Rectangle: return rasterize_rectangle(param("width"), param("height"), res);
      case ShapeTag::Disk: return rasterize_disk(param("radius"), res);
      case ShapeTag::Annulus: return rasterize_annulus(param("inner"), param("outer"), res);
      case ShapeTag::LShape: return rasterize_lshape(param("arm"), param("thickness"), res);
      case ShapeTag::KochPrefractal:
        return rasterize_koch(static_cast<int>(param("level")), res,
                              p.contains("side") ? param("side") : 1.0);
      case ShapeTag::Custom: {
        const int nx = j.at("nx").get<int>();
        const int ny = j.at("ny").get<int>();
        const double h = j.at("h").get<double>();
        Point origin{};
        if (j.contains("origin")) origin = {j["origin"][0].get<double>(), j["origin"][1].get<double>()};
        auto mask = decode_mask(j.at("mask_rle").get<std::vector<long>>(),
                                static_cast<std::size_t>(nx) * ny);
        return GridDomain(nx, ny, h, origin, std::move(mask), ShapeTag::Custom, {}, res);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidGeometry, std::string("bad domain descriptor: ") + e.what());
  }
  throw Error(ErrorKind::InvalidGeometry, "bad domain descriptor");
}

}  // namespace nlab
