#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace cityq {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// Kahan compensated accumulator; keeps probability sums accurate to a few
// ulps on 1e5-cell grids.
class KahanSum {
 public:
  void add(double x) {
    double y = x - comp_;
    double t = sum_ + y;
    comp_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

template <typename It>
double kahan_total(It first, It last) {
  KahanSum s;
  for (; first != last; ++first) s.add(*first);
  return s.value();
}

// Axis-aligned bounds of the city domain. 1-d boxes use the x axis only.
struct Box {
  int dim = 1;
  Vec2 lo;
  Vec2 hi;

  double volume() const {
    double v = hi.x - lo.x;
    if (dim == 2) v *= (hi.y - lo.y);
    return v;
  }

  bool contains(const Vec2& p, double slack = 1e-12) const {
    if (p.x < lo.x - slack || p.x > hi.x + slack) return false;
    if (dim == 2 && (p.y < lo.y - slack || p.y > hi.y + slack)) return false;
    return true;
  }

  static Box interval(double a, double b) { return Box{1, {a, 0.0}, {b, 0.0}}; }
  static Box rectangle(double ax, double bx, double ay, double by) {
    return Box{2, {ax, ay}, {bx, by}};
  }
};

struct Cell {
  Vec2 center;
  double volume = 0.0;
};

struct Grid {
  Box box;
  std::array<int, 2> resolution{0, 0};  // cells per axis; [n,1] for 1-d
  std::vector<Cell> cells;

  int dim() const { return box.dim; }
  std::size_t size() const { return cells.size(); }

  // Per-axis cell extent.
  double step_x() const { return (box.hi.x - box.lo.x) / resolution[0]; }
  double step_y() const {
    return box.dim == 2 ? (box.hi.y - box.lo.y) / resolution[1] : 0.0;
  }
};

// |a-b|^p with exact fast paths for p=1 and p=2.
inline double distance_p(const Vec2& a, const Vec2& b, double p, int dim) {
  double dx = a.x - b.x;
  if (dim == 1) {
    double d = std::abs(dx);
    if (p == 1.0) return d;
    if (p == 2.0) return d * d;
    return std::pow(d, p);
  }
  double dy = a.y - b.y;
  double r2 = dx * dx + dy * dy;
  if (p == 2.0) return r2;
  if (p == 1.0) return std::sqrt(r2);
  return std::pow(r2, 0.5 * p);
}

// Uniform grid over box; resolution is cells per axis (>= 2 each).
inline Grid build_grid(const Box& box, std::array<int, 2> resolution) {
  if (box.dim != 1 && box.dim != 2) throw std::invalid_argument("grid: dim must be 1 or 2");
  if (!(box.hi.x > box.lo.x) || (box.dim == 2 && !(box.hi.y > box.lo.y)))
    throw std::invalid_argument("grid: degenerate box");
  int nx = resolution[0];
  int ny = box.dim == 2 ? resolution[1] : 1;
  if (nx < 2 || (box.dim == 2 && ny < 2))
    throw std::invalid_argument("grid: resolution must be >= 2 per axis");

  Grid g;
  g.box = box;
  g.resolution = {nx, ny};
  double hx = (box.hi.x - box.lo.x) / nx;
  double hy = box.dim == 2 ? (box.hi.y - box.lo.y) / ny : 1.0;
  double vol = box.dim == 2 ? hx * hy : hx;
  g.cells.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      Vec2 c{box.lo.x + (i + 0.5) * hx,
             box.dim == 2 ? box.lo.y + (j + 0.5) * hy : 0.0};
      g.cells.push_back({c, vol});
    }
  }
  return g;
}

inline Grid build_grid(const Box& box, int resolution) {
  return build_grid(box, {resolution, resolution});
}

// Grid invariants: positive volumes summing to the box volume, centers inside.
inline void validate_grid(const Grid& g) {
  double sum = 0.0;
  for (const Cell& c : g.cells) {
    if (!(c.volume > 0.0)) throw std::invalid_argument("grid: nonpositive cell volume");
    if (!g.box.contains(c.center)) throw std::invalid_argument("grid: center outside box");
    sum += c.volume;
  }
  double box_vol = g.box.volume();
  if (std::abs(sum - box_vol) > 1e-9 * std::abs(box_vol))
    throw std::invalid_argument("grid: cell volumes do not tile the box");
}

}  // namespace cityq
