#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cityq/geometry.hpp"
#include "cityq/queue_function.hpp"

namespace cityq {

// Per-cell population mass, normalized to a probability vector.
struct Density {
  std::vector<double> mass;
};

struct DensitySpec {
  enum class Kind { Uniform, Table, Callable };
  Kind kind = Kind::Uniform;
  std::vector<double> table;
  std::function<double(Vec2)> fn;

  static DensitySpec uniform() { return {}; }
  static DensitySpec per_cell(std::vector<double> values) {
    DensitySpec s;
    s.kind = Kind::Table;
    s.table = std::move(values);
    return s;
  }
  static DensitySpec callable(std::function<double(Vec2)> f) {
    DensitySpec s;
    s.kind = Kind::Callable;
    s.fn = std::move(f);
    return s;
  }
};

// mass(cell) = f(center) * volume, normalized to total 1.
inline Density evaluate_density(const DensitySpec& spec, const Grid& grid) {
  std::size_t n = grid.size();
  std::vector<double> m(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double v = 1.0;
    switch (spec.kind) {
      case DensitySpec::Kind::Uniform: v = 1.0; break;
      case DensitySpec::Kind::Table:
        if (spec.table.size() != n)
          throw std::invalid_argument("density: table size does not match grid");
        v = spec.table[i];
        break;
      case DensitySpec::Kind::Callable: v = spec.fn(grid.cells[i].center); break;
    }
    if (v < 0.0) throw std::invalid_argument("density: negative value at a cell center");
    m[i] = v * grid.cells[i].volume;
  }
  double total = kahan_total(m.begin(), m.end());
  if (!(total > 0.0)) throw std::invalid_argument("density: total mass is zero");
  for (double& x : m) x /= total;
  return Density{std::move(m)};
}

struct Service {
  Vec2 location;
  QueueFunction queue;
};

// Immutable problem instance: domain grid, population density, k services
// with queue functions, travel exponent p.
struct Scenario {
  Grid grid;
  Density density;
  std::vector<Service> services;
  double p = 2.0;

  std::size_t k() const { return services.size(); }

  void validate() const {
    if (services.size() < 2) throw std::invalid_argument("scenario: need k >= 2 services");
    if (!(p >= 1.0)) throw std::invalid_argument("scenario: p must be >= 1");
    if (density.mass.size() != grid.size())
      throw std::invalid_argument("scenario: density size does not match grid");
    double s = kahan_total(density.mass.begin(), density.mass.end());
    if (std::abs(s - 1.0) > 1e-12)
      throw std::invalid_argument("scenario: density is not normalized");
    for (std::size_t i = 0; i < services.size(); ++i) {
      if (!grid.box.contains(services[i].location))
        throw std::invalid_argument("scenario: service location outside box");
      for (std::size_t j = i + 1; j < services.size(); ++j) {
        const Vec2& a = services[i].location;
        const Vec2& b = services[j].location;
        if (a.x == b.x && (grid.dim() == 1 || a.y == b.y))
          throw std::invalid_argument("scenario: duplicate service locations");
      }
    }
  }

  double dist_p(std::size_t cell, std::size_t site) const {
    return distance_p(grid.cells[cell].center, services[site].location, p, grid.dim());
  }
};

inline Scenario make_scenario(Grid grid, Density density, std::vector<Service> services,
                              double p) {
  Scenario s{std::move(grid), std::move(density), std::move(services), p};
  s.validate();
  return s;
}

// tau(x) = |x-x1|^p - |x-x2|^p at cell centers (k = 2 only).
inline std::vector<double> tau_field(const Scenario& s) {
  if (s.k() != 2) throw std::invalid_argument("tau_field: exactly 2 services required");
  std::vector<double> tau(s.grid.size());
  for (std::size_t i = 0; i < s.grid.size(); ++i) tau[i] = s.dist_p(i, 0) - s.dist_p(i, 1);
  return tau;
}

// m(t) = density mass of cells with tau(cell) < t, cells as atoms at centers.
inline double mass_below(const std::vector<double>& tau, const Density& density, double t) {
  double m = 0.0;
  for (std::size_t i = 0; i < tau.size(); ++i)
    if (tau[i] < t) m += density.mass[i];
  return m;
}

// Sorted tau machinery for k = 2: atom masses and prefix transport costs in
// tau order, plus the piecewise-linear mass profile obtained by interpolating
// tau linearly inside each cell. The interpolated profile reproduces the
// continuum m(t) exactly when tau is affine on every cell (p = 2, or 1-d
// p = 1 with no site strictly inside a cell).
class TauProfile {
 public:
  explicit TauProfile(const Scenario& s) {
    if (s.k() != 2) throw std::invalid_argument("tau profile: exactly 2 services required");
    const Grid& g = s.grid;
    std::size_t n = g.size();
    order_.resize(n);
    tau_.resize(n);
    std::vector<double> lo(n), hi(n);
    for (std::size_t i = 0; i < n; ++i) {
      tau_[i] = s.dist_p(i, 0) - s.dist_p(i, 1);
      auto corner_tau = [&](double dx, double dy) {
        Vec2 c{g.cells[i].center.x + dx, g.cells[i].center.y + dy};
        return distance_p(c, s.services[0].location, s.p, g.dim()) -
               distance_p(c, s.services[1].location, s.p, g.dim());
      };
      double hx = 0.5 * g.step_x();
      if (g.dim() == 1) {
        double ta = corner_tau(-hx, 0.0), tb = corner_tau(hx, 0.0);
        lo[i] = std::min(ta, tb);
        hi[i] = std::max(ta, tb);
      } else {
        double hy = 0.5 * g.step_y();
        double t0 = corner_tau(-hx, -hy), t1 = corner_tau(hx, -hy);
        double t2 = corner_tau(-hx, hy), t3 = corner_tau(hx, hy);
        lo[i] = std::min(std::min(t0, t1), std::min(t2, t3));
        hi[i] = std::max(std::max(t0, t1), std::max(t2, t3));
      }
    }
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::stable_sort(order_.begin(), order_.end(),
                     [&](std::size_t a, std::size_t b) { return tau_[a] < tau_[b]; });

    sorted_tau_.resize(n);
    mass_.resize(n);
    cum_mass_.assign(n + 1, 0.0);
    cum_cost1_.assign(n + 1, 0.0);
    cum_cost2_.assign(n + 1, 0.0);
    d1_.resize(n);
    d2_.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
      std::size_t i = order_[r];
      sorted_tau_[r] = tau_[i];
      mass_[r] = s.density.mass[i];
      d1_[r] = s.dist_p(i, 0);
      d2_[r] = s.dist_p(i, 1);
      cum_mass_[r + 1] = cum_mass_[r] + mass_[r];
      cum_cost1_[r + 1] = cum_cost1_[r] + mass_[r] * d1_[r];
      cum_cost2_[r + 1] = cum_cost2_[r] + mass_[r] * d2_[r];
    }
    total_mass_ = cum_mass_[n];

    build_smooth(lo, hi, s.density.mass);
  }

  std::size_t size() const { return sorted_tau_.size(); }
  double min_tau() const { return smooth_bp_.empty() ? sorted_tau_.front() : smooth_bp_.front(); }
  double max_tau() const { return smooth_bp_.empty() ? sorted_tau_.back() : smooth_bp_.back(); }
  double max_cell_mass() const {
    return mass_.empty() ? 0.0 : *std::max_element(mass_.begin(), mass_.end());
  }
  const std::vector<std::size_t>& order() const { return order_; }
  const std::vector<double>& sorted_tau() const { return sorted_tau_; }
  double cumulative_mass(std::size_t b) const { return cum_mass_[b]; }

  // Atom mass of {tau(cell) < t}.
  double atom_mass(double t) const {
    auto it = std::lower_bound(sorted_tau_.begin(), sorted_tau_.end(), t);
    return cum_mass_[static_cast<std::size_t>(it - sorted_tau_.begin())];
  }

  // Atom mass of {tau(cell) <= t}.
  double atom_mass_leq(double t) const {
    auto it = std::upper_bound(sorted_tau_.begin(), sorted_tau_.end(), t);
    return cum_mass_[static_cast<std::size_t>(it - sorted_tau_.begin())];
  }

  // Interpolated mass of {tau < t}; continuous and piecewise linear in t.
  double smooth_mass(double t) const {
    if (smooth_bp_.empty()) return 0.0;
    auto it = std::lower_bound(smooth_bp_.begin(), smooth_bp_.end(), t);
    std::size_t i = static_cast<std::size_t>(it - smooth_bp_.begin());
    if (i == 0) return 0.0;
    double m = smooth_val_[i - 1] + smooth_slope_[i - 1] * (t - smooth_bp_[i - 1]);
    return std::clamp(m, 0.0, total_mass_);
  }

  // Largest slope of the interpolated mass profile (Lipschitz constant of m).
  double mass_profile_lipschitz() const {
    double s = 0.0;
    for (double v : smooth_slope_) s = std::max(s, v);
    return s;
  }

  // Transport cost of the threshold assignment sending the first b sorted
  // cells to site 1 and the rest to site 2.
  double threshold_cost(std::size_t b) const {
    return cum_cost1_[b] + (cum_cost2_.back() - cum_cost2_[b]);
  }

  struct Split {
    std::size_t boundary;  // sorted index of the partially filled cell (== n if none)
    double fraction;       // share of the boundary cell sent to site 1
    double tau_star;       // adjusted-cost threshold: w2 - w1
    double value;          // exact transport cost of the split plan
  };

  // Optimal transport value for marginals (c1, 1-c1): fill site 1 in tau
  // order, splitting the boundary cell. This is the finite LP optimum.
  Split split_at_mass(double c1) const {
    std::size_t n = size();
    double target = std::clamp(c1, 0.0, total_mass_);
    auto it = std::upper_bound(cum_mass_.begin(), cum_mass_.end(), target);
    std::size_t b = static_cast<std::size_t>(it - cum_mass_.begin());
    b = (b == 0) ? 0 : b - 1;  // largest b with cum_mass[b] <= target
    if (b >= n) {
      return Split{n, 0.0, sorted_tau_.empty() ? 0.0 : sorted_tau_.back(),
                   cum_cost1_[n]};
    }
    double frac = mass_[b] > 0.0 ? (target - cum_mass_[b]) / mass_[b] : 0.0;
    frac = std::clamp(frac, 0.0, 1.0);
    double value = cum_cost1_[b] + frac * mass_[b] * d1_[b] +
                   (1.0 - frac) * mass_[b] * d2_[b] +
                   (cum_cost2_.back() - cum_cost2_[b + 1]);
    return Split{b, frac, sorted_tau_[b], value};
  }

 private:
  void build_smooth(const std::vector<double>& lo, const std::vector<double>& hi,
                    const std::vector<double>& mass) {
    struct Event {
      double t;
      double dslope;
      double jump;
    };
    std::vector<Event> ev;
    ev.reserve(2 * lo.size());
    for (std::size_t i = 0; i < lo.size(); ++i) {
      double spread = hi[i] - lo[i];
      if (spread > 1e-300) {
        double s = mass[i] / spread;
        ev.push_back({lo[i], s, 0.0});
        ev.push_back({hi[i], -s, 0.0});
      } else {
        ev.push_back({tau_[i] == 0.0 ? lo[i] : tau_[i], 0.0, mass[i]});
      }
    }
    std::sort(ev.begin(), ev.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
    smooth_bp_.clear();
    smooth_val_.clear();
    smooth_slope_.clear();
    double val = 0.0, slope = 0.0;
    std::size_t i = 0;
    double prev_t = 0.0;
    bool started = false;
    while (i < ev.size()) {
      double t = ev[i].t;
      if (started) val += slope * (t - prev_t);
      double jump = 0.0;
      while (i < ev.size() && ev[i].t == t) {
        slope += ev[i].dslope;
        jump += ev[i].jump;
        ++i;
      }
      val += jump;  // atoms count as soon as t exceeds their position
      smooth_bp_.push_back(t);
      smooth_val_.push_back(val);
      smooth_slope_.push_back(slope);
      prev_t = t;
      started = true;
    }
  }

  std::vector<std::size_t> order_;
  std::vector<double> tau_;         // by cell index
  std::vector<double> sorted_tau_;  // by rank
  std::vector<double> mass_, d1_, d2_;
  std::vector<double> cum_mass_, cum_cost1_, cum_cost2_;
  double total_mass_ = 0.0;
  std::vector<double> smooth_bp_, smooth_val_, smooth_slope_;
};

}  // namespace cityq
