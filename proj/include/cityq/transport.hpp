#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "cityq/scenario.hpp"

namespace cityq {

// Point on the unit simplex of service loads.
struct MassVector {
  std::vector<double> c;

  static MassVector simplex(std::vector<double> v) {
    KahanSum s;
    for (double x : v) {
      if (x < 0.0 || x > 1.0) throw std::invalid_argument("mass vector: entry outside [0,1]");
      s.add(x);
    }
    if (std::abs(s.value() - 1.0) > 1e-12)
      throw std::invalid_argument("mass vector: entries must sum to 1");
    return MassVector{std::move(v)};
  }

  static MassVector normalized(std::vector<double> v) {
    double s = std::accumulate(v.begin(), v.end(), 0.0);
    if (!(s > 0.0)) throw std::invalid_argument("mass vector: nonpositive total");
    for (double& x : v) x /= s;
    return MassVector{std::move(v)};
  }

  std::size_t size() const { return c.size(); }
  double operator[](std::size_t i) const { return c[i]; }
};

// Additive cost offsets: cell goes to argmin_j |x-x_j|^p + w_j. This is the
// dual variable v(x_j) with the sign flipped (w_j = -v_j), canonicalized so
// the last participating site has w = 0.
struct Weights {
  std::vector<double> w;

  void canonicalize(std::size_t anchor) {
    double shift = w.at(anchor);
    for (double& x : w) x -= shift;
  }
};

struct Partition {
  std::vector<int> assign;     // per-cell site index
  std::vector<double> masses;  // per-site load, sums to 1
};

// Cells to the site minimizing |center-x_j|^p + w_j; ties to the lowest index.
inline Partition weighted_partition(const Scenario& s, const Weights& weights) {
  std::size_t n = s.grid.size(), k = s.k();
  if (weights.w.size() != k) throw std::invalid_argument("weighted_partition: weight size");
  Partition part;
  part.assign.resize(n);
  std::vector<KahanSum> masses(k);
  for (std::size_t i = 0; i < n; ++i) {
    int best = 0;
    double best_cost = s.dist_p(i, 0) + weights.w[0];
    for (std::size_t j = 1; j < k; ++j) {
      double cost = s.dist_p(i, j) + weights.w[j];
      if (cost < best_cost) {
        best_cost = cost;
        best = static_cast<int>(j);
      }
    }
    part.assign[i] = best;
    masses[static_cast<std::size_t>(best)].add(s.density.mass[i]);
  }
  part.masses.resize(k);
  for (std::size_t j = 0; j < k; ++j) part.masses[j] = masses[j].value();
  return part;
}

// Travel part of the social cost: sum of density * |center - x_assign|^p.
inline double transport_cost(const Scenario& s, const Partition& part) {
  if (part.assign.size() != s.grid.size())
    throw std::invalid_argument("transport_cost: partition size");
  double total = 0.0;
  for (std::size_t i = 0; i < part.assign.size(); ++i)
    total += s.density.mass[i] * s.dist_p(i, static_cast<std::size_t>(part.assign[i]));
  return total;
}

struct DualAscentResult {
  Weights weights;                  // canonicalized (last active site at 0)
  std::vector<double> det_masses;   // masses of the deterministic partition
  double dual_value = 0.0;          // equals the transport LP value at optimality
  double residual = 0.0;            // max deviation of the tie-split masses from target
  bool converged = false;
  int sweeps = 0;
};

namespace detail {

// Dual objective sum_x mu_x min_j(d_xj + w_j) - sum_j c_j w_j over active sites.
inline double dual_objective(const Scenario& s, const std::vector<double>& w,
                             const std::vector<int>& active, const std::vector<double>& c) {
  double val = 0.0;
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    double u = std::numeric_limits<double>::infinity();
    for (int j : active) u = std::min(u, s.dist_p(i, j) + w[j]);
    val += s.density.mass[i] * u;
  }
  for (int j : active) val -= c[j] * w[j];
  return val;
}

// Exact maximization of the dual along w_i (or along a joint shift of a
// site group): the mass captured by the group is a step function of the
// shift, so the optimum sits at the breakpoint where the cumulative mass
// crosses the group's target.
inline void exact_group_move(const Scenario& s, std::vector<double>& w,
                             const std::vector<int>& active, const std::vector<double>& c,
                             const std::vector<int>& group) {
  std::size_t n = s.grid.size();
  double target = 0.0;
  for (int j : group) target += c[j];
  std::vector<double> r(n);
  for (std::size_t x = 0; x < n; ++x) {
    double own = std::numeric_limits<double>::infinity();
    double other = std::numeric_limits<double>::infinity();
    for (int j : active) {
      double cost = s.dist_p(x, j) + w[j];
      bool in_group = std::find(group.begin(), group.end(), j) != group.end();
      if (in_group)
        own = std::min(own, cost);
      else
        other = std::min(other, cost);
    }
    r[x] = other - own;  // group keeps cell x iff shift < r[x]
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return r[a] > r[b]; });
  double cum = 0.0;
  double shift = r[idx.back()];
  for (std::size_t rpos = 0; rpos < n; ++rpos) {
    cum += s.density.mass[idx[rpos]];
    if (cum >= target - 1e-15) {
      shift = r[idx[rpos]];
      // Exactly achievable target: the dual is flat between this breakpoint
      // and the next, so sit in the middle of the flat piece.
      if (std::abs(cum - target) <= 1e-15 && rpos + 1 < n &&
          std::isfinite(r[idx[rpos + 1]]))
        shift = 0.5 * (r[idx[rpos]] + r[idx[rpos + 1]]);
      break;
    }
  }
  if (!std::isfinite(shift)) return;
  for (int j : group) w[j] += shift;
}

}  // namespace detail

// Concave-dual coordinate ascent for semi-discrete transport to the service
// atoms: raise w_i while site i holds more than its target mass, lower it
// while it holds less. Coordinate moves are exact breakpoint steps; stalls
// are broken by reshuffled orders and pairwise joint moves. Sites with zero
// target are excluded and given a dominating sentinel weight.
inline DualAscentResult dual_ascent(const Scenario& s, const MassVector& target,
                                    double tol = 1e-8, int max_iter = 10000,
                                    const std::vector<double>* warm_start = nullptr) {
  std::size_t n = s.grid.size(), k = s.k();
  if (target.size() != k) throw std::invalid_argument("dual_ascent: target size");
  std::vector<int> active;
  for (std::size_t j = 0; j < k; ++j)
    if (target.c[j] > 0.0) active.push_back(static_cast<int>(j));
  if (active.empty()) throw std::invalid_argument("dual_ascent: empty target");

  std::vector<double> w(k, 0.0);
  if (warm_start && warm_start->size() == k) w = *warm_start;

  DualAscentResult res;
  if (active.size() == 1) {
    res.sweeps = 0;
  } else {
    double d_old = detail::dual_objective(s, w, active, target.c);
    std::mt19937 rng(0x5eedu);
    std::vector<int> order = active;
    int stalls = 0;
    for (int sweep = 0; sweep < max_iter; ++sweep) {
      for (int j : order) detail::exact_group_move(s, w, active, target.c, {j});
      double d_new = detail::dual_objective(s, w, active, target.c);
      res.sweeps = sweep + 1;
      if (d_new - d_old <= 1e-15 * (1.0 + std::abs(d_new))) {
        ++stalls;
        if (stalls == 1 || stalls == 2) {
          std::shuffle(order.begin(), order.end(), rng);
        } else if (stalls == 3 && active.size() > 2) {
          for (std::size_t a = 0; a < active.size(); ++a)
            for (std::size_t b = a + 1; b < active.size(); ++b)
              detail::exact_group_move(s, w, active, target.c, {active[a], active[b]});
        } else {
          break;
        }
      } else {
        stalls = 0;
      }
      d_old = std::max(d_old, d_new);
    }
  }

  // Tie-split mass bookkeeping: strictly assigned mass per site; tied cells
  // may be divided inside their argmin sets, so route their mass toward the
  // target with augmenting paths over the tie graph. The leftover imbalance
  // is the mass residual (zero exactly when the target is a subgradient).
  double cost_scale = 0.0;
  for (std::size_t x = 0; x < n; ++x)
    for (int j : active) cost_scale = std::max(cost_scale, std::abs(s.dist_p(x, j)));
  double tie_eps = 1e-9 * (1.0 + cost_scale);

  std::vector<double> split(k, 0.0);
  struct Tied {
    std::size_t cell;
    std::vector<int> sites;
    std::vector<double> alloc;
  };
  std::vector<Tied> tied;
  for (std::size_t x = 0; x < n; ++x) {
    double best = std::numeric_limits<double>::infinity();
    for (int j : active) best = std::min(best, s.dist_p(x, j) + w[j]);
    std::vector<int> mins;
    for (int j : active)
      if (s.dist_p(x, j) + w[j] <= best + tie_eps) mins.push_back(j);
    if (mins.size() == 1) {
      split[mins[0]] += s.density.mass[x];
    } else {
      Tied t{x, std::move(mins), {}};
      t.alloc.assign(t.sites.size(), 0.0);
      t.alloc[0] = s.density.mass[x];
      split[t.sites[0]] += s.density.mass[x];
      tied.push_back(std::move(t));
    }
  }
  for (int round = 0; round < 64 * static_cast<int>(k) + 64; ++round) {
    int over = -1;
    for (int j : active)
      if (split[j] > target.c[j] + 1e-15 && (over < 0 || split[j] - target.c[j] >
                                                 split[over] - target.c[over]))
        over = j;
    if (over < 0) break;
    // BFS over sites; an edge u -> v is a tied cell holding mass at u that
    // also accepts v.
    std::vector<int> prev_site(k, -1), via_cell(k, -1), via_from(k, -1), via_to(k, -1);
    std::vector<char> seen(k, 0);
    std::vector<int> frontier = {over};
    seen[static_cast<std::size_t>(over)] = 1;
    int reached = -1;
    while (!frontier.empty() && reached < 0) {
      std::vector<int> next;
      for (int u : frontier) {
        for (std::size_t ti = 0; ti < tied.size() && reached < 0; ++ti) {
          const Tied& t = tied[ti];
          for (std::size_t a = 0; a < t.sites.size(); ++a) {
            if (t.sites[a] != u || t.alloc[a] <= 1e-18) continue;
            for (std::size_t b = 0; b < t.sites.size(); ++b) {
              int v = t.sites[b];
              if (seen[static_cast<std::size_t>(v)]) continue;
              seen[static_cast<std::size_t>(v)] = 1;
              prev_site[static_cast<std::size_t>(v)] = u;
              via_cell[static_cast<std::size_t>(v)] = static_cast<int>(ti);
              via_from[static_cast<std::size_t>(v)] = static_cast<int>(a);
              via_to[static_cast<std::size_t>(v)] = static_cast<int>(b);
              next.push_back(v);
              if (split[v] < target.c[v] - 1e-15) {
                reached = v;
                break;
              }
            }
          }
        }
      }
      frontier = std::move(next);
    }
    if (reached < 0) break;
    // Path capacity, then shift mass along it.
    double amount = std::min(split[over] - target.c[over], target.c[reached] - split[reached]);
    for (int v = reached; v != over; v = prev_site[static_cast<std::size_t>(v)])
      amount = std::min(amount, tied[via_cell[v]].alloc[via_from[v]]);
    for (int v = reached; v != over; v = prev_site[static_cast<std::size_t>(v)]) {
      Tied& t = tied[via_cell[v]];
      t.alloc[via_from[v]] -= amount;
      t.alloc[via_to[v]] += amount;
    }
    split[over] -= amount;
    split[reached] += amount;
  }
  res.residual = 0.0;
  for (std::size_t j = 0; j < k; ++j)
    res.residual = std::max(res.residual, std::abs(split[j] - target.c[j]));
  res.converged = res.residual <= tol;
  res.dual_value = detail::dual_objective(s, w, active, target.c);

  // Sentinels for excluded sites, then fix the gauge at the last active site.
  double max_u = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    double u = std::numeric_limits<double>::infinity();
    for (int j : active) u = std::min(u, s.dist_p(x, j) + w[j]);
    max_u = std::max(max_u, u);
  }
  for (std::size_t j = 0; j < k; ++j)
    if (target.c[j] <= 0.0) w[j] = max_u + 1.0;
  res.weights.w = std::move(w);
  res.weights.canonicalize(static_cast<std::size_t>(active.back()));

  Partition det = weighted_partition(s, res.weights);
  res.det_masses = det.masses;
  return res;
}

struct WassersteinResult {
  double value = 0.0;               // W_p^p from the density to the weighted atoms
  std::vector<double> subgrad;      // v_i = -w_i, defined up to a common constant
  Weights weights;
  double mass_residual = 0.0;
  bool converged = false;
};

// F(c) = W_p^p(mu, sum c_i delta_{x_i}) with a subgradient from the dual.
inline WassersteinResult wasserstein(const Scenario& s, const MassVector& c,
                                     double tol = 1e-8, int max_iter = 10000,
                                     const std::vector<double>* warm_start = nullptr) {
  DualAscentResult da = dual_ascent(s, c, tol, max_iter, warm_start);
  WassersteinResult r;
  r.value = da.dual_value;
  r.weights = da.weights;
  r.subgrad.resize(s.k());
  for (std::size_t j = 0; j < s.k(); ++j) r.subgrad[j] = -da.weights.w[j];
  r.mass_residual = da.residual;
  r.converged = da.converged;
  return r;
}

// Largest violation of the dual constraint u(x) + v_j <= |x - x_j|^p over
// cells and sites, with u(x) = min_j (|x-x_j|^p + w_j) and v_j = -w_j.
inline double dual_feasibility_gap(const Scenario& s, const Weights& weights) {
  double gap = -std::numeric_limits<double>::infinity();
  for (std::size_t x = 0; x < s.grid.size(); ++x) {
    double u = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < s.k(); ++j) u = std::min(u, s.dist_p(x, j) + weights.w[j]);
    for (std::size_t j = 0; j < s.k(); ++j)
      gap = std::max(gap, u - weights.w[j] - s.dist_p(x, j));
  }
  return gap;
}

}  // namespace cityq
