#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <vector>

#include "cityq/transport.hpp"

namespace cityq {

// Exact finite transportation LP between the grid cells (supplies) and the
// service sites (demands), solved by the transportation-table network
// simplex: northwest-corner start, dual (MODI) pricing, cycle pivots.
// Dantzig pricing with a Bland fallback against degenerate cycling.
// Cross-validates dual_ascent/wasserstein on small instances.
class TransportationSimplex {
 public:
  TransportationSimplex(std::vector<double> supply, std::vector<double> demand,
                        std::vector<double> cost)
      : n_(supply.size()), k_(demand.size()), supply_(std::move(supply)),
        demand_(std::move(demand)), cost_(std::move(cost)) {
    if (cost_.size() != n_ * k_) throw std::invalid_argument("lp: cost table size");
    double sum_s = std::accumulate(supply_.begin(), supply_.end(), 0.0);
    double sum_d = std::accumulate(demand_.begin(), demand_.end(), 0.0);
    demand_.back() += sum_s - sum_d;  // absorb rounding so the LP is balanced
    double cmax = 0.0;
    for (double c : cost_) cmax = std::max(cmax, std::abs(c));
    eps_ = 1e-12 * (1.0 + cmax);
  }

  double solve() {
    initial_basis();
    std::size_t cap_dantzig = 100 * (n_ + k_);
    std::size_t cap_bland = 200 * (n_ + k_);
    for (std::size_t it = 0; it < cap_dantzig + cap_bland; ++it) {
      compute_duals();
      auto [ci, cj] = find_entering(it >= cap_dantzig);
      if (ci == npos) break;
      pivot(ci, cj);
      if (it + 1 == cap_dantzig + cap_bland)
        throw std::runtime_error("lp oracle: pivot limit exceeded");
    }
    double value = 0.0;
    for (const Arc& a : basis_) value += a.flow * cost_[a.cell * k_ + a.site];
    return value;
  }

 private:
  struct Arc {
    std::size_t cell, site;
    double flow;
  };
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  double cost_at(std::size_t i, std::size_t j) const { return cost_[i * k_ + j]; }

  void initial_basis() {
    basis_.clear();
    basis_.reserve(n_ + k_ - 1);
    std::vector<double> rs = supply_, rd = demand_;
    std::size_t i = 0, j = 0;
    while (true) {
      double f = std::min(rs[i], rd[j]);
      f = std::max(f, 0.0);
      basis_.push_back({i, j, f});
      rs[i] -= f;
      rd[j] -= f;
      if (i == n_ - 1 && j == k_ - 1) break;
      if (j == k_ - 1) ++i;
      else if (i == n_ - 1) ++j;
      else if (rs[i] <= 0.0) ++i;
      else ++j;
    }
    rebuild_adjacency();
  }

  void rebuild_adjacency() {
    adj_.assign(n_ + k_, {});
    for (std::size_t a = 0; a < basis_.size(); ++a) {
      adj_[basis_[a].cell].push_back(a);
      adj_[n_ + basis_[a].site].push_back(a);
    }
  }

  void compute_duals() {
    u_.assign(n_, 0.0);
    v_.assign(k_, 0.0);
    std::vector<char> seen(n_ + k_, 0);
    std::queue<std::size_t> open;
    open.push(n_);  // root at site 0, v_0 = 0
    seen[n_] = 1;
    while (!open.empty()) {
      std::size_t node = open.front();
      open.pop();
      for (std::size_t a : adj_[node]) {
        std::size_t cell = basis_[a].cell, site_node = n_ + basis_[a].site;
        std::size_t other = (node == cell) ? site_node : cell;
        if (seen[other]) continue;
        if (other == cell)
          u_[cell] = cost_at(cell, basis_[a].site) - v_[basis_[a].site];
        else
          v_[basis_[a].site] = cost_at(cell, basis_[a].site) - u_[cell];
        seen[other] = 1;
        open.push(other);
      }
    }
  }

  std::pair<std::size_t, std::size_t> find_entering(bool bland) const {
    std::size_t bi = npos, bj = npos;
    double best = -eps_;
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < k_; ++j) {
        double rc = cost_at(i, j) - u_[i] - v_[j];
        if (rc < -eps_) {
          if (bland) return {i, j};
          if (rc < best) {
            best = rc;
            bi = i;
            bj = j;
          }
        }
      }
    }
    return {bi, bj};
  }

  void pivot(std::size_t ci, std::size_t cj) {
    // Tree path from cell node ci to site node n_+cj.
    std::vector<std::size_t> parent_arc(n_ + k_, npos);
    std::vector<char> seen(n_ + k_, 0);
    std::queue<std::size_t> open;
    open.push(ci);
    seen[ci] = 1;
    while (!open.empty() && !seen[n_ + cj]) {
      std::size_t node = open.front();
      open.pop();
      for (std::size_t a : adj_[node]) {
        std::size_t cell = basis_[a].cell, site_node = n_ + basis_[a].site;
        std::size_t other = (node == cell) ? site_node : cell;
        if (seen[other]) continue;
        seen[other] = 1;
        parent_arc[other] = a;
        open.push(other);
      }
    }
    if (!seen[n_ + cj]) throw std::runtime_error("lp oracle: disconnected basis");

    std::vector<std::size_t> path;  // arcs from ci to n_+cj
    std::size_t node = n_ + cj;
    while (node != ci) {
      std::size_t a = parent_arc[node];
      path.push_back(a);
      std::size_t cell = basis_[a].cell, site_node = n_ + basis_[a].site;
      node = (node == cell) ? site_node : cell;
    }
    std::reverse(path.begin(), path.end());

    // Entering arc carries +theta; path arcs alternate -,+,- starting at ci.
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leaving = npos;
    for (std::size_t pos = 0; pos < path.size(); ++pos) {
      if (pos % 2 == 0 && basis_[path[pos]].flow < theta) {
        theta = basis_[path[pos]].flow;
        leaving = path[pos];
      }
    }
    for (std::size_t pos = 0; pos < path.size(); ++pos)
      basis_[path[pos]].flow += (pos % 2 == 0) ? -theta : theta;
    basis_[leaving] = {ci, cj, theta};
    rebuild_adjacency();
  }

  std::size_t n_, k_;
  std::vector<double> supply_, demand_, cost_;
  std::vector<Arc> basis_;
  std::vector<std::vector<std::size_t>> adj_;
  std::vector<double> u_, v_;
  double eps_ = 1e-12;
};

// Exact optimum of the discrete transportation problem from the cell masses
// to target site loads. Guard-railed to small instances.
inline double lp_oracle(const Scenario& s, const MassVector& c) {
  std::size_t n = s.grid.size(), k = s.k();
  if (n > 10000 || k > 8) throw std::invalid_argument("lp_oracle: instance too large");
  if (c.size() != k) throw std::invalid_argument("lp_oracle: target size");
  std::vector<double> cost(n * k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) cost[i * k + j] = s.dist_p(i, j);
  TransportationSimplex lp(s.density.mass, c.c, std::move(cost));
  return lp.solve();
}

}  // namespace cityq
