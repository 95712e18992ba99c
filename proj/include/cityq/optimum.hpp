#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "cityq/scenario.hpp"
#include "cityq/transport.hpp"

namespace cityq {

// Total time spent by the population: travel plus queueing at the loads the
// partition itself induces.
inline double total_social_cost(const Scenario& s, const Partition& part) {
  double total = transport_cost(s, part);
  for (std::size_t j = 0; j < s.k(); ++j)
    total += part.masses[j] * s.services[j].queue.value(part.masses[j]);
  return total;
}

// First-order optimality gap: max over cells of the assigned adjusted cost
// minus the best adjusted cost, with adjusted cost |x-x_j|^p + h_j(c_j) +
// c_j h_j'(c_j). Zero means the partition satisfies the marginal-cost
// condition exactly on the grid.
inline double verify_cns(const Scenario& s, const Partition& part) {
  std::vector<double> adjust(s.k());
  for (std::size_t j = 0; j < s.k(); ++j)
    adjust[j] = s.services[j].queue.eta_prime(part.masses[j]);
  double residual = 0.0;
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    double assigned = s.dist_p(i, static_cast<std::size_t>(part.assign[i])) +
                      adjust[static_cast<std::size_t>(part.assign[i])];
    double best = assigned;
    for (std::size_t j = 0; j < s.k(); ++j)
      best = std::min(best, s.dist_p(i, j) + adjust[j]);
    residual = std::max(residual, assigned - best);
  }
  return residual;
}

struct OptimumResult {
  Partition partition;
  MassVector loads;
  std::optional<double> t_hat;  // k = 2 first-order threshold, when that route ran
  double total_cost = 0.0;
  double cns_residual = 0.0;
  bool cns_advisory = false;  // a load sits within 2 knot-widths of a kink of h
  bool converged = false;
  bool uniqueness_certified = false;
};

// The first-order residual uses left derivatives; within two knot-widths of
// a piecewise-linear kink it overstates the true subdifferential gap.
inline bool cns_near_kink(const Scenario& s, const std::vector<double>& loads) {
  for (std::size_t j = 0; j < s.k(); ++j) {
    const QueueFunction& q = s.services[j].queue;
    if (q.kind() != QueueFunction::Kind::PiecewiseLinear) continue;
    const auto& knots = q.knots();
    for (std::size_t i = 1; i + 1 < knots.size(); ++i) {
      double width = std::min(knots[i].first - knots[i - 1].first,
                              knots[i + 1].first - knots[i].first);
      if (std::abs(loads[j] - knots[i].first) <= 2.0 * width) return true;
    }
  }
  return false;
}

namespace detail {

// Per-site cost kernel for the simplex reformulation: minimize
// F(c) + sum_i eta_i(c_i). The optimum uses eta_i = t h_i(t); the
// equilibrium surrogate uses eta_i = integral of h_i.
struct EtaFamily {
  std::vector<std::function<double(double)>> eta;
  std::vector<std::function<double(double)>> eta_prime;
  bool convex = true;
};

inline EtaFamily eta_from_queues(const Scenario& s) {
  EtaFamily f;
  for (const Service& sv : s.services) {
    const QueueFunction& q = sv.queue;
    f.eta.push_back([q](double t) { return q.eta(t); });
    f.eta_prime.push_back([q](double t) { return q.eta_prime(t); });
    f.convex = f.convex && q.eta_convex();
  }
  return f;
}

inline EtaFamily eta_from_averages(const Scenario& s) {
  EtaFamily f;
  for (const Service& sv : s.services) {
    const QueueFunction& q = sv.queue;
    f.eta.push_back([q](double t) { return q.integral(t); });       // t*g(t)
    f.eta_prime.push_back([q](double t) { return q.value(t); });    // (t g)' = h
    f.convex = f.convex && q.non_decreasing();
  }
  return f;
}

inline std::vector<double> project_simplex(std::vector<double> v) {
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0.0, theta = 0.0;
  int rho = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cum += u[i];
    double t = (cum - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) {
      rho = static_cast<int>(i + 1);
      theta = t;
    }
  }
  double check = 0.0;
  (void)rho;
  for (double& x : v) {
    x = std::max(0.0, x - theta);
    check += x;
  }
  if (check > 0.0)
    for (double& x : v) x /= check;
  return v;
}

// Exhaustive threshold search for k = 2: every split of the tau-sorted cells
// is evaluated through prefix sums, so the returned index is the exact
// discrete minimizer of transport + eta costs.
inline std::size_t best_threshold(const TauProfile& profile, const EtaFamily& f) {
  std::size_t n = profile.size();
  std::size_t best_b = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b <= n; ++b) {
    double c1 = profile.cumulative_mass(b);
    double val = profile.threshold_cost(b) + f.eta[0](std::clamp(c1, 0.0, 1.0)) +
                 f.eta[1](std::clamp(1.0 - c1, 0.0, 1.0));
    if (val < best_val) {
      best_val = val;
      best_b = b;
    }
  }
  return best_b;
}

inline Partition threshold_partition(const Scenario& s, const TauProfile& profile,
                                     std::size_t b) {
  Partition part;
  part.assign.assign(s.grid.size(), 1);
  const auto& order = profile.order();
  for (std::size_t r = 0; r < b; ++r) part.assign[order[r]] = 0;
  KahanSum m0, m1;
  for (std::size_t i = 0; i < s.grid.size(); ++i)
    (part.assign[i] == 0 ? m0 : m1).add(s.density.mass[i]);
  part.masses = {m0.value(), m1.value()};
  return part;
}

struct CoreResult {
  Partition partition;
  double objective = 0.0;
  bool converged = false;
};

// Minimize F(c) + sum eta_i(c_i) over the simplex. k = 2: exact threshold
// enumeration. k >= 3: projected subgradient (subgradient of F from the
// transport dual) with a damped fixed-point polish on weights eta_i'(c_i).
inline CoreResult minimize_simplex_objective(const Scenario& s, const EtaFamily& f,
                                             double tol, int max_iter) {
  CoreResult out;
  if (s.k() == 2) {
    TauProfile profile(s);
    std::size_t b = best_threshold(profile, f);
    out.partition = threshold_partition(s, profile, b);
    double c1 = out.partition.masses[0];
    out.objective = profile.threshold_cost(b) + f.eta[0](c1) + f.eta[1](1.0 - c1);
    out.converged = true;
    return out;
  }

  std::size_t k = s.k();
  Partition voronoi = weighted_partition(s, Weights{std::vector<double>(k, 0.0)});
  std::vector<double> c = voronoi.masses;
  auto objective_at = [&](const std::vector<double>& cc, std::vector<double>* grad,
                          std::vector<double>* warm) {
    MassVector mv{cc};
    WassersteinResult w = wasserstein(s, mv, 1e-9, 400, warm);
    if (warm) *warm = w.weights.w;
    double obj = w.value;
    for (std::size_t j = 0; j < k; ++j) obj += f.eta[j](std::clamp(cc[j], 0.0, 1.0));
    if (grad) {
      grad->resize(k);
      for (std::size_t j = 0; j < k; ++j)
        (*grad)[j] = w.subgrad[j] + f.eta_prime[j](std::clamp(cc[j], 0.0, 1.0));
    }
    return obj;
  };

  std::vector<double> warm(k, 0.0), grad;
  double best_obj = objective_at(c, &grad, &warm);
  std::vector<double> best_c = c;
  double g0 = 0.0;
  for (double g : grad) g0 = std::max(g0, std::abs(g));
  double step_scale = 0.25 / (g0 + 1e-12);
  int stall = 0;
  int iters = std::min(max_iter, 2000);
  for (int it = 1; it <= iters; ++it) {
    double alpha = step_scale / std::sqrt(static_cast<double>(it));
    std::vector<double> next(k);
    for (std::size_t j = 0; j < k; ++j) next[j] = c[j] - alpha * grad[j];
    c = project_simplex(std::move(next));
    double obj = objective_at(c, &grad, &warm);
    if (obj < best_obj - tol) {
      best_obj = obj;
      best_c = c;
      stall = 0;
    } else {
      if (++stall >= 50) {
        out.converged = true;
        break;
      }
    }
  }

  // Fixed-point polish: weights from marginal costs, damped load updates.
  std::vector<double> cc = best_c;
  Partition best_part = weighted_partition(s, Weights{std::vector<double>(k, 0.0)});
  double best_total = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 200; ++it) {
    Weights w;
    w.w.resize(k);
    for (std::size_t j = 0; j < k; ++j) w.w[j] = f.eta_prime[j](std::clamp(cc[j], 0.0, 1.0));
    w.canonicalize(k - 1);
    Partition part = weighted_partition(s, w);
    double total = transport_cost(s, part);
    for (std::size_t j = 0; j < k; ++j)
      total += f.eta[j](std::clamp(part.masses[j], 0.0, 1.0));
    if (total < best_total) {
      best_total = total;
      best_part = part;
    }
    for (std::size_t j = 0; j < k; ++j) cc[j] = 0.5 * cc[j] + 0.5 * part.masses[j];
  }
  out.partition = best_part;
  out.objective = best_total;
  return out;
}

}  // namespace detail

// Global optimum of travel + queue time via the simplex reformulation.
inline OptimumResult solve_optimum(const Scenario& s, double tol = 1e-8,
                                   int max_iter = 10000) {
  detail::EtaFamily f = detail::eta_from_queues(s);
  detail::CoreResult core = detail::minimize_simplex_objective(s, f, tol, max_iter);
  OptimumResult res;
  res.partition = std::move(core.partition);
  res.loads = MassVector{res.partition.masses};
  res.total_cost = total_social_cost(s, res.partition);
  res.cns_residual = verify_cns(s, res.partition);
  res.cns_advisory = cns_near_kink(s, res.partition.masses);
  res.converged = core.converged;
  res.uniqueness_certified = f.convex;
  return res;
}

// k = 2 optimum from the first-order condition: the map
// t -> t - eta_2'(1 - m(t)) + eta_1'(m(t)) is strictly increasing for convex
// eta, so its root is found by bisection on the interpolated mass profile.
// Falls back to solve_optimum when an eta is not convex.
inline OptimumResult solve_optimum_k2(const Scenario& s, double tol = 1e-8) {
  if (s.k() != 2) throw std::invalid_argument("solve_optimum_k2: k must be 2");
  const QueueFunction& h1 = s.services[0].queue;
  const QueueFunction& h2 = s.services[1].queue;
  if (!h1.eta_convex() || !h2.eta_convex()) return solve_optimum(s, tol);

  TauProfile profile(s);
  auto cns_map = [&](double t) {
    double m = profile.smooth_mass(t);
    return t - h2.eta_prime(std::clamp(1.0 - m, 0.0, 1.0)) +
           h1.eta_prime(std::clamp(m, 0.0, 1.0));
  };
  double pad = h1.value(1.0) + h2.value(1.0) + 1.0;
  double lo = profile.min_tau() - pad, hi = profile.max_tau() + pad;
  for (int i = 0; i < 60 && cns_map(lo) > 0.0; ++i) lo -= pad * std::pow(2.0, i);
  for (int i = 0; i < 60 && cns_map(hi) < 0.0; ++i) hi += pad * std::pow(2.0, i);
  for (int i = 0; i < 200 && hi - lo > 0.0; ++i) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (cns_map(mid) < 0.0 ? lo : hi) = mid;
  }
  double t_hat = 0.5 * (lo + hi);

  OptimumResult res;
  res.partition = weighted_partition(s, Weights{{-t_hat, 0.0}});
  double m = std::clamp(profile.smooth_mass(t_hat), 0.0, 1.0);
  res.loads = MassVector{{m, 1.0 - m}};
  res.t_hat = t_hat;
  res.total_cost = transport_cost(s, res.partition) +
                   m * s.services[0].queue.value(m) +
                   (1.0 - m) * s.services[1].queue.value(1.0 - m);
  res.cns_residual = verify_cns(s, res.partition);
  res.cns_advisory = cns_near_kink(s, res.partition.masses);
  res.converged = std::abs(cns_map(t_hat)) <= std::max(tol, 1e-9 * (1.0 + std::abs(t_hat)));
  res.uniqueness_certified = true;
  return res;
}

}  // namespace cityq
