#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "cityq/optimum.hpp"
#include "cityq/scenario.hpp"
#include "cityq/transport.hpp"

namespace cityq {

// G(t) = h2(1 - m(t)) - h1(m(t)): tomorrow's indifference threshold when
// today's is t. Uses the interpolated mass profile.
inline double best_response(const TauProfile& profile, const QueueFunction& h1,
                            const QueueFunction& h2, double t) {
  double m = std::clamp(profile.smooth_mass(t), 0.0, 1.0);
  return h2.value(1.0 - m) - h1.value(m);
}

inline double best_response(const Scenario& s, double t) {
  if (s.k() != 2) throw std::invalid_argument("best_response: k must be 2");
  TauProfile profile(s);
  return best_response(profile, s.services[0].queue, s.services[1].queue, t);
}

// U(t) = t - G(t); strictly increasing for non-decreasing queues, its root
// is the equilibrium threshold.
inline double equilibrium_gap(const TauProfile& profile, const QueueFunction& h1,
                              const QueueFunction& h2, double t) {
  return t - best_response(profile, h1, h2, t);
}

inline double equilibrium_gap(const Scenario& s, double t) {
  if (s.k() != 2) throw std::invalid_argument("equilibrium_gap: k must be 2");
  TauProfile profile(s);
  return equilibrium_gap(profile, s.services[0].queue, s.services[1].queue, t);
}

// Individual cost C(x) = |x - x_assign|^p + h_assign(c_assign).
inline std::vector<double> individual_cost_field(const Scenario& s, const Partition& part) {
  std::vector<double> queue_time(s.k());
  for (std::size_t j = 0; j < s.k(); ++j)
    queue_time[j] = s.services[j].queue.value(part.masses[j]);
  std::vector<double> cost(s.grid.size());
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    std::size_t j = static_cast<std::size_t>(part.assign[i]);
    cost[i] = s.dist_p(i, j) + queue_time[j];
  }
  return cost;
}

// Max over cells of C(x) minus the best available cost; zero means the
// partition is an exact grid equilibrium.
inline double verify_ce(const Scenario& s, const Partition& part) {
  std::vector<double> queue_time(s.k());
  for (std::size_t j = 0; j < s.k(); ++j)
    queue_time[j] = s.services[j].queue.value(part.masses[j]);
  double residual = 0.0;
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    double assigned = s.dist_p(i, static_cast<std::size_t>(part.assign[i])) +
                      queue_time[static_cast<std::size_t>(part.assign[i])];
    double best = assigned;
    for (std::size_t j = 0; j < s.k(); ++j)
      best = std::min(best, s.dist_p(i, j) + queue_time[j]);
    residual = std::max(residual, assigned - best);
  }
  return residual;
}

struct DualCertificate {
  std::vector<double> u;  // per-cell individual cost
  std::vector<double> v;  // per-site -h_i(c_i)
  bool feasible = false;
  double max_violation = 0.0;  // of u(x) + v_j <= |x - x_j|^p
  double identity_gap = 0.0;   // |transport_cost - (int u dmu + sum c_i v_i)|
};

// Kantorovich pair (u, v) = (C(., partition), -h(c)): feasible for the dual
// transport problem exactly when the partition best-responds to the load
// vector, in which case the transport cost identity certifies T optimal.
// The loads default to the partition's own masses.
inline DualCertificate dual_certificate(const Scenario& s, const Partition& part,
                                        const std::vector<double>& loads) {
  DualCertificate cert;
  std::vector<double> queue_time(s.k());
  for (std::size_t j = 0; j < s.k(); ++j)
    queue_time[j] = s.services[j].queue.value(std::clamp(loads[j], 0.0, 1.0));
  cert.u.resize(s.grid.size());
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    std::size_t j = static_cast<std::size_t>(part.assign[i]);
    cert.u[i] = s.dist_p(i, j) + queue_time[j];
  }
  cert.v.resize(s.k());
  for (std::size_t j = 0; j < s.k(); ++j) cert.v[j] = -queue_time[j];
  cert.max_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.grid.size(); ++i)
    for (std::size_t j = 0; j < s.k(); ++j)
      cert.max_violation = std::max(cert.max_violation, cert.u[i] + cert.v[j] - s.dist_p(i, j));
  cert.feasible = cert.max_violation <= 1e-9;
  double pairing = 0.0;
  for (std::size_t i = 0; i < s.grid.size(); ++i) pairing += cert.u[i] * s.density.mass[i];
  for (std::size_t j = 0; j < s.k(); ++j) pairing += part.masses[j] * cert.v[j];
  cert.identity_gap = std::abs(transport_cost(s, part) - pairing);
  return cert;
}

inline DualCertificate dual_certificate(const Scenario& s, const Partition& part) {
  return dual_certificate(s, part, part.masses);
}

struct EquilibriumResult {
  Partition partition;
  MassVector loads;  // solved load vector; equals partition masses up to one cell
  std::optional<double> t_bar;      // k = 2 threshold
  std::vector<double> queue_times;  // h_i at the returned loads
  double ce_residual = 0.0;
  bool dual_feasible = false;
  bool converged = false;
};

inline DualCertificate dual_certificate(const Scenario& s, const EquilibriumResult& eq) {
  return dual_certificate(s, eq.partition, eq.loads.c);
}

namespace detail {

// Finish a k = 2 solve from the root of U: the partition is the exact tau
// threshold at t_bar and the loads are the mass profile there, so the dual
// pair of the certificate is feasible by construction.
inline EquilibriumResult finish_equilibrium_k2(const Scenario& s, const TauProfile& profile,
                                               double t_bar, bool converged) {
  EquilibriumResult res;
  res.partition = weighted_partition(s, Weights{{-t_bar, 0.0}});
  double m = std::clamp(profile.smooth_mass(t_bar), 0.0, 1.0);
  res.loads = MassVector{{m, 1.0 - m}};
  res.t_bar = t_bar;
  res.queue_times = {s.services[0].queue.value(m), s.services[1].queue.value(1.0 - m)};
  res.ce_residual = verify_ce(s, res.partition);
  res.dual_feasible = dual_certificate(s, res.partition, res.loads.c).feasible;
  res.converged = converged;
  return res;
}

inline EquilibriumResult finish_equilibrium_general(const Scenario& s, Partition part,
                                                    std::vector<double> loads,
                                                    std::optional<double> t_bar,
                                                    bool converged) {
  EquilibriumResult res;
  res.partition = std::move(part);
  res.loads = MassVector{std::move(loads)};
  res.t_bar = t_bar;
  res.queue_times.resize(s.k());
  for (std::size_t j = 0; j < s.k(); ++j)
    res.queue_times[j] = s.services[j].queue.value(std::clamp(res.loads[j], 0.0, 1.0));
  res.ce_residual = verify_ce(s, res.partition);
  res.dual_feasible = dual_certificate(s, res.partition, res.loads.c).feasible;
  res.converged = converged;
  return res;
}

// Root of the strictly increasing U(t) = t - G(t) by bisection. Outside the
// tau range U(t) = t - const, so doubling the bracket always finds a sign
// change.
inline double solve_threshold_root(const TauProfile& profile, const QueueFunction& h1,
                                   const QueueFunction& h2, double lo, double hi) {
  auto gap = [&](double t) { return equilibrium_gap(profile, h1, h2, t); };
  double pad = h1.value(1.0) + h2.value(1.0) + 1.0;
  for (int i = 0; i < 60 && gap(lo) > 0.0; ++i) lo -= pad * std::pow(2.0, i);
  for (int i = 0; i < 60 && gap(hi) < 0.0; ++i) hi += pad * std::pow(2.0, i);
  for (int i = 0; i < 200 && hi - lo > 0.0; ++i) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (gap(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

// Unique k = 2 equilibrium for continuous non-decreasing queues: bisection
// on U over the padded tau range, threshold partition at the root.
inline EquilibriumResult solve_equilibrium_k2(const Scenario& s, double tol = 1e-8) {
  if (s.k() != 2) throw std::invalid_argument("solve_equilibrium_k2: k must be 2");
  const QueueFunction& h1 = s.services[0].queue;
  const QueueFunction& h2 = s.services[1].queue;
  if (!h1.non_decreasing() || !h2.non_decreasing())
    throw std::invalid_argument(
        "solve_equilibrium_k2: queues must be non-decreasing (uniqueness hypothesis); "
        "use solve_equilibrium_general");

  TauProfile profile(s);
  double pad = h1.value(1.0) + h2.value(1.0) + 1.0;
  double t_bar = detail::solve_threshold_root(profile, h1, h2, profile.min_tau() - pad,
                                              profile.max_tau() + pad);
  bool converged = std::abs(equilibrium_gap(profile, h1, h2, t_bar)) <=
                   std::max(tol, 1e-12 * (1.0 + std::abs(t_bar)));
  return detail::finish_equilibrium_k2(s, profile, t_bar, converged);
}

// Equilibrium as the minimizer of the auxiliary problem with the averaged
// queues g_i in place of h_i (so the surrogate marginal cost is h_i itself).
inline EquilibriumResult solve_equilibrium_general(const Scenario& s, double tol = 1e-8,
                                                   int max_iter = 10000) {
  detail::EtaFamily f = detail::eta_from_averages(s);
  if (s.k() == 2) {
    const QueueFunction& h1 = s.services[0].queue;
    const QueueFunction& h2 = s.services[1].queue;
    TauProfile profile(s);
    std::size_t b = detail::best_threshold(profile, f);
    if (h1.non_decreasing() && h2.non_decreasing()) {
      // Localize the root of U around the surrogate minimizer.
      const auto& sorted = profile.sorted_tau();
      std::size_t n = profile.size();
      double span = profile.max_tau() - profile.min_tau() + 1.0;
      double lo = b >= 2 ? sorted[b - 2] : profile.min_tau() - span;
      double hi = b + 1 < n ? sorted[b + 1] : profile.max_tau() + span;
      double t_bar = detail::solve_threshold_root(profile, h1, h2, lo, hi);
      return detail::finish_equilibrium_k2(s, profile, t_bar, true);
    }
    Partition part = detail::threshold_partition(s, profile, b);
    std::vector<double> loads = part.masses;
    double t_bar = h2.value(std::clamp(1.0 - loads[0], 0.0, 1.0)) -
                   h1.value(std::clamp(loads[0], 0.0, 1.0));
    return detail::finish_equilibrium_general(s, std::move(part), std::move(loads), t_bar,
                                              true);
  }

  detail::CoreResult core = detail::minimize_simplex_objective(s, f, tol, max_iter);
  // Damped load fixed point: weights h_i(c_i) should reproduce their own
  // partition masses at an equilibrium.
  std::vector<double> c = core.partition.masses;
  std::vector<double> best_c = c;
  Partition best_part = core.partition;
  double best_res = verify_ce(s, best_part);
  for (int it = 0; it < 300 && best_res > 0.0; ++it) {
    Weights w;
    w.w.resize(s.k());
    for (std::size_t j = 0; j < s.k(); ++j)
      w.w[j] = s.services[j].queue.value(std::clamp(c[j], 0.0, 1.0));
    w.canonicalize(s.k() - 1);
    Partition part = weighted_partition(s, w);
    double r = verify_ce(s, part);
    if (r < best_res) {
      best_res = r;
      best_part = part;
      best_c = c;
    }
    for (std::size_t j = 0; j < s.k(); ++j) c[j] = 0.5 * c[j] + 0.5 * part.masses[j];
  }
  return detail::finish_equilibrium_general(s, std::move(best_part), std::move(best_c),
                                            std::nullopt, core.converged);
}

struct ParetoCheck {
  bool dominating_found = false;
  int trials = 0;
  Partition witness;  // meaningful only when dominating_found
};

// Randomized hunt for a partition that dominates the given one pointwise
// (threshold shifts for k = 2, weight perturbations otherwise). With
// strictly increasing queues none exists at an equilibrium; a find
// indicates a solver bug.
inline ParetoCheck pareto_spot_check(const Scenario& s, const Partition& part, int trials,
                                     unsigned seed = 20240u) {
  ParetoCheck check;
  check.trials = trials;
  std::vector<double> base_cost = individual_cost_field(s, part);
  std::mt19937_64 rng(seed);

  std::optional<TauProfile> profile;
  double t_base = 0.0, range = 1.0;
  std::vector<double> w_base(s.k(), 0.0);
  if (s.k() == 2) {
    profile.emplace(s);
    t_base = s.services[1].queue.value(part.masses[1]) -
             s.services[0].queue.value(part.masses[0]);
    range = 0.5 * (profile->max_tau() - profile->min_tau());
  } else {
    for (std::size_t j = 0; j < s.k(); ++j)
      w_base[j] = s.services[j].queue.value(part.masses[j]);
  }

  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int t = 0; t < trials; ++t) {
    Partition alt;
    if (s.k() == 2) {
      double shift = unit(rng) * range;
      alt = weighted_partition(s, Weights{{-(t_base + shift), 0.0}});
    } else {
      Weights w;
      w.w.resize(s.k());
      for (std::size_t j = 0; j < s.k(); ++j) w.w[j] = w_base[j] + 0.1 * unit(rng);
      alt = weighted_partition(s, w);
    }
    std::vector<double> alt_cost = individual_cost_field(s, alt);
    bool no_worse = true;
    double improved_mass = 0.0;
    for (std::size_t i = 0; i < alt_cost.size(); ++i) {
      if (alt_cost[i] > base_cost[i] + 1e-12) {
        no_worse = false;
        break;
      }
      if (alt_cost[i] < base_cost[i] - 1e-12) improved_mass += s.density.mass[i];
    }
    if (no_worse && improved_mass > 0.0) {
      check.dominating_found = true;
      check.witness = std::move(alt);
      return check;
    }
  }
  return check;
}

}  // namespace cityq
