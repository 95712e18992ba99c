#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cityq/equilibrium.hpp"
#include "cityq/scenario.hpp"

namespace cityq {

// Fraction of each cell choosing site 2 on a given day (0 = all to x1).
struct ChoiceField {
  std::vector<double> psi;

  bool deterministic(double eps = 0.0) const {
    for (double v : psi)
      if (std::min(v, 1.0 - v) > eps) return false;
    return true;
  }
};

struct DayRecord {
  int day = 0;
  double t = 0.0;      // announced threshold (NaN while undefined)
  double m = 0.0;      // mass choosing site 1
  double queue1 = 0.0;
  double queue2 = 0.0;
  double s1 = 0.0;     // mass at x1 that belongs to x2 at equilibrium
  double s2 = 0.0;     // mass at x2 that belongs to x1 at equilibrium
};

struct Verdict {
  enum class Kind { Converged, CycleDetected, MaxDaysReached };
  Kind kind = Kind::MaxDaysReached;
  double t_limit = 0.0;          // Converged
  int period = 0;                // CycleDetected
  std::vector<double> values;    // one cycle of t values, day order
};

struct Trajectory {
  std::vector<DayRecord> days;
  Verdict verdict;
  ChoiceField final_psi;
  double conv_tol = 0.0;
  std::string guarantee_note;  // set when no convergence guarantee applies
};

struct RhoSchedule {
  enum class Kind { Fixed, Increasing };
  Kind kind = Kind::Fixed;
  double rho = 0.0;
  std::function<double(int)> rule;  // day -> rho_j for Increasing

  static RhoSchedule fixed(double rho) {
    if (!(rho >= 0.0 && rho <= 1.0))
      throw std::invalid_argument("prudence: rho must be in [0,1]");
    RhoSchedule s;
    s.rho = rho;
    return s;
  }
  // Default increasing schedule rho_j = 1 - 1/j.
  static RhoSchedule increasing(std::function<double(int)> rule = nullptr) {
    RhoSchedule s;
    s.kind = Kind::Increasing;
    s.rule = rule ? std::move(rule)
                  : [](int j) { return 1.0 - 1.0 / static_cast<double>(std::max(j, 1)); };
    return s;
  }
  double value(int day) const {
    double r = kind == Kind::Fixed ? rho : rule(day);
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("prudence: scheduled rho outside [0,1]");
    return r;
  }
};

struct MemoryScheme {
  enum class Kind { Window, Global, Weighted };
  Kind kind = Kind::Window;
  int kappa = 1;
  std::function<double(int, int)> coeff;  // C(n, m), m in 1..n

  static MemoryScheme window(int kappa) {
    if (kappa < 1) throw std::invalid_argument("memory: window needs kappa >= 1");
    MemoryScheme s;
    s.kappa = kappa;
    return s;
  }
  static MemoryScheme global() {
    MemoryScheme s;
    s.kind = Kind::Global;
    return s;
  }
  static MemoryScheme weighted(std::function<double(int, int)> c) {
    MemoryScheme s;
    s.kind = Kind::Weighted;
    s.coeff = std::move(c);
    s.validate_coefficients();
    return s;
  }
  // Geometric decay toward older days; beta = 1 degenerates to global memory.
  static MemoryScheme weighted_geometric(double beta) {
    if (!(beta > 0.0 && beta <= 1.0))
      throw std::invalid_argument("memory: geometric beta must be in (0,1]");
    return weighted([beta](int n, int m) {
      if (beta == 1.0) return 1.0 / static_cast<double>(n);
      double norm = (1.0 - std::pow(beta, n)) / (1.0 - beta);
      return std::pow(beta, n - m) / norm;
    });
  }

  // Coefficients must be a convex combination that never weighs an older day
  // more than a newer one.
  void validate_coefficients(int up_to = 8) const {
    if (kind != Kind::Weighted) return;
    for (int n = 1; n <= up_to; ++n) {
      double sum = 0.0, prev = -1.0;
      for (int m = 1; m <= n; ++m) {
        double c = coeff(n, m);
        if (c < -1e-12 || c > 1.0 + 1e-12)
          throw std::invalid_argument("memory: coefficient outside [0,1]");
        if (c + 1e-12 < prev)
          throw std::invalid_argument("memory: coefficients must not decrease with recency");
        prev = c;
        sum += c;
      }
      if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("memory: coefficients must sum to 1");
    }
  }
};

// One day of the standard best-response evolution: t_{j+1} = G(t_j).
inline double standard_step(const Scenario& s, double t) { return best_response(s, t); }

// Sampled slope bound of G: a lower bound on Lip(G), and an upper bound only
// up to the sampling resolution.
inline double lipschitz_estimate(const Scenario& s, double lo, double hi, int samples) {
  if (!(hi > lo)) throw std::invalid_argument("lipschitz_estimate: degenerate interval");
  if (samples < 2) throw std::invalid_argument("lipschitz_estimate: need >= 2 samples");
  TauProfile profile(s);
  const QueueFunction& h1 = s.services[0].queue;
  const QueueFunction& h2 = s.services[1].queue;
  double step = (hi - lo) / (samples - 1);
  double prev = best_response(profile, h1, h2, lo);
  double lip = 0.0;
  for (int i = 1; i < samples; ++i) {
    double t = lo + i * step;
    double g = best_response(profile, h1, h2, t);
    lip = std::max(lip, std::abs(g - prev) / step);
    prev = g;
  }
  return lip;
}

struct PrudenceBound {
  double queue_lipschitz = 0.0;  // K = Lip(h1) + Lip(h2)
  double mass_lipschitz = 0.0;   // L = Lip of the mass profile
  double rho_bar = 1.0;          // sufficient (not necessary) prudence level
  bool finite = false;
};

// rho_bar = 1 - 1/(K L + 1); prudence above it contracts the misplaced mass.
inline PrudenceBound prudence_bound(const Scenario& s) {
  if (s.k() != 2) throw std::invalid_argument("prudence_bound: k must be 2");
  PrudenceBound b;
  b.queue_lipschitz = s.services[0].queue.slope_bound() + s.services[1].queue.slope_bound();
  TauProfile profile(s);
  b.mass_lipschitz = profile.mass_profile_lipschitz();
  if (std::isfinite(b.queue_lipschitz) && std::isfinite(b.mass_lipschitz)) {
    b.rho_bar = 1.0 - 1.0 / (b.queue_lipschitz * b.mass_lipschitz + 1.0);
    b.finite = true;
  }
  return b;
}

namespace detail {

struct DynContext {
  TauProfile profile;
  std::vector<double> tau;  // per cell, unsorted
  const QueueFunction& h1;
  const QueueFunction& h2;
  std::optional<double> t_bar;
  double m_bar_atom = 0.0;  // atom mass with ties on the site-1 side
  std::string note;

  explicit DynContext(const Scenario& s)
      : profile(s), tau(tau_field(s)), h1(s.services[0].queue), h2(s.services[1].queue) {
    if (s.k() != 2) throw std::invalid_argument("dynamics: k must be 2");
    if (h1.non_decreasing() && h2.non_decreasing()) {
      EquilibriumResult eq = solve_equilibrium_k2(s, 1e-10);
      t_bar = eq.t_bar;
      m_bar_atom = profile.atom_mass_leq(*eq.t_bar);
    } else {
      note = "queues are not non-decreasing: no convergence guarantee applies";
    }
    if (!std::isfinite(s.services[0].queue.slope_bound()) ||
        !std::isfinite(s.services[1].queue.slope_bound())) {
      if (!note.empty()) note += "; ";
      note += "queue slope unbounded: no prudence guarantee applies";
    }
  }

  double g(double t) const { return best_response(profile, h1, h2, t); }
  double gap(double t) const { return t - g(t); }

  // Misplaced-mass diagnostics for a deterministic threshold field at t.
  void threshold_s(double t, double& s1, double& s2) const {
    if (!t_bar) {
      s1 = s2 = std::numeric_limits<double>::quiet_NaN();
      return;
    }
    s1 = std::max(0.0, profile.atom_mass(t) - profile.atom_mass_leq(*t_bar));
    s2 = std::max(0.0, profile.atom_mass(*t_bar) - profile.atom_mass(t));
  }

  void field_s(const Scenario& s, const ChoiceField& psi, double& s1, double& s2) const {
    if (!t_bar) {
      s1 = s2 = std::numeric_limits<double>::quiet_NaN();
      return;
    }
    s1 = s2 = 0.0;
    for (std::size_t i = 0; i < tau.size(); ++i) {
      if (tau[i] > *t_bar) s1 += (1.0 - psi.psi[i]) * s.density.mass[i];
      if (tau[i] < *t_bar) s2 += psi.psi[i] * s.density.mass[i];
    }
  }
};

inline ChoiceField threshold_field(const std::vector<double>& tau, double t) {
  ChoiceField f;
  f.psi.resize(tau.size());
  for (std::size_t i = 0; i < tau.size(); ++i) f.psi[i] = tau[i] < t ? 0.0 : 1.0;
  return f;
}

// Shortest period P in [2, 64] such that the last (P + state_len) values
// repeat with period P and the cycle is genuinely spread out.
inline int detect_cycle(const std::vector<double>& hist, double tol, int state_len) {
  int n = static_cast<int>(hist.size());
  for (int period = 2; period <= 64; ++period) {
    int need = period + std::max(state_len, period);
    if (n < need + period) continue;
    bool match = true;
    for (int i = 0; i < need && match; ++i)
      match = std::abs(hist[n - 1 - i] - hist[n - 1 - i - period]) <= tol;
    if (!match) continue;
    double lo = hist[n - 1], hi = hist[n - 1];
    for (int i = 0; i < period; ++i) {
      lo = std::min(lo, hist[n - 1 - i]);
      hi = std::max(hi, hist[n - 1 - i]);
    }
    if (hi - lo > 10.0 * tol) return period;
  }
  return 0;
}

inline std::vector<double> last_cycle(const std::vector<double>& hist, int period) {
  return std::vector<double>(hist.end() - period, hist.end());
}

}  // namespace detail

// Standard evolution from a threshold t0 (the nearest-site start is t0 = 0).
inline Trajectory run_standard(const Scenario& s, double t0 = 0.0, int max_days = 10000,
                               double conv_tol = 1e-8) {
  detail::DynContext ctx(s);
  Trajectory traj;
  traj.conv_tol = conv_tol;
  traj.guarantee_note = ctx.note;

  std::vector<double> hist;
  double t = t0;
  int calm = 0;
  for (int day = 0; day <= max_days; ++day) {
    DayRecord rec;
    rec.day = day;
    rec.t = t;
    rec.m = ctx.profile.smooth_mass(t);
    rec.queue1 = ctx.h1.value(std::clamp(rec.m, 0.0, 1.0));
    rec.queue2 = ctx.h2.value(std::clamp(1.0 - rec.m, 0.0, 1.0));
    ctx.threshold_s(t, rec.s1, rec.s2);
    traj.days.push_back(rec);
    hist.push_back(t);

    if (day > 0) {
      calm = std::abs(hist[day] - hist[day - 1]) < conv_tol ? calm + 1 : 0;
      if (calm >= 3 && std::abs(ctx.gap(t)) < 10.0 * conv_tol) {
        traj.verdict = {Verdict::Kind::Converged, t, 0, {}};
        break;
      }
      if (int period = detail::detect_cycle(hist, conv_tol, 1); period > 0) {
        traj.verdict = {Verdict::Kind::CycleDetected, 0.0, period,
                        detail::last_cycle(hist, period)};
        break;
      }
    }
    if (day == max_days) {
      traj.verdict = {Verdict::Kind::MaxDaysReached, 0.0, 0, {}};
      break;
    }
    t = ctx.g(t);
  }
  traj.final_psi = detail::threshold_field(ctx.tau, t);
  return traj;
}

// Standard evolution from an arbitrary day-0 field.
inline Trajectory run_standard(const Scenario& s, const ChoiceField& psi0,
                               int max_days = 10000, double conv_tol = 1e-8) {
  if (psi0.psi.size() != s.grid.size())
    throw std::invalid_argument("run_standard: field size");
  detail::DynContext ctx(s);
  double m0 = 0.0;
  for (std::size_t i = 0; i < psi0.psi.size(); ++i)
    m0 += (1.0 - psi0.psi[i]) * s.density.mass[i];
  double t1 = ctx.h2.value(std::clamp(1.0 - m0, 0.0, 1.0)) -
              ctx.h1.value(std::clamp(m0, 0.0, 1.0));

  Trajectory tail = run_standard(s, t1, max_days > 0 ? max_days - 1 : 0, conv_tol);
  Trajectory traj;
  traj.conv_tol = conv_tol;
  traj.guarantee_note = tail.guarantee_note;
  DayRecord rec;
  rec.day = 0;
  rec.t = std::numeric_limits<double>::quiet_NaN();
  rec.m = m0;
  rec.queue1 = ctx.h1.value(std::clamp(m0, 0.0, 1.0));
  rec.queue2 = ctx.h2.value(std::clamp(1.0 - m0, 0.0, 1.0));
  ctx.field_s(s, psi0, rec.s1, rec.s2);
  traj.days.push_back(rec);
  for (DayRecord r : tail.days) {
    ++r.day;
    traj.days.push_back(r);
  }
  traj.verdict = tail.verdict;
  traj.final_psi = tail.final_psi;
  return traj;
}

// One prudence update: the announced threshold pulls each cell's mixed
// choice only a (1 - rho) fraction of the way.
inline ChoiceField prudence_step(const Scenario& s, const ChoiceField& psi, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("prudence: rho outside [0,1]");
  if (psi.psi.size() != s.grid.size()) throw std::invalid_argument("prudence: field size");
  std::vector<double> tau = tau_field(s);
  double m = 0.0;
  for (std::size_t i = 0; i < psi.psi.size(); ++i)
    m += (1.0 - psi.psi[i]) * s.density.mass[i];
  double t_next = s.services[1].queue.value(std::clamp(1.0 - m, 0.0, 1.0)) -
                  s.services[0].queue.value(std::clamp(m, 0.0, 1.0));
  ChoiceField out;
  out.psi.resize(psi.psi.size());
  for (std::size_t i = 0; i < psi.psi.size(); ++i)
    out.psi[i] = tau[i] < t_next ? rho * psi.psi[i] : 1.0 - rho * (1.0 - psi.psi[i]);
  return out;
}

inline Trajectory run_prudence(const Scenario& s, const ChoiceField& psi0,
                               const RhoSchedule& schedule, int max_days = 10000,
                               double conv_tol = 1e-8) {
  if (psi0.psi.size() != s.grid.size())
    throw std::invalid_argument("run_prudence: field size");
  detail::DynContext ctx(s);
  Trajectory traj;
  traj.conv_tol = conv_tol;
  traj.guarantee_note = ctx.note;

  ChoiceField psi = psi0;
  std::vector<double> m_hist;
  std::deque<ChoiceField> field_hist;
  auto field_mass = [&](const ChoiceField& f) {
    double m = 0.0;
    for (std::size_t i = 0; i < f.psi.size(); ++i)
      m += (1.0 - f.psi[i]) * s.density.mass[i];
    return m;
  };

  double m = field_mass(psi);
  double t = std::numeric_limits<double>::quiet_NaN();
  for (int day = 0; day <= max_days; ++day) {
    DayRecord rec;
    rec.day = day;
    rec.t = t;
    rec.m = m;
    rec.queue1 = ctx.h1.value(std::clamp(m, 0.0, 1.0));
    rec.queue2 = ctx.h2.value(std::clamp(1.0 - m, 0.0, 1.0));
    ctx.field_s(s, psi, rec.s1, rec.s2);
    traj.days.push_back(rec);
    m_hist.push_back(m);
    field_hist.push_back(psi);
    if (field_hist.size() > 130) field_hist.pop_front();

    if (ctx.t_bar && rec.s1 < conv_tol && rec.s2 < conv_tol &&
        std::abs(m - ctx.m_bar_atom) < conv_tol) {
      traj.verdict = {Verdict::Kind::Converged,
                      ctx.h2.value(std::clamp(1.0 - m, 0.0, 1.0)) -
                          ctx.h1.value(std::clamp(m, 0.0, 1.0)),
                      0,
                      {}};
      break;
    }
    if (int period = detail::detect_cycle(m_hist, conv_tol, 1); period > 0) {
      // candidate from the scalar masses; confirm on the stored fields
      bool confirmed = static_cast<int>(field_hist.size()) >= 2 * period;
      for (int i = 0; confirmed && i < period; ++i) {
        const auto& now = field_hist[field_hist.size() - 1 - i].psi;
        const auto& then = field_hist[field_hist.size() - 1 - i - period].psi;
        for (std::size_t c = 0; c < now.size() && confirmed; ++c)
          confirmed = std::abs(now[c] - then[c]) <= conv_tol;
      }
      if (confirmed) {
        std::vector<double> cycle_t;
        for (int i = period; i >= 1; --i)
          cycle_t.push_back(traj.days[traj.days.size() - i].t);
        traj.verdict = {Verdict::Kind::CycleDetected, 0.0, period, cycle_t};
        break;
      }
    }
    if (day == max_days) {
      traj.verdict = {Verdict::Kind::MaxDaysReached, 0.0, 0, {}};
      break;
    }

    double rho = schedule.value(day + 1);
    t = ctx.h2.value(std::clamp(1.0 - m, 0.0, 1.0)) -
        ctx.h1.value(std::clamp(m, 0.0, 1.0));
    ChoiceField next;
    next.psi.resize(psi.psi.size());
    for (std::size_t i = 0; i < psi.psi.size(); ++i)
      next.psi[i] = ctx.tau[i] < t ? rho * psi.psi[i] : 1.0 - rho * (1.0 - psi.psi[i]);
    psi = std::move(next);
    m = field_mass(psi);
  }
  traj.final_psi = psi;
  return traj;
}

// Threshold announced for day n+1 from the history of past thresholds.
inline double memory_step(const Scenario& s, const std::vector<double>& history,
                          const MemoryScheme& scheme) {
  if (s.k() != 2) throw std::invalid_argument("memory_step: k must be 2");
  TauProfile profile(s);
  const QueueFunction& h1 = s.services[0].queue;
  const QueueFunction& h2 = s.services[1].queue;
  int n = static_cast<int>(history.size());
  switch (scheme.kind) {
    case MemoryScheme::Kind::Window: {
      if (n < scheme.kappa)
        throw std::invalid_argument("memory_step: history shorter than the window");
      double sum = 0.0;
      for (int i = n - scheme.kappa; i < n; ++i)
        sum += best_response(profile, h1, h2, history[i]);
      return sum / scheme.kappa;
    }
    case MemoryScheme::Kind::Global: {
      if (n < 1) throw std::invalid_argument("memory_step: empty history");
      double sum = 0.0;
      for (double t : history) sum += best_response(profile, h1, h2, t);
      return sum / n;
    }
    case MemoryScheme::Kind::Weighted: {
      if (n < 1) throw std::invalid_argument("memory_step: empty history");
      double sum = 0.0, csum = 0.0, prev = -1.0;
      for (int m = 1; m <= n; ++m) {
        double c = scheme.coeff(n, m);
        if (c < -1e-12 || c + 1e-12 < prev)
          throw std::invalid_argument("memory: invalid coefficient sequence");
        prev = c;
        csum += c;
        sum += c * best_response(profile, h1, h2, history[m - 1]);
      }
      if (std::abs(csum - 1.0) > 1e-9)
        throw std::invalid_argument("memory: coefficients must sum to 1");
      return sum;
    }
  }
  return 0.0;
}

inline Trajectory run_memory(const Scenario& s, const MemoryScheme& scheme,
                             const std::vector<double>& seeds, int max_days = 10000,
                             double conv_tol = 1e-8) {
  std::size_t need = scheme.kind == MemoryScheme::Kind::Window
                         ? static_cast<std::size_t>(scheme.kappa)
                         : 1;
  if (seeds.size() < need) throw std::invalid_argument("run_memory: not enough seeds");
  detail::DynContext ctx(s);
  Trajectory traj;
  traj.conv_tol = conv_tol;
  traj.guarantee_note = ctx.note;

  std::vector<double> hist = seeds;
  std::vector<double> gvals;
  for (double t : hist) gvals.push_back(ctx.g(t));

  auto record = [&](int day, double t) {
    DayRecord rec;
    rec.day = day;
    rec.t = t;
    rec.m = ctx.profile.smooth_mass(t);
    rec.queue1 = ctx.h1.value(std::clamp(rec.m, 0.0, 1.0));
    rec.queue2 = ctx.h2.value(std::clamp(1.0 - rec.m, 0.0, 1.0));
    ctx.threshold_s(t, rec.s1, rec.s2);
    traj.days.push_back(rec);
  };
  for (std::size_t i = 0; i < hist.size(); ++i) record(static_cast<int>(i), hist[i]);

  int state_len = scheme.kind == MemoryScheme::Kind::Window ? scheme.kappa : 1;
  int calm = 0;
  bool decided = false;
  double gsum_all = 0.0;
  for (double g : gvals) gsum_all += g;
  for (int day = static_cast<int>(hist.size()); day <= max_days && !decided; ++day) {
    double t_next = 0.0;
    int n = static_cast<int>(hist.size());
    switch (scheme.kind) {
      case MemoryScheme::Kind::Window: {
        double sum = 0.0;
        for (int i = n - scheme.kappa; i < n; ++i) sum += gvals[i];
        t_next = sum / scheme.kappa;
        break;
      }
      case MemoryScheme::Kind::Global:
        t_next = gsum_all / n;
        break;
      case MemoryScheme::Kind::Weighted: {
        double sum = 0.0;
        for (int m = 1; m <= n; ++m) sum += scheme.coeff(n, m) * gvals[m - 1];
        t_next = sum;
        break;
      }
    }
    hist.push_back(t_next);
    gvals.push_back(ctx.g(t_next));
    gsum_all += gvals.back();
    record(day, t_next);

    calm = std::abs(hist[hist.size() - 1] - hist[hist.size() - 2]) < conv_tol ? calm + 1 : 0;
    if (calm >= 3 && std::abs(ctx.gap(t_next)) < 10.0 * conv_tol) {
      traj.verdict = {Verdict::Kind::Converged, t_next, 0, {}};
      decided = true;
    } else if (int period = detail::detect_cycle(hist, conv_tol, state_len); period > 0) {
      traj.verdict = {Verdict::Kind::CycleDetected, 0.0, period,
                      detail::last_cycle(hist, period)};
      decided = true;
    } else if (day == max_days) {
      traj.verdict = {Verdict::Kind::MaxDaysReached, 0.0, 0, {}};
      decided = true;
    }
  }
  traj.final_psi = detail::threshold_field(ctx.tau, hist.back());
  return traj;
}

// One row per day: day, t, m, queue1, queue2, S1, S2.
inline std::vector<std::array<double, 7>> trajectory_export(const Trajectory& traj) {
  std::vector<std::array<double, 7>> rows;
  rows.reserve(traj.days.size());
  for (const DayRecord& r : traj.days)
    rows.push_back({static_cast<double>(r.day), r.t, r.m, r.queue1, r.queue2, r.s1, r.s2});
  return rows;
}

}  // namespace cityq
