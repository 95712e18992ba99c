#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cityq/config.hpp"

namespace cityq {

struct ExpectedValue {
  std::string key;
  double value;
  std::string note;
};

struct Preset {
  std::string name;
  ScenarioConfig config;
  std::vector<ExpectedValue> expected;
};

inline std::vector<std::string> preset_names() {
  return {"beach(eps)", "jap", "oscillator", "prudence2", "memory3cycle", "contraction"};
}

namespace presetdetail {

inline ServiceConfig service1d(double x, QueueConfig q) {
  ServiceConfig s;
  s.location = {x, 0.0};
  s.queue = std::move(q);
  return s;
}

inline QueueConfig linear(double a, double b) {
  QueueConfig q;
  q.variant = "linear";
  q.a = a;
  q.b = b;
  return q;
}

inline QueueConfig constant(double a) {
  QueueConfig q;
  q.variant = "constant";
  q.a = a;
  return q;
}

}  // namespace presetdetail

// Named instances with pinned grids and reference values. The two-shop beach,
// the step-queue city, and the three counterexample dynamics are the standard
// demonstration set; "contraction" is a mild-queue beach whose best-response
// map has slope 0.2.
inline Preset load_preset(const std::string& name) {
  using presetdetail::constant;
  using presetdetail::linear;
  using presetdetail::service1d;

  Preset p;
  p.name = name;

  if (name.rfind("beach(", 0) == 0 && name.back() == ')') {
    double eps = 0.0;
    try {
      eps = std::stod(name.substr(6, name.size() - 7));
    } catch (...) {
      throw ConfigError("preset: malformed beach(eps) name \"" + name + "\"");
    }
    if (!(eps >= 0.0)) throw ConfigError("preset: beach eps must be >= 0");
    ScenarioConfig& c = p.config;
    c.dim = 1;
    c.box_lo[0] = 0.0;
    c.box_hi[0] = 1.0;
    c.resolution = {20000, 1};
    c.services = {service1d(0.25, linear(0.0, 1.0)), service1d(0.75, linear(0.0, 1.0 + eps))};
    c.p = 2.0;
    c.run.mode = "equilibrium";
    double split_eq = 0.5 + eps / (6.0 + 2.0 * eps);
    double split_opt = 0.5 + eps / (5.0 + 2.0 * eps);
    p.expected = {
        {"split_eq", split_eq, "closed-form equilibrium split 1/2 + eps/(6+2eps)"},
        {"split_opt", split_opt, "closed-form optimum split 1/2 + eps/(5+2eps)"},
        {"t_bar", split_eq - 0.5, "equilibrium threshold in tau units"},
    };
    return p;
  }

  if (name == "jap") {
    // Flat 100-minute queue against a near-step queue that saturates at full
    // load; the step is smoothed by a width-1e-4 ramp to keep h continuous.
    ScenarioConfig& c = p.config;
    c.dim = 1;
    c.box_lo[0] = 0.0;
    c.box_hi[0] = 1.0;
    c.resolution = {100000, 1};
    QueueConfig ramp;
    ramp.variant = "piecewise_linear";
    ramp.knots = {{0.0, 0.0}, {0.9989, 0.0}, {0.999, 1.0}, {1.0, 1.0}};
    c.services = {service1d(0.0, constant(100.0)), service1d(1.0, ramp)};
    c.p = 1.0;
    c.run.mode = "equilibrium";
    p.expected = {
        {"eq_c1", 0.0, "everyone queues at the cheap shop"},
        {"opt_c1", 0.001, "the planner sacrifices the 0.1% nearest the dear shop"},
        {"eq_total_cost", 1.5, "0.5 travel + full-load queue of 1"},
    };
    return p;
  }

  if (name == "oscillator") {
    // G(t) = 1 - t on [-1,1]: period-2 best-response cycle from t0 = 0.
    ScenarioConfig& c = p.config;
    c.dim = 1;
    c.box_lo[0] = 0.0;
    c.box_hi[0] = 1.0;
    c.resolution = {4096, 1};
    c.services = {service1d(0.0, constant(0.0)), service1d(1.0, linear(0.0, 2.0))};
    c.p = 1.0;
    c.run.mode = "simulate";
    c.run.dynamics = "standard";
    c.run.t0 = 0.0;
    c.run.days = 1000;
    c.run.seeds = {0.0, 1.0};
    p.expected = {
        {"cycle_period", 2.0, "standard dynamics alternate 0 and 1"},
        {"t_bar", 0.5, "fixed point of G(t) = 1 - t"},
        {"lipschitz", 1.0, "slope of G"},
    };
    return p;
  }

  if (name == "prudence2") {
    // Small town, two crowded shops: G has slope -10 and fixed prudence 1/3
    // oscillates between uniform fields 1/4 and 3/4.
    ScenarioConfig& c = p.config;
    c.dim = 1;
    c.box_lo[0] = 0.0;
    c.box_hi[0] = 1.0;
    c.resolution = {4096, 1};
    c.services = {service1d(0.0, linear(0.0, 10.0)), service1d(1.0, linear(0.0, 10.0))};
    c.p = 1.0;
    c.run.mode = "simulate";
    c.run.dynamics = "prudence";
    c.run.rho = 1.0 / 3.0;
    c.run.psi0 = "0.25";
    p.expected = {
        {"rho_bar", 1.0 - 1.0 / 11.0, "K = 20, L = 1/2, so rho_bar = 1 - 1/(KL+1)"},
        {"cycle_period", 2.0, "psi alternates 1/4 and 3/4 at rho = 1/3"},
        {"t_bar", 0.0, "symmetric equilibrium"},
    };
    return p;
  }

  if (name == "memory3cycle") {
    // G(t) = -2t on [-3,3]: kappa = 2 memory cycles with period 3 from seeds
    // (-1,-1); kappa = 3 converges since the slope 2 < 3.
    ScenarioConfig& c = p.config;
    c.dim = 1;
    c.box_lo[0] = 0.0;
    c.box_hi[0] = 3.0;
    c.resolution = {6144, 1};
    c.services = {service1d(0.0, linear(0.0, 12.0)), service1d(3.0, constant(6.0))};
    c.p = 1.0;
    c.run.mode = "simulate";
    c.run.dynamics = "memory";
    c.run.scheme = "window";
    c.run.kappa = 2;
    c.run.seeds = {-1.0, -1.0};
    p.expected = {
        {"cycle_period", 3.0, "window-2 memory repeats -1, -1, 2"},
        {"t_bar", 0.0, "fixed point of G(t) = -2t"},
        {"lipschitz", 2.0, "slope of G"},
    };
    return p;
  }

  if (name == "contraction") {
    // Beach geometry with mild symmetric queues: Lip(G) = 0.2, standard
    // dynamics contract to the equilibrium threshold 0.
    ScenarioConfig& c = p.config;
    c.dim = 1;
    c.box_lo[0] = 0.0;
    c.box_hi[0] = 1.0;
    c.resolution = {4096, 1};
    c.services = {service1d(0.25, linear(0.0, 0.1)), service1d(0.75, linear(0.0, 0.1))};
    c.p = 2.0;
    c.run.mode = "simulate";
    c.run.dynamics = "standard";
    c.run.t0 = -0.4;
    p.expected = {
        {"t_bar", 0.0, "symmetric equilibrium"},
        {"lipschitz", 0.2, "slope of G"},
    };
    return p;
  }

  throw ConfigError("preset: unknown preset \"" + name + "\"");
}

}  // namespace cityq
