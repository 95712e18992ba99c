#pragma once

#include <json.hpp>

#include <algorithm>
#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cityq/scenario.hpp"

namespace cityq {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct QueueConfig {
  std::string variant;  // constant | linear | power | piecewise_linear
  double a = 0.0;
  double b = 0.0;
  double q = 1.0;
  std::vector<std::pair<double, double>> knots;
};

struct ServiceConfig {
  Vec2 location;
  QueueConfig queue;
};

struct RunConfig {
  std::string mode = "equilibrium";     // optimum | equilibrium | simulate
  std::string dynamics = "standard";    // standard | prudence | memory
  double t0 = 0.0;
  std::string psi0 = "nearest";         // "nearest" or a number serialized as text
  double rho = 0.5;
  std::string rho_schedule = "fixed";   // fixed | increasing
  int kappa = 2;
  std::string scheme = "window";        // window | global | weighted
  double beta = 0.5;
  std::vector<double> seeds;
  int days = 10000;
  double conv_tol = 1e-8;
};

struct ScenarioConfig {
  int dim = 1;
  double box_lo[2] = {0.0, 0.0};
  double box_hi[2] = {1.0, 1.0};
  std::array<int, 2> resolution = {4096, 1};
  std::string density_type = "uniform";  // uniform | table
  std::vector<double> density_values;
  std::vector<ServiceConfig> services;
  double p = 2.0;
  double tol = 1e-8;
  int max_iter = 10000;
  int max_days = 10000;
  RunConfig run;
};

namespace cfgdetail {

using json = nlohmann::ordered_json;

inline void reject_unknown(const json& j, const std::vector<std::string>& allowed,
                           const std::string& path) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw ConfigError(path + ": unknown field \"" + it.key() + "\"");
  }
}

inline double need_number(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) throw ConfigError(path + ": missing field \"" + key + "\"");
  if (!j[key].is_number()) throw ConfigError(path + "." + key + ": expected a number");
  return j[key].get<double>();
}

inline double number_or(const json& j, const std::string& key, double fallback,
                        const std::string& path) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw ConfigError(path + "." + key + ": expected a number");
  return j[key].get<double>();
}

inline int int_or(const json& j, const std::string& key, int fallback,
                  const std::string& path) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer()) throw ConfigError(path + "." + key + ": expected an integer");
  return j[key].get<int>();
}

inline std::string string_or(const json& j, const std::string& key, std::string fallback,
                             const std::string& path) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_string()) throw ConfigError(path + "." + key + ": expected a string");
  return j[key].get<std::string>();
}

}  // namespace cfgdetail

inline ScenarioConfig parse_config(const std::string& text) {
  using cfgdetail::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: JSON parse error: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  cfgdetail::reject_unknown(j, {"domain", "density", "services", "p", "solver", "run"},
                            "config");

  ScenarioConfig cfg;

  if (!j.contains("domain")) throw ConfigError("config: missing field \"domain\"");
  const json& dom = j["domain"];
  cfgdetail::reject_unknown(dom, {"box", "resolution"}, "domain");
  if (!dom.contains("box")) throw ConfigError("domain: missing field \"box\"");
  const json& box = dom["box"];
  if (box.is_array() && box.size() == 2 && box[0].is_number()) {
    cfg.dim = 1;
    cfg.box_lo[0] = box[0].get<double>();
    cfg.box_hi[0] = box[1].get<double>();
  } else if (box.is_array() && box.size() == 2 && box[0].is_array() && box[0].size() == 2 &&
             box[1].is_array() && box[1].size() == 2) {
    cfg.dim = 2;
    cfg.box_lo[0] = box[0][0].get<double>();
    cfg.box_hi[0] = box[0][1].get<double>();
    cfg.box_lo[1] = box[1][0].get<double>();
    cfg.box_hi[1] = box[1][1].get<double>();
  } else {
    throw ConfigError("domain.box: expected [lo,hi] or [[lox,hix],[loy,hiy]]");
  }
  for (int ax = 0; ax < cfg.dim; ++ax)
    if (!(cfg.box_hi[ax] > cfg.box_lo[ax])) throw ConfigError("domain.box: degenerate box");

  cfg.resolution = cfg.dim == 1 ? std::array<int, 2>{4096, 1} : std::array<int, 2>{256, 256};
  if (dom.contains("resolution")) {
    const json& res = dom["resolution"];
    if (res.is_number_integer()) {
      cfg.resolution[0] = res.get<int>();
      if (cfg.dim == 2) cfg.resolution[1] = res.get<int>();
    } else if (res.is_array() && res.size() == 2 && cfg.dim == 2) {
      cfg.resolution[0] = res[0].get<int>();
      cfg.resolution[1] = res[1].get<int>();
    } else {
      throw ConfigError("domain.resolution: expected an integer (or [nx,ny] in 2-d)");
    }
  }
  for (int ax = 0; ax < cfg.dim; ++ax)
    if (cfg.resolution[ax] < 2) throw ConfigError("domain.resolution: must be >= 2 per axis");

  if (j.contains("density")) {
    const json& den = j["density"];
    cfgdetail::reject_unknown(den, {"type", "values"}, "density");
    cfg.density_type = cfgdetail::string_or(den, "type", "uniform", "density");
    if (cfg.density_type == "uniform") {
      if (den.contains("values")) throw ConfigError("density: uniform takes no values");
    } else if (cfg.density_type == "table") {
      if (!den.contains("values") || !den["values"].is_array())
        throw ConfigError("density.values: expected an array");
      for (const auto& v : den["values"]) cfg.density_values.push_back(v.get<double>());
    } else {
      throw ConfigError("density.type: expected \"uniform\" or \"table\"");
    }
  }

  if (!j.contains("services") || !j["services"].is_array())
    throw ConfigError("config: missing field \"services\" (array)");
  std::size_t idx = 0;
  for (const json& sj : j["services"]) {
    std::string path = "services[" + std::to_string(idx) + "]";
    cfgdetail::reject_unknown(sj, {"location", "queue"}, path);
    ServiceConfig sc;
    if (!sj.contains("location")) throw ConfigError(path + ": missing field \"location\"");
    const json& loc = sj["location"];
    if (cfg.dim == 1 && loc.is_number()) {
      sc.location = {loc.get<double>(), 0.0};
    } else if (cfg.dim == 2 && loc.is_array() && loc.size() == 2) {
      sc.location = {loc[0].get<double>(), loc[1].get<double>()};
    } else {
      throw ConfigError(path + ".location: expected a number (1-d) or [x,y] (2-d)");
    }
    if (sc.location.x < cfg.box_lo[0] || sc.location.x > cfg.box_hi[0] ||
        (cfg.dim == 2 && (sc.location.y < cfg.box_lo[1] || sc.location.y > cfg.box_hi[1])))
      throw ConfigError(path + ": location outside domain box");
    if (!sj.contains("queue")) throw ConfigError(path + ": missing field \"queue\"");
    const json& qj = sj["queue"];
    cfgdetail::reject_unknown(qj, {"variant", "a", "b", "q", "knots"}, path + ".queue");
    sc.queue.variant = cfgdetail::string_or(qj, "variant", "", path + ".queue");
    if (sc.queue.variant == "constant") {
      sc.queue.a = cfgdetail::need_number(qj, "a", path + ".queue");
    } else if (sc.queue.variant == "linear") {
      sc.queue.a = cfgdetail::need_number(qj, "a", path + ".queue");
      sc.queue.b = cfgdetail::need_number(qj, "b", path + ".queue");
    } else if (sc.queue.variant == "power") {
      sc.queue.a = cfgdetail::need_number(qj, "a", path + ".queue");
      sc.queue.q = cfgdetail::need_number(qj, "q", path + ".queue");
    } else if (sc.queue.variant == "piecewise_linear") {
      if (!qj.contains("knots") || !qj["knots"].is_array())
        throw ConfigError(path + ".queue.knots: expected an array of [t,value] pairs");
      for (const auto& kn : qj["knots"]) {
        if (!kn.is_array() || kn.size() != 2)
          throw ConfigError(path + ".queue.knots: expected [t,value] pairs");
        sc.queue.knots.emplace_back(kn[0].get<double>(), kn[1].get<double>());
      }
    } else {
      throw ConfigError(path + ".queue.variant: expected constant|linear|power|piecewise_linear");
    }
    cfg.services.push_back(std::move(sc));
    ++idx;
  }
  if (cfg.services.size() < 2) throw ConfigError("services: need at least 2 services");

  if (!j.contains("p")) throw ConfigError("config: missing field \"p\"");
  cfg.p = cfgdetail::need_number(j, "p", "config");
  if (!(cfg.p >= 1.0)) throw ConfigError("p must be >= 1");

  if (j.contains("solver")) {
    const json& sol = j["solver"];
    cfgdetail::reject_unknown(sol, {"tol", "max_iter", "max_days"}, "solver");
    cfg.tol = cfgdetail::number_or(sol, "tol", cfg.tol, "solver");
    cfg.max_iter = cfgdetail::int_or(sol, "max_iter", cfg.max_iter, "solver");
    cfg.max_days = cfgdetail::int_or(sol, "max_days", cfg.max_days, "solver");
    if (!(cfg.tol > 0.0)) throw ConfigError("solver.tol: must be positive");
    if (cfg.max_iter < 1 || cfg.max_days < 1)
      throw ConfigError("solver: max_iter and max_days must be >= 1");
  }

  if (j.contains("run")) {
    const json& rj = j["run"];
    cfgdetail::reject_unknown(rj,
                              {"mode", "dynamics", "t0", "psi0", "rho", "rho_schedule",
                               "kappa", "scheme", "beta", "seeds", "days", "conv_tol"},
                              "run");
    RunConfig& r = cfg.run;
    r.mode = cfgdetail::string_or(rj, "mode", r.mode, "run");
    if (r.mode != "optimum" && r.mode != "equilibrium" && r.mode != "simulate")
      throw ConfigError("run.mode: expected optimum|equilibrium|simulate");
    r.dynamics = cfgdetail::string_or(rj, "dynamics", r.dynamics, "run");
    if (r.dynamics != "standard" && r.dynamics != "prudence" && r.dynamics != "memory")
      throw ConfigError("run.dynamics: expected standard|prudence|memory");
    r.t0 = cfgdetail::number_or(rj, "t0", r.t0, "run");
    if (rj.contains("psi0")) {
      if (rj["psi0"].is_number())
        r.psi0 = cfgdetail::json(rj["psi0"]).dump();
      else if (rj["psi0"].is_string() && rj["psi0"].get<std::string>() == "nearest")
        r.psi0 = "nearest";
      else
        throw ConfigError("run.psi0: expected \"nearest\" or a number in [0,1]");
    }
    r.rho = cfgdetail::number_or(rj, "rho", r.rho, "run");
    r.rho_schedule = cfgdetail::string_or(rj, "rho_schedule", r.rho_schedule, "run");
    if (r.rho_schedule != "fixed" && r.rho_schedule != "increasing")
      throw ConfigError("run.rho_schedule: expected fixed|increasing");
    r.kappa = cfgdetail::int_or(rj, "kappa", r.kappa, "run");
    r.scheme = cfgdetail::string_or(rj, "scheme", r.scheme, "run");
    if (r.scheme != "window" && r.scheme != "global" && r.scheme != "weighted")
      throw ConfigError("run.scheme: expected window|global|weighted");
    r.beta = cfgdetail::number_or(rj, "beta", r.beta, "run");
    if (rj.contains("seeds")) {
      if (!rj["seeds"].is_array()) throw ConfigError("run.seeds: expected an array");
      r.seeds.clear();
      for (const auto& v : rj["seeds"]) r.seeds.push_back(v.get<double>());
    }
    r.days = cfgdetail::int_or(rj, "days", r.days, "run");
    r.conv_tol = cfgdetail::number_or(rj, "conv_tol", r.conv_tol, "run");
  }
  cfg.run.days = std::min(cfg.run.days, cfg.max_days);
  return cfg;
}

inline std::string serialize_config(const ScenarioConfig& cfg) {
  using cfgdetail::json;
  json j;
  json dom;
  if (cfg.dim == 1) {
    dom["box"] = {cfg.box_lo[0], cfg.box_hi[0]};
    dom["resolution"] = cfg.resolution[0];
  } else {
    dom["box"] = {{cfg.box_lo[0], cfg.box_hi[0]}, {cfg.box_lo[1], cfg.box_hi[1]}};
    dom["resolution"] = {cfg.resolution[0], cfg.resolution[1]};
  }
  j["domain"] = dom;
  json den;
  den["type"] = cfg.density_type;
  if (cfg.density_type == "table") den["values"] = cfg.density_values;
  j["density"] = den;
  j["services"] = json::array();
  for (const ServiceConfig& sc : cfg.services) {
    json sj;
    if (cfg.dim == 1)
      sj["location"] = sc.location.x;
    else
      sj["location"] = {sc.location.x, sc.location.y};
    json qj;
    qj["variant"] = sc.queue.variant;
    if (sc.queue.variant == "constant") qj["a"] = sc.queue.a;
    if (sc.queue.variant == "linear") {
      qj["a"] = sc.queue.a;
      qj["b"] = sc.queue.b;
    }
    if (sc.queue.variant == "power") {
      qj["a"] = sc.queue.a;
      qj["q"] = sc.queue.q;
    }
    if (sc.queue.variant == "piecewise_linear") {
      qj["knots"] = json::array();
      for (const auto& kn : sc.queue.knots) qj["knots"].push_back({kn.first, kn.second});
    }
    sj["queue"] = qj;
    j["services"].push_back(sj);
  }
  j["p"] = cfg.p;
  j["solver"] = {{"tol", cfg.tol}, {"max_iter", cfg.max_iter}, {"max_days", cfg.max_days}};
  json rj;
  rj["mode"] = cfg.run.mode;
  rj["dynamics"] = cfg.run.dynamics;
  rj["t0"] = cfg.run.t0;
  if (cfg.run.psi0 == "nearest")
    rj["psi0"] = "nearest";
  else
    rj["psi0"] = json::parse(cfg.run.psi0);
  rj["rho"] = cfg.run.rho;
  rj["rho_schedule"] = cfg.run.rho_schedule;
  rj["kappa"] = cfg.run.kappa;
  rj["scheme"] = cfg.run.scheme;
  rj["beta"] = cfg.run.beta;
  rj["seeds"] = cfg.run.seeds;
  rj["days"] = cfg.run.days;
  rj["conv_tol"] = cfg.run.conv_tol;
  j["run"] = rj;
  return j.dump(2) + "\n";
}

inline QueueFunction build_queue(const QueueConfig& qc) {
  if (qc.variant == "constant") return QueueFunction::constant(qc.a);
  if (qc.variant == "linear") return QueueFunction::linear(qc.a, qc.b);
  if (qc.variant == "power") return QueueFunction::power(qc.a, qc.q);
  if (qc.variant == "piecewise_linear") return QueueFunction::piecewise_linear(qc.knots);
  throw ConfigError("queue.variant: unknown variant \"" + qc.variant + "\"");
}

inline Scenario build_scenario(const ScenarioConfig& cfg) {
  Box box = cfg.dim == 1 ? Box::interval(cfg.box_lo[0], cfg.box_hi[0])
                         : Box::rectangle(cfg.box_lo[0], cfg.box_hi[0], cfg.box_lo[1],
                                          cfg.box_hi[1]);
  Grid grid = build_grid(box, cfg.resolution);
  DensitySpec spec = cfg.density_type == "table" ? DensitySpec::per_cell(cfg.density_values)
                                                 : DensitySpec::uniform();
  Density density;
  try {
    density = evaluate_density(spec, grid);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("density: ") + e.what());
  }
  std::vector<Service> services;
  std::size_t idx = 0;
  for (const ServiceConfig& sc : cfg.services) {
    try {
      services.push_back({sc.location, build_queue(sc.queue)});
    } catch (const std::invalid_argument& e) {
      throw ConfigError("services[" + std::to_string(idx) + "].queue: " + e.what());
    }
    ++idx;
  }
  try {
    return make_scenario(std::move(grid), std::move(density), std::move(services), cfg.p);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline bool config_equal(const ScenarioConfig& a, const ScenarioConfig& b) {
  return serialize_config(a) == serialize_config(b);
}

}  // namespace cityq
