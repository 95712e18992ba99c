#pragma once

#include <utility>
#include <vector>

#include "cityq/cityq_core.hpp"

namespace cityq::testing {

inline Scenario uniform_1d(double lo, double hi, int n,
                           std::vector<std::pair<double, QueueFunction>> sites,
                           double p) {
  Grid grid = build_grid(Box::interval(lo, hi), {n, 1});
  Density density = evaluate_density(DensitySpec::uniform(), grid);
  std::vector<Service> services;
  for (auto& [x, q] : sites) services.push_back({{x, 0.0}, q});
  return make_scenario(std::move(grid), std::move(density), std::move(services), p);
}

// Two ice-cream shops on a uniform beach, h1(t) = t and h2(t) = (1+eps) t.
inline Scenario beach(double eps, int n = 20000) {
  return uniform_1d(0.0, 1.0, n,
                    {{0.25, QueueFunction::linear(0.0, 1.0)},
                     {0.75, QueueFunction::linear(0.0, 1.0 + eps)}},
                    2.0);
}

// Flat 100 queue against a ramp-smoothed step at 99.9% load.
inline Scenario jap(int n = 100000, double ramp_width = 1e-4) {
  return uniform_1d(0.0, 1.0, n,
                    {{0.0, QueueFunction::constant(100.0)},
                     {1.0, QueueFunction::piecewise_linear(
                               {{0.0, 0.0}, {0.999 - ramp_width, 0.0}, {0.999, 1.0}, {1.0, 1.0}})}},
                    1.0);
}

// G(t) = 1 - t on [-1, 1].
inline Scenario oscillator(int n = 4096) {
  return uniform_1d(0.0, 1.0, n,
                    {{0.0, QueueFunction::constant(0.0)},
                     {1.0, QueueFunction::linear(0.0, 2.0)}},
                    1.0);
}

// Symmetric crowded shops: G slope -10.
inline Scenario prudence2(int n = 4096) {
  return uniform_1d(0.0, 1.0, n,
                    {{0.0, QueueFunction::linear(0.0, 10.0)},
                     {1.0, QueueFunction::linear(0.0, 10.0)}},
                    1.0);
}

// G(t) = -2t on [-3, 3].
inline Scenario memory3cycle(int n = 6144) {
  return uniform_1d(0.0, 3.0, n,
                    {{0.0, QueueFunction::linear(0.0, 12.0)},
                     {3.0, QueueFunction::constant(6.0)}},
                    1.0);
}

inline double cell_mass(const Scenario& s) {
  double m = 0.0;
  for (double v : s.density.mass) m = std::max(m, v);
  return m;
}

}  // namespace cityq::testing
