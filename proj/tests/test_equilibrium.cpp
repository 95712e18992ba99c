#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "helpers.hpp"

using namespace cityq;
using Catch::Approx;

TEST_CASE("best response values") {
  Scenario b = testing::beach(0.1, 20000);
  CHECK(best_response(b, 0.0) == Approx(0.05).margin(1e-12));

  Scenario sym = testing::beach(0.0, 20000);
  CHECK(best_response(sym, 0.0) == Approx(0.0).margin(1e-12));

  Scenario osc = testing::oscillator(4096);
  for (double t : {-0.9, -0.3, 0.0, 0.4, 0.99}) {
    CHECK(best_response(osc, t) == Approx(1.0 - t).margin(1e-12));
  }
}

TEST_CASE("equilibrium gap is strictly increasing for monotone queues") {
  Scenario s = testing::beach(0.2, 2048);
  TauProfile profile(s);
  const QueueFunction& h1 = s.services[0].queue;
  const QueueFunction& h2 = s.services[1].queue;
  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  for (int trial = 0; trial < 100; ++trial) {
    double t1 = u(rng), t2 = u(rng);
    if (t1 == t2) continue;
    if (t1 > t2) std::swap(t1, t2);
    CHECK(equilibrium_gap(profile, h1, h2, t1) < equilibrium_gap(profile, h1, h2, t2));
  }
}

TEST_CASE("beach equilibrium split") {
  Scenario s = testing::beach(0.1, 20000);
  EquilibriumResult res = solve_equilibrium_k2(s);
  CHECK(res.converged);
  CHECK(std::abs(res.loads[0] - 0.516129) <= 2e-3);
  REQUIRE(res.t_bar.has_value());
  CHECK(*res.t_bar == Approx(0.1 / 6.2).margin(1e-9));
  // fixed-point identity at the returned threshold
  CHECK(std::abs(best_response(s, *res.t_bar) - *res.t_bar) <= 1e-8);
  CHECK(res.ce_residual <= 1e-3);
  CHECK(res.dual_feasible);
}

TEST_CASE("step-queue equilibrium sends everyone to the far shop") {
  Scenario s = testing::jap(100000);
  EquilibriumResult res = solve_equilibrium_k2(s);
  CHECK(res.loads[0] <= testing::cell_mass(s));
  for (int a : res.partition.assign) REQUIRE(a == 1);
  CHECK(res.dual_feasible);
}

TEST_CASE("symmetric equilibrium threshold is zero") {
  Scenario s = testing::beach(0.0, 20000);
  EquilibriumResult res = solve_equilibrium_k2(s);
  CHECK(std::abs(*res.t_bar) <= 1e-9);
}

TEST_CASE("non-monotone queues are refused by the k2 route") {
  Scenario s = testing::uniform_1d(0.0, 1.0, 128,
                                   {{0.25, QueueFunction::linear(1.0, -0.5)},
                                    {0.75, QueueFunction::linear(0.0, 1.0)}},
                                   2.0);
  CHECK_THROWS_AS(solve_equilibrium_k2(s), std::invalid_argument);
  CHECK_NOTHROW(solve_equilibrium_general(s));
}

TEST_CASE("the two equilibrium routes agree") {
  for (double eps : {0.1, 0.0}) {
    Scenario s = eps > 0.0 ? testing::beach(eps, 20000) : testing::prudence2(4096);
    EquilibriumResult a = solve_equilibrium_k2(s);
    EquilibriumResult b = solve_equilibrium_general(s);
    CHECK(std::abs(a.loads[0] - b.loads[0]) <= 2.0 * testing::cell_mass(s) + 1e-6);
  }
}

TEST_CASE("three symmetric sites load symmetrically") {
  Scenario s = testing::uniform_1d(0.0, 1.0, 768,
                                   {{0.2, QueueFunction::linear(0.0, 1.0)},
                                    {0.5, QueueFunction::linear(0.0, 1.0)},
                                    {0.8, QueueFunction::linear(0.0, 1.0)}},
                                   2.0);
  EquilibriumResult res = solve_equilibrium_general(s, 1e-8, 4000);
  CHECK(std::abs(res.loads[0] - res.loads[2]) <= 5e-3);
  CHECK(res.ce_residual <= 5e-3);
}

TEST_CASE("equal constant queues reduce to the nearest-site partition") {
  Scenario s = testing::uniform_1d(0.0, 1.0, 2048,
                                   {{0.25, QueueFunction::constant(3.0)},
                                    {0.75, QueueFunction::constant(3.0)}},
                                   2.0);
  EquilibriumResult res = solve_equilibrium_k2(s);
  Partition voronoi = weighted_partition(s, Weights{{0.0, 0.0}});
  CHECK(res.partition.assign == voronoi.assign);
}

TEST_CASE("individual costs at the equilibrium attain the minimum") {
  Scenario s = testing::beach(0.1, 20000);
  EquilibriumResult res = solve_equilibrium_k2(s);
  std::vector<double> cost = individual_cost_field(s, res.partition);
  std::vector<double> queue(2);
  for (std::size_t j = 0; j < 2; ++j)
    queue[j] = s.services[j].queue.value(res.partition.masses[j]);
  double worst = 0.0;
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    double best = std::min(s.dist_p(i, 0) + queue[0], s.dist_p(i, 1) + queue[1]);
    worst = std::max(worst, cost[i] - best);
  }
  CHECK(worst <= 1e-3);
  // the cell at the left end pays its travel plus the equilibrium queue
  CHECK(cost[0] == Approx(0.578629).margin(2e-3));
}

TEST_CASE("individual costs without queues are travel costs") {
  Scenario s = testing::uniform_1d(0.0, 1.0, 256,
                                   {{0.25, QueueFunction::constant(0.0)},
                                    {0.75, QueueFunction::constant(0.0)}},
                                   2.0);
  Partition voronoi = weighted_partition(s, Weights{{0.0, 0.0}});
  std::vector<double> cost = individual_cost_field(s, voronoi);
  for (std::size_t i = 0; i < s.grid.size(); ++i)
    CHECK(cost[i] == Approx(std::min(s.dist_p(i, 0), s.dist_p(i, 1))).margin(1e-15));
}

TEST_CASE("the optimum is not an equilibrium when the shops differ") {
  Scenario s = testing::beach(0.1, 20000);
  OptimumResult opt = solve_optimum(s);
  CHECK(verify_ce(s, opt.partition) > 1e-3);
}

TEST_CASE("dual certificate separates equilibria from other partitions") {
  Scenario s = testing::beach(0.1, 20000);
  EquilibriumResult eq = solve_equilibrium_k2(s);
  DualCertificate good = dual_certificate(s, eq);
  CHECK(good.feasible);
  CHECK(good.identity_gap <= 1e-9);

  Partition mid = weighted_partition(s, Weights{{0.0, 0.0}});
  DualCertificate bad = dual_certificate(s, mid);
  CHECK_FALSE(bad.feasible);
}

TEST_CASE("dual certificate of the queue-free nearest-site partition") {
  Scenario s = testing::uniform_1d(0.0, 1.0, 512,
                                   {{0.25, QueueFunction::constant(0.0)},
                                    {0.75, QueueFunction::constant(0.0)}},
                                   2.0);
  Partition voronoi = weighted_partition(s, Weights{{0.0, 0.0}});
  DualCertificate cert = dual_certificate(s, voronoi);
  CHECK(cert.feasible);
  for (double v : cert.v) CHECK(v == 0.0);
  for (std::size_t i = 0; i < s.grid.size(); ++i)
    CHECK(cert.u[i] == Approx(std::min(s.dist_p(i, 0), s.dist_p(i, 1))).margin(1e-15));
}

TEST_CASE("no random perturbation dominates the equilibrium") {
  Scenario s = testing::beach(0.1, 4096);
  EquilibriumResult eq = solve_equilibrium_k2(s);
  ParetoCheck check = pareto_spot_check(s, eq.partition, 500);
  CHECK_FALSE(check.dominating_found);
}

TEST_CASE("the step-queue optimum does not dominate its equilibrium") {
  Scenario s = testing::jap(20000, 1e-3);
  EquilibriumResult eq = solve_equilibrium_k2(s);
  OptimumResult opt = solve_optimum(s);
  std::vector<double> eq_cost = individual_cost_field(s, eq.partition);
  std::vector<double> opt_cost = individual_cost_field(s, opt.partition);
  // customers near 0 pay about 100 more under the optimum
  double worst_increase = 0.0;
  for (std::size_t i = 0; i < s.grid.size(); ++i)
    worst_increase = std::max(worst_increase, opt_cost[i] - eq_cost[i]);
  CHECK(worst_increase > 90.0);
}

TEST_CASE("swapping cells across the threshold hurts someone") {
  Scenario s = testing::beach(0.1, 4096);
  EquilibriumResult eq = solve_equilibrium_k2(s);
  Partition swapped = eq.partition;
  // exchange one cell from each side of the boundary (same mass: uniform grid)
  std::size_t left = 100, right = s.grid.size() - 100;
  REQUIRE(swapped.assign[left] == 0);
  REQUIRE(swapped.assign[right] == 1);
  std::swap(swapped.assign[left], swapped.assign[right]);
  std::vector<double> base = individual_cost_field(s, eq.partition);
  std::vector<double> alt = individual_cost_field(s, swapped);
  bool someone_worse = false;
  for (std::size_t i = 0; i < s.grid.size(); ++i)
    someone_worse = someone_worse || alt[i] > base[i] + 1e-9;
  CHECK(someone_worse);
}

TEST_CASE("equilibrium splits stay below optimum splits") {
  for (double eps : {0.05, 0.1, 0.2}) {
    Scenario s = testing::beach(eps, 20000);
    EquilibriumResult eq = solve_equilibrium_k2(s);
    OptimumResult opt = solve_optimum(s);
    CHECK(eq.loads[0] <= opt.loads[0] + 1e-12);
  }
}
