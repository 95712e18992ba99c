#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "helpers.hpp"

using namespace cityq;
using Catch::Approx;

namespace {

Partition threshold_at(const Scenario& s, double t) {
  return weighted_partition(s, Weights{{-t, 0.0}});
}

double threshold_total(const Scenario& s, double t) {
  return total_social_cost(s, threshold_at(s, t));
}

}  // namespace

TEST_CASE("total social cost without queues is the transport cost") {
  Scenario s = testing::uniform_1d(0.0, 1.0, 512,
                                   {{0.25, QueueFunction::constant(0.0)},
                                    {0.75, QueueFunction::constant(0.0)}},
                                   2.0);
  Partition p = weighted_partition(s, Weights{{0.0, 0.0}});
  CHECK(total_social_cost(s, p) == Approx(transport_cost(s, p)).margin(1e-15));
}

TEST_CASE("symmetric beach midpoint split adds the queue time 0.5") {
  Scenario s = testing::beach(0.0, 1024);
  Partition p = threshold_at(s, 0.0);
  REQUIRE(p.masses[0] == Approx(0.5).margin(1e-12));
  CHECK(total_social_cost(s, p) == Approx(transport_cost(s, p) + 0.5).margin(1e-12));
}

TEST_CASE("step-queue city: cost of the all-to-the-far-shop equilibrium") {
  Scenario s = testing::jap(100000);
  Partition p;
  p.assign.assign(s.grid.size(), 1);
  KahanSum m1;
  for (double m : s.density.mass) m1.add(m);
  p.masses = {0.0, m1.value()};
  // 0.5 of travel plus the saturated queue of 1
  CHECK(total_social_cost(s, p) == Approx(1.5).margin(1e-3));
}

TEST_CASE("beach optimum split") {
  Scenario s = testing::beach(0.1, 20000);
  OptimumResult res = solve_optimum(s);
  CHECK(res.converged);
  CHECK(res.uniqueness_certified);
  CHECK(std::abs(res.loads[0] - 0.519231) <= 2e-3);
  CHECK(res.total_cost ==
        Approx(transport_cost(s, res.partition) +
               res.loads[0] * s.services[0].queue.value(res.loads[0]) +
               res.loads[1] * s.services[1].queue.value(res.loads[1]))
            .margin(1e-9));
}

TEST_CASE("symmetric scenario optimum is the even split") {
  Scenario s = testing::beach(0.0, 4096);
  OptimumResult res = solve_optimum(s);
  CHECK(std::abs(res.loads[0] - 0.5) <= 1e-8 + testing::cell_mass(s));
}

TEST_CASE("step-queue optimum sacrifices the nearest 0.1%") {
  Scenario s = testing::jap(100000, 1e-4);
  OptimumResult res = solve_optimum(s);
  CHECK(std::abs(res.loads[0] - 0.001) <= 2e-4);
  CHECK(res.cns_advisory);  // loads sit on the ramp knot
  CHECK_FALSE(res.uniqueness_certified);
}

TEST_CASE("first-order route matches the closed form on the beach") {
  Scenario s = testing::beach(0.1, 20000);
  OptimumResult res = solve_optimum_k2(s);
  REQUIRE(res.t_hat.has_value());
  CHECK(*res.t_hat == Approx(0.1 / 5.2).margin(1e-6));
  CHECK(res.loads[0] == Approx(0.5 + 0.1 / 5.2).margin(1e-6));
  CHECK(res.converged);

  Scenario sym = testing::beach(0.0, 20000);
  OptimumResult rsym = solve_optimum_k2(sym);
  CHECK(*rsym.t_hat == Approx(0.0).margin(1e-9));
  CHECK(rsym.loads[0] == Approx(0.5).margin(1e-9));
}

TEST_CASE("the two optimum routes agree") {
  Scenario s = testing::beach(0.1, 20000);
  OptimumResult a = solve_optimum(s);
  OptimumResult b = solve_optimum_k2(s);
  CHECK(std::abs(a.loads[0] - b.loads[0]) <= 2.0 * testing::cell_mass(s) + 1e-9);
}

TEST_CASE("first-order route falls back for non-convex eta") {
  Scenario s = testing::jap(20000, 1e-3);
  OptimumResult res = solve_optimum_k2(s);
  CHECK_FALSE(res.t_hat.has_value());  // delegated to the general solver
  CHECK(std::abs(res.loads[0] - 0.001) <= 1e-3);
}

TEST_CASE("solver output satisfies the first-order condition on the grid") {
  Scenario s = testing::beach(0.1, 20000);
  OptimumResult res = solve_optimum(s);
  CHECK(res.cns_residual <= 1e-3);  // one boundary cell of slack
}

TEST_CASE("midpoint split of the tilted beach violates the first-order condition") {
  Scenario s = testing::beach(0.1, 20000);
  Partition mid = threshold_at(s, 0.0);
  CHECK(verify_cns(s, mid) > 1e-3);
}

TEST_CASE("nearest-site partition passes the condition when queues vanish") {
  Scenario s = testing::uniform_1d(0.0, 1.0, 4096,
                                   {{0.25, QueueFunction::constant(0.0)},
                                    {0.75, QueueFunction::constant(0.0)}},
                                   2.0);
  Partition voronoi = weighted_partition(s, Weights{{0.0, 0.0}});
  CHECK(verify_cns(s, voronoi) <= 1e-3);
}

TEST_CASE("objective consistency at the optimum") {
  Scenario s = testing::beach(0.1, 2000);
  OptimumResult res = solve_optimum(s);
  MassVector atom_loads{res.partition.masses};
  double objective = wasserstein(s, atom_loads).value;
  for (std::size_t j = 0; j < 2; ++j)
    objective += res.partition.masses[j] * s.services[j].queue.value(res.partition.masses[j]);
  CHECK(total_social_cost(s, res.partition) == Approx(objective).margin(1e-8));
}

TEST_CASE("no random simplex point beats the optimum objective") {
  Scenario s = testing::beach(0.1, 2000);
  OptimumResult res = solve_optimum(s);
  double best = wasserstein(s, MassVector{res.partition.masses}).value;
  for (std::size_t j = 0; j < 2; ++j)
    best += res.partition.masses[j] * s.services[j].queue.value(res.partition.masses[j]);
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    double c1 = u(rng);
    double objective = wasserstein(s, MassVector::simplex({c1, 1.0 - c1})).value +
                       c1 * s.services[0].queue.value(c1) +
                       (1.0 - c1) * s.services[1].queue.value(1.0 - c1);
    CHECK(objective >= best - 1e-8);
  }
}

TEST_CASE("first-order partition beats random threshold partitions") {
  Scenario s = testing::beach(0.1, 4096);
  OptimumResult res = solve_optimum_k2(s);
  double ours = total_social_cost(s, res.partition);
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int trial = 0; trial < 200; ++trial)
    CHECK(ours <= threshold_total(s, u(rng)) + 1e-12);
}

TEST_CASE("no descending feasible direction at the optimum") {
  Scenario s = testing::beach(0.1, 2000);
  OptimumResult res = solve_optimum(s);
  WassersteinResult w = wasserstein(s, MassVector{res.partition.masses});
  std::vector<double> grad(2);
  for (std::size_t j = 0; j < 2; ++j)
    grad[j] = w.subgrad[j] + s.services[j].queue.eta_prime(res.partition.masses[j]);
  // both coordinates interior: the simplex direction e0 - e1 must be flat
  CHECK(std::abs(grad[0] - grad[1]) <= 1e-3);
}

TEST_CASE("k=3 optimum stays symmetric") {
  Scenario s = testing::uniform_1d(0.0, 1.0, 768,
                                   {{0.2, QueueFunction::linear(0.0, 1.0)},
                                    {0.5, QueueFunction::linear(0.0, 1.0)},
                                    {0.8, QueueFunction::linear(0.0, 1.0)}},
                                   2.0);
  OptimumResult res = solve_optimum(s, 1e-8, 4000);
  CHECK(std::abs(res.loads[0] - res.loads[2]) <= 5e-3);
  CHECK(res.cns_residual <= 5e-3);
}
