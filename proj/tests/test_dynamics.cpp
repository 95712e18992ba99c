#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "helpers.hpp"

using namespace cityq;
using Catch::Approx;

namespace {

ChoiceField uniform_field(const Scenario& s, double v) {
  ChoiceField f;
  f.psi.assign(s.grid.size(), v);
  return f;
}

}  // namespace

TEST_CASE("standard step is the best response") {
  Scenario osc = testing::oscillator();
  CHECK(standard_step(osc, 0.0) == Approx(1.0).margin(1e-12));
  CHECK(standard_step(osc, 1.0) == Approx(0.0).margin(1e-12));

  Scenario b = testing::beach(0.1, 20000);
  CHECK(standard_step(b, 0.0) == Approx(0.05).margin(1e-12));
  EquilibriumResult eq = solve_equilibrium_k2(b);
  CHECK(standard_step(b, *eq.t_bar) == Approx(*eq.t_bar).margin(1e-9));
}

TEST_CASE("standard dynamics oscillate on the period-2 instance") {
  Scenario osc = testing::oscillator();
  Trajectory traj = run_standard(osc, 0.0, 1000, 1e-8);
  REQUIRE(traj.verdict.kind == Verdict::Kind::CycleDetected);
  CHECK(traj.verdict.period == 2);
  REQUIRE(traj.verdict.values.size() == 2);
  double lo = std::min(traj.verdict.values[0], traj.verdict.values[1]);
  double hi = std::max(traj.verdict.values[0], traj.verdict.values[1]);
  CHECK(lo == Approx(0.0).margin(1e-6));
  CHECK(hi == Approx(1.0).margin(1e-6));
  CHECK(traj.days.size() <= 11);  // detected within ten days
}

TEST_CASE("standard dynamics contract when the slope is below one") {
  Scenario s = testing::uniform_1d(0.0, 1.0, 4096,
                                   {{0.25, QueueFunction::linear(0.0, 0.1)},
                                    {0.75, QueueFunction::linear(0.0, 0.1)}},
                                   2.0);
  CHECK(lipschitz_estimate(s, -0.4, 0.4, 257) <= 1.0 - 1e-6);
  Trajectory traj = run_standard(s, -0.4, 10000, 1e-8);
  REQUIRE(traj.verdict.kind == Verdict::Kind::Converged);
  CHECK(std::abs(traj.verdict.t_limit) <= 1e-8);
}

TEST_CASE("starting at the equilibrium converges immediately") {
  Scenario b = testing::beach(0.1, 4096);
  EquilibriumResult eq = solve_equilibrium_k2(b);
  Trajectory traj = run_standard(b, *eq.t_bar, 100, 1e-8);
  REQUIRE(traj.verdict.kind == Verdict::Kind::Converged);
  CHECK(traj.days.size() <= 6);
}

TEST_CASE("standard dynamics accept a day-0 field") {
  Scenario s = testing::uniform_1d(0.0, 1.0, 4096,
                                   {{0.25, QueueFunction::linear(0.0, 0.1)},
                                    {0.75, QueueFunction::linear(0.0, 0.1)}},
                                   2.0);
  Trajectory traj = run_standard(s, uniform_field(s, 0.8), 200, 1e-8);
  CHECK(std::isnan(traj.days[0].t));
  CHECK(traj.days[0].m == Approx(0.2).margin(1e-12));
  CHECK(traj.verdict.kind == Verdict::Kind::Converged);
}

TEST_CASE("lipschitz estimates of the preset maps") {
  CHECK(lipschitz_estimate(testing::oscillator(4096), -1.0, 1.0, 257) ==
        Approx(1.0).margin(1e-6));
  CHECK(lipschitz_estimate(testing::memory3cycle(6144), -3.0, 3.0, 257) ==
        Approx(2.0).margin(1e-6));
  Scenario flat = testing::uniform_1d(0.0, 1.0, 256,
                                      {{0.25, QueueFunction::constant(2.0)},
                                       {0.75, QueueFunction::constant(1.0)}},
                                      2.0);
  CHECK(lipschitz_estimate(flat, -0.4, 0.4, 129) == 0.0);
  CHECK_THROWS_AS(lipschitz_estimate(flat, 0.4, 0.4, 10), std::invalid_argument);
  CHECK_THROWS_AS(lipschitz_estimate(flat, -0.4, 0.4, 1), std::invalid_argument);
}

TEST_CASE("prudence step branches and extremes") {
  Scenario s = testing::prudence2();
  ChoiceField quarter = uniform_field(s, 0.25);

  ChoiceField full = prudence_step(s, quarter, 1.0);
  for (double v : full.psi) REQUIRE(v == 0.25);  // full prudence never moves

  ChoiceField one = prudence_step(s, quarter, 1.0 / 3.0);
  for (double v : one.psi) REQUIRE(v == Approx(0.75).margin(1e-15));
  ChoiceField two = prudence_step(s, one, 1.0 / 3.0);
  for (double v : two.psi) REQUIRE(v == Approx(0.25).margin(1e-15));

  CHECK_THROWS_AS(prudence_step(s, quarter, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(prudence_step(s, quarter, -0.1), std::invalid_argument);
}

TEST_CASE("prudence keeps the equilibrium field fixed") {
  Scenario b = testing::beach(0.1, 4096);
  EquilibriumResult eq = solve_equilibrium_k2(b);
  ChoiceField psi;
  psi.psi.resize(b.grid.size());
  for (std::size_t i = 0; i < b.grid.size(); ++i)
    psi.psi[i] = eq.partition.assign[i] == 0 ? 0.0 : 1.0;
  ChoiceField next = prudence_step(b, psi, 0.6);
  int changed = 0;
  for (std::size_t i = 0; i < b.grid.size(); ++i)
    if (std::abs(next.psi[i] - psi.psi[i]) > 1e-12) ++changed;
  CHECK(changed <= 1);  // at most the boundary cell
}

TEST_CASE("fixed prudence one third cycles with period two") {
  Scenario s = testing::prudence2();
  Trajectory traj = run_prudence(s, uniform_field(s, 0.25), RhoSchedule::fixed(1.0 / 3.0),
                                 1000, 1e-8);
  REQUIRE(traj.verdict.kind == Verdict::Kind::CycleDetected);
  CHECK(traj.verdict.period == 2);
  double v = traj.final_psi.psi[0];
  CHECK((std::abs(v - 0.25) <= 1e-12 || std::abs(v - 0.75) <= 1e-12));
  for (double x : traj.final_psi.psi) REQUIRE(x == Approx(v).margin(1e-12));
}

TEST_CASE("high fixed prudence converges") {
  Scenario s = testing::prudence2();
  PrudenceBound bound = prudence_bound(s);
  CHECK(bound.queue_lipschitz == Approx(20.0).margin(1e-12));
  CHECK(bound.mass_lipschitz == Approx(0.5).margin(1e-12));
  CHECK(bound.rho_bar == Approx(1.0 - 1.0 / 11.0).margin(1e-12));

  Trajectory traj = run_prudence(s, uniform_field(s, 0.25), RhoSchedule::fixed(0.95),
                                 10000, 1e-6);
  REQUIRE(traj.verdict.kind == Verdict::Kind::Converged);
  CHECK(traj.days.back().s1 < 1e-6);
  CHECK(traj.days.back().s2 < 1e-6);
}

TEST_CASE("increasing prudence converges") {
  Scenario s = testing::prudence2();
  Trajectory traj = run_prudence(s, uniform_field(s, 0.25), RhoSchedule::increasing(),
                                 10000, 1e-4);
  CHECK(traj.verdict.kind == Verdict::Kind::Converged);
}

TEST_CASE("prudence above the bound converges on the beach") {
  Scenario b = testing::beach(0.1, 4096);
  PrudenceBound bound = prudence_bound(b);
  CHECK(bound.queue_lipschitz == Approx(2.1).margin(1e-12));
  CHECK(bound.mass_lipschitz == Approx(1.0).margin(1e-9));
  CHECK(bound.rho_bar == Approx(1.0 - 1.0 / 3.1).margin(1e-9));
  Trajectory traj = run_prudence(b, uniform_field(b, 0.5), RhoSchedule::fixed(0.7), 5000,
                                 1e-6);
  CHECK(traj.verdict.kind == Verdict::Kind::Converged);
}

TEST_CASE("prudence bound without a finite guarantee") {
  Scenario s = testing::uniform_1d(0.0, 1.0, 256,
                                   {{0.25, QueueFunction::power(1.0, 0.5)},
                                    {0.75, QueueFunction::linear(0.0, 1.0)}},
                                   2.0);
  PrudenceBound bound = prudence_bound(s);
  CHECK_FALSE(bound.finite);
  CHECK(bound.rho_bar == 1.0);

  Scenario flat = testing::uniform_1d(0.0, 1.0, 256,
                                      {{0.25, QueueFunction::constant(1.0)},
                                       {0.75, QueueFunction::constant(1.0)}},
                                      2.0);
  PrudenceBound fb = prudence_bound(flat);
  CHECK(fb.queue_lipschitz == 0.0);
  CHECK(fb.rho_bar == Approx(0.0).margin(1e-15));
}

TEST_CASE("prudence misplaced mass contracts exactly") {
  Scenario s = testing::prudence2();
  double rho = 0.95;
  Trajectory traj = run_prudence(s, uniform_field(s, 0.25), RhoSchedule::fixed(rho), 60,
                                 1e-12);
  for (std::size_t j = 1; j + 1 < traj.days.size(); ++j) {
    const DayRecord& prev = traj.days[j - 1];
    const DayRecord& cur = traj.days[j];
    if (prev.s1 >= prev.s2 && prev.s1 > 0.0) {
      CHECK(cur.s1 == Approx(rho * prev.s1).epsilon(1e-12));
      CHECK(cur.s1 >= cur.s2 - 1e-12);  // the ordering persists
    }
  }
}

TEST_CASE("memory step averages the best responses") {
  Scenario m3 = testing::memory3cycle();
  MemoryScheme w2 = MemoryScheme::window(2);
  CHECK(memory_step(m3, {-1.0, -1.0}, w2) == Approx(2.0).margin(1e-9));
  CHECK(memory_step(m3, {-1.0, 2.0}, w2) == Approx(-1.0).margin(1e-9));
  CHECK_THROWS_AS(memory_step(m3, {-1.0}, w2), std::invalid_argument);

  // window of one reduces to the standard step
  MemoryScheme w1 = MemoryScheme::window(1);
  for (double t : {-2.0, -0.5, 0.0, 1.0})
    CHECK(memory_step(m3, {t}, w1) == Approx(standard_step(m3, t)).margin(1e-12));
}

TEST_CASE("weighted memory coefficients are validated") {
  CHECK_NOTHROW(MemoryScheme::weighted_geometric(0.5));
  CHECK_NOTHROW(MemoryScheme::weighted_geometric(1.0));
  // heavier weight on older days violates the recency requirement
  CHECK_THROWS_AS(MemoryScheme::weighted([](int n, int m) {
                    double norm = (std::pow(2.0, n) - 1.0);
                    return std::pow(2.0, n - m) / norm;
                  }),
                  std::invalid_argument);
  // not a convex combination
  CHECK_THROWS_AS(MemoryScheme::weighted([](int, int) { return 0.7; }),
                  std::invalid_argument);
  CHECK_THROWS_AS(MemoryScheme::window(0), std::invalid_argument);
}

TEST_CASE("window-2 memory cycles with period three") {
  Scenario m3 = testing::memory3cycle();
  Trajectory traj = run_memory(m3, MemoryScheme::window(2), {-1.0, -1.0}, 1000, 1e-8);
  REQUIRE(traj.verdict.kind == Verdict::Kind::CycleDetected);
  CHECK(traj.verdict.period == 3);
  std::vector<double> vals = traj.verdict.values;
  std::sort(vals.begin(), vals.end());
  CHECK(vals[0] == Approx(-1.0).margin(1e-6));
  CHECK(vals[1] == Approx(-1.0).margin(1e-6));
  CHECK(vals[2] == Approx(2.0).margin(1e-6));
}

TEST_CASE("window-3 memory converges because the slope is below the window") {
  Scenario m3 = testing::memory3cycle();
  Trajectory traj = run_memory(m3, MemoryScheme::window(3), {-1.0, -1.0, -1.0}, 10000, 1e-8);
  REQUIRE(traj.verdict.kind == Verdict::Kind::Converged);
  CHECK(std::abs(traj.verdict.t_limit) <= 1e-6);
}

TEST_CASE("window-2 memory tames the oscillator") {
  Scenario osc = testing::oscillator();
  Trajectory traj = run_memory(osc, MemoryScheme::window(2), {0.0, 1.0}, 10000, 1e-8);
  REQUIRE(traj.verdict.kind == Verdict::Kind::Converged);
  CHECK(traj.verdict.t_limit == Approx(0.5).margin(1e-6));
}

TEST_CASE("memory seeded at the equilibrium stays there") {
  Scenario b = testing::beach(0.1, 4096);
  EquilibriumResult eq = solve_equilibrium_k2(b);
  Trajectory traj = run_memory(b, MemoryScheme::window(2), {*eq.t_bar, *eq.t_bar}, 100,
                               1e-8);
  REQUIRE(traj.verdict.kind == Verdict::Kind::Converged);
  for (const DayRecord& r : traj.days) CHECK(std::abs(r.t - *eq.t_bar) <= 1e-8);
}

TEST_CASE("global memory converges on both counterexamples") {
  Trajectory osc =
      run_memory(testing::oscillator(), MemoryScheme::global(), {0.0}, 10000, 1e-4);
  REQUIRE(osc.verdict.kind == Verdict::Kind::Converged);
  CHECK(std::abs(osc.verdict.t_limit - 0.5) <= 1e-3);

  Trajectory m3 =
      run_memory(testing::memory3cycle(), MemoryScheme::global(), {-1.0}, 10000, 1e-4);
  REQUIRE(m3.verdict.kind == Verdict::Kind::Converged);
  CHECK(std::abs(m3.verdict.t_limit) <= 1e-3);
}

TEST_CASE("weighted geometric memory converges on the oscillator") {
  Trajectory traj = run_memory(testing::oscillator(), MemoryScheme::weighted_geometric(0.9),
                               {0.0}, 2000, 1e-6);
  REQUIRE(traj.verdict.kind == Verdict::Kind::Converged);
  CHECK(std::abs(traj.verdict.t_limit - 0.5) <= 1e-4);
}

TEST_CASE("deterministic days satisfy m_j = m(t_j)") {
  Scenario b = testing::beach(0.1, 4096);
  TauProfile profile(b);
  Trajectory traj = run_standard(b, 0.3, 50, 1e-10);
  for (std::size_t j = 1; j < traj.days.size(); ++j) {
    double atom = profile.atom_mass(traj.days[j].t);
    CHECK(std::abs(traj.days[j].m - atom) <= testing::cell_mass(b) + 1e-12);
  }
}

TEST_CASE("trajectory export shape and verdict consistency") {
  Scenario osc = testing::oscillator(256);
  Trajectory three_days = run_standard(osc, 0.25, 2, 1e-12);
  CHECK(trajectory_export(three_days).size() == 3);  // days 0, 1, 2

  Scenario contraction = testing::uniform_1d(0.0, 1.0, 1024,
                                             {{0.25, QueueFunction::linear(0.0, 0.1)},
                                              {0.75, QueueFunction::linear(0.0, 0.1)}},
                                             2.0);
  Trajectory conv = run_standard(contraction, -0.4, 10000, 1e-8);
  REQUIRE(conv.verdict.kind == Verdict::Kind::Converged);
  auto rows = trajectory_export(conv);
  CHECK(std::abs(rows.back()[1] - conv.verdict.t_limit) <= 1e-12);

  Trajectory cyc = run_standard(testing::oscillator(256), 0.0, 1000, 1e-8);
  REQUIRE(cyc.verdict.kind == Verdict::Kind::CycleDetected);
  auto crows = trajectory_export(cyc);
  std::size_t nrows = crows.size();
  int period = cyc.verdict.period;
  for (int i = 0; i < period; ++i)
    CHECK(std::abs(crows[nrows - 1 - i][1] - crows[nrows - 1 - i - period][1]) <= 1e-8);
}

TEST_CASE("global memory step averages the whole history") {
  Scenario osc = testing::oscillator();
  double expected = (standard_step(osc, 0.0) + standard_step(osc, 0.4) +
                     standard_step(osc, 0.8)) / 3.0;
  CHECK(memory_step(osc, {0.0, 0.4, 0.8}, MemoryScheme::global()) ==
        Approx(expected).margin(1e-12));
  CHECK_THROWS_AS(memory_step(osc, {}, MemoryScheme::global()), std::invalid_argument);
}

TEST_CASE("runs without monotone queues carry a guarantee note") {
  Scenario s = testing::uniform_1d(0.0, 1.0, 256,
                                   {{0.25, QueueFunction::linear(1.0, -0.5)},
                                    {0.75, QueueFunction::linear(0.0, 1.0)}},
                                   2.0);
  Trajectory traj = run_standard(s, 0.0, 50, 1e-8);
  CHECK_FALSE(traj.guarantee_note.empty());
  CHECK(std::isnan(traj.days.back().s1));
  CHECK(std::isnan(traj.days.back().s2));
}
