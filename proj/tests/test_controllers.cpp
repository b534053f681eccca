#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "peakshave/controllers.hpp"
#include "peakshave/dp_oracle.hpp"
#include "peakshave/error.hpp"
#include "test_support.hpp"

using namespace peakshave;
using namespace peakshave::control;
using peakshave::testing::Gen;
using peakshave::testing::random_battery;
using peakshave::testing::random_series;
using peakshave::testing::tariff_for;

namespace {

PowerSeries hourly(std::vector<double> kw) {
  PowerSeries s;
  s.slot_seconds = 3600.0;
  s.kw = std::move(kw);
  return s;
}

battery::BatterySpec ideal(double cap, double rate) {
  battery::BatterySpec b;
  b.technology = "ideal";
  b.capacity_kwh = cap;
  b.max_charge_kw = rate;
  b.max_discharge_kw = rate;
  return b;
}

PredictorConfig oracle() { return {}; }

void check_physical(const ControllerTrace& t, const battery::BatterySpec& spec) {
  REQUIRE(t.grid_kw.size() == t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(t.grid_kw[i] >= 0.0);
    CHECK(t.grid_kw[i] >= t.demand_kw[i] - spec.max_discharge_kw - 1e-9);
    CHECK(t.grid_kw[i] <= t.demand_kw[i] + spec.max_charge_kw + 1e-9);
    const double before = i == 0 ? t.initial_soc_kwh : t.soc_kwh[i - 1];
    CHECK(t.soc_kwh[i] >= std::min(spec.reserve_floor_kwh, before * spec.retention(t.slot_hours())) - 1e-9);
    CHECK(t.soc_kwh[i] <= spec.capacity_kwh + 1e-9);
  }
}

void check_replays(const ControllerTrace& t, const battery::BatterySpec& spec) {
  PowerSeries d;
  d.slot_seconds = t.slot_seconds;
  d.kw = t.demand_kw;
  const auto again = replay(d, spec, t.action_kw, t.initial_soc_kwh);
  CHECK(again.grid_kw == t.grid_kw);
  CHECK(again.soc_kwh == t.soc_kwh);
}

}  // namespace

TEST_CASE("no battery means grid equals demand") {
  const auto d = hourly({5, 40, 12});
  const auto spec = ideal(0, 0);
  CHECK(run_threshold(d, spec, 10).grid_kw == d.kw);
  CHECK(run_offline_optimal(d, spec, tariff_for(d)).grid_kw == d.kw);
  CHECK(run_predictive(d, spec, oracle(), tariff_for(d)).grid_kw == d.kw);
  CHECK(run_none(d).grid_kw == d.kw);
}

TEST_CASE("threshold example") {
  const auto d = hourly({10, 30});
  const auto t = run_threshold(d, ideal(100, 100), 20);
  CHECK(t.grid_kw == std::vector<double>{20, 20});
  CHECK(t.soc_kwh == std::vector<double>{10, 0});
  CHECK(t.action_kw == std::vector<double>{10, -10});
}

TEST_CASE("solve_window examples") {
  const std::vector<double> d{30, 10};
  const auto spec = ideal(100, 100);
  const auto tariff = tariff_for(hourly(d));
  // 10 kWh covers the 10 kW excess over a 20 kW cap for one hour.
  const auto plan = solve_window(d, 1.0, 10, 0, spec, tariff);
  CHECK(plan.cap_kw == doctest::Approx(20).epsilon(1e-4));
  CHECK(plan.grid_kw[0] == doctest::Approx(20).epsilon(1e-4));
  CHECK(plan.grid_kw[1] <= plan.cap_kw + 1e-9);

  // With 20 kWh the first slot can come down to the second slot's 10 kW.
  const auto deeper = solve_window(d, 1.0, 20, 0, spec, tariff);
  CHECK(deeper.cap_kw == doctest::Approx(10).epsilon(1e-4));
  CHECK(dp_oracle(hourly(d), spec, tariff, 101, 20).peak_kw == doctest::Approx(10));

  // Constant demand cannot be shaved without energy.
  const std::vector<double> flat(6, 50.0);
  CHECK(solve_window(flat, 1.0, 0, 0, spec, tariff_for(hourly(flat))).cap_kw == doctest::Approx(50));

  // Running peak above the window max: nothing to do.
  const auto idle = solve_window(d, 1.0, 0, 40, spec, tariff);
  CHECK(idle.cap_kw == doctest::Approx(40));
  CHECK(idle.grid_kw[0] <= 40);

  CHECK(cap_feasible(d, 1.0, 10, 20, spec));
  CHECK_FALSE(cap_feasible(d, 1.0, 9, 20, spec));
}

TEST_CASE("offline example charges before the peak") {
  const auto d = hourly({10, 10, 40});
  const auto t = run_offline_optimal(d, ideal(100, 100), tariff_for(d));
  CHECK(t.peak_kw() == doctest::Approx(20).epsilon(1e-4));
  CHECK(t.soc_kwh.back() == doctest::Approx(0).scale(1));
}

TEST_CASE("tune_threshold picks the lowest bill and breaks ties low") {
  const auto d = hourly({10, 30});
  const auto spec = ideal(100, 100);
  const std::vector<double> cand{25, 20, 30};
  const auto c = tune_threshold(d, spec, tariff_for(d), cand);
  CHECK(c.theta_kw == 20);
  CHECK(c.trace.peak_kw() == doctest::Approx(20));

  const auto flat = hourly({10, 10});
  const std::vector<double> same{15, 12, 18};
  CHECK(tune_threshold(flat, spec, tariff_for(flat), same).theta_kw == 12);
  CHECK(default_theta_grid(d, 5) == std::vector<double>{10, 15, 20, 25, 30});
}

TEST_CASE("controllers respect battery physics and replay exactly") {
  Gen g(71);
  for (int trial = 0; trial < 150; ++trial) {
    const auto d = random_series(g, static_cast<std::size_t>(g.integer(1, 30)), 0, 200);
    const auto spec = random_battery(g, g.chance(0.7));
    const auto tariff = tariff_for(d);
    const double s0 = g.uniform(spec.reserve_floor_kwh, spec.capacity_kwh);
    PredictiveOptions opt;
    opt.window_slots = static_cast<std::size_t>(g.integer(1, 8));
    opt.initial_soc_kwh = s0;
    PredictorConfig p;
    p.kind = static_cast<PredictorKind>(g.index(5));
    for (const auto& t : {run_threshold(d, spec, g.uniform(0, 200), s0), run_offline_optimal(d, spec, tariff, s0),
                          run_predictive(d, spec, p, tariff, opt)}) {
      check_physical(t, spec);
      check_replays(t, spec);
    }
  }
}

TEST_CASE("offline peak is never above any online controller") {
  Gen g(72);
  for (int trial = 0; trial < 150; ++trial) {
    const auto d = random_series(g, static_cast<std::size_t>(g.integer(2, 40)), 0, 200);
    const auto spec = random_battery(g, g.chance(0.5));
    const auto tariff = tariff_for(d);
    const double s0 = g.uniform(spec.reserve_floor_kwh, spec.capacity_kwh);
    const double off = run_offline_optimal(d, spec, tariff, s0).peak_kw();
    PredictiveOptions opt;
    opt.window_slots = static_cast<std::size_t>(g.integer(1, 10));
    opt.initial_soc_kwh = s0;
    CHECK(off <= run_predictive(d, spec, oracle(), tariff, opt).peak_kw() + 2e-3);
    CHECK(off <= run_threshold(d, spec, g.uniform(0, 200), s0).peak_kw() + 2e-3);
    CHECK(off <= d.peak_kw() + 1e-12);
  }
}

TEST_CASE("a full-length oracle window matches the offline optimum") {
  Gen g(73);
  for (int trial = 0; trial < 100; ++trial) {
    const auto d = random_series(g, static_cast<std::size_t>(g.integer(1, 24)), 0, 200);
    const auto spec = random_battery(g, g.chance(0.5));
    const auto tariff = tariff_for(d);
    PredictiveOptions opt;
    opt.window_slots = d.size();
    const auto full = run_predictive(d, spec, oracle(), tariff, opt);
    const auto off = run_offline_optimal(d, spec, tariff);
    // Each re-solve lands within one bisection tolerance of its own optimum.
    CHECK(std::abs(full.peak_kw() - off.peak_kw()) <= 2 * opt.tolerance_kw);
  }
}

TEST_CASE("bad inputs") {
  const auto d = hourly({1, 2});
  PredictiveOptions opt;
  opt.window_slots = 0;
  CHECK_THROWS_AS(run_predictive(d, ideal(1, 1), oracle(), tariff_for(d), opt), ConfigError);
  const std::vector<double> short_actions{1.0};
  CHECK_THROWS_AS(replay(d, ideal(1, 1), short_actions), DataError);
}
