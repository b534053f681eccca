#include <doctest.h>

#include <vector>

#include "peakshave/battery.hpp"
#include "peakshave/error.hpp"
#include "test_support.hpp"

using namespace peakshave;
using namespace peakshave::battery;
using peakshave::testing::Gen;

namespace {

BatterySpec ample(double cap = 100) {
  BatterySpec s;
  s.capacity_kwh = cap;
  s.max_charge_kw = 1e6;
  s.max_discharge_kw = 1e6;
  return s;
}

}  // namespace

TEST_CASE("step examples") {
  auto s = ample();
  s.eta_charge = 0.9;
  const auto c = step({0, 0}, s, 10, 1.0);
  CHECK(c.state.soc_kwh == doctest::Approx(9.0).epsilon(1e-15));
  CHECK(c.grid_kw == 10);

  const auto d = step({5, 0}, ample(), -20, 1.0);
  CHECK(d.state.soc_kwh == 0.0);
  CHECK(d.load_kw == 5.0);
  CHECK(d.action_kw() == -5.0);

  const auto in = step({0, 0}, ample(), 30, 0.5);
  const auto out = step(in.state, ample(), -1e6, 0.5);
  CHECK(out.load_kw * 0.5 == doctest::Approx(in.grid_kw * 0.5).epsilon(1e-15));
  CHECK(out.state.soc_kwh == 0.0);
}

TEST_CASE("step clips to rates, room and the reserve floor") {
  BatterySpec s = ample(10);
  s.max_charge_kw = 4;
  s.max_discharge_kw = 3;
  s.reserve_floor_kwh = 2;
  CHECK(step({0, 0}, s, 100, 1.0).grid_kw == 4);
  CHECK(step({8, 0}, s, 4, 1.0).grid_kw == doctest::Approx(2));
  CHECK(step({8, 0}, s, 4, 1.0).state.soc_kwh == 10);
  CHECK(step({10, 0}, s, -100, 1.0).load_kw == 3);
  const auto r = step({3, 0}, s, -3, 1.0);
  CHECK(r.load_kw == doctest::Approx(1));
  CHECK(r.state.soc_kwh == 2);
  CHECK(r.state.throughput_kwh == doctest::Approx(1));
}

TEST_CASE("leakage is applied before the action") {
  BatterySpec s = ample(100);
  s.leakage_per_hour = 0.5;
  CHECK(step({40, 0}, s, 0, 2.0).state.soc_kwh == doctest::Approx(10));
  CHECK(step({40, 0}, s, 10, 1.0).state.soc_kwh == doctest::Approx(30));
}

TEST_CASE("replacement cost examples") {
  BatterySpec s = ample(50);
  s.cycle_life = 1000;
  s.unit_cost = 200;
  CHECK(replacement_cost({0, 0}, s) == 0);
  CHECK(replacement_cost({0, 50000}, s) == doctest::Approx(200));
  CHECK(replacement_cost({0, 25000}, s) == doctest::Approx(100));
  CHECK(replacement_cost({0, 99}, BatterySpec{}) == 0);
}

TEST_CASE("invalid specs are config errors") {
  BatterySpec s = ample();
  s.eta_charge = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = ample();
  s.leakage_per_hour = 1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = ample();
  s.reserve_floor_kwh = 101;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = ample();
  s.capacity_kwh = -1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("presets load in display order and keep their qualitative ordering") {
  const auto names = preset_order();
  REQUIRE(names == std::vector<std::string>{"lead_acid", "lithium_ion", "flywheel", "ultracapacitor"});
  for (const auto& n : names) CHECK_NOTHROW(preset(n).validate());
  CHECK(preset("lithium_ion").eta_charge > preset("lead_acid").eta_charge);
  CHECK(preset("flywheel").leakage_per_hour > preset("lithium_ion").leakage_per_hour);
  CHECK(preset("ultracapacitor").max_discharge_kw >= preset("flywheel").max_discharge_kw);
  CHECK(preset("ultracapacitor").capacity_kwh <= preset("flywheel").capacity_kwh);
  CHECK_THROWS_AS(preset("zinc_air"), ConfigError);
}

TEST_CASE("spec fields round-trip") {
  Gen g(50);
  const auto s = peakshave::testing::random_battery(g);
  BatterySpec back;
  apply_fields(back, spec_fields(s));
  CHECK(spec_fields(back).entries() == spec_fields(s).entries());
  Config bad;
  bad.set("voltage", "12");
  CHECK_THROWS_AS(apply_fields(back, bad), ConfigError);
}

TEST_CASE("fleet examples") {
  const auto central = Topology::centralized(ample());
  const std::vector<BatteryState> one{{50, 0}};
  const std::vector<double> demand{0};
  CHECK(locked_energy(central, one, demand, 0.25) == 0);

  const auto two = Topology::distributed(TopologyKind::rack_level, ample(20), 2);
  const std::vector<BatteryState> states{{10, 0}, {0, 0}};
  const std::vector<double> demands{0, 50};
  CHECK(locked_energy(two, states, demands, 0.25) == doctest::Approx(10));
  CHECK(locked_energy(two, states, demands, 1.0) == doctest::Approx(10));

  const std::vector<double> actions{-5};
  CHECK_THROWS_AS(fleet_step(two, states, demands, actions, 1.0), DataError);
  CHECK_THROWS_AS(Topology::distributed(TopologyKind::server_level, ample(), 0), ConfigError);
}

TEST_CASE("equal split steps like the centralized battery scaled by the group count") {
  Gen g(51);
  for (int trial = 0; trial < 500; ++trial) {
    const auto fleet = peakshave::testing::random_battery(g);
    const std::size_t k = static_cast<std::size_t>(g.integer(1, 6));
    const auto topo = Topology::distributed(TopologyKind::server_level, fleet, k);
    const double soc = g.uniform(0, fleet.capacity_kwh);
    const double demand = g.uniform(0, 300);
    const double action = std::max(g.uniform(-200, 200), -demand);
    const double h = g.chance(0.5) ? 0.25 : 1.0;
    const auto c = step({soc, 0}, fleet, action, h);
    std::vector<BatteryState> states(k, BatteryState{soc / static_cast<double>(k), 0});
    std::vector<double> demands(k, demand / static_cast<double>(k));
    std::vector<double> actions(k, action / static_cast<double>(k));
    const auto r = fleet_step(topo, states, demands, actions, h);
    double soc_sum = 0, grid_sum = 0, load_sum = 0;
    for (const auto& gr : r.groups) {
      soc_sum += gr.state.soc_kwh;
      grid_sum += gr.grid_kw;
      load_sum += gr.load_kw;
    }
    CHECK(soc_sum == doctest::Approx(c.state.soc_kwh).epsilon(1e-9));
    CHECK(grid_sum == doctest::Approx(c.grid_kw).epsilon(1e-9));
    CHECK(load_sum == doctest::Approx(c.load_kw).epsilon(1e-9));
    CHECK(r.locked_kwh == doctest::Approx(0).epsilon(1e-9));
  }
}

TEST_CASE("fuzzed action sequences keep the physics invariants") {
  Gen g(52);
  for (int trial = 0; trial < 2000; ++trial) {
    const bool lossless = g.chance(0.3);
    auto spec = peakshave::testing::random_battery(g, !lossless);
    const double h = g.chance(0.5) ? 0.25 : g.uniform(0.1, 2.0);
    BatteryState s{g.uniform(spec.reserve_floor_kwh, spec.capacity_kwh), 0};
    BatterySpec leakier = spec;
    leakier.leakage_per_hour = std::min(0.99, spec.leakage_per_hour + g.uniform(0, 0.3));
    BatteryState t = s;
    const double soc0 = s.soc_kwh;
    double in = 0, out = 0;
    const int steps = static_cast<int>(g.integer(1, 50));
    for (int i = 0; i < steps; ++i) {
      const double a = g.uniform(-1.5, 1.5) * std::max(spec.max_charge_kw, spec.max_discharge_kw);
      const auto r = step(s, spec, a, h);
      CHECK(r.state.soc_kwh >= 0);
      CHECK(r.state.soc_kwh <= spec.capacity_kwh);
      CHECK(r.state.throughput_kwh >= s.throughput_kwh);
      CHECK(r.grid_kw <= spec.max_charge_kw);
      CHECK(r.load_kw <= spec.max_discharge_kw);
      CHECK((r.grid_kw == 0 || r.load_kw == 0));
      // Leakage may take the store below the floor; discharging never does.
      CHECK(r.state.soc_kwh >= std::min(spec.reserve_floor_kwh, s.soc_kwh * spec.retention(h)));
      in += r.grid_kw * h;
      out += r.load_kw * h;
      s = r.state;
      t = step(t, leakier, a, h).state;
      CHECK(t.soc_kwh <= s.soc_kwh + 1e-9 * spec.capacity_kwh);
    }
    if (lossless) {
      CHECK(std::abs((in - out) - (s.soc_kwh - soc0)) <= 1e-6 * std::max(1.0, in + out));
    }
  }
}
