#include <doctest.h>

#include "peakshave/billing.hpp"
#include "peakshave/error.hpp"
#include "test_support.hpp"

using namespace peakshave;
using namespace peakshave::billing;
using peakshave::testing::Gen;

namespace {

Tariff month_720h() {
  Tariff t;
  t.cycle_seconds = 720 * 3600.0;
  return t;
}

PowerSeries constant(double kw, const Tariff& t) {
  PowerSeries s;
  s.slot_seconds = t.slot_seconds;
  s.kw.assign(t.slots_per_cycle(), kw);
  return s;
}

}  // namespace

TEST_CASE("compute_bill examples") {
  const Tariff t = month_720h();
  const Bill b = compute_bill(constant(100, t), t);
  CHECK(format_money(b.energy_charge) == "3600.00");
  CHECK(format_money(b.peak_charge) == "2000.00");
  CHECK(format_money(b.total) == "5600.00");

  CHECK(compute_bill(constant(0, t), t).total == 0.0);

  auto one = constant(0, t);
  one.kw[17] = 50;
  const Bill s = compute_bill(one, t);
  CHECK(s.energy_charge == doctest::Approx(0.625).epsilon(1e-12));
  CHECK(s.peak_charge == 1000.0);
}

TEST_CASE("compute_bill rejects the wrong length or slot") {
  const Tariff t = month_720h();
  auto s = constant(1, t);
  s.kw.pop_back();
  CHECK_THROWS_AS(compute_bill(s, t), DataError);
  s = constant(1, t);
  s.slot_seconds = 600;
  CHECK_THROWS_AS(compute_bill(s, t), DataError);
  Tariff bad = t;
  bad.slot_seconds = 7 * 60;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = t;
  bad.energy_price = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("extras land in the total") {
  const Tariff t = month_720h();
  const Bill b = compute_bill(constant(100, t), t, {12.5, 7.25});
  CHECK(b.battery_amortization == 12.5);
  CHECK(b.modulation_penalty == 7.25);
  CHECK(b.total == doctest::Approx(5600 + 19.75).epsilon(1e-12));
}

TEST_CASE("optimal flat bill examples") {
  const Tariff t = month_720h();
  const auto c = constant(42, t);
  CHECK(optimal_flat_bill(c, t).total == doctest::Approx(compute_bill(c, t).total).epsilon(1e-12));

  Tariff two = t;
  two.cycle_seconds = 2 * t.slot_seconds;
  PowerSeries s;
  s.kw = {0, 200};
  const Bill flat = optimal_flat_bill(s, two);
  CHECK(flat.peak_kw == 100);
  CHECK(flat.peak_charge == compute_bill(s, two).peak_charge / 2);
}

TEST_CASE("savings_vs_ratio examples") {
  const Tariff t = month_720h();
  CHECK(savings_vs_ratio(1.0, t) == 0.0);
  CHECK(savings_vs_ratio(2.0, t) == doctest::Approx(20.0 / 76.0).epsilon(1e-12));
  CHECK_THROWS_AS(savings_vs_ratio(0.9, t), ConfigError);
  double prev = -1;
  for (double r = 1.0; r <= 5.0; r += 0.5) {
    const double s = savings_vs_ratio(r, t);
    CHECK(s > prev);
    CHECK(s < 1.0);
    prev = s;
  }
}

TEST_CASE("closed form agrees with the two-bill construction") {
  Gen g(41);
  for (int trial = 0; trial < 300; ++trial) {
    Tariff t;
    t.energy_price = g.uniform(0.01, 0.3);
    t.peak_price = g.uniform(1, 40);
    t.cycle_seconds = t.slot_seconds * static_cast<double>(g.integer(2, 3000));
    const double r = g.uniform(1, 8);
    const double avg = g.uniform(1, 1e4);
    const auto s = two_level_series(r, avg, t);
    CHECK(peak_to_average(s) == doctest::Approx(r).epsilon(1e-9));
    const double built = 1.0 - optimal_flat_bill(s, t).total / compute_bill(s, t).total;
    CHECK(std::abs(built - savings_vs_ratio(r, t)) <= 1e-9);
  }
}

TEST_CASE("bill properties on random series") {
  Gen g(42);
  for (int trial = 0; trial < 300; ++trial) {
    const auto s = peakshave::testing::random_series(g, static_cast<std::size_t>(g.integer(1, 200)), 0, 500);
    const Tariff t = peakshave::testing::tariff_for(s, g.uniform(0, 0.2), g.uniform(0, 30));
    const Bill b = compute_bill(s, t);
    const Bill f = optimal_flat_bill(s, t);
    CHECK(b.peak_charge >= f.peak_charge * (1 - 1e-12));
    CHECK(b.energy_charge == doctest::Approx(f.energy_charge).epsilon(1e-12));
    CHECK(f.total <= b.total * (1 + 1e-12));
    CHECK(std::abs(b.total - (b.energy_charge + b.peak_charge)) <= 1e-9 * std::max(1.0, b.total));

    const double k = g.uniform(0.1, 10);
    PowerSeries scaled = s;
    for (double& v : scaled.kw) v *= k;
    const Bill bk = compute_bill(scaled, t);
    CHECK(bk.energy_charge == doctest::Approx(k * b.energy_charge).epsilon(1e-9));
    CHECK(bk.peak_charge == doctest::Approx(k * b.peak_charge).epsilon(1e-9));
  }
}

TEST_CASE("money formatting") {
  CHECK(format_money(0.625) == "0.62");
  CHECK(format_money(-0.001) == "0.00");
  CHECK(format_money(1234.5) == "1234.50");
  const auto kv = to_key_value(Bill{3600, 2000, 0, 0, 5600, 72000, 100});
  CHECK(kv.find("total=5600.00\n") != std::string::npos);
}
