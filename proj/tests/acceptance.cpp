// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "peakshave/battery.hpp"
#include "peakshave/billing.hpp"
#include "peakshave/controllers.hpp"
#include "peakshave/dp_oracle.hpp"
#include "peakshave/error.hpp"
#include "peakshave/modulation.hpp"
#include "peakshave/predictor.hpp"
#include "peakshave/report.hpp"
#include "test_support.hpp"

using namespace peakshave;
using peakshave::testing::Gen;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c, d);
  return buf;
}

std::string source_dir() {
  const char* dir = std::getenv("PEAKSHAVE_SOURCE_DIR");
  return dir ? dir : ".";
}

Outcome billing_exactness() {
  billing::Tariff t;
  t.slot_seconds = 900;
  t.cycle_seconds = 720 * 3600.0;
  PowerSeries s;
  s.slot_seconds = 900;
  s.kw.assign(t.slots_per_cycle(), 100.0);
  const auto b = billing::compute_bill(s, t);
  const bool ok = billing::format_money(b.total) == "5600.00" && billing::format_money(b.energy_charge) == "3600.00" &&
                  billing::format_money(b.peak_charge) == "2000.00";
  return {ok, "total=" + billing::format_money(b.total) + " energy=" + billing::format_money(b.energy_charge) +
                  " peak=" + billing::format_money(b.peak_charge)};
}

Outcome savings_curve() {
  const std::vector<double> ratios{1, 1.5, 2, 2.5, 3, 3.5, 4, 4.5, 5};
  const billing::Tariff t;
  const auto rows = report::sweep_ratio(ratios, t);
  double worst = 0.0;
  bool increasing = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double rel = std::abs(rows[i].savings - rows[i].closed_form) / std::max(1e-300, std::abs(rows[i].closed_form));
    if (i > 0) {
      worst = std::max(worst, rel);
      increasing = increasing && rows[i].savings > rows[i - 1].savings;
    }
  }
  const bool zero = std::abs(rows[0].savings) < 1e-12 && rows[0].closed_form == 0.0;
  return {worst <= 1e-6 && zero && increasing,
          fmt("max_rel_err=%.3g savings(r=1)=%.3g savings(r=5)=%.6f", worst, rows[0].savings, rows.back().savings) +
              (increasing ? " increasing" : " NOT increasing")};
}

Outcome optimizer_vs_dp() {
  const auto lossless = control::verify_offline_against_dp(200, 2024, false);
  const auto lossy = control::verify_offline_against_dp(200, 2025, true);
  return {lossless.passed() && lossy.passed() && lossless.max_gap_kw <= 1e-3,
          fmt("lossless 200 mismatches=%.0f max_gap=%.3g kW; lossy 200 mismatches=%.0f max_gap=%.3g kW",
              static_cast<double>(lossless.mismatches), lossless.max_gap_kw, static_cast<double>(lossy.mismatches),
              lossy.max_gap_kw)};
}

Outcome dominance() {
  constexpr double slack = 1e-6;
  Gen g(4);
  const billing::Tariff tariff;
  const std::size_t n = 100;
  std::size_t off_pred = 0, pred_thr = 0, thr_none = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto in = peakshave::testing::month_instance(g, k);
    const auto b = peakshave::testing::strategy_bills(in.demand, in.spec, tariff, 4);
    off_pred += b.offline > b.predictive + slack;
    pred_thr += b.predictive > b.threshold + slack;
    thr_none += b.threshold > b.none + slack;
  }

  // Default bursty scenario: strict order per technology.
  const auto rows = report::compare(report::default_grid(report::Scenario::from_config(report::default_config())));
  auto total = [&](const std::string& name) {
    for (const auto& r : rows) {
      if (r.name == name) return r.bill.total;
    }
    throw std::runtime_error("missing row " + name);
  };
  std::string strict;
  bool strict_ok = true;
  const double none = total("no_shaving");
  for (const auto& tech : battery::preset_order()) {
    const double off = total(tech + "/predictive_full");
    const double pred = total(tech + "/predictive_perfect_1h");
    const double thr = total(tech + "/threshold");
    const bool ok = off < pred && pred < thr && thr < none;
    strict_ok = strict_ok && ok;
    if (!ok) strict += " " + tech + fmt("(off=%.2f pred=%.2f thr=%.2f none=%.2f)", off, pred, thr, none);
  }
  const std::size_t failures = off_pred + pred_thr + thr_none;
  return {failures == 0 && strict_ok,
          fmt("%.0f instances; violations off<=pred %.0f, pred<=thr %.0f, thr<=none %.0f", static_cast<double>(n),
              static_cast<double>(off_pred), static_cast<double>(pred_thr), static_cast<double>(thr_none)) +
              "; default strict order " + (strict_ok ? "holds" : "broken:" + strict)};
}

Outcome battery_physics() {
  Gen g(5);
  std::size_t bad_bounds = 0, bad_conservation = 0, bad_leak = 0, bad_replay = 0;
  const std::size_t n = 10000;
  for (std::size_t k = 0; k < n; ++k) {
    const auto spec = peakshave::testing::random_battery(g, true);
    const double h = g.chance(0.5) ? 0.25 : g.uniform(0.01, 2.0);
    const double r = spec.retention(h);
    battery::BatteryState s{g.uniform(spec.reserve_floor_kwh, spec.capacity_kwh), 0.0};
    const std::size_t len = static_cast<std::size_t>(g.integer(1, 40));
    for (std::size_t i = 0; i < len; ++i) {
      const double a = g.chance(0.1) ? 0.0 : g.uniform(-2 * spec.max_discharge_kw, 2 * spec.max_charge_kw);
      const auto out = battery::step(s, spec, a, h);
      const double next = out.state.soc_kwh;
      if (next < spec.reserve_floor_kwh - 1e-9 && next < s.soc_kwh * r - 1e-9) ++bad_bounds;
      if (next > spec.capacity_kwh + 1e-9 || next < -1e-12) ++bad_bounds;
      if (out.grid_kw > spec.max_charge_kw + 1e-12 || out.load_kw > spec.max_discharge_kw + 1e-12) ++bad_bounds;
      // Stored change = charge * eta_c * h - load * h / eta_d after leakage.
      const double expected = std::clamp(s.soc_kwh * r, 0.0, spec.capacity_kwh) + out.grid_kw * spec.eta_charge * h -
                              out.load_kw * h / spec.eta_discharge;
      if (std::abs(expected - next) > 1e-9 * std::max(1.0, spec.capacity_kwh)) ++bad_conservation;
      const auto idle = battery::step(s, spec, 0.0, h);
      if (idle.state.soc_kwh > s.soc_kwh + 1e-12) ++bad_leak;
      s = out.state;
    }
    if (k % 20 == 0) {
      const auto d = peakshave::testing::random_series(g, static_cast<std::size_t>(g.integer(1, 30)), 0, 200);
      const auto tariff = peakshave::testing::tariff_for(d);
      for (const auto& t : {control::run_threshold(d, spec, g.uniform(0, 200)),
                            control::run_offline_optimal(d, spec, tariff),
                            control::run_predictive(d, spec, control::PredictorConfig{}, tariff)}) {
        const auto again = control::replay(d, spec, t.action_kw, t.initial_soc_kwh);
        if (again.grid_kw != t.grid_kw || again.soc_kwh != t.soc_kwh) ++bad_replay;
      }
    }
  }
  const std::size_t bad = bad_bounds + bad_conservation + bad_leak + bad_replay;
  return {bad == 0, fmt("%.0f sequences; bound=%.0f conservation=%.0f leakage=%.0f", static_cast<double>(n),
                        static_cast<double>(bad_bounds), static_cast<double>(bad_conservation),
                        static_cast<double>(bad_leak)) +
                        fmt(" replay=%.0f violations", static_cast<double>(bad_replay))};
}

Outcome predictor_ceiling() {
  Gen g(6);
  std::size_t bad = 0, configs = 0;
  for (int h = 0; h < 1000; ++h) {
    std::vector<double> hist(static_cast<std::size_t>(g.integer(1, 50)));
    const double scale = std::pow(10.0, g.uniform(-3, 6));
    for (double& v : hist) v = g.uniform(0, scale);
    const double top = *std::max_element(hist.begin(), hist.end());
    for (std::size_t w = 1; w <= 8; ++w) {
      control::PredictorConfig c;
      c.kind = control::PredictorKind::moving_average;
      c.average_window = w;
      for (double v : control::predict(hist, {}, 4, c).kw) bad += v > top;
      c.kind = control::PredictorKind::weighted_average;
      c.weights.assign(w, 0.0);
      for (double& x : c.weights) x = g.uniform(0, 1);
      c.weights[0] += 1e-6;
      for (double v : control::predict(hist, {}, 4, c).kw) bad += v > top;
      configs += 2;
    }
  }
  return {bad == 0, fmt("1000 histories x %.0f configurations; %.0f predictions above max(history)",
                        static_cast<double>(configs / 1000), static_cast<double>(bad))};
}

Outcome modulation_accounting() {
  Gen g(7);
  std::size_t bad_identity = 0, bad_delay = 0, worse = 0;
  for (int k = 0; k < 1000; ++k) {
    const auto c = peakshave::testing::random_classes(g, static_cast<std::size_t>(g.integer(1, 40)), g.uniform(1, 100));
    modulation::ModulationPolicy p;
    for (std::size_t i = 0; i + 1 < kClassCount; ++i) {
      p.classes[i].max_delay_slots = static_cast<std::size_t>(g.integer(0, 6));
      p.classes[i].droppable = g.chance(0.4);
      p.classes[i].revenue_per_kwh = g.uniform(0, 2);
    }
    if (g.chance(0.5)) p.dvfs_levels.push_back({g.uniform(0.4, 1.0), g.uniform(1.0, 2.5)});
    p.checkpoint_overhead_kwh = g.chance(0.5) ? 0.0 : g.uniform(0, 1);
    const double cap = g.uniform(0, 200);
    const modulation::Mechanisms m{g.chance(0.7), g.chance(0.5), g.chance(0.5)};
    const auto out = modulation::apply(c, p, cap, m, 0.05);
    double scale = 1.0;
    for (const auto& s : c) scale += s.energy_kwh();
    bad_identity += std::abs(out.energy_imbalance_kwh()) > 1e-9 * scale;
    for (std::size_t i = 0; i < kClassCount; ++i) bad_delay += out.max_realized_delay[i] > p.classes[i].max_delay_slots;

    if (k % 10 == 0) {
      PowerSeries first = c[0];
      const auto tariff = peakshave::testing::tariff_for(first);
      const double without = modulation::choose_cap(c, p, tariff, {false, m.drop, m.scale}, std::nullopt).bill.total;
      const double with = modulation::choose_cap(c, p, tariff, {true, m.drop, m.scale}, std::nullopt).bill.total;
      worse += with > without + 1e-6;
    }
  }
  return {bad_identity + bad_delay + worse == 0,
          fmt("1000 workloads; identity=%.0f delay=%.0f violations; deferral worsened %.0f of 100 choose_cap bills",
              static_cast<double>(bad_identity), static_cast<double>(bad_delay), static_cast<double>(worse))};
}

Outcome topology_property() {
  Gen g(8);
  std::size_t worse = 0, locked = 0;
  const std::size_t n = 60;
  for (std::size_t k = 0; k < n; ++k) {
    const auto in = peakshave::testing::topology_instance(g);
    const auto t = peakshave::testing::tariff_for(in.total);
    const auto pooled = control::dp_oracle(in.total, in.pooled, t, in.pooled_levels, in.pooled_soc);
    const auto split = control::dp_oracle_fleet(in.fleet, in.group_demand, t, in.group_levels, in.group_soc);
    worse += pooled.bill.total > split.bill.total + 1e-6;
  }
  for (int k = 0; k < 10000; ++k) {
    const auto spec = peakshave::testing::random_battery(g, true);
    const auto topo = battery::Topology::centralized(spec);
    const std::vector<battery::BatteryState> s{{g.uniform(0, spec.capacity_kwh), 0.0}};
    const std::vector<double> d{g.uniform(0, 300)};
    locked += battery::locked_energy(topo, s, d, 0.25) != 0.0;
  }
  return {worse == 0 && locked == 0, fmt("%.0f dp instances, centralized worse in %.0f; centralized locked energy "
                                         "nonzero in %.0f of 10000 states",
                                         static_cast<double>(n), static_cast<double>(worse), static_cast<double>(locked))};
}

Outcome determinism() {
  const auto grid = report::default_grid(report::Scenario::from_config(report::default_config()));
  std::ostringstream a, b;
  report::write_comparison_csv(a, report::compare(grid));
  report::write_comparison_csv(b, report::compare(grid));
  return {a.str() == b.str() && !a.str().empty(), fmt("%.0f scenarios, %.0f bytes, ", static_cast<double>(grid.size()),
                                                      static_cast<double>(a.str().size())) +
                                                      (a.str() == b.str() ? "identical" : "DIFFERENT")};
}

Outcome real_trace() {
  std::string path = source_dir() + "/tests/data/google_task_usage_sample.csv";
  if (const char* p = std::getenv("PEAKSHAVE_REAL_TRACE"); p && *p) path = p;
  Config c = report::default_config();
  Config layer;
  layer.set("scenario.name", "real_trace");
  layer.set("workload.source", "trace");
  layer.set("workload.path", path);
  layer.set("trace.format", "google_task_usage");
  report::overlay(c, layer);
  // Column mapping and server parameters for a trace in another layout.
  if (const char* m = std::getenv("PEAKSHAVE_REAL_TRACE_CONFIG"); m && *m) report::overlay(c, Config::load(m));
  const auto r = report::run_scenario(report::Scenario::from_config(c));
  const auto share = report::bill_shares(r.baseline_bill);
  return {true, path + fmt(": peak charge share of the no-shaving bill %.4f (peak %.1f kW, total $%.2f)",
                           share.peak_share, r.baseline_bill.peak_kw, r.baseline_bill.total)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all{
      {1, "billing exactness", 1, billing_exactness},
      {2, "savings curve", 5, savings_curve},
      {3, "optimizer vs dp oracle", 60, optimizer_vs_dp},
      {4, "dominance", 300, dominance},
      {5, "battery physics", 30, battery_physics},
      {6, "predictor ceiling", 5, predictor_ceiling},
      {7, "modulation accounting", 60, modulation_accounting},
      {8, "topology", 60, topology_property},
      {9, "determinism", 30, determinism},
      {10, "real trace", 300, real_trace},
  };
  int failed = 0;
  for (const auto& c : all) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("criterion %d %s: %s: %s [%.2f s of %.0f s]\n", c.id, pass ? "PASS" : "FAIL", c.name, o.detail.c_str(),
                secs, c.budget_s);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
