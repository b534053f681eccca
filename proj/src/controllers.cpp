#include "peakshave/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "peakshave/error.hpp"
#include "peakshave/kernels.hpp"

namespace peakshave::control {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Realized rates may fall short of a request by rounding in the clipping arithmetic.
constexpr double kRateSlack = 1e-9;

ControllerTrace start_trace(const PowerSeries& demand, double initial_soc_kwh) {
  demand.validate();
  ControllerTrace t;
  t.slot_seconds = demand.slot_seconds;
  t.initial_soc_kwh = initial_soc_kwh;
  t.demand_kw = demand.kw;
  t.action_kw.reserve(demand.size());
  t.grid_kw.reserve(demand.size());
  t.soc_kwh.reserve(demand.size());
  t.final_state.soc_kwh = initial_soc_kwh;
  return t;
}

void check_initial_soc(const battery::BatterySpec& spec, double soc) {
  if (!(soc >= 0.0 && soc <= spec.capacity_kwh)) throw ConfigError("initial state of charge must lie within [0, capacity]");
}

// Applies one realized step and appends it to the trace.
void record(ControllerTrace& trace, const battery::StepResult& r, double demand) {
  trace.action_kw.push_back(r.action_kw());
  trace.grid_kw.push_back(std::max(0.0, demand + r.grid_kw - r.load_kw));
  trace.soc_kwh.push_back(r.state.soc_kwh);
  trace.final_state = r.state;
}

struct Window {
  std::span<const double> demand;
  double h;
  double start_soc;
  const battery::BatterySpec& spec;
  double rho;
};

// Minimum state of charge (before leakage) at the start of each slot that
// keeps the rest of the window at or below cap; +inf when impossible.
// With `charging` false no further charging is assumed.
std::vector<double> required_soc(const Window& w, double cap, bool charging) {
  const auto& spec = w.spec;
  const std::size_t n = w.demand.size();
  std::vector<double> req(n + 1, kInf);
  req[n] = spec.reserve_floor_kwh;
  for (std::size_t i = n; i-- > 0;) {
    const double next = req[i + 1];
    if (next == kInf) break;
    const double d = w.demand[i];
    double target = 0.0;
    if (d > cap) {
      const double load = d - cap;
      if (load > spec.max_discharge_kw + kRateSlack) break;
      target = std::max(next, spec.reserve_floor_kwh) + load * w.h / spec.eta_discharge;
    } else {
      const double add = charging ? spec.eta_charge * std::min(spec.max_charge_kw, cap - d) * w.h : 0.0;
      target = std::max(0.0, next - add);
    }
    if (target > spec.capacity_kwh) break;
    const double before = target / w.rho;
    if (before > spec.capacity_kwh) break;
    req[i] = before;
  }
  return req;
}

WindowPlan eager_plan(const Window& w, double cap) {
  WindowPlan plan;
  plan.cap_kw = cap;
  battery::BatteryState s{w.start_soc, 0.0};
  for (double d : w.demand) {
    const double action = d > cap ? -(d - cap) : std::min(w.spec.max_charge_kw, cap - d);
    const auto r = battery::step(s, w.spec, action, w.h, w.rho);
    plan.actions_kw.push_back(r.action_kw());
    plan.grid_kw.push_back(std::max(0.0, d + r.grid_kw - r.load_kw));
    plan.soc_kwh.push_back(r.state.soc_kwh);
    s = r.state;
  }
  return plan;
}

// Charges only what later slots need and spends energy no later slot needs.
WindowPlan lazy_plan(const Window& w, double cap) {
  const auto& spec = w.spec;
  const auto req = required_soc(w, cap, true);
  const auto keep = required_soc(w, cap, false);
  const double margin = 1e-9 * std::max(1.0, spec.capacity_kwh);
  WindowPlan plan;
  plan.cap_kw = cap;
  battery::BatteryState s{w.start_soc, 0.0};
  for (std::size_t i = 0; i < w.demand.size(); ++i) {
    const double d = w.demand[i];
    const double after_leak = std::clamp(s.soc_kwh * w.rho, 0.0, spec.capacity_kwh);
    const double reserve = std::max(keep[i + 1], spec.reserve_floor_kwh);
    const double surplus_kw = reserve == kInf ? 0.0 : std::max(0.0, after_leak - reserve) * spec.eta_discharge / w.h;
    double action = 0.0;
    if (d > cap) {
      action = -std::max(d - cap, std::min({d, spec.max_discharge_kw, surplus_kw}));
    } else {
      const double pad = req[i + 1] > spec.reserve_floor_kwh ? margin : 0.0;
      const double target = std::min(spec.capacity_kwh, req[i + 1] + pad);
      const double charge = req[i + 1] == kInf ? spec.max_charge_kw : (target - after_leak) / (spec.eta_charge * w.h);
      if (charge > 0.0) {
        action = std::min({charge, spec.max_charge_kw, cap - d});
      } else {
        action = -std::min({d, spec.max_discharge_kw, surplus_kw});
      }
    }
    const auto r = battery::step(s, spec, action, w.h, w.rho);
    plan.actions_kw.push_back(r.action_kw());
    plan.grid_kw.push_back(std::max(0.0, d + r.grid_kw - r.load_kw));
    plan.soc_kwh.push_back(r.state.soc_kwh);
    s = r.state;
  }
  return plan;
}

}  // namespace

double ControllerTrace::peak_kw() const { return grid_kw.empty() ? 0.0 : kernels::max(grid_kw); }

double ControllerTrace::energy_kwh() const { return kernels::sum(grid_kw) * slot_hours(); }

PowerSeries ControllerTrace::grid() const {
  PowerSeries s;
  s.slot_seconds = slot_seconds;
  s.kw = grid_kw;
  return s;
}

billing::Bill trace_bill(const ControllerTrace& trace, const battery::BatterySpec& spec, const billing::Tariff& tariff,
                         double modulation_penalty) {
  return billing::bill_span(trace.grid_kw, trace.slot_hours(), tariff,
                            {battery::replacement_cost(trace.final_state, spec), modulation_penalty});
}

ControllerTrace replay(const PowerSeries& demand, const battery::BatterySpec& spec, std::span<const double> actions_kw,
                       double initial_soc_kwh) {
  spec.validate();
  check_initial_soc(spec, initial_soc_kwh);
  if (actions_kw.size() != demand.size()) throw DataError("replay: one action per slot required");
  ControllerTrace t = start_trace(demand, initial_soc_kwh);
  const double h = demand.slot_hours();
  const double rho = spec.retention(h);
  battery::BatteryState s{initial_soc_kwh, 0.0};
  for (std::size_t i = 0; i < demand.size(); ++i) {
    const double d = demand.kw[i];
    const auto r = battery::step(s, spec, std::max(actions_kw[i], -d), h, rho);
    record(t, r, d);
    s = r.state;
  }
  return t;
}

ControllerTrace run_threshold(const PowerSeries& demand, const battery::BatterySpec& spec, double theta_kw,
                              double initial_soc_kwh) {
  spec.validate();
  check_initial_soc(spec, initial_soc_kwh);
  if (!(theta_kw >= 0.0)) throw ConfigError("threshold must be >= 0");
  ControllerTrace t = start_trace(demand, initial_soc_kwh);
  const double h = demand.slot_hours();
  const double rho = spec.retention(h);
  battery::BatteryState s{initial_soc_kwh, 0.0};
  for (double d : demand.kw) {
    const double action = d < theta_kw ? theta_kw - d : -(d - theta_kw);
    const auto r = battery::step(s, spec, action, h, rho);
    record(t, r, d);
    s = r.state;
  }
  return t;
}

std::vector<double> default_theta_grid(const PowerSeries& demand, std::size_t points) {
  if (demand.empty()) return {0.0};
  const auto [lo_it, hi_it] = std::minmax_element(demand.kw.begin(), demand.kw.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (points < 2 || hi == lo) return {lo};
  std::vector<double> out(points);
  for (std::size_t i = 0; i < points; ++i) {
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  out.back() = hi;
  return out;
}

ThresholdChoice tune_threshold(const PowerSeries& demand, const battery::BatterySpec& spec,
                               const billing::Tariff& tariff, std::span<const double> candidates,
                               double initial_soc_kwh) {
  if (candidates.empty()) throw ConfigError("threshold tuning needs at least one candidate");
  std::optional<ThresholdChoice> best;
  for (double theta : candidates) {
    ControllerTrace trace = run_threshold(demand, spec, theta, initial_soc_kwh);
    const billing::Bill bill = trace_bill(trace, spec, tariff);
    if (!best || bill.total < best->bill.total || (bill.total == best->bill.total && theta < best->theta_kw)) {
      best = ThresholdChoice{theta, bill, std::move(trace)};
    }
  }
  return std::move(*best);
}

bool cap_feasible(std::span<const double> demand_kw, double slot_hours, double start_soc_kwh, double cap_kw,
                  const battery::BatterySpec& spec) {
  const double rho = spec.retention(slot_hours);
  battery::BatteryState s{start_soc_kwh, 0.0};
  for (double d : demand_kw) {
    if (d > cap_kw) {
      const double need = d - cap_kw;
      const auto r = battery::step(s, spec, -need, slot_hours, rho);
      if (r.load_kw < need - kRateSlack * std::max(1.0, need)) return false;
      s = r.state;
    } else {
      // Charging as much as possible maximizes the state of charge at every
      // later slot, so it is feasible whenever any policy is.
      s = battery::step(s, spec, std::min(spec.max_charge_kw, cap_kw - d), slot_hours, rho).state;
    }
  }
  return true;
}

WindowPlan solve_window(std::span<const double> predicted_kw, double slot_hours, double start_soc_kwh,
                        double running_peak_kw, const battery::BatterySpec& spec, const billing::Tariff& tariff,
                        WindowOptions options) {
  if (predicted_kw.empty()) throw DataError("solve_window: empty window");
  if (!(options.tolerance_kw > 0.0)) throw ConfigError("solve_window: tolerance must be positive");
  const Window w{predicted_kw, slot_hours, start_soc_kwh, spec, spec.retention(slot_hours)};
  double lo = std::max(0.0, running_peak_kw);
  double hi = *std::max_element(predicted_kw.begin(), predicted_kw.end());
  double cap = lo;
  if (hi > lo) {
    if (tariff.peak_price == 0.0) {
      cap = hi;
    } else if (cap_feasible(predicted_kw, slot_hours, start_soc_kwh, lo, spec)) {
      cap = lo;
    } else {
      for (int iter = 0; iter < 200 && hi - lo > options.tolerance_kw; ++iter) {
        const double mid = lo + 0.5 * (hi - lo);
        if (cap_feasible(predicted_kw, slot_hours, start_soc_kwh, mid, spec)) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
      cap = hi;
    }
  }
  return options.terminal == Terminal::drain ? lazy_plan(w, cap) : eager_plan(w, cap);
}

ControllerTrace run_predictive(const PowerSeries& demand, const battery::BatterySpec& spec,
                               const PredictorConfig& predictor, const billing::Tariff& tariff,
                               PredictiveOptions options) {
  spec.validate();
  predictor.validate();
  check_initial_soc(spec, options.initial_soc_kwh);
  if (options.window_slots == 0) throw ConfigError("prediction window must be at least one slot");
  ControllerTrace t = start_trace(demand, options.initial_soc_kwh);
  const std::size_t n = demand.size();
  const double h = demand.slot_hours();
  const double rho = spec.retention(h);
  const std::span<const double> all(demand.kw);
  battery::BatteryState s{options.initial_soc_kwh, 0.0};
  double running_peak = 0.0;
  std::vector<double> window_kw;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = demand.kw[i];
    // The current slot is measured; only the slots after it are predicted.
    const std::size_t window = std::min(options.window_slots, n - i);
    window_kw.assign(1, d);
    if (window > 1) {
      const Prediction p = predict(all.first(i + 1), all.subspan(i + 1), window - 1, predictor, i + 1);
      window_kw.insert(window_kw.end(), p.kw.begin(), p.kw.end());
    }
    WindowOptions wo;
    wo.tolerance_kw = options.tolerance_kw;
    wo.terminal = i + window == n ? Terminal::drain : Terminal::keep_full;
    const WindowPlan plan = solve_window(window_kw, h, s.soc_kwh, running_peak, spec, tariff, wo);
    const double action = plan.actions_kw[0];
    const auto r = battery::step(s, spec, action, h, rho);
    record(t, r, d);
    s = r.state;
    running_peak = std::max(running_peak, t.grid_kw.back());
  }
  return t;
}

ControllerTrace run_offline_optimal(const PowerSeries& demand, const battery::BatterySpec& spec,
                                    const billing::Tariff& tariff, double initial_soc_kwh, double tolerance_kw) {
  spec.validate();
  check_initial_soc(spec, initial_soc_kwh);
  if (demand.empty()) return start_trace(demand, initial_soc_kwh);
  const WindowPlan plan = solve_window(demand.kw, demand.slot_hours(), initial_soc_kwh, 0.0, spec, tariff,
                                       {tolerance_kw, Terminal::drain});
  return replay(demand, spec, plan.actions_kw, initial_soc_kwh);
}

ControllerTrace run_none(const PowerSeries& demand, double initial_soc_kwh) {
  ControllerTrace t = start_trace(demand, initial_soc_kwh);
  t.action_kw.assign(demand.size(), 0.0);
  t.grid_kw = demand.kw;
  t.soc_kwh.assign(demand.size(), initial_soc_kwh);
  return t;
}

}  // namespace peakshave::control
