#include "peakshave/modulation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

#include "peakshave/config.hpp"
#include "peakshave/error.hpp"

namespace peakshave::modulation {
namespace {

// Slots within this much of the cap count as at the cap.
double cap_slack(double cap) { return 1e-9 * std::max(1.0, cap); }

void check_inputs(const ClassSeries& demand, double cap_kw) {
  if (!(cap_kw >= 0.0) || !std::isfinite(cap_kw)) throw ConfigError("modulation cap must be finite and >= 0");
  for (const auto& s : demand) {
    s.validate();
    if (s.size() != demand[0].size() || s.slot_seconds != demand[0].slot_seconds) {
      throw DataError("modulation: class series differ in length or slot length");
    }
  }
}

ModulationOutcome start(const ClassSeries& demand) {
  ModulationOutcome out;
  out.original = demand;
  out.modified = demand;
  for (std::size_t c = 0; c < kClassCount; ++c) {
    out.deferred_slot_kwh[c].assign(demand[0].size(), 0.0);
    out.dropped_slot_kwh[c].assign(demand[0].size(), 0.0);
  }
  return out;
}

double slot_total(const ClassSeries& s, std::size_t t) {
  double total = 0.0;
  for (const auto& c : s) total += c.kw[t];
  return total;
}

void finish(ModulationOutcome& out, double cap_kw) {
  const std::size_t n = out.modified[0].size();
  out.overflow_kw.assign(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    const double over = slot_total(out.modified, t) - cap_kw;
    out.overflow_kw[t] = over > cap_slack(cap_kw) ? over : 0.0;
  }
}

}  // namespace

std::string_view scaling_name(ScalingKind kind) {
  return kind == ScalingKind::dvfs ? "dvfs" : "resource_scaling";
}

ScalingKind parse_scaling(std::string_view name) {
  if (name == "dvfs") return ScalingKind::dvfs;
  if (name == "resource_scaling") return ScalingKind::resource_scaling;
  throw ConfigError("unknown scaling kind '" + std::string(name) + "'");
}

void ModulationPolicy::validate() const {
  if (classes[3].max_delay_slots != 0 || classes[3].droppable) {
    throw ConfigError("modulation: class 3 can be neither deferred nor dropped");
  }
  for (const auto& c : classes) {
    if (!(c.revenue_per_kwh >= 0.0) || !std::isfinite(c.revenue_per_kwh)) {
      throw ConfigError("modulation: revenue per kWh must be finite and >= 0");
    }
  }
  bool identity = false;
  for (const auto& l : dvfs_levels) {
    if (!(l.power_factor > 0.0 && l.power_factor <= 1.0) || !(l.delay_factor >= 1.0) || !std::isfinite(l.delay_factor)) {
      throw ConfigError("modulation: scaling levels need power_factor in (0, 1] and delay_factor >= 1");
    }
    identity = identity || (l.power_factor == 1.0 && l.delay_factor == 1.0);
  }
  if (!identity) throw ConfigError("modulation: scaling levels must include (1, 1)");
  if (!(checkpoint_overhead_kwh >= 0.0) || !(delay_cost_per_kwh >= 0.0)) {
    throw ConfigError("modulation: overhead and delay cost must be >= 0");
  }
}

double ModulationOutcome::overflow_kwh() const {
  const double h = modified[0].slot_hours();
  return std::accumulate(overflow_kw.begin(), overflow_kw.end(), 0.0) * h;
}

double ModulationOutcome::energy_imbalance_kwh() const {
  double modified_kwh = 0.0;
  double original_kwh = 0.0;
  double dropped = 0.0;
  for (std::size_t c = 0; c < kClassCount; ++c) {
    modified_kwh += modified[c].energy_kwh();
    original_kwh += original[c].energy_kwh();
    dropped += dropped_kwh[c];
  }
  return modified_kwh + dropped + unfinished_kwh - original_kwh - overhead_kwh - scaling_change_kwh;
}

ModulationOutcome defer(const ClassSeries& demand, const ModulationPolicy& policy, double cap_kw) {
  policy.validate();
  check_inputs(demand, cap_kw);
  ModulationOutcome out = start(demand);
  const std::size_t n = demand[0].size();
  const double h = demand[0].slot_hours();
  std::vector<double> total(n);
  for (std::size_t t = 0; t < n; ++t) total[t] = slot_total(demand, t);

  // Energy only ever moves into slots with headroom, so a slot that receives
  // energy never overflows and every moved unit keeps its original slot as origin.
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t c = 0; c + 1 < kClassCount && total[t] - cap_kw > cap_slack(cap_kw); ++c) {
      const std::size_t max_delay = policy.classes[c].max_delay_slots;
      double& here = out.modified[c].kw[t];
      const std::size_t last = std::min(n - 1, t + max_delay);
      for (std::size_t u = t + 1; u <= last && here > 0.0; ++u) {
        const double over = total[t] - cap_kw;
        if (over <= cap_slack(cap_kw)) break;
        const double room = cap_kw - total[u];
        if (room <= 0.0) continue;
        const double moved = std::min({over, here, room});
        here -= moved;
        out.modified[c].kw[u] += moved;
        total[t] -= moved;
        total[u] += moved;
        out.deferred_kwh[c] += moved * h;
        out.deferred_slot_kwh[c][t] += moved * h;
        out.max_realized_delay[c] = std::max(out.max_realized_delay[c], u - t);
      }
      if (here < 0.0) here = 0.0;
    }
  }
  finish(out, cap_kw);
  return out;
}

ModulationOutcome drop(const ClassSeries& demand, const ModulationPolicy& policy, double cap_kw, double energy_price) {
  policy.validate();
  check_inputs(demand, cap_kw);
  if (!(energy_price >= 0.0)) throw ConfigError("energy price must be >= 0");
  ModulationOutcome out = start(demand);
  const std::size_t n = demand[0].size();
  const double h = demand[0].slot_hours();
  const double overhead_kw = policy.checkpoint_overhead_kwh / h;

  std::vector<std::size_t> order;
  for (std::size_t c = 0; c < kClassCount; ++c) {
    if (policy.classes[c].droppable) order.push_back(c);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return policy.classes[a].revenue_per_kwh < policy.classes[b].revenue_per_kwh;
  });

  for (std::size_t t = 0; t < n; ++t) {
    double total = slot_total(out.modified, t);
    for (std::size_t c : order) {
      const double over = total - cap_kw;
      if (over <= cap_slack(cap_kw)) break;
      double& here = out.modified[c].kw[t];
      // Stopping work costs a checkpoint; dropping less than that makes things worse.
      if (here <= overhead_kw) continue;
      const double dropped = std::min(here, over + overhead_kw);
      here = here - dropped + overhead_kw;
      total = total - dropped + overhead_kw;
      out.dropped_kwh[c] += dropped * h;
      out.dropped_slot_kwh[c][t] += dropped * h;
      out.overhead_kwh += policy.checkpoint_overhead_kwh;
      out.penalty += dropped * h * policy.classes[c].revenue_per_kwh;
      ++out.drop_events;
    }
  }
  out.penalty += static_cast<double>(out.drop_events) * policy.checkpoint_overhead_kwh * energy_price;
  finish(out, cap_kw);
  return out;
}

ModulationOutcome dvfs_scale(const ClassSeries& demand, const ModulationPolicy& policy, double cap_kw) {
  policy.validate();
  check_inputs(demand, cap_kw);
  ModulationOutcome out = start(demand);
  const std::size_t n = demand[0].size();
  const double h = demand[0].slot_hours();

  std::vector<DvfsLevel> levels = policy.dvfs_levels;
  std::stable_sort(levels.begin(), levels.end(), [](const DvfsLevel& a, const DvfsLevel& b) {
    if (a.power_factor != b.power_factor) return a.power_factor > b.power_factor;
    return a.delay_factor < b.delay_factor;
  });

  std::array<double, kClassCount> carry{};
  double spilled_total = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    double total = 0.0;
    for (std::size_t c = 0; c < kClassCount; ++c) {
      out.modified[c].kw[t] += carry[c];
      carry[c] = 0.0;
      total += out.modified[c].kw[t];
    }
    if (total - cap_kw <= cap_slack(cap_kw)) continue;
    const DvfsLevel* chosen = &levels.back();
    for (const auto& l : levels) {
      if (l.power_factor * total <= cap_kw) {
        chosen = &l;
        break;
      }
    }
    if (chosen->power_factor == 1.0 && chosen->delay_factor == 1.0) continue;
    const double unfinished = 1.0 - 1.0 / chosen->delay_factor;
    for (std::size_t c = 0; c < kClassCount; ++c) {
      const double before = out.modified[c].kw[t];
      const double spill = unfinished * before;
      out.modified[c].kw[t] = chosen->power_factor * before;
      carry[c] = spill;
      out.spilled_kwh[c] += spill * h;
      spilled_total += spill * h;
      out.scaling_change_kwh += (chosen->power_factor - 1.0 / chosen->delay_factor) * before * h;
    }
  }
  for (double c : carry) out.unfinished_kwh += c * h;
  out.penalty = spilled_total * policy.delay_cost_per_kwh;
  finish(out, cap_kw);
  return out;
}

ModulationOutcome dvfs_scale(const PowerSeries& demand, const ModulationPolicy& policy, double cap_kw) {
  ClassSeries classes;
  for (auto& c : classes) {
    c.slot_seconds = demand.slot_seconds;
    c.kw.assign(demand.size(), 0.0);
  }
  classes[0] = demand;
  return dvfs_scale(classes, policy, cap_kw);
}

ModulationOutcome apply(const ClassSeries& demand, const ModulationPolicy& policy, double cap_kw, Mechanisms enabled,
                        double energy_price) {
  policy.validate();
  check_inputs(demand, cap_kw);
  ModulationOutcome out = start(demand);
  if (enabled.defer) {
    ModulationOutcome d = defer(out.modified, policy, cap_kw);
    out.modified = d.modified;
    out.deferred_kwh = d.deferred_kwh;
    out.deferred_slot_kwh = d.deferred_slot_kwh;
    out.max_realized_delay = d.max_realized_delay;
  }
  if (enabled.drop) {
    ModulationOutcome d = drop(out.modified, policy, cap_kw, energy_price);
    out.modified = d.modified;
    out.dropped_kwh = d.dropped_kwh;
    out.dropped_slot_kwh = d.dropped_slot_kwh;
    out.drop_events = d.drop_events;
    out.overhead_kwh = d.overhead_kwh;
    out.penalty += d.penalty;
  }
  if (enabled.scale) {
    ModulationOutcome d = dvfs_scale(out.modified, policy, cap_kw);
    out.modified = d.modified;
    out.spilled_kwh = d.spilled_kwh;
    out.scaling_change_kwh = d.scaling_change_kwh;
    out.unfinished_kwh = d.unfinished_kwh;
    out.penalty += d.penalty;
  }
  finish(out, cap_kw);
  return out;
}

std::vector<double> default_cap_grid(const PowerSeries& total, std::size_t points) {
  if (total.empty()) return {0.0};
  const double lo = total.mean_kw();
  const double hi = total.peak_kw();
  if (points < 2 || !(hi > lo)) return {hi};
  std::vector<double> out(points);
  for (std::size_t i = 0; i < points; ++i) {
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  out.back() = hi;
  return out;
}

CapChoice choose_cap(const ClassSeries& demand, const ModulationPolicy& policy, const billing::Tariff& tariff,
                     Mechanisms enabled, const std::optional<BatteryOption>& battery,
                     std::span<const double> candidate_caps) {
  policy.validate();
  tariff.validate();
  check_inputs(demand, 0.0);
  const PowerSeries total = total_of(demand);
  std::vector<double> caps = candidate_caps.empty() ? default_cap_grid(total)
                                                    : std::vector<double>(candidate_caps.begin(), candidate_caps.end());
  std::sort(caps.begin(), caps.end(), std::greater<>());
  caps.erase(std::unique(caps.begin(), caps.end()), caps.end());

  std::vector<Mechanisms> subsets;
  for (int mask = 0; mask < 8; ++mask) {
    const Mechanisms m{(mask & 1) != 0, (mask & 2) != 0, (mask & 4) != 0};
    if ((m.defer && !enabled.defer) || (m.drop && !enabled.drop) || (m.scale && !enabled.scale)) continue;
    subsets.push_back(m);
  }
  std::stable_sort(subsets.begin(), subsets.end(),
                   [](const Mechanisms& a, const Mechanisms& b) { return a.count() < b.count(); });

  std::optional<CapChoice> best;
  auto consider = [&](CapChoice&& c) {
    if (!best || c.bill.total < best->bill.total - 1e-9) best = std::move(c);
  };
  for (double cap : caps) {
    for (const Mechanisms& m : subsets) {
      ModulationOutcome outcome = apply(demand, policy, cap, m, tariff.energy_price);
      const PowerSeries residual = total_of(outcome.modified);
      CapChoice idle{cap, m, outcome, billing::bill_span(residual.kw, residual.slot_hours(), tariff, {0.0, outcome.penalty}),
                     std::nullopt};
      std::optional<CapChoice> charged;
      if (battery) {
        control::ControllerTrace trace =
            battery->strategy == BatteryStrategy::offline
                ? control::run_offline_optimal(residual, battery->spec, tariff, battery->initial_soc_kwh,
                                               battery->tolerance_kw)
                : control::tune_threshold(residual, battery->spec, tariff, control::default_theta_grid(residual),
                                          battery->initial_soc_kwh)
                      .trace;
        const billing::Bill bill = control::trace_bill(trace, battery->spec, tariff, outcome.penalty);
        if (bill.total < idle.bill.total) charged = CapChoice{cap, m, outcome, bill, std::move(trace)};
      }
      consider(charged ? std::move(*charged) : std::move(idle));
    }
  }
  return std::move(*best);
}

void write_outcome_csv(std::ostream& out, const ModulationOutcome& outcome) {
  out << "slot,class,original_kW,modified_kW,deferred_kWh,dropped_kWh\n";
  const std::size_t n = outcome.original[0].size();
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t c = 0; c < kClassCount; ++c) {
      out << t << ',' << c << ',' << format_double(outcome.original[c].kw[t]) << ','
          << format_double(outcome.modified[c].kw[t]) << ',' << format_double(outcome.deferred_slot_kwh[c][t]) << ','
          << format_double(outcome.dropped_slot_kwh[c][t]) << '\n';
    }
  }
}

}  // namespace peakshave::modulation
