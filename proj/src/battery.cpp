#include "peakshave/battery.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "embedded.hpp"
#include "peakshave/error.hpp"

namespace peakshave::battery {

void BatterySpec::validate() const {
  auto finite_nonneg = [](double v) { return v >= 0.0 && std::isfinite(v); };
  if (!finite_nonneg(capacity_kwh) || !finite_nonneg(max_charge_kw) || !finite_nonneg(max_discharge_kw)) {
    throw ConfigError("battery " + technology + ": capacity and rates must be finite and >= 0");
  }
  if (!(eta_charge > 0.0 && eta_charge <= 1.0) || !(eta_discharge > 0.0 && eta_discharge <= 1.0)) {
    throw ConfigError("battery " + technology + ": efficiencies must be in (0, 1]");
  }
  if (!(leakage_per_hour >= 0.0 && leakage_per_hour < 1.0)) {
    throw ConfigError("battery " + technology + ": leakage must be in [0, 1)");
  }
  if (!(cycle_life > 0.0) || !finite_nonneg(unit_cost)) {
    throw ConfigError("battery " + technology + ": cycle_life must be > 0 and unit_cost >= 0");
  }
  if (!(reserve_floor_kwh >= 0.0 && reserve_floor_kwh <= capacity_kwh)) {
    throw ConfigError("battery " + technology + ": reserve floor must lie within [0, capacity]");
  }
}

double BatterySpec::retention(double hours) const {
  if (leakage_per_hour == 0.0) return 1.0;
  return std::pow(1.0 - leakage_per_hour, hours);
}

StepResult step(const BatteryState& state, const BatterySpec& spec, double action_kw, double slot_hours) {
  return step(state, spec, action_kw, slot_hours, spec.retention(slot_hours));
}

StepResult step(const BatteryState& state, const BatterySpec& spec, double action_kw, double slot_hours,
                double retention) {
  const double cap = spec.capacity_kwh;
  const double floor = spec.reserve_floor_kwh;
  // Values within this distance of a bound are snapped onto it, so that
  // replaying a realized action lands on the same state.
  const double snap = 1e-12 * cap;
  StepResult r;
  r.state.throughput_kwh = state.throughput_kwh;
  double s = std::clamp(state.soc_kwh * retention, 0.0, cap);

  if (action_kw > 0.0) {
    double a = std::min(action_kw, spec.max_charge_kw);
    const double room = cap - s;
    const double add = spec.eta_charge * a * slot_hours;
    if (add >= room) {
      a = room > 0.0 ? room / (spec.eta_charge * slot_hours) : 0.0;
      s = cap;
    } else {
      s += add;
      if (cap - s <= snap) s = cap;
    }
    r.grid_kw = a;
  } else if (action_kw < 0.0) {
    double d = std::min(-action_kw, spec.max_discharge_kw);
    const double avail = std::max(0.0, s - floor);
    double draw = d * slot_hours / spec.eta_discharge;
    if (draw >= avail) {
      draw = avail;
      d = avail * spec.eta_discharge / slot_hours;
      if (avail > 0.0) s = floor;
    } else {
      s -= draw;
      if (s - floor <= snap) s = floor;
    }
    r.state.throughput_kwh += draw;
    r.load_kw = d;
  }
  r.state.soc_kwh = s;
  return r;
}

double replacement_cost(const BatteryState& state, const BatterySpec& spec) {
  if (spec.capacity_kwh <= 0.0) return 0.0;
  return spec.unit_cost * (state.throughput_kwh / (spec.cycle_life * spec.capacity_kwh));
}

double dischargeable_kwh(double soc_kwh, const BatterySpec& spec, double slot_hours) {
  const double s = std::clamp(soc_kwh * spec.retention(slot_hours), 0.0, spec.capacity_kwh);
  return std::min(std::max(0.0, s - spec.reserve_floor_kwh), spec.max_discharge_kw * slot_hours / spec.eta_discharge);
}

std::string_view topology_name(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::centralized: return "centralized";
    case TopologyKind::rack_level: return "rack";
    case TopologyKind::server_level: return "server";
  }
  return "unknown";
}

TopologyKind parse_topology(std::string_view name) {
  if (name == "centralized") return TopologyKind::centralized;
  if (name == "rack" || name == "rack-level" || name == "rack_level") return TopologyKind::rack_level;
  if (name == "server" || name == "server-level" || name == "server_level") return TopologyKind::server_level;
  throw ConfigError("unknown topology '" + std::string(name) + "'");
}

Topology Topology::centralized(const BatterySpec& fleet) {
  Topology t;
  t.kind = TopologyKind::centralized;
  t.groups.push_back({1.0, fleet});
  return t;
}

Topology Topology::distributed(TopologyKind kind, const BatterySpec& fleet, std::span<const double> demand_shares,
                               std::span<const double> capacity_shares) {
  if (demand_shares.empty() || demand_shares.size() != capacity_shares.size()) {
    throw ConfigError("topology: need one demand share and one capacity share per group");
  }
  const double cap_total = std::accumulate(capacity_shares.begin(), capacity_shares.end(), 0.0);
  if (std::abs(cap_total - 1.0) > 1e-9) throw ConfigError("topology: capacity shares must sum to 1");
  Topology t;
  t.kind = kind;
  for (std::size_t g = 0; g < demand_shares.size(); ++g) {
    const double k = capacity_shares[g];
    if (!(k >= 0.0)) throw ConfigError("topology: shares must be >= 0");
    BatterySpec s = fleet;
    s.capacity_kwh *= k;
    s.max_charge_kw *= k;
    s.max_discharge_kw *= k;
    s.reserve_floor_kwh *= k;
    s.unit_cost *= k;
    t.groups.push_back({demand_shares[g], s});
  }
  t.validate();
  return t;
}

Topology Topology::distributed(TopologyKind kind, const BatterySpec& fleet, std::size_t groups) {
  if (groups == 0) throw ConfigError("topology: group count must be >= 1");
  const std::vector<double> shares(groups, 1.0 / static_cast<double>(groups));
  return distributed(kind, fleet, shares, shares);
}

void Topology::validate() const {
  if (groups.empty()) throw ConfigError("topology: no battery groups");
  if (kind == TopologyKind::centralized && groups.size() != 1) {
    throw ConfigError("topology: centralized topology has exactly one group");
  }
  double total = 0.0;
  for (const auto& g : groups) {
    if (!(g.demand_share >= 0.0)) throw ConfigError("topology: demand shares must be >= 0");
    total += g.demand_share;
    g.spec.validate();
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("topology: demand shares must sum to 1");
}

namespace {

void check_sizes(const Topology& topology, std::size_t states, std::size_t demands) {
  if (states != topology.size() || demands != topology.size()) {
    throw DataError("fleet: expected " + std::to_string(topology.size()) + " groups, got " + std::to_string(states) +
                    " states and " + std::to_string(demands) + " demands");
  }
}

}  // namespace

double locked_energy(const Topology& topology, std::span<const BatteryState> states, std::span<const double> demands_kw,
                     double slot_hours) {
  check_sizes(topology, states.size(), demands_kw.size());
  if (topology.kind == TopologyKind::centralized) return 0.0;
  double stranded = 0.0;
  double deliverable_total = 0.0;
  double demand_total = 0.0;
  for (std::size_t g = 0; g < topology.size(); ++g) {
    const auto& spec = topology.groups[g].spec;
    const double deliverable = dischargeable_kwh(states[g].soc_kwh, spec, slot_hours) * spec.eta_discharge;
    const double need = demands_kw[g] * slot_hours;
    stranded += std::max(0.0, deliverable - need);
    deliverable_total += deliverable;
    demand_total += need;
  }
  return std::max(0.0, stranded - std::max(0.0, deliverable_total - demand_total));
}

FleetStepResult fleet_step(const Topology& topology, std::span<const BatteryState> states,
                           std::span<const double> demands_kw, std::span<const double> actions_kw, double slot_hours) {
  check_sizes(topology, states.size(), demands_kw.size());
  if (actions_kw.size() != topology.size()) throw DataError("fleet: one action per group required");
  FleetStepResult out;
  out.locked_kwh = locked_energy(topology, states, demands_kw, slot_hours);
  for (std::size_t g = 0; g < topology.size(); ++g) {
    const double action = std::max(actions_kw[g], -std::max(0.0, demands_kw[g]));
    out.groups.push_back(step(states[g], topology.groups[g].spec, action, slot_hours));
  }
  return out;
}

void apply_fields(BatterySpec& spec, const Config& fields) {
  for (const auto& [key, value] : fields.entries()) {
    if (key == "technology") {
      spec.technology = value;
    } else if (key == "capacity_kwh") {
      spec.capacity_kwh = parse_double(value, key);
    } else if (key == "max_charge_kw") {
      spec.max_charge_kw = parse_double(value, key);
    } else if (key == "max_discharge_kw") {
      spec.max_discharge_kw = parse_double(value, key);
    } else if (key == "eta_charge") {
      spec.eta_charge = parse_double(value, key);
    } else if (key == "eta_discharge") {
      spec.eta_discharge = parse_double(value, key);
    } else if (key == "leakage_per_hour") {
      spec.leakage_per_hour = parse_double(value, key);
    } else if (key == "cycle_life") {
      spec.cycle_life = parse_double(value, key);
    } else if (key == "unit_cost") {
      spec.unit_cost = parse_double(value, key);
    } else if (key == "reserve_floor_kwh") {
      spec.reserve_floor_kwh = parse_double(value, key);
    } else {
      throw ConfigError("unknown battery field '" + key + "'");
    }
  }
}

Config spec_fields(const BatterySpec& spec) {
  Config c;
  c.set("technology", spec.technology);
  c.set("capacity_kwh", format_double(spec.capacity_kwh));
  c.set("max_charge_kw", format_double(spec.max_charge_kw));
  c.set("max_discharge_kw", format_double(spec.max_discharge_kw));
  c.set("eta_charge", format_double(spec.eta_charge));
  c.set("eta_discharge", format_double(spec.eta_discharge));
  c.set("leakage_per_hour", format_double(spec.leakage_per_hour));
  c.set("cycle_life", format_double(spec.cycle_life));
  c.set("unit_cost", format_double(spec.unit_cost));
  c.set("reserve_floor_kwh", format_double(spec.reserve_floor_kwh));
  return c;
}

const std::map<std::string, BatterySpec>& presets() {
  static const std::map<std::string, BatterySpec> table = [] {
    const Config all = Config::parse(detail::battery_presets_text());
    std::map<std::string, Config> by_name;
    for (const auto& [key, value] : all.entries()) {
      const auto dot = key.find('.');
      if (dot == std::string::npos) throw ConfigError("battery presets: key without preset name: " + key);
      by_name[key.substr(0, dot)].set(key.substr(dot + 1), value);
    }
    std::map<std::string, BatterySpec> out;
    for (const auto& [name, fields] : by_name) {
      BatterySpec spec;
      spec.technology = name;
      apply_fields(spec, fields);
      spec.validate();
      out.emplace(name, spec);
    }
    return out;
  }();
  return table;
}

const BatterySpec& preset(std::string_view name) {
  const auto& all = presets();
  const auto it = all.find(std::string(name));
  if (it == all.end()) throw ConfigError("unknown battery preset '" + std::string(name) + "'");
  return it->second;
}

std::vector<std::string> preset_order() { return {"lead_acid", "lithium_ion", "flywheel", "ultracapacitor"}; }

}  // namespace peakshave::battery
