#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "peakshave/config.hpp"

namespace peakshave::battery {

/// Storage technology parameters. Rates are in kW, energies in kWh.
/// eta_charge applies grid -> store, eta_discharge store -> load.
struct BatterySpec {
  std::string technology = "generic";
  double capacity_kwh = 0.0;
  double max_charge_kw = 0.0;
  double max_discharge_kw = 0.0;
  double eta_charge = 1.0;
  double eta_discharge = 1.0;
  /// Fraction of stored energy lost per hour.
  double leakage_per_hour = 0.0;
  /// Full-equivalent cycles before replacement.
  double cycle_life = 1000.0;
  double unit_cost = 0.0;
  /// Energy kept back for outages; never discharged for shaving.
  double reserve_floor_kwh = 0.0;

  void validate() const;
  /// Fraction of stored energy left after `hours` of leakage.
  double retention(double hours) const;
};

struct BatteryState {
  double soc_kwh = 0.0;
  /// Store-side energy discharged since the state was created.
  double throughput_kwh = 0.0;
};

struct StepResult {
  BatteryState state;
  /// Realized charging power drawn from the grid.
  double grid_kw = 0.0;
  /// Realized discharging power delivered to the load.
  double load_kw = 0.0;

  /// Signed realized action: +grid_kw when charging, -load_kw when discharging.
  double action_kw() const { return grid_kw > 0.0 ? grid_kw : -load_kw; }
};

/// Advances one slot. Leakage is applied first, then the action: positive
/// values charge at that grid-side rate, negative values discharge at that
/// load-side rate. Infeasible requests are clipped and the realized rates
/// are returned.
StepResult step(const BatteryState& state, const BatterySpec& spec, double action_kw, double slot_hours);
/// Same, with the slot's retention factor precomputed (spec.retention(slot_hours)).
StepResult step(const BatteryState& state, const BatterySpec& spec, double action_kw, double slot_hours,
                double retention);

/// Replacement cost attributable to the throughput recorded in `state`.
double replacement_cost(const BatteryState& state, const BatterySpec& spec);

/// Store-side energy that could be drawn within one slot: above the reserve
/// floor and within the discharge rate (after leakage).
double dischargeable_kwh(double soc_kwh, const BatterySpec& spec, double slot_hours);

enum class TopologyKind { centralized, rack_level, server_level };

std::string_view topology_name(TopologyKind kind);
TopologyKind parse_topology(std::string_view name);

struct BatteryGroup {
  /// Fraction of the facility demand served by this group.
  double demand_share = 1.0;
  BatterySpec spec;
};

/// Placement of UPS batteries. A distributed group can only serve its own demand.
struct Topology {
  TopologyKind kind = TopologyKind::centralized;
  std::vector<BatteryGroup> groups;

  static Topology centralized(const BatterySpec& fleet);
  /// Splits the fleet's capacity, rates, reserve and cost by `capacity_shares`.
  static Topology distributed(TopologyKind kind, const BatterySpec& fleet, std::span<const double> demand_shares,
                              std::span<const double> capacity_shares);
  /// Equal split over `groups` groups.
  static Topology distributed(TopologyKind kind, const BatterySpec& fleet, std::size_t groups);

  std::size_t size() const { return groups.size(); }
  void validate() const;
};

struct FleetStepResult {
  std::vector<StepResult> groups;
  /// Deliverable energy stranded in groups whose own demand cannot absorb it,
  /// beyond what a shared battery would strand (load side, kWh).
  double locked_kwh = 0.0;
};

/// Energy stranded by the topology this slot, evaluated on the post-leakage
/// states before any action. Always 0 for a centralized topology.
double locked_energy(const Topology& topology, std::span<const BatteryState> states, std::span<const double> demands_kw,
                     double slot_hours);

/// Steps every group. Discharge requests are clipped to the group's own demand.
/// Throws DataError when the spans disagree with the group count.
FleetStepResult fleet_step(const Topology& topology, std::span<const BatteryState> states,
                           std::span<const double> demands_kw, std::span<const double> actions_kw, double slot_hours);

/// Overrides fields named like BatterySpec members (capacity_kwh, eta_charge,
/// ...). Throws ConfigError on unknown names or bad values.
void apply_fields(BatterySpec& spec, const Config& fields);
/// Every field of `spec` as name=value entries.
Config spec_fields(const BatterySpec& spec);

/// Presets parsed from the bundled config/batteries.conf.
const std::map<std::string, BatterySpec>& presets();
/// Throws ConfigError for unknown names.
const BatterySpec& preset(std::string_view name);
/// The four technologies compared by default, in display order.
std::vector<std::string> preset_order();

}  // namespace peakshave::battery
