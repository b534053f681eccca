#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "peakshave/battery.hpp"
#include "peakshave/billing.hpp"
#include "peakshave/controllers.hpp"
#include "peakshave/series.hpp"

namespace peakshave::modulation {

struct ClassPolicy {
  /// How many slots this class may be postponed; 0 = not deferrable.
  std::size_t max_delay_slots = 0;
  bool droppable = false;
  /// Revenue lost per dropped kWh.
  double revenue_per_kwh = 0.0;
};

/// A speed setting: power is multiplied by power_factor, run time by delay_factor.
struct DvfsLevel {
  double power_factor = 1.0;
  double delay_factor = 1.0;
};

/// dvfs and resource_scaling share the same power/delay abstraction.
enum class ScalingKind { dvfs, resource_scaling };

std::string_view scaling_name(ScalingKind kind);
ScalingKind parse_scaling(std::string_view name);

struct ModulationPolicy {
  std::array<ClassPolicy, kClassCount> classes{{{96, false, 0.0}, {16, false, 0.0}, {4, false, 0.0}, {0, false, 0.0}}};
  std::vector<DvfsLevel> dvfs_levels{{1.0, 1.0}};
  /// Energy spent per drop event on checkpointing the stopped work.
  double checkpoint_overhead_kwh = 0.0;
  ScalingKind scaling = ScalingKind::dvfs;
  /// Charged per kWh of work pushed into a later slot by scaling.
  double delay_cost_per_kwh = 0.0;

  void validate() const;
};

struct ModulationOutcome {
  ClassSeries original;
  ClassSeries modified;
  std::array<double, kClassCount> deferred_kwh{};
  std::array<double, kClassCount> dropped_kwh{};
  std::array<std::size_t, kClassCount> max_realized_delay{};
  /// Work pushed into the following slot by scaling.
  std::array<double, kClassCount> spilled_kwh{};
  /// Energy moved out of / dropped from each slot, per class.
  std::array<std::vector<double>, kClassCount> deferred_slot_kwh;
  std::array<std::vector<double>, kClassCount> dropped_slot_kwh;
  double penalty = 0.0;
  std::size_t drop_events = 0;
  /// Checkpoint energy added to the modified series.
  double overhead_kwh = 0.0;
  /// Energy change from running scaled slots at a lower power level
  /// (negative when scaling saves energy).
  double scaling_change_kwh = 0.0;
  /// Work pushed past the last slot by scaling and never served.
  double unfinished_kwh = 0.0;
  /// Total load above the cap left after modulation, per slot (kW).
  std::vector<double> overflow_kw;

  double overflow_kwh() const;
  /// modified + dropped + unfinished - original - overhead - scaling change; 0 up to rounding.
  double energy_imbalance_kwh() const;
};

/// Earliest-deadline-first deferral of delay-tolerant class energy into later
/// slots with headroom under `cap_kw`. Class 0 moves first; within a class the
/// most recently originated energy is postponed first.
ModulationOutcome defer(const ClassSeries& demand, const ModulationPolicy& policy, double cap_kw);

/// Drops droppable energy above the cap, lowest revenue density first.
/// Penalty = lost revenue + drop events * checkpoint overhead * energy_price.
ModulationOutcome drop(const ClassSeries& demand, const ModulationPolicy& policy, double cap_kw, double energy_price);

/// Scales slots above the cap to the least aggressive sufficient level. Work
/// a level does not finish ((1 - 1/d) of the slot's pre-scaling energy)
/// moves into the next slot.
ModulationOutcome dvfs_scale(const ClassSeries& demand, const ModulationPolicy& policy, double cap_kw);
ModulationOutcome dvfs_scale(const PowerSeries& demand, const ModulationPolicy& policy, double cap_kw);

struct Mechanisms {
  bool defer = true;
  bool drop = false;
  bool scale = false;

  std::size_t count() const { return std::size_t{defer} + std::size_t{drop} + std::size_t{scale}; }
  friend bool operator==(const Mechanisms&, const Mechanisms&) = default;
};

/// defer -> drop -> scale, each stage applied to the previous stage's output.
ModulationOutcome apply(const ClassSeries& demand, const ModulationPolicy& policy, double cap_kw, Mechanisms enabled,
                        double energy_price);

enum class BatteryStrategy { threshold_tuned, offline };

struct BatteryOption {
  battery::BatterySpec spec;
  BatteryStrategy strategy = BatteryStrategy::offline;
  double initial_soc_kwh = 0.0;
  double tolerance_kw = 1e-3;
};

struct CapChoice {
  double cap_kw = 0.0;
  Mechanisms used;
  ModulationOutcome outcome;
  billing::Bill bill;
  /// Set when running the battery lowered the bill for the chosen cap.
  std::optional<control::ControllerTrace> trace;
};

/// Evenly spaced caps from the mean to the max of the total demand.
std::vector<double> default_cap_grid(const PowerSeries& total, std::size_t points = 41);

/// Grid search over caps and over every subset of the enabled mechanisms,
/// each followed by the battery controller (if any) on the residual series;
/// leaving the battery idle is always one of the options. Minimizes the total
/// bill; ties go to the larger cap, then to fewer mechanisms.
CapChoice choose_cap(const ClassSeries& demand, const ModulationPolicy& policy, const billing::Tariff& tariff,
                     Mechanisms enabled, const std::optional<BatteryOption>& battery,
                     std::span<const double> candidate_caps = {});

/// CSV: slot,class,original_kW,modified_kW,deferred_kWh,dropped_kWh
void write_outcome_csv(std::ostream& out, const ModulationOutcome& outcome);

}  // namespace peakshave::modulation
