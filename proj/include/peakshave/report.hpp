#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "peakshave/battery.hpp"
#include "peakshave/billing.hpp"
#include "peakshave/config.hpp"
#include "peakshave/controllers.hpp"
#include "peakshave/modulation.hpp"
#include "peakshave/power_model.hpp"
#include "peakshave/trace_ingest.hpp"

namespace peakshave::report {

enum class StrategyKind { none, threshold, predictive, offline };

std::string_view strategy_name(StrategyKind kind);
StrategyKind parse_strategy(std::string_view name);

struct Strategy {
  StrategyKind kind = StrategyKind::none;
  /// Fixed threshold; tuned over a grid when unset.
  std::optional<double> theta_kw;
  std::size_t theta_points = 201;
  control::PredictorConfig predictor;
  std::size_t window_slots = 4;
  double initial_soc_kwh = 0.0;
  double tolerance_kw = 1e-3;
};

enum class WorkloadSource { synthetic, trace, usage_csv };

struct Workload {
  WorkloadSource source = WorkloadSource::synthetic;
  std::string path;
  trace::TraceFormat format = trace::TraceFormat::simple();
  trace::SyntheticSpec synthetic;
};

struct ModulationSettings {
  bool enabled = false;
  modulation::Mechanisms mechanisms;
  modulation::ModulationPolicy policy;
  /// Fixed cap; chosen by choose_cap when unset.
  std::optional<double> cap_kw;
  std::size_t cap_points = 41;
};

/// Everything needed to reproduce one run. Round-trips through Config.
struct Scenario {
  std::string name = "scenario";
  Workload workload;
  power::ServerSpec server;
  double pue = 1.7;
  billing::Tariff tariff;
  battery::BatterySpec battery;
  battery::TopologyKind topology = battery::TopologyKind::centralized;
  std::size_t topology_groups = 1;
  Strategy strategy;
  ModulationSettings modulation;
  std::uint64_t seed = 1;

  /// Unknown keys and bad values throw ConfigError.
  static Scenario from_config(const Config& config);
  Config to_config() const;
  void validate() const;
};

/// Every key Scenario::from_config accepts, with its default value.
Config default_config();

/// Merges `top` onto `base`. A `battery.preset` or `trace.format` in `top`
/// first clears that section of `base`, so a preset named on top is not
/// overridden by the fields of a lower layer.
void overlay(Config& base, const Config& top);

struct RunResult {
  std::string name;
  trace::SlottedUsage usage;
  std::size_t malformed_lines = 0;
  std::size_t truncated_records = 0;
  PowerSeries demand;
  power::ClassBreakdown class_demand;
  std::optional<modulation::ModulationOutcome> modulation;
  std::optional<double> cap_kw;
  /// Series the battery controller saw (demand after modulation).
  PowerSeries controlled_demand;
  std::optional<double> theta_kw;
  control::ControllerTrace trace;
  /// Locked-in energy per slot (all zero for a centralized topology).
  std::vector<double> locked_kwh;
  billing::Bill bill;
  /// Bill of the unmodified demand without a battery.
  billing::Bill baseline_bill;
};

/// trace -> power -> modulation -> controller -> bill. Errors are rethrown
/// with the scenario name prefixed and their exit code kept.
RunResult run_scenario(const Scenario& scenario);

struct ComparisonRow {
  std::string name;
  billing::Bill bill;
  /// 1 - total / first total (0 when the first total is 0).
  double savings_vs_first = 0.0;
};

/// Runs the scenarios (concurrently when `parallel`); rows keep input order.
std::vector<ComparisonRow> compare(std::span<const Scenario> scenarios, bool parallel = true);

/// Baseline plus every preset technology under threshold, noisy 1-h predictive,
/// perfect 1-h predictive and full-cycle predictive control.
std::vector<Scenario> default_grid(const Scenario& base);

struct Breakdown {
  std::array<double, kClassCount> class_energy_share{};
  double energy_share = 0.0;
  double peak_share = 0.0;
  double amortization_share = 0.0;
  double penalty_share = 0.0;
  std::size_t idle_apportioned_slots = 0;
};

Breakdown breakdown_report(const RunResult& run);
/// Bill shares of an arbitrary bill (class shares left at 0).
Breakdown bill_shares(const billing::Bill& bill);

struct SweepRow {
  double ratio = 1.0;
  double savings = 0.0;
  double closed_form = 0.0;
  billing::Bill no_shaving;
  billing::Bill flat;
};

/// Builds a two-level series per ratio and compares its bill against the
/// flat bill of the same energy.
std::vector<SweepRow> sweep_ratio(std::span<const double> ratios, const billing::Tariff& tariff,
                                  double average_kw = 100.0);

void write_power_csv(std::ostream& out, const PowerSeries& series);
/// slot,demand_kW,action_kW,grid_kW,soc_kWh,locked_kWh
void write_trace_csv(std::ostream& out, const control::ControllerTrace& trace, std::span<const double> locked_kwh);
/// name,energy_charge,peak_charge,amortization,penalty,total,savings_vs_first
void write_comparison_csv(std::ostream& out, std::span<const ComparisonRow> rows);
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);
void write_breakdown(std::ostream& out, const Breakdown& breakdown);

}  // namespace peakshave::report
