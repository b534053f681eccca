#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "peakshave/battery.hpp"
#include "peakshave/billing.hpp"
#include "peakshave/predictor.hpp"
#include "peakshave/series.hpp"

namespace peakshave::control {

/// Per-slot outcome of running a battery policy against a demand series.
/// action_kw is the realized signed action (+ grid-side charge, - load-side
/// discharge); soc_kwh is the state of charge at the end of each slot.
struct ControllerTrace {
  double slot_seconds = 900.0;
  double initial_soc_kwh = 0.0;
  std::vector<double> demand_kw;
  std::vector<double> action_kw;
  std::vector<double> grid_kw;
  std::vector<double> soc_kwh;
  battery::BatteryState final_state;

  std::size_t size() const { return demand_kw.size(); }
  double slot_hours() const { return slot_seconds / 3600.0; }
  double peak_kw() const;
  double energy_kwh() const;
  PowerSeries grid() const;
};

/// Bill of the grid draw plus the battery wear recorded in the trace.
/// Does not require the trace to span a full tariff cycle.
billing::Bill trace_bill(const ControllerTrace& trace, const battery::BatterySpec& spec, const billing::Tariff& tariff,
                         double modulation_penalty = 0.0);

/// Drives battery::step with the given actions. Discharge requests are clipped
/// to the slot's demand so the grid draw stays nonnegative.
ControllerTrace replay(const PowerSeries& demand, const battery::BatterySpec& spec, std::span<const double> actions_kw,
                       double initial_soc_kwh = 0.0);

/// Charge toward theta while demand is below it, discharge the excess above it.
ControllerTrace run_threshold(const PowerSeries& demand, const battery::BatterySpec& spec, double theta_kw,
                              double initial_soc_kwh = 0.0);

struct ThresholdChoice {
  double theta_kw = 0.0;
  billing::Bill bill;
  ControllerTrace trace;
};

/// Evenly spaced thetas from the lowest to the highest demand value.
std::vector<double> default_theta_grid(const PowerSeries& demand, std::size_t points = 201);

/// Lowest-bill theta over the candidates; ties go to the smaller theta.
ThresholdChoice tune_threshold(const PowerSeries& demand, const battery::BatterySpec& spec,
                               const billing::Tariff& tariff, std::span<const double> candidates,
                               double initial_soc_kwh = 0.0);

/// What a window plan does with energy that is not needed inside the window.
enum class Terminal {
  /// Charge as little and as late as possible and discharge surplus energy:
  /// the window is the rest of the cycle.
  drain,
  /// Keep charging up to the cap whenever below it: demand continues past
  /// the window.
  keep_full,
};

struct WindowOptions {
  double tolerance_kw = 1e-3;
  Terminal terminal = Terminal::drain;
};

struct WindowPlan {
  /// Grid cap the plan holds every slot to.
  double cap_kw = 0.0;
  /// Realized signed battery actions, one per slot.
  std::vector<double> actions_kw;
  std::vector<double> grid_kw;
  std::vector<double> soc_kwh;
};

/// Smallest grid cap in [max(0, running_peak), max demand] that the battery
/// can hold (bisection over a greedy feasibility pass), then the cheapest
/// actions that hold it.
WindowPlan solve_window(std::span<const double> predicted_kw, double slot_hours, double start_soc_kwh,
                        double running_peak_kw, const battery::BatterySpec& spec, const billing::Tariff& tariff,
                        WindowOptions options = {});

/// True if every slot can be kept at or below cap_kw starting from start_soc_kwh.
bool cap_feasible(std::span<const double> demand_kw, double slot_hours, double start_soc_kwh, double cap_kw,
                  const battery::BatterySpec& spec);

struct PredictiveOptions {
  std::size_t window_slots = 4;
  double initial_soc_kwh = 0.0;
  double tolerance_kw = 1e-3;
};

/// Receding horizon: every slot, measure the current demand, predict the rest
/// of the window, solve it against the cycle's running peak and apply the
/// first planned action.
ControllerTrace run_predictive(const PowerSeries& demand, const battery::BatterySpec& spec,
                               const PredictorConfig& predictor, const billing::Tariff& tariff,
                               PredictiveOptions options = {});

/// Full-cycle knowledge: one window over the whole series.
ControllerTrace run_offline_optimal(const PowerSeries& demand, const battery::BatterySpec& spec,
                                    const billing::Tariff& tariff, double initial_soc_kwh = 0.0,
                                    double tolerance_kw = 1e-3);

/// Pass-through: the battery does nothing.
ControllerTrace run_none(const PowerSeries& demand, double initial_soc_kwh = 0.0);

}  // namespace peakshave::control
