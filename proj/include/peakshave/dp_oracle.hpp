#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "peakshave/battery.hpp"
#include "peakshave/billing.hpp"
#include "peakshave/series.hpp"

namespace peakshave::control {

inline constexpr std::size_t kDpMaxSlots = 12;
inline constexpr std::size_t kDpMaxLevels = 201;

struct DpResult {
  billing::Bill bill;
  double peak_kw = 0.0;
  double energy_kwh = 0.0;
  /// Total grid draw per slot along the optimal path.
  std::vector<double> grid_kw;
  /// End-of-slot state of charge per group along the optimal path.
  std::vector<std::vector<double>> soc_kwh;
};

/// Exhaustive dynamic program over `soc_levels` evenly spaced states of
/// charge between the reserve floor and capacity. Returns the minimal
/// energy + peak bill reachable by moving between grid states (the first
/// move starts from the exact initial state). Throws GuardError beyond
/// kDpMaxSlots slots or kDpMaxLevels levels.
DpResult dp_oracle(const PowerSeries& demand, const battery::BatterySpec& spec, const billing::Tariff& tariff,
                   std::size_t soc_levels, double initial_soc_kwh = 0.0);

/// Same program over the joint state of every group of a topology. Each
/// group sees only its own demand series. The joint state count (product of
/// the per-group level counts) is capped at kDpMaxLevels.
DpResult dp_oracle_fleet(const battery::Topology& topology, std::span<const PowerSeries> group_demands,
                         const billing::Tariff& tariff, std::size_t levels_per_group,
                         std::span<const double> initial_socs_kwh);

/// Randomized comparison of run_offline_optimal against dp_oracle.
struct OracleReport {
  std::size_t instances = 0;
  std::size_t mismatches = 0;
  double max_gap_kw = 0.0;
  double allowed_gap_kw = 0.0;
  bool passed() const { return instances > 0 && mismatches == 0; }
};

/// Lossless instances (eta 1, no leakage, at most 8 slots, at most 6 SoC
/// levels) are built around a known optimal cap so the DP grid holds the
/// optimum; they must agree within `tolerance_kw`. Lossy instances
/// (eta 0.9) must agree within two SoC-grid steps expressed in kW.
OracleReport verify_offline_against_dp(std::size_t instances, std::uint64_t seed, bool lossy,
                                       double tolerance_kw = 1e-3);

}  // namespace peakshave::control
