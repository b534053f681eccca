#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "peakshave/series.hpp"
#include "peakshave/trace_ingest.hpp"

namespace peakshave::power {

/// Point on a server power curve: at CPU utilization `utilization` the server
/// draws p_idle + fraction * (p_peak - p_idle).
struct CurvePoint {
  double utilization = 0.0;
  double fraction = 0.0;
};

struct ServerSpec {
  double cpu_capacity = 1.0;
  double mem_capacity = 1.0;
  double p_idle_w = 100.0;
  double p_peak_w = 200.0;
  /// Piecewise-linear curve; empty means linear between idle and peak.
  /// Must start at (0, 0), end at (1, 1) and be nondecreasing.
  std::vector<CurvePoint> curve;

  void validate() const;
  double watts_at(double utilization) const;
};

/// Minimum number of servers that can host the slot's CPU and memory.
std::uint64_t estimate_servers(double total_cpu, double total_mem, const ServerSpec& spec);

/// Facility power (kW) per slot: PUE times the IT power of the ON servers.
PowerSeries dc_power(const trace::SlottedUsage& usage, const ServerSpec& spec, double pue);

struct ClassBreakdown {
  ClassSeries classes;
  /// Slots with servers ON but no CPU usage, whose idle power was split
  /// equally across the classes holding memory (or given to class 0).
  std::size_t idle_apportioned_slots = 0;
};

/// Splits dc_power across classes in proportion to per-class CPU usage.
ClassBreakdown class_power_breakdown(const trace::SlottedUsage& usage, const ServerSpec& spec, double pue);

}  // namespace peakshave::power
