#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "peakshave/series.hpp"

namespace peakshave::trace {

/// One task-usage interval. cpu and mem are in units of one server's capacity.
struct TraceRecord {
  double start_s = 0.0;
  double end_s = 0.0;
  double cpu = 0.0;
  double mem = 0.0;
  int class_id = 0;
  std::int64_t priority = 0;
  std::string task_id;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

/// Column mapping for line-oriented CSV traces. A column index of -1 means
/// the field is absent and its default is used.
struct TraceFormat {
  int col_start = 0;
  int col_end = 1;
  int col_cpu = 2;
  int col_mem = 3;
  int col_class = 4;
  int col_priority = 5;
  int col_task_id = 6;
  char delimiter = ',';
  bool has_header = false;
  /// Raw time values are multiplied by this to get seconds, then time_offset_s is subtracted.
  double time_scale = 1.0;
  double time_offset_s = 0.0;
  int default_class = 0;
  /// Parsing aborts when more than this fraction of data lines is malformed.
  double max_malformed_fraction = 0.01;

  /// The 7-column layout: start,end,cpu,mem,class,priority,task_id (seconds).
  static TraceFormat simple();
  /// Google clusterdata-2011 task_usage layout (microsecond timestamps, CPU
  /// rate in column 5, canonical memory in column 6). The table carries no
  /// scheduling class, so col_class must be set when the file has one joined in.
  static TraceFormat google_task_usage();

  void validate() const;
};

struct ParseResult {
  std::vector<TraceRecord> records;
  std::size_t data_lines = 0;
  std::size_t malformed = 0;
  /// 1-based line numbers of the first malformed lines (at most 16 kept).
  std::vector<std::size_t> malformed_line_numbers;
};

/// Throws DataError if the stream is unreadable or too many lines are malformed.
ParseResult parse_trace(std::istream& in, const TraceFormat& format);

/// Parses one data line; nullopt if the line is malformed.
std::optional<TraceRecord> parse_line(const std::string& line, const TraceFormat& format);

/// Per-slot resource usage split by delay-sensitivity class.
struct SlottedUsage {
  double slot_seconds = 900.0;
  std::vector<double> total_cpu;
  std::vector<double> total_mem;
  std::array<std::vector<double>, kClassCount> class_cpu;
  std::array<std::vector<double>, kClassCount> class_mem;

  static SlottedUsage zeros(double slot_seconds, std::size_t slots);

  std::size_t slots() const { return total_cpu.size(); }
  /// Recomputes the totals as the class sums, in class order.
  void recompute_totals();
  void validate() const;
};

struct AggregateResult {
  SlottedUsage usage;
  /// Records clipped at 0 or at the horizon.
  std::size_t truncated = 0;
};

/// Pro-rata aggregation: a record active for a fraction f of a slot adds f*cpu
/// and f*mem to it. The result does not depend on the order of the records.
AggregateResult aggregate(const std::vector<TraceRecord>& records, double slot_seconds, double horizon_seconds);

/// Base load + sinusoidal diurnal term + Poisson bursts with exponential heights.
struct SyntheticSpec {
  double horizon_seconds = 29.0 * 86400.0;
  double slot_seconds = 900.0;
  /// Mean aggregate CPU of the base+diurnal component, in server units.
  double base_cpu = 800.0;
  /// Diurnal swing as a fraction of base_cpu, in [0, 1].
  double diurnal_amplitude = 0.0;
  /// If set, overrides diurnal_amplitude so that the diurnal component's
  /// peak-to-average ratio is this value (must lie in [1, 2]).
  std::optional<double> peak_to_average;
  double diurnal_period_seconds = 86400.0;
  /// Time of the first diurnal maximum.
  double peak_time_seconds = 14.0 * 3600.0;
  double burst_rate_per_hour = 0.0;
  /// Mean burst height in server CPU units (exponentially distributed).
  double burst_height_mean = 0.0;
  double burst_duration_seconds = 1800.0;
  std::array<double, kClassCount> class_mix{0.25, 0.25, 0.25, 0.25};
  /// Memory usage per unit of CPU usage.
  double mem_per_cpu = 0.5;

  void validate() const;
};

SlottedUsage synthesize_workload(const SyntheticSpec& spec, std::uint64_t seed);

/// CSV with header: slot_index,total_cpu,total_mem,cpu_class0..3,mem_class0..3
void write_usage_csv(std::ostream& out, const SlottedUsage& usage);
SlottedUsage read_usage_csv(std::istream& in, double slot_seconds);

}  // namespace peakshave::trace
