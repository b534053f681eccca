#include "peakshave/trace_ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <string_view>
#include <tuple>

#include "peakshave/config.hpp"
#include "peakshave/error.hpp"

namespace peakshave::trace {
namespace {

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = line.find(delim, pos);
    out.push_back(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

std::string_view strip(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool to_double(std::string_view s, double& out) {
  s = strip(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

bool to_int(std::string_view s, std::int64_t& out) {
  s = strip(s);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

int max_column(const TraceFormat& f) {
  return std::max({f.col_start, f.col_end, f.col_cpu, f.col_mem, f.col_class, f.col_priority, f.col_task_id});
}

std::size_t slot_count(double slot_seconds, double horizon_seconds, const char* what) {
  if (!(slot_seconds > 0.0) || !(horizon_seconds > 0.0) || !std::isfinite(horizon_seconds)) {
    throw DataError(std::string(what) + ": slot length and horizon must be positive");
  }
  const double n = std::round(horizon_seconds / slot_seconds);
  if (n < 1.0 || std::abs(n * slot_seconds - horizon_seconds) > 1e-9 * horizon_seconds) {
    throw DataError(std::string(what) + ": slot length must divide the horizon");
  }
  return static_cast<std::size_t>(n);
}

}  // namespace

TraceFormat TraceFormat::simple() { return TraceFormat{}; }

TraceFormat TraceFormat::google_task_usage() {
  TraceFormat f;
  f.col_start = 0;
  f.col_end = 1;
  f.col_task_id = 2;
  f.col_cpu = 5;
  f.col_mem = 6;
  f.col_class = -1;
  f.col_priority = -1;
  f.time_scale = 1e-6;
  // The first 600 s of the public trace are an offset window before the trace epoch.
  f.time_offset_s = 600.0;
  return f;
}

void TraceFormat::validate() const {
  if (col_start < 0 || col_end < 0 || col_cpu < 0) throw ConfigError("trace format: start, end and cpu columns are required");
  for (int c : {col_mem, col_class, col_priority, col_task_id}) {
    if (c < -1) throw ConfigError("trace format: column index must be >= -1");
  }
  if (!(time_scale > 0.0)) throw ConfigError("trace format: time_scale must be positive");
  if (default_class < 0 || default_class >= static_cast<int>(kClassCount)) {
    throw ConfigError("trace format: default_class must be in 0..3");
  }
  if (!(max_malformed_fraction >= 0.0 && max_malformed_fraction <= 1.0)) {
    throw ConfigError("trace format: max_malformed_fraction must be in [0, 1]");
  }
}

std::optional<TraceRecord> parse_line(const std::string& line, const TraceFormat& format) {
  const auto fields = split(line, format.delimiter);
  if (static_cast<int>(fields.size()) <= max_column(format)) return std::nullopt;

  TraceRecord r;
  double start = 0.0;
  double end = 0.0;
  if (!to_double(fields[format.col_start], start) || !to_double(fields[format.col_end], end)) return std::nullopt;
  r.start_s = start * format.time_scale - format.time_offset_s;
  r.end_s = end * format.time_scale - format.time_offset_s;
  if (!to_double(fields[format.col_cpu], r.cpu)) return std::nullopt;
  if (format.col_mem >= 0 && !to_double(fields[format.col_mem], r.mem)) return std::nullopt;
  r.class_id = format.default_class;
  if (format.col_class >= 0) {
    std::int64_t c = 0;
    if (!to_int(fields[format.col_class], c)) return std::nullopt;
    if (c < 0 || c >= static_cast<std::int64_t>(kClassCount)) return std::nullopt;
    r.class_id = static_cast<int>(c);
  }
  if (format.col_priority >= 0) {
    if (!to_int(fields[format.col_priority], r.priority) || r.priority < 0) return std::nullopt;
  }
  if (format.col_task_id >= 0) r.task_id = std::string(strip(fields[format.col_task_id]));

  if (!(r.end_s > r.start_s) || r.cpu < 0.0 || r.mem < 0.0) return std::nullopt;
  return r;
}

ParseResult parse_trace(std::istream& in, const TraceFormat& format) {
  format.validate();
  if (!in.good()) throw DataError("trace stream is not readable");
  ParseResult out;
  std::string line;
  std::size_t line_no = 0;
  bool header_pending = format.has_header;
  while (std::getline(in, line)) {
    ++line_no;
    if (strip(line).empty()) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    ++out.data_lines;
    if (auto rec = parse_line(line, format)) {
      out.records.push_back(std::move(*rec));
    } else {
      ++out.malformed;
      if (out.malformed_line_numbers.size() < 16) out.malformed_line_numbers.push_back(line_no);
    }
  }
  if (in.bad()) throw DataError("error while reading trace stream");
  if (static_cast<double>(out.malformed) > format.max_malformed_fraction * static_cast<double>(out.data_lines)) {
    std::string where;
    for (auto n : out.malformed_line_numbers) where += (where.empty() ? "" : ",") + std::to_string(n);
    throw DataError("trace: " + std::to_string(out.malformed) + " of " + std::to_string(out.data_lines) +
                    " lines malformed (lines " + where + ")");
  }
  return out;
}

SlottedUsage SlottedUsage::zeros(double slot_seconds, std::size_t slots) {
  SlottedUsage u;
  u.slot_seconds = slot_seconds;
  u.total_cpu.assign(slots, 0.0);
  u.total_mem.assign(slots, 0.0);
  for (std::size_t c = 0; c < kClassCount; ++c) {
    u.class_cpu[c].assign(slots, 0.0);
    u.class_mem[c].assign(slots, 0.0);
  }
  return u;
}

void SlottedUsage::recompute_totals() {
  const std::size_t n = class_cpu[0].size();
  total_cpu.assign(n, 0.0);
  total_mem.assign(n, 0.0);
  for (std::size_t c = 0; c < kClassCount; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      total_cpu[i] += class_cpu[c][i];
      total_mem[i] += class_mem[c][i];
    }
  }
}

void SlottedUsage::validate() const {
  if (!(slot_seconds > 0.0)) throw DataError("usage: slot length must be positive");
  const std::size_t n = total_cpu.size();
  if (total_mem.size() != n) throw DataError("usage: cpu and mem series lengths differ");
  for (std::size_t c = 0; c < kClassCount; ++c) {
    if (class_cpu[c].size() != n || class_mem[c].size() != n) throw DataError("usage: class series lengths differ");
  }
  for (std::size_t i = 0; i < n; ++i) {
    double cpu = 0.0;
    double mem = 0.0;
    for (std::size_t c = 0; c < kClassCount; ++c) {
      if (!(class_cpu[c][i] >= 0.0) || !(class_mem[c][i] >= 0.0)) throw DataError("usage: negative class total");
      cpu += class_cpu[c][i];
      mem += class_mem[c][i];
    }
    if (!(total_cpu[i] >= 0.0) || !(total_mem[i] >= 0.0)) throw DataError("usage: negative total");
    if (std::abs(cpu - total_cpu[i]) > 1e-9 * std::max(1.0, total_cpu[i]) ||
        std::abs(mem - total_mem[i]) > 1e-9 * std::max(1.0, total_mem[i])) {
      throw DataError("usage: class totals do not sum to the slot total at slot " + std::to_string(i));
    }
  }
}

AggregateResult aggregate(const std::vector<TraceRecord>& records, double slot_seconds, double horizon_seconds) {
  const std::size_t n = slot_count(slot_seconds, horizon_seconds, "aggregate");
  AggregateResult out;
  out.usage = SlottedUsage::zeros(slot_seconds, n);

  // Floating-point sums depend on order; a canonical order makes the result
  // independent of how the records arrived.
  std::vector<const TraceRecord*> sorted;
  sorted.reserve(records.size());
  for (const auto& r : records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(), [](const TraceRecord* a, const TraceRecord* b) {
    return std::tie(a->start_s, a->end_s, a->cpu, a->mem, a->class_id, a->priority, a->task_id) <
           std::tie(b->start_s, b->end_s, b->cpu, b->mem, b->class_id, b->priority, b->task_id);
  });

  for (const TraceRecord* r : sorted) {
    if (r->class_id < 0 || r->class_id >= static_cast<int>(kClassCount)) {
      throw DataError("aggregate: class id out of range");
    }
    const double s = std::max(0.0, r->start_s);
    const double e = std::min(horizon_seconds, r->end_s);
    if (s != r->start_s || e != r->end_s) ++out.truncated;
    if (!(e > s)) continue;
    const auto first = static_cast<std::size_t>(std::floor(s / slot_seconds));
    auto last = static_cast<std::size_t>(std::ceil(e / slot_seconds));
    last = std::min(last, n);
    auto& cpu = out.usage.class_cpu[r->class_id];
    auto& mem = out.usage.class_mem[r->class_id];
    for (std::size_t k = std::min(first, n); k < last; ++k) {
      const double lo = std::max(s, static_cast<double>(k) * slot_seconds);
      const double hi = std::min(e, static_cast<double>(k + 1) * slot_seconds);
      if (!(hi > lo)) continue;
      const double f = (hi - lo) / slot_seconds;
      cpu[k] += f * r->cpu;
      mem[k] += f * r->mem;
    }
  }
  out.usage.recompute_totals();
  return out;
}

void SyntheticSpec::validate() const {
  if (!(horizon_seconds > 0.0) || !(slot_seconds > 0.0)) {
    throw ConfigError("synthetic workload: horizon and slot length must be positive");
  }
  if (!(base_cpu >= 0.0)) throw ConfigError("synthetic workload: base_cpu must be >= 0");
  if (!(diurnal_amplitude >= 0.0 && diurnal_amplitude <= 1.0)) {
    throw ConfigError("synthetic workload: diurnal_amplitude must be in [0, 1]");
  }
  if (peak_to_average && !(*peak_to_average >= 1.0 && *peak_to_average <= 2.0)) {
    throw ConfigError("synthetic workload: peak_to_average must be in [1, 2]");
  }
  if (!(diurnal_period_seconds > 0.0)) throw ConfigError("synthetic workload: diurnal period must be positive");
  if (!(burst_rate_per_hour >= 0.0) || !(burst_height_mean >= 0.0)) {
    throw ConfigError("synthetic workload: burst rate and height must be >= 0");
  }
  if (!(burst_duration_seconds > 0.0)) throw ConfigError("synthetic workload: burst duration must be positive");
  double mix = 0.0;
  for (double m : class_mix) {
    if (!(m >= 0.0)) throw ConfigError("synthetic workload: class_mix entries must be >= 0");
    mix += m;
  }
  if (!(mix > 0.0)) throw ConfigError("synthetic workload: class_mix must not be all zero");
  if (!(mem_per_cpu >= 0.0)) throw ConfigError("synthetic workload: mem_per_cpu must be >= 0");
}

SlottedUsage synthesize_workload(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t n = [&] {
    try {
      return slot_count(spec.slot_seconds, spec.horizon_seconds, "synthetic workload");
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    }
  }();
  SlottedUsage u = SlottedUsage::zeros(spec.slot_seconds, n);

  double mix_total = 0.0;
  for (double m : spec.class_mix) mix_total += m;
  const double amplitude = spec.peak_to_average ? *spec.peak_to_average - 1.0 : spec.diurnal_amplitude;
  const double omega = 2.0 * std::numbers::pi / spec.diurnal_period_seconds;

  for (std::size_t k = 0; k < n; ++k) {
    const double a = static_cast<double>(k) * spec.slot_seconds - spec.peak_time_seconds;
    const double b = a + spec.slot_seconds;
    // Slot average of cos(omega * t).
    const double avg_cos = (std::sin(omega * b) - std::sin(omega * a)) / (omega * spec.slot_seconds);
    const double level = spec.base_cpu * (1.0 + amplitude * avg_cos);
    for (std::size_t c = 0; c < kClassCount; ++c) u.class_cpu[c][k] = level * (spec.class_mix[c] / mix_total);
  }

  if (spec.burst_rate_per_hour > 0.0 && spec.burst_height_mean > 0.0) {
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> gap(spec.burst_rate_per_hour / 3600.0);
    std::exponential_distribution<double> height(1.0 / spec.burst_height_mean);
    std::discrete_distribution<int> klass(spec.class_mix.begin(), spec.class_mix.end());
    double t = gap(rng);
    while (t < spec.horizon_seconds) {
      const double h = height(rng);
      const int c = klass(rng);
      const double end = std::min(spec.horizon_seconds, t + spec.burst_duration_seconds);
      const auto first = static_cast<std::size_t>(std::floor(t / spec.slot_seconds));
      for (std::size_t k = first; k < n; ++k) {
        const double lo = std::max(t, static_cast<double>(k) * spec.slot_seconds);
        const double hi = std::min(end, static_cast<double>(k + 1) * spec.slot_seconds);
        if (!(hi > lo)) break;
        u.class_cpu[c][k] += h * (hi - lo) / spec.slot_seconds;
      }
      t += gap(rng);
    }
  }

  for (std::size_t c = 0; c < kClassCount; ++c) {
    for (std::size_t k = 0; k < n; ++k) {
      if (u.class_cpu[c][k] < 0.0) u.class_cpu[c][k] = 0.0;
      u.class_mem[c][k] = spec.mem_per_cpu * u.class_cpu[c][k];
    }
  }
  u.recompute_totals();
  return u;
}

void write_usage_csv(std::ostream& out, const SlottedUsage& usage) {
  out << "slot_index,total_cpu,total_mem";
  for (std::size_t c = 0; c < kClassCount; ++c) out << ",cpu_class" << c;
  for (std::size_t c = 0; c < kClassCount; ++c) out << ",mem_class" << c;
  out << '\n';
  for (std::size_t k = 0; k < usage.slots(); ++k) {
    out << k << ',' << format_double(usage.total_cpu[k]) << ',' << format_double(usage.total_mem[k]);
    for (std::size_t c = 0; c < kClassCount; ++c) out << ',' << format_double(usage.class_cpu[c][k]);
    for (std::size_t c = 0; c < kClassCount; ++c) out << ',' << format_double(usage.class_mem[c][k]);
    out << '\n';
  }
}

SlottedUsage read_usage_csv(std::istream& in, double slot_seconds) {
  if (!in.good()) throw DataError("usage stream is not readable");
  SlottedUsage u = SlottedUsage::zeros(slot_seconds, 0);
  std::string line;
  std::size_t line_no = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (strip(line).empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    const auto fields = split(line, ',');
    double v[3 + 2 * kClassCount];
    bool ok = fields.size() == 3 + 2 * kClassCount;
    for (std::size_t i = 0; ok && i < fields.size(); ++i) ok = to_double(fields[i], v[i]);
    if (!ok || v[0] != static_cast<double>(u.slots())) {
      throw DataError("usage csv: malformed line " + std::to_string(line_no));
    }
    u.total_cpu.push_back(v[1]);
    u.total_mem.push_back(v[2]);
    for (std::size_t c = 0; c < kClassCount; ++c) {
      u.class_cpu[c].push_back(v[3 + c]);
      u.class_mem[c].push_back(v[3 + kClassCount + c]);
    }
  }
  u.validate();
  return u;
}

}  // namespace peakshave::trace
