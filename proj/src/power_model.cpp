#include "peakshave/power_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "peakshave/error.hpp"
#include "peakshave/kernels.hpp"

namespace peakshave::power {
namespace {

kernels::LinearPowerParams params_of(const ServerSpec& spec, double pue) {
  return {spec.cpu_capacity, spec.mem_capacity, spec.p_idle_w, spec.p_peak_w, pue};
}

void check_pue(double pue) {
  if (!(pue >= 1.0) || !std::isfinite(pue)) throw ConfigError("pue must be a finite value >= 1");
}

}  // namespace

void ServerSpec::validate() const {
  if (!(cpu_capacity > 0.0) || !(mem_capacity > 0.0)) throw ConfigError("server: capacities must be positive");
  if (!(p_idle_w >= 0.0) || !(p_peak_w >= p_idle_w) || !std::isfinite(p_peak_w)) {
    throw ConfigError("server: need 0 <= p_idle <= p_peak");
  }
  if (curve.empty()) return;
  if (curve.size() < 2 || curve.front().utilization != 0.0 || curve.front().fraction != 0.0 ||
      curve.back().utilization != 1.0 || curve.back().fraction != 1.0) {
    throw ConfigError("server: power curve must run from (0,0) to (1,1)");
  }
  for (std::size_t i = 1; i < curve.size(); ++i) {
    if (!(curve[i].utilization > curve[i - 1].utilization) || !(curve[i].fraction >= curve[i - 1].fraction)) {
      throw ConfigError("server: power curve must be increasing in utilization and nondecreasing in power");
    }
  }
}

double ServerSpec::watts_at(double utilization) const {
  const double u = std::clamp(utilization, 0.0, 1.0);
  const double range = p_peak_w - p_idle_w;
  if (curve.empty()) return p_idle_w + range * u;
  std::size_t i = 1;
  while (i + 1 < curve.size() && curve[i].utilization < u) ++i;
  const auto& a = curve[i - 1];
  const auto& b = curve[i];
  const double f = a.fraction + (b.fraction - a.fraction) * (u - a.utilization) / (b.utilization - a.utilization);
  return p_idle_w + range * f;
}

std::uint64_t estimate_servers(double total_cpu, double total_mem, const ServerSpec& spec) {
  double servers = 0.0;
  double kw = 0.0;
  kernels::scalar_table().linear_power(&total_cpu, &total_mem, 1, params_of(spec, 1.0), &servers, &kw);
  return static_cast<std::uint64_t>(servers);
}

PowerSeries dc_power(const trace::SlottedUsage& usage, const ServerSpec& spec, double pue) {
  spec.validate();
  check_pue(pue);
  usage.validate();
  const std::size_t n = usage.slots();
  PowerSeries out;
  out.slot_seconds = usage.slot_seconds;
  out.kw.assign(n, 0.0);
  std::vector<double> servers(n, 0.0);
  kernels::active().linear_power(usage.total_cpu.data(), usage.total_mem.data(), n, params_of(spec, pue),
                                 servers.data(), out.kw.data());
  if (!spec.curve.empty()) {
    for (std::size_t k = 0; k < n; ++k) {
      const double u = servers[k] > 0.0 ? usage.total_cpu[k] / (servers[k] * spec.cpu_capacity) : 0.0;
      out.kw[k] = (pue * (servers[k] * spec.watts_at(u))) / 1000.0;
    }
  }
  return out;
}

ClassBreakdown class_power_breakdown(const trace::SlottedUsage& usage, const ServerSpec& spec, double pue) {
  const PowerSeries total = dc_power(usage, spec, pue);
  ClassBreakdown out;
  for (auto& s : out.classes) {
    s.slot_seconds = total.slot_seconds;
    s.kw.assign(total.size(), 0.0);
  }
  for (std::size_t k = 0; k < total.size(); ++k) {
    const double kw = total.kw[k];
    if (kw == 0.0) continue;
    if (usage.total_cpu[k] > 0.0) {
      for (std::size_t c = 0; c < kClassCount; ++c) {
        out.classes[c].kw[k] = kw * (usage.class_cpu[c][k] / usage.total_cpu[k]);
      }
      continue;
    }
    // Servers are on for memory alone: split their idle power equally.
    ++out.idle_apportioned_slots;
    std::size_t holders = 0;
    for (std::size_t c = 0; c < kClassCount; ++c) holders += usage.class_mem[c][k] > 0.0 ? 1 : 0;
    if (holders == 0) {
      out.classes[0].kw[k] = kw;
      continue;
    }
    for (std::size_t c = 0; c < kClassCount; ++c) {
      if (usage.class_mem[c][k] > 0.0) out.classes[c].kw[k] = kw / static_cast<double>(holders);
    }
  }
  return out;
}

}  // namespace peakshave::power
