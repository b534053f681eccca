#include "peakshave/billing.hpp"

#include <cmath>
#include <cstdio>

#include "peakshave/config.hpp"
#include "peakshave/error.hpp"
#include "peakshave/kernels.hpp"

namespace peakshave::billing {

void Tariff::validate() const {
  if (!(energy_price >= 0.0) || !(peak_price >= 0.0) || !std::isfinite(energy_price) || !std::isfinite(peak_price)) {
    throw ConfigError("tariff: prices must be finite and >= 0");
  }
  if (!(slot_seconds > 0.0) || !(cycle_seconds > 0.0) || !std::isfinite(cycle_seconds)) {
    throw ConfigError("tariff: slot and cycle lengths must be positive");
  }
  const double n = std::round(cycle_seconds / slot_seconds);
  if (n < 1.0 || std::abs(n * slot_seconds - cycle_seconds) > 1e-9 * cycle_seconds) {
    throw ConfigError("tariff: slot length must divide the cycle length");
  }
}

std::size_t Tariff::slots_per_cycle() const {
  return static_cast<std::size_t>(std::round(cycle_seconds / slot_seconds));
}

Bill bill_span(std::span<const double> kw, double slot_hours, const Tariff& tariff, BillExtras extras) {
  if (!(extras.battery_amortization >= 0.0) || !(extras.modulation_penalty >= 0.0)) {
    throw DataError("bill: amortization and penalty must be >= 0");
  }
  Bill b;
  b.energy_kwh = kernels::sum(kw) * slot_hours;
  b.peak_kw = kw.empty() ? 0.0 : kernels::max(kw);
  b.energy_charge = tariff.energy_price * b.energy_kwh;
  b.peak_charge = tariff.peak_price * b.peak_kw;
  b.battery_amortization = extras.battery_amortization;
  b.modulation_penalty = extras.modulation_penalty;
  b.total = b.energy_charge + b.peak_charge + b.battery_amortization + b.modulation_penalty;
  return b;
}

namespace {

void check_cycle(const PowerSeries& series, const Tariff& tariff) {
  tariff.validate();
  series.validate();
  if (std::abs(series.slot_seconds - tariff.slot_seconds) > 1e-9 * tariff.slot_seconds) {
    throw DataError("bill: series slot length " + format_double(series.slot_seconds) + " s differs from tariff slot " +
                    format_double(tariff.slot_seconds) + " s");
  }
  if (series.size() != tariff.slots_per_cycle()) {
    throw DataError("bill: series has " + std::to_string(series.size()) + " slots, cycle has " +
                    std::to_string(tariff.slots_per_cycle()));
  }
}

}  // namespace

Bill compute_bill(const PowerSeries& grid_draw, const Tariff& tariff, BillExtras extras) {
  check_cycle(grid_draw, tariff);
  return bill_span(grid_draw.kw, grid_draw.slot_hours(), tariff, extras);
}

Bill optimal_flat_bill(const PowerSeries& demand, const Tariff& tariff) {
  check_cycle(demand, tariff);
  Bill b = bill_span(demand.kw, demand.slot_hours(), tariff);
  b.peak_kw = demand.mean_kw();
  b.peak_charge = tariff.peak_price * b.peak_kw;
  b.total = b.energy_charge + b.peak_charge;
  return b;
}

double savings_vs_ratio(double ratio, const Tariff& tariff) {
  tariff.validate();
  if (!(ratio >= 1.0) || !std::isfinite(ratio)) throw ConfigError("peak-to-average ratio must be >= 1");
  const double denom = tariff.cycle_hours() * tariff.energy_price + ratio * tariff.peak_price;
  if (denom == 0.0) return 0.0;
  return tariff.peak_price * (ratio - 1.0) / denom;
}

PowerSeries two_level_series(double ratio, double average_kw, const Tariff& tariff) {
  tariff.validate();
  if (!(ratio >= 1.0) || !std::isfinite(ratio)) throw ConfigError("peak-to-average ratio must be >= 1");
  if (!(average_kw >= 0.0)) throw ConfigError("average power must be >= 0");
  const std::size_t n = tariff.slots_per_cycle();
  const double slots = static_cast<double>(n);
  if (n < 2 || ratio > slots) throw DataError("two-level series: ratio exceeds the number of slots");
  PowerSeries s;
  s.slot_seconds = tariff.slot_seconds;
  const double rest = (slots * average_kw - ratio * average_kw) / (slots - 1.0);
  s.kw.assign(n, rest);
  s.kw[n / 2] = ratio * average_kw;
  return s;
}

double peak_to_average(const PowerSeries& series) {
  const double mean = series.mean_kw();
  return mean > 0.0 ? series.peak_kw() / mean : 1.0;
}

std::string format_money(double dollars) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", dollars);
  std::string out(buf);
  if (out == "-0.00") out = "0.00";
  return out;
}

std::string to_key_value(const Bill& bill) {
  std::string out;
  out += "energy_charge=" + format_money(bill.energy_charge) + "\n";
  out += "peak_charge=" + format_money(bill.peak_charge) + "\n";
  out += "battery_amortization=" + format_money(bill.battery_amortization) + "\n";
  out += "modulation_penalty=" + format_money(bill.modulation_penalty) + "\n";
  out += "total=" + format_money(bill.total) + "\n";
  out += "energy_kwh=" + format_double(bill.energy_kwh) + "\n";
  out += "peak_kw=" + format_double(bill.peak_kw) + "\n";
  return out;
}

}  // namespace peakshave::billing
