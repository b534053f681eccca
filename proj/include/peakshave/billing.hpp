#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "peakshave/series.hpp"

namespace peakshave::billing {

/// Two-part tariff: energy price per kWh and peak price per kW of the highest
/// slot-average draw within the billing cycle.
struct Tariff {
  double energy_price = 0.05;
  double peak_price = 20.0;
  double slot_seconds = 900.0;
  double cycle_seconds = 29.0 * 86400.0;

  void validate() const;
  std::size_t slots_per_cycle() const;
  double slot_hours() const { return slot_seconds / 3600.0; }
  double cycle_hours() const { return cycle_seconds / 3600.0; }
};

struct BillExtras {
  double battery_amortization = 0.0;
  double modulation_penalty = 0.0;
};

struct Bill {
  double energy_charge = 0.0;
  double peak_charge = 0.0;
  double battery_amortization = 0.0;
  double modulation_penalty = 0.0;
  double total = 0.0;
  double energy_kwh = 0.0;
  double peak_kw = 0.0;
};

/// Bills a series that covers exactly one cycle of the tariff.
/// Throws DataError on a slot-length or length mismatch.
Bill compute_bill(const PowerSeries& grid_draw, const Tariff& tariff, BillExtras extras = {});

/// Bills an arbitrary span of slot averages without the one-cycle check.
Bill bill_span(std::span<const double> kw, double slot_hours, const Tariff& tariff, BillExtras extras = {});

/// Bill of the same energy spread flat over the cycle.
Bill optimal_flat_bill(const PowerSeries& demand, const Tariff& tariff);

/// Fractional savings of flattening a cycle with peak-to-average ratio r,
/// assuming the non-peak mass sits at the average:
///   peak_price * (r - 1) / (H * energy_price + r * peak_price),  H = cycle hours.
double savings_vs_ratio(double ratio, const Tariff& tariff);

/// One slot at ratio * average and the rest level, so that the mean is exactly
/// `average_kw`. Used to cross-check savings_vs_ratio.
PowerSeries two_level_series(double ratio, double average_kw, const Tariff& tariff);

double peak_to_average(const PowerSeries& series);

/// Dollars with two decimals ("-0.00" is printed as "0.00").
std::string format_money(double dollars);

/// "name=value" lines, dollars rounded to cents.
std::string to_key_value(const Bill& bill);

}  // namespace peakshave::billing
