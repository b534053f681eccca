#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace peakshave {

/// Number of delay-sensitivity classes (0 = not delay sensitive ... 3 = highly sensitive).
inline constexpr std::size_t kClassCount = 4;

/// Slotted facility power demand: average kW over each slot.
struct PowerSeries {
  double slot_seconds = 900.0;
  std::vector<double> kw;

  std::size_t size() const { return kw.size(); }
  bool empty() const { return kw.empty(); }
  double slot_hours() const { return slot_seconds / 3600.0; }
  std::span<const double> values() const { return kw; }

  /// Throws DataError on a non-positive slot length or a negative/non-finite value.
  void validate() const;

  double energy_kwh() const;
  double peak_kw() const;
  double mean_kw() const;
};

using ClassSeries = std::array<PowerSeries, kClassCount>;

/// Element-wise sum of the class series (classes added in index order).
PowerSeries total_of(const ClassSeries& classes);

}  // namespace peakshave
