#include "peakshave/series.hpp"

#include <cmath>
#include <string>

#include "peakshave/error.hpp"
#include "peakshave/kernels.hpp"

namespace peakshave {

void PowerSeries::validate() const {
  if (!(slot_seconds > 0.0) || !std::isfinite(slot_seconds)) {
    throw DataError("power series: slot length must be positive");
  }
  for (std::size_t i = 0; i < kw.size(); ++i) {
    if (!std::isfinite(kw[i]) || kw[i] < 0.0) {
      throw DataError("power series: slot " + std::to_string(i) + " is negative or not finite");
    }
  }
}

double PowerSeries::energy_kwh() const { return kernels::sum(kw) * slot_hours(); }

double PowerSeries::peak_kw() const { return kw.empty() ? 0.0 : kernels::max(kw); }

double PowerSeries::mean_kw() const { return kw.empty() ? 0.0 : kernels::sum(kw) / static_cast<double>(kw.size()); }

PowerSeries total_of(const ClassSeries& classes) {
  PowerSeries out;
  out.slot_seconds = classes[0].slot_seconds;
  out.kw = classes[0].kw;
  const auto& table = kernels::active();
  for (std::size_t c = 1; c < kClassCount; ++c) {
    if (classes[c].size() != out.size()) throw DataError("class series lengths differ");
    table.add(out.kw.data(), classes[c].kw.data(), out.kw.data(), out.size());
  }
  return out;
}

}  // namespace peakshave
