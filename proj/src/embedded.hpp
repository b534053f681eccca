#pragma once

#include <string_view>

namespace peakshave::detail {

/// Contents of config/batteries.conf at build time.
std::string_view battery_presets_text();

}  // namespace peakshave::detail
