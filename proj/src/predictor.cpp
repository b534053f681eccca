#include "peakshave/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "peakshave/error.hpp"

namespace peakshave::control {

std::string_view predictor_name(PredictorKind kind) {
  switch (kind) {
    case PredictorKind::persistence: return "persistence";
    case PredictorKind::moving_average: return "moving_average";
    case PredictorKind::weighted_average: return "weighted_average";
    case PredictorKind::oracle: return "oracle";
    case PredictorKind::noisy_oracle: return "noisy_oracle";
  }
  return "unknown";
}

PredictorKind parse_predictor(std::string_view name) {
  if (name == "persistence") return PredictorKind::persistence;
  if (name == "moving_average") return PredictorKind::moving_average;
  if (name == "weighted_average") return PredictorKind::weighted_average;
  if (name == "oracle") return PredictorKind::oracle;
  if (name == "noisy_oracle") return PredictorKind::noisy_oracle;
  throw ConfigError("unknown prediction method '" + std::string(name) + "'");
}

bool uses_history(PredictorKind kind) {
  return kind == PredictorKind::persistence || kind == PredictorKind::moving_average ||
         kind == PredictorKind::weighted_average;
}

void PredictorConfig::validate() const {
  if (kind == PredictorKind::moving_average && average_window == 0) {
    throw ConfigError("moving_average needs a window of at least one slot");
  }
  if (kind == PredictorKind::weighted_average) {
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("weighted_average weights must be finite and >= 0");
      total += w;
    }
    if (!(total > 0.0)) throw ConfigError("weighted_average needs at least one positive weight");
  }
  if (kind == PredictorKind::noisy_oracle && !(noise_sigma >= 0.0 && std::isfinite(noise_sigma))) {
    throw ConfigError("noise sigma must be finite and >= 0");
  }
}

namespace {

// Average of the most recent values; weights[0] applies to the latest slot.
// Clamped to the largest value averaged, which rounding could otherwise exceed.
double recent_average(std::span<const double> history, std::span<const double> weights) {
  const std::size_t used = std::min(history.size(), weights.size());
  double num = 0.0;
  double den = 0.0;
  double top = 0.0;
  for (std::size_t i = 0; i < used; ++i) {
    const double v = history[history.size() - 1 - i];
    num += weights[i] * v;
    den += weights[i];
    top = std::max(top, v);
  }
  if (!(den > 0.0)) return history.back();
  return std::min(num / den, top);
}

}  // namespace

Prediction predict(std::span<const double> history, std::span<const double> truth, std::size_t window,
                   const PredictorConfig& config, std::size_t origin) {
  config.validate();
  if (window == 0) throw DataError("prediction window must be at least one slot");
  Prediction out;
  if (uses_history(config.kind)) {
    if (history.empty()) throw DataError(std::string(predictor_name(config.kind)) + " needs a nonempty history");
    double level = history.back();
    if (config.kind == PredictorKind::moving_average) {
      const std::vector<double> ones(config.average_window, 1.0);
      level = recent_average(history, ones);
    } else if (config.kind == PredictorKind::weighted_average) {
      level = recent_average(history, config.weights);
    }
    out.kw.assign(window, std::max(0.0, level));
    return out;
  }

  if (truth.size() < window) throw DataError("oracle prediction runs past the end of the series");
  out.kw.assign(truth.begin(), truth.begin() + static_cast<std::ptrdiff_t>(window));
  if (config.kind == PredictorKind::noisy_oracle && config.noise_sigma > 0.0) {
    out.error_sigma = config.noise_sigma;
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(origin), static_cast<std::uint32_t>(origin >> 32)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> noise(0.0, config.noise_sigma);
    for (double& v : out.kw) v = std::max(0.0, v * (1.0 + noise(rng)));
  }
  return out;
}

}  // namespace peakshave::control
