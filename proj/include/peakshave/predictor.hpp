#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace peakshave::control {

enum class PredictorKind { persistence, moving_average, weighted_average, oracle, noisy_oracle };

std::string_view predictor_name(PredictorKind kind);
/// Throws ConfigError for an unknown method name.
PredictorKind parse_predictor(std::string_view name);

struct PredictorConfig {
  PredictorKind kind = PredictorKind::oracle;
  /// Number of recent slots averaged by moving_average.
  std::size_t average_window = 4;
  /// Weights of weighted_average, most recent slot first. Nonnegative, not all zero.
  std::vector<double> weights{0.5, 0.3, 0.2};
  /// Standard deviation of the multiplicative noise of noisy_oracle.
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Predicted demand for the next window_length slots.
struct Prediction {
  std::vector<double> kw;
  /// 0 for exact predictions, otherwise the multiplicative noise sigma.
  double error_sigma = 0.0;

  std::size_t window_length() const { return kw.size(); }
};

/// True for methods that predict from history alone.
bool uses_history(PredictorKind kind);

/// Predicts `window` slots starting at slot `origin`. `history` holds the
/// observed demand before `origin`; `truth` the actual demand from `origin`
/// on (only read by the oracle methods, which need at least `window` values).
/// History methods require a nonempty history (DataError otherwise). Their
/// output never exceeds the largest value in the history.
Prediction predict(std::span<const double> history, std::span<const double> truth, std::size_t window,
                   const PredictorConfig& config, std::size_t origin = 0);

}  // namespace peakshave::control
