#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "peakshave/error.hpp"
#include "peakshave/predictor.hpp"
#include "test_support.hpp"

using namespace peakshave;
using namespace peakshave::control;
using peakshave::testing::Gen;

namespace {

PredictorConfig with(PredictorKind k) {
  PredictorConfig c;
  c.kind = k;
  return c;
}

}  // namespace

TEST_CASE("predictor examples") {
  const std::vector<double> h{10, 20, 42};
  const auto p = predict(h, {}, 4, with(PredictorKind::persistence));
  CHECK(p.kw == std::vector<double>(4, 42.0));
  CHECK(p.window_length() == 4);

  auto ma = with(PredictorKind::moving_average);
  ma.average_window = 3;
  CHECK(predict(std::vector<double>{10, 20, 30}, {}, 1, ma).kw[0] == 20.0);

  auto wa = with(PredictorKind::weighted_average);
  wa.weights = {0.5, 0.5};
  CHECK(predict(std::vector<double>{1, 10, 30}, {}, 2, wa).kw == std::vector<double>{20, 20});
}

TEST_CASE("oracle methods") {
  const std::vector<double> truth{5, 6, 7, 8};
  CHECK(predict({}, truth, 3, with(PredictorKind::oracle)).kw == std::vector<double>{5, 6, 7});
  CHECK_THROWS_AS(predict({}, truth, 5, with(PredictorKind::oracle)), DataError);

  auto noisy = with(PredictorKind::noisy_oracle);
  noisy.seed = 9;
  const auto a = predict({}, truth, 4, noisy, 17);
  const auto b = predict({}, truth, 4, noisy, 17);
  CHECK(a.kw == b.kw);
  CHECK(a.error_sigma == 0.1);
  CHECK(a.kw != predict({}, truth, 4, noisy, 18).kw);
  noisy.noise_sigma = 0;
  CHECK(predict({}, truth, 4, noisy, 17).kw == truth);
}

TEST_CASE("errors") {
  CHECK_THROWS_AS(parse_predictor("crystal_ball"), ConfigError);
  CHECK(parse_predictor("noisy_oracle") == PredictorKind::noisy_oracle);
  CHECK_THROWS_AS(predict({}, {}, 2, with(PredictorKind::persistence)), DataError);
  CHECK_THROWS_AS(predict(std::vector<double>{1}, {}, 0, with(PredictorKind::persistence)), DataError);
  auto bad = with(PredictorKind::weighted_average);
  bad.weights = {0.5, -0.1};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.weights = {0, 0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  auto neg = with(PredictorKind::noisy_oracle);
  neg.noise_sigma = -1;
  CHECK_THROWS_AS(neg.validate(), ConfigError);
}

TEST_CASE("noisy predictions stay nonnegative") {
  auto noisy = with(PredictorKind::noisy_oracle);
  noisy.noise_sigma = 3.0;
  const std::vector<double> truth(50, 10.0);
  for (std::size_t o = 0; o < 50; ++o) {
    for (double v : predict({}, truth, 50, noisy, o).kw) CHECK(v >= 0);
  }
}

TEST_CASE("average predictors never exceed the history maximum") {
  Gen g(61);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> h(static_cast<std::size_t>(g.integer(1, 40)));
    const double scale = std::pow(10.0, g.uniform(-3, 6));
    for (double& v : h) v = g.chance(0.1) ? scale : g.uniform(0, scale);
    PredictorConfig c = with(g.chance(0.5) ? PredictorKind::moving_average : PredictorKind::weighted_average);
    c.average_window = static_cast<std::size_t>(g.integer(1, 50));
    c.weights.assign(static_cast<std::size_t>(g.integer(1, 10)), 0.0);
    for (double& w : c.weights) w = g.uniform(0, 1);
    c.weights[0] += 1e-3;
    const double top = *std::max_element(h.begin(), h.end());
    for (double v : predict(h, {}, 3, c).kw) CHECK(v <= top);
  }
}
