#include "peakshave/kernels.hpp"

#include <cmath>
#include <limits>

namespace peakshave::kernels {
namespace {

double sum_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double max_scalar(const double* x, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] > m) m = x[i];
  }
  return m;
}

void scale_scalar(const double* x, double k, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = k * x[i];
}

void add_scalar(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void linear_power_scalar(const double* cpu, const double* mem, std::size_t n, const LinearPowerParams& p,
                         double* servers_out, double* kw_out) {
  const double range = p.p_peak_w - p.p_idle_w;
  for (std::size_t i = 0; i < n; ++i) {
    const double by_cpu = cpu[i] / p.cpu_capacity;
    const double by_mem = mem[i] / p.mem_capacity;
    const double x = by_cpu < by_mem ? by_mem : by_cpu;
    const double t = x - kServerCeilSlack * (x > 1.0 ? x : 1.0);
    double servers = t > 0.0 ? std::ceil(t) : 0.0;
    if (x > 0.0 && servers < 1.0) servers = 1.0;
    double u = 0.0;
    if (servers > 0.0) {
      u = cpu[i] / (servers * p.cpu_capacity);
      if (u > 1.0) u = 1.0;
    }
    const double watts = servers * (p.p_idle_w + range * u);
    servers_out[i] = servers;
    kw_out[i] = (p.pue * watts) / 1000.0;
  }
}

}  // namespace

const Table& scalar_table() {
  static const Table table{
      Isa::scalar, &sum_scalar, &max_scalar, &scale_scalar, &add_scalar, &linear_power_scalar,
  };
  return table;
}

}  // namespace peakshave::kernels
