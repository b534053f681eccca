#include "peakshave/kernels.hpp"

#include <arm_neon.h>

#include <limits>

namespace peakshave::kernels {
namespace {

double sum_neon(const double* x, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vaddq_f64(acc0, vld1q_f64(x + i));
    acc1 = vaddq_f64(acc1, vld1q_f64(x + i + 2));
  }
  const float64x2_t acc = vaddq_f64(acc0, acc1);
  double total = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
  for (; i < n; ++i) total += x[i];
  return total;
}

double max_neon(const double* x, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  if (n >= 2) {
    float64x2_t best = vld1q_f64(x);
    for (i = 2; i + 2 <= n; i += 2) best = vmaxq_f64(best, vld1q_f64(x + i));
    const double a = vgetq_lane_f64(best, 0);
    const double b = vgetq_lane_f64(best, 1);
    m = a > b ? a : b;
  }
  for (; i < n; ++i) {
    if (x[i] > m) m = x[i];
  }
  return m;
}

void scale_neon(const double* x, double k, double* out, std::size_t n) {
  const float64x2_t kk = vdupq_n_f64(k);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vmulq_f64(kk, vld1q_f64(x + i)));
  for (; i < n; ++i) out[i] = k * x[i];
}

void add_neon(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void linear_power_neon(const double* cpu, const double* mem, std::size_t n, const LinearPowerParams& p,
                       double* servers_out, double* kw_out) {
  const float64x2_t one = vdupq_n_f64(1.0);
  const float64x2_t zero = vdupq_n_f64(0.0);
  const float64x2_t slack = vdupq_n_f64(kServerCeilSlack);
  const float64x2_t cpu_cap = vdupq_n_f64(p.cpu_capacity);
  const float64x2_t mem_cap = vdupq_n_f64(p.mem_capacity);
  const float64x2_t idle = vdupq_n_f64(p.p_idle_w);
  const float64x2_t range = vdupq_n_f64(p.p_peak_w - p.p_idle_w);
  const float64x2_t pue = vdupq_n_f64(p.pue);
  const float64x2_t kilo = vdupq_n_f64(1000.0);

  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t c = vld1q_f64(cpu + i);
    const float64x2_t by_cpu = vdivq_f64(c, cpu_cap);
    const float64x2_t by_mem = vdivq_f64(vld1q_f64(mem + i), mem_cap);
    const float64x2_t x = vbslq_f64(vcltq_f64(by_cpu, by_mem), by_mem, by_cpu);
    const float64x2_t big = vbslq_f64(vcgtq_f64(x, one), x, one);
    const float64x2_t t = vsubq_f64(x, vmulq_f64(slack, big));
    float64x2_t servers = vbslq_f64(vcgtq_f64(t, zero), vrndpq_f64(t), zero);
    const uint64x2_t bump = vandq_u64(vcgtq_f64(x, zero), vcltq_f64(servers, one));
    servers = vbslq_f64(bump, one, servers);
    const uint64x2_t on = vcgtq_f64(servers, zero);
    float64x2_t util = vdivq_f64(c, vmulq_f64(servers, cpu_cap));
    util = vbslq_f64(vcgtq_f64(util, one), one, util);
    util = vbslq_f64(on, util, zero);
    const float64x2_t watts = vmulq_f64(servers, vaddq_f64(idle, vmulq_f64(range, util)));
    vst1q_f64(servers_out + i, servers);
    vst1q_f64(kw_out + i, vdivq_f64(vmulq_f64(pue, watts), kilo));
  }
  if (i < n) scalar_table().linear_power(cpu + i, mem + i, n - i, p, servers_out + i, kw_out + i);
}

}  // namespace

const Table* neon_table() {
  static const Table table{
      Isa::neon, &sum_neon, &max_neon, &scale_neon, &add_neon, &linear_power_neon,
  };
  return &table;
}

}  // namespace peakshave::kernels
