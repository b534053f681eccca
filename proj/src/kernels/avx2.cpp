// Compiled with -mavx2 only (no FMA) so every lane rounds like the scalar path.
#include "peakshave/kernels.hpp"

#include <immintrin.h>

#include <cmath>
#include <limits>

namespace peakshave::kernels {
namespace {

double sum_avx2(const double* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + 4));
  }
  for (; i + 4 <= n; i += 4) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, _mm256_add_pd(acc0, acc1));
  double total = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) total += x[i];
  return total;
}

double max_avx2(const double* x, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  if (n >= 4) {
    __m256d best = _mm256_loadu_pd(x);
    for (i = 4; i + 4 <= n; i += 4) best = _mm256_max_pd(best, _mm256_loadu_pd(x + i));
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, best);
    for (double v : lanes) {
      if (v > m) m = v;
    }
  }
  for (; i < n; ++i) {
    if (x[i] > m) m = x[i];
  }
  return m;
}

void scale_avx2(const double* x, double k, double* out, std::size_t n) {
  const __m256d kk = _mm256_set1_pd(k);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, _mm256_mul_pd(kk, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = k * x[i];
}

void add_avx2(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void linear_power_avx2(const double* cpu, const double* mem, std::size_t n, const LinearPowerParams& p,
                       double* servers_out, double* kw_out) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d slack = _mm256_set1_pd(kServerCeilSlack);
  const __m256d cpu_cap = _mm256_set1_pd(p.cpu_capacity);
  const __m256d mem_cap = _mm256_set1_pd(p.mem_capacity);
  const __m256d idle = _mm256_set1_pd(p.p_idle_w);
  const __m256d range = _mm256_set1_pd(p.p_peak_w - p.p_idle_w);
  const __m256d pue = _mm256_set1_pd(p.pue);
  const __m256d kilo = _mm256_set1_pd(1000.0);

  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d c = _mm256_loadu_pd(cpu + i);
    const __m256d by_cpu = _mm256_div_pd(c, cpu_cap);
    const __m256d by_mem = _mm256_div_pd(_mm256_loadu_pd(mem + i), mem_cap);
    const __m256d x = _mm256_max_pd(by_cpu, by_mem);
    const __m256d t = _mm256_sub_pd(x, _mm256_mul_pd(slack, _mm256_max_pd(x, one)));
    __m256d servers = _mm256_and_pd(_mm256_cmp_pd(t, zero, _CMP_GT_OQ), _mm256_ceil_pd(t));
    const __m256d bump = _mm256_and_pd(_mm256_cmp_pd(x, zero, _CMP_GT_OQ), _mm256_cmp_pd(servers, one, _CMP_LT_OQ));
    servers = _mm256_blendv_pd(servers, one, bump);
    const __m256d on = _mm256_cmp_pd(servers, zero, _CMP_GT_OQ);
    const __m256d util = _mm256_and_pd(on, _mm256_min_pd(_mm256_div_pd(c, _mm256_mul_pd(servers, cpu_cap)), one));
    const __m256d watts = _mm256_mul_pd(servers, _mm256_add_pd(idle, _mm256_mul_pd(range, util)));
    _mm256_storeu_pd(servers_out + i, servers);
    _mm256_storeu_pd(kw_out + i, _mm256_div_pd(_mm256_mul_pd(pue, watts), kilo));
  }
  if (i < n) scalar_table().linear_power(cpu + i, mem + i, n - i, p, servers_out + i, kw_out + i);
}

}  // namespace

const Table* avx2_table() {
  static const Table table{
      Isa::avx2, &sum_avx2, &max_avx2, &scale_avx2, &add_avx2, &linear_power_avx2,
  };
  return &table;
}

}  // namespace peakshave::kernels
