#pragma once

// Data-parallel inner loops over power series. Every kernel has a scalar
// reference implementation; AVX2 (x86-64) and NEON (aarch64) variants are
// compiled when the toolchain supports them and selected at runtime.
// Setting PEAKSHAVE_ISA=scalar in the environment forces the reference path.

#include <cstddef>
#include <span>
#include <string_view>

namespace peakshave::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa);

/// Parameters of the linear utilization-to-power server model.
struct LinearPowerParams {
  double cpu_capacity = 1.0;
  double mem_capacity = 1.0;
  double p_idle_w = 100.0;
  double p_peak_w = 200.0;
  double pue = 1.0;
};

struct Table {
  Isa isa = Isa::scalar;
  /// Sum of n values. Summation order differs between variants.
  double (*sum)(const double* x, std::size_t n) = nullptr;
  /// Maximum of n values; -infinity for n == 0. Exact in every variant.
  double (*max)(const double* x, std::size_t n) = nullptr;
  /// out[i] = k * x[i]
  void (*scale)(const double* x, double k, double* out, std::size_t n) = nullptr;
  /// out[i] = a[i] + b[i]
  void (*add)(const double* a, const double* b, double* out, std::size_t n) = nullptr;
  /// Per slot: minimum server count and facility power in kW.
  /// Bit-identical across variants.
  void (*linear_power)(const double* cpu, const double* mem, std::size_t n, const LinearPowerParams& p,
                       double* servers_out, double* kw_out) = nullptr;
};

const Table& scalar_table();
/// nullptr when the variant was not compiled into this build.
const Table* avx2_table();
const Table* neon_table();

bool cpu_supports(Isa isa);

/// The table used by the library, chosen once per process.
const Table& active();

inline double sum(std::span<const double> x) { return active().sum(x.data(), x.size()); }
inline double max(std::span<const double> x) { return active().max(x.data(), x.size()); }

/// Relative slack applied before rounding a capacity ratio up to whole servers,
/// so that ratios like 0.3/0.1 do not round to an extra server.
inline constexpr double kServerCeilSlack = 1e-9;

}  // namespace peakshave::kernels
