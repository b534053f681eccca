#include "peakshave/kernels.hpp"

#include <cstdlib>
#include <string>

namespace peakshave::kernels {

#if !defined(PEAKSHAVE_HAVE_AVX2_KERNELS)
const Table* avx2_table() { return nullptr; }
#endif
#if !defined(PEAKSHAVE_HAVE_NEON_KERNELS)
const Table* neon_table() { return nullptr; }
#endif

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "unknown";
}

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(__x86_64__) || defined(__i386__)
      return avx2_table() != nullptr && __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Isa::neon:
      // NEON is part of the aarch64 baseline.
      return neon_table() != nullptr;
  }
  return false;
}

namespace {

const Table& select() {
  const char* forced = std::getenv("PEAKSHAVE_ISA");
  const std::string want = forced ? forced : "";
  if (want == "scalar") return scalar_table();
  if (want != "neon" && cpu_supports(Isa::avx2)) return *avx2_table();
  if (want != "avx2" && cpu_supports(Isa::neon)) return *neon_table();
  return scalar_table();
}

}  // namespace

const Table& active() {
  static const Table& chosen = select();
  return chosen;
}

}  // namespace peakshave::kernels
