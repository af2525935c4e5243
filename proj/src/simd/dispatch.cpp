#include <cstdlib>
#include <string_view>

#include "vac/simd/kernels.hpp"

namespace vac::simd {

#if !defined(VAC_HAVE_AVX2)
const KernelTable* avx2_table() noexcept { return nullptr; }
#endif

std::string_view to_string(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
  }
  return "unknown";
}

bool cpu_has_avx2_fma() noexcept {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

const KernelTable& select_table() noexcept {
  if (const char* forced = std::getenv("VAC_SIMD"); forced && std::string_view(forced) == "scalar")
    return scalar_table();
  if (const KernelTable* t = avx2_table(); t && cpu_has_avx2_fma()) return *t;
  return scalar_table();
}

}  // namespace

const KernelTable& active() noexcept {
  static const KernelTable& table = select_table();
  return table;
}

}  // namespace vac::simd
