#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "binaural/simd.hpp"

namespace binaural::simd {
namespace {

Isa best_supported() noexcept {
  if (isa_supported(Isa::Avx2)) return Isa::Avx2;
  if (isa_supported(Isa::Neon)) return Isa::Neon;
  return Isa::Scalar;
}

const KernelTable* initial_table() noexcept {
  Isa isa = best_supported();
  if (const char* env = std::getenv("BINAURAL_ISA"); env != nullptr && *env != '\0') {
    try {
      const Isa requested = parse_isa(env);
      if (isa_supported(requested)) isa = requested;
    } catch (const std::invalid_argument&) {
      // unknown name: keep the detected ISA
    }
  }
  return &kernels_for(isa);
}

std::atomic<const KernelTable*>& active() noexcept {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

bool isa_supported(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& kernels_for(Isa isa) {
  if (!isa_supported(isa)) {
    throw std::invalid_argument("ISA not supported on this machine: " + std::string(isa_name(isa)));
  }
  switch (isa) {
#if defined(__x86_64__) || defined(_M_X64)
    case Isa::Avx2:
      return detail::kAvx2Kernels;
#endif
#if defined(__aarch64__)
    case Isa::Neon:
      return detail::kNeonKernels;
#endif
    default:
      return detail::kScalarKernels;
  }
}

const KernelTable& kernels() noexcept { return *active().load(std::memory_order_acquire); }

Isa active_isa() noexcept { return kernels().isa; }

void set_isa(Isa isa) { active().store(&kernels_for(isa), std::memory_order_release); }

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
    case Isa::Neon:
      return "neon";
  }
  return "unknown";
}

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::Scalar;
  if (name == "avx2") return Isa::Avx2;
  if (name == "neon") return Isa::Neon;
  if (name == "auto") return best_supported();
  throw std::invalid_argument("unknown ISA '" + std::string(name) + "'");
}

}  // namespace binaural::simd
