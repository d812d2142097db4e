#pragma once

#include <complex>
#include <cstddef>
#include <string_view>

// Inner-loop kernels with a scalar reference implementation and vectorized
// variants (AVX2+FMA on x86-64, NEON on AArch64). The variant is picked once
// at startup from CPUID; BINAURAL_ISA=scalar|avx2|neon overrides it.
//
// Every variant must agree with the scalar reference to within floating-point
// reassociation error; tests/test_simd.cpp pins that.

namespace binaural::simd {

enum class Isa { Scalar, Avx2, Neon };

/// Accumulators for one multiplicative-update step of the excitation
/// variances. With m = ps*sd + pw*sv per bin:
///   num_s = sum ps*obs/m^2, den_s = sum ps/m,
///   num_w = sum pw*obs/m^2, den_w = sum pw/m.
struct MuSums {
  double num_s = 0.0;
  double den_s = 0.0;
  double num_w = 0.0;
  double den_w = 0.0;
};

struct KernelTable {
  Isa isa;
  MuSums (*mu_sums)(const double* ps, const double* pw, const double* obs, double sd, double sv,
                    std::size_t n);
  // sum obs[k] / model[k]
  double (*ratio_sum)(const double* obs, const double* model, std::size_t n);
  // sum ln x[k]; x must be positive and normal (no zeros, subnormals, inf)
  double (*log_sum)(const double* x, std::size_t n);
  // out[k] = ps[k]*sd + pw[k]*sv
  void (*mix2)(const double* ps, double sd, const double* pw, double sv, double* out, std::size_t n);
  // y += a*x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  double (*dot)(const double* x, const double* y, std::size_t n);
  // sum conj(a[k]) * b[k]
  std::complex<double> (*cdot)(const std::complex<double>* a, const std::complex<double>* b,
                               std::size_t n);
  // y += a*x
  void (*caxpy)(std::complex<double> a, const std::complex<double>* x, std::complex<double>* y,
                std::size_t n);
};

bool isa_supported(Isa isa) noexcept;

/// Kernel table for a specific ISA. Throws std::invalid_argument if the ISA
/// is not compiled in or not supported by this CPU.
const KernelTable& kernels_for(Isa isa);

/// The active kernel table.
const KernelTable& kernels() noexcept;

Isa active_isa() noexcept;
void set_isa(Isa isa);

std::string_view isa_name(Isa isa) noexcept;
Isa parse_isa(std::string_view name);

namespace detail {
extern const KernelTable kScalarKernels;
#if defined(__x86_64__) || defined(_M_X64)
extern const KernelTable kAvx2Kernels;
#endif
#if defined(__aarch64__)
extern const KernelTable kNeonKernels;
#endif
}  // namespace detail

}  // namespace binaural::simd
