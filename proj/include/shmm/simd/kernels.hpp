#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Dense double-precision kernels used by the emission and forward-backward
// inner loops. Every kernel has a scalar reference implementation; an AVX2+FMA
// variant is compiled when the target supports it and picked at runtime.
//
// The variants are not bitwise identical (different summation order) but agree
// to a few ulps of the accumulated magnitude.

namespace shmm::simd {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);

/// Instruction set used by the dispatched entry points below. Decided once on
/// first use: AVX2 when both the build and the CPU support it, unless the
/// environment variable SHMM_SIMD=scalar is set.
Isa active_isa();

/// True when the AVX2 variants are compiled in and the running CPU has them.
bool avx2_available();

double dot(std::span<const double> x, std::span<const double> y);

// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

// y += alpha * (x .* w)
void mul_axpy(double alpha, std::span<const double> x, std::span<const double> w,
              std::span<double> y);

// out[i] = dot(row i of the row-major rows x cols matrix, v)
void gemv(std::span<const double> matrix, std::size_t rows, std::size_t cols,
          std::span<const double> v, std::span<double> out);

namespace scalar {
double dot(const double* x, const double* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void mul_axpy(double alpha, const double* x, const double* w, double* y, std::size_t n);
}  // namespace scalar

#if defined(SHMM_HAVE_AVX2)
namespace avx2 {
double dot(const double* x, const double* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void mul_axpy(double alpha, const double* x, const double* w, double* y, std::size_t n);
}  // namespace avx2
#endif

}  // namespace shmm::simd
