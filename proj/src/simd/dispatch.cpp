#include "shmm/simd/kernels.hpp"

#include <cassert>
#include <cstdlib>
#include <cstring>

namespace shmm::simd {

namespace {

struct KernelTable {
  Isa isa;
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*mul_axpy)(double, const double*, const double*, double*, std::size_t);
};

bool cpu_has_avx2() {
#if defined(SHMM_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

KernelTable select_table() {
  const char* forced = std::getenv("SHMM_SIMD");
  const bool want_scalar = forced != nullptr && std::strcmp(forced, "scalar") == 0;
#if defined(SHMM_HAVE_AVX2)
  if (!want_scalar && cpu_has_avx2()) {
    return {Isa::Avx2, &avx2::dot, &avx2::axpy, &avx2::mul_axpy};
  }
#else
  (void)want_scalar;
#endif
  return {Isa::Scalar, &scalar::dot, &scalar::axpy, &scalar::mul_axpy};
}

const KernelTable& table() {
  static const KernelTable t = select_table();
  return t;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  return isa == Isa::Avx2 ? "avx2" : "scalar";
}

Isa active_isa() { return table().isa; }

bool avx2_available() { return cpu_has_avx2(); }

double dot(std::span<const double> x, std::span<const double> y) {
  assert(x.size() == y.size());
  return table().dot(x.data(), y.data(), x.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  table().axpy(alpha, x.data(), y.data(), x.size());
}

void mul_axpy(double alpha, std::span<const double> x, std::span<const double> w,
              std::span<double> y) {
  assert(x.size() == y.size() && w.size() == y.size());
  table().mul_axpy(alpha, x.data(), w.data(), y.data(), y.size());
}

void gemv(std::span<const double> matrix, std::size_t rows, std::size_t cols,
          std::span<const double> v, std::span<double> out) {
  assert(matrix.size() == rows * cols && v.size() == cols && out.size() == rows);
  const auto& t = table();
  for (std::size_t r = 0; r < rows; ++r) out[r] = t.dot(matrix.data() + r * cols, v.data(), cols);
}

}  // namespace shmm::simd
