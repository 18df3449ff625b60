#include "shmm/simd/kernels.hpp"

namespace shmm::simd::scalar {

double dot(const double* x, const double* y, std::size_t n) {
  // Four independent partial sums, matching the lane layout of the AVX2 path
  // closely enough that both stay within a few ulps of each other.
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += x[i] * y[i];
    s1 += x[i + 1] * y[i + 1];
    s2 += x[i + 2] * y[i + 2];
    s3 += x[i + 3] * y[i + 3];
  }
  for (; i < n; ++i) s0 += x[i] * y[i];
  return (s0 + s1) + (s2 + s3);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void mul_axpy(double alpha, const double* x, const double* w, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * (x[i] * w[i]);
}

}  // namespace shmm::simd::scalar
