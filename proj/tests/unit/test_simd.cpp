#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "shmm/simd/kernels.hpp"

using namespace shmm;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

double abs_sum_product(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] * y[i]);
  return s;
}

}  // namespace

TEST_CASE("dispatched kernels report a usable ISA") {
  const auto isa = simd::active_isa();
  CHECK((isa == simd::Isa::Scalar || isa == simd::Isa::Avx2));
  if (isa == simd::Isa::Avx2) CHECK(simd::avx2_available());
  MESSAGE("active ISA: " << simd::isa_name(isa));
}

TEST_CASE("scalar dot matches naive summation") {
  std::mt19937_64 rng(1);
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 30u, 100u, 301u}) {
    const auto x = random_vector(rng, n);
    const auto y = random_vector(rng, n);
    long double want = 0.0L;
    for (std::size_t i = 0; i < n; ++i) want += static_cast<long double>(x[i]) * y[i];
    const double tol = 1e-15 * (abs_sum_product(x, y) + 1.0);
    CHECK(std::abs(simd::scalar::dot(x.data(), y.data(), n) - static_cast<double>(want)) <= tol);
    CHECK(std::abs(simd::dot(x, y) - static_cast<double>(want)) <= tol);
  }
}

#if defined(SHMM_HAVE_AVX2)
TEST_CASE("AVX2 kernels are equivalent to the scalar reference") {
  if (!simd::avx2_available()) {
    MESSAGE("CPU lacks AVX2; skipping");
    return;
  }
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = static_cast<std::size_t>(trial % 67);
    const auto x = random_vector(rng, n);
    const auto y = random_vector(rng, n);
    const auto w = random_vector(rng, n);
    const double tol = 4e-16 * (abs_sum_product(x, y) + 1e-300);
    CHECK(std::abs(simd::avx2::dot(x.data(), y.data(), n) - simd::scalar::dot(x.data(), y.data(), n)) <= tol);

    auto ya = y;
    auto ys = y;
    simd::avx2::axpy(0.37, x.data(), ya.data(), n);
    simd::scalar::axpy(0.37, x.data(), ys.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(ya[i] == doctest::Approx(ys[i]).epsilon(1e-15));

    ya = y;
    ys = y;
    simd::avx2::mul_axpy(-1.5, x.data(), w.data(), ya.data(), n);
    simd::scalar::mul_axpy(-1.5, x.data(), w.data(), ys.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(ya[i] == doctest::Approx(ys[i]).epsilon(1e-15));
  }
}
#endif

TEST_CASE("gemv applies dot per row") {
  std::mt19937_64 rng(3);
  const std::size_t rows = 5, cols = 13;
  const auto m = random_vector(rng, rows * cols);
  const auto v = random_vector(rng, cols);
  std::vector<double> out(rows);
  simd::gemv(m, rows, cols, v, out);
  for (std::size_t r = 0; r < rows; ++r) {
    const double want = simd::scalar::dot(m.data() + r * cols, v.data(), cols);
    CHECK(out[r] == doctest::Approx(want).epsilon(1e-14));
  }
}
