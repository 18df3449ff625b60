#include "shmm/alignment.hpp"

#include <limits>

#include "shmm/errors.hpp"
#include "shmm/simd/kernels.hpp"

namespace shmm {

// O(n^3) shortest augmenting path formulation with row/column potentials.
std::vector<int> hungarian(const RowMatrix& cost) {
  const std::size_t n = cost.rows();
  if (cost.cols() != n) throw DimensionMismatch("assignment needs a square cost matrix");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based internals; column 0 is the virtual source.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(n, -1);
  for (std::size_t j = 1; j <= n; ++j) assignment[match[j] - 1] = static_cast<int>(j - 1);
  return assignment;
}

std::vector<int> align_states(const ShmmModel& truth, const ShmmModel& estimate) {
  const std::size_t k = truth.states.size();
  if (estimate.states.size() != k) throw DimensionMismatch("models have different numbers of states");
  const bool text = truth.config.text == TextModel::Vmf && estimate.config.text == TextModel::Vmf &&
                    truth.embedding_dim == estimate.embedding_dim;
  RowMatrix cost(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const auto& a = truth.states[i];
      const auto& b = estimate.states[j];
      if (text) {
        cost(i, j) = -simd::dot(a.text.mu, b.text.mu);
      } else {
        const double dx = a.mu_l[0] - b.mu_l[0];
        const double dy = a.mu_l[1] - b.mu_l[1];
        cost(i, j) = dx * dx + dy * dy;
      }
    }
  }
  return hungarian(cost);
}

}  // namespace shmm
