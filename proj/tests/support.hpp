#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fbcast/matrix.hpp"
#include "fbcast/mrp.hpp"
#include "fbcast/rng.hpp"

namespace fbcast::testing {

inline Matrix random_matrix(Xoshiro256& rng, std::size_t rows,
                            std::size_t cols, double lo = 0.0,
                            double hi = 1.0) {
  Matrix m(rows, cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      m(i, j) = lo + (hi - lo) * rng.next_double();
  return m;
}

// Row-substochastic random matrix with row sums <= max_row_sum.
inline Matrix random_substochastic(Xoshiro256& rng, std::size_t n,
                                   double max_row_sum) {
  Matrix m = random_matrix(rng, n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = m.row_sum(i);
    const double target = max_row_sum * (0.5 + 0.5 * rng.next_double());
    for (std::size_t j = 0; j < n; ++j) m(i, j) *= target / sum;
  }
  return m;
}

// Random absorbing Markov reward process. Every transient row keeps direct
// mass on some absorbing state, so absorption is always reachable. Rewards
// out of absorbing states are zero, matching the block-form convention.
inline MrpSpec random_absorbing_spec(Xoshiro256& rng, std::size_t max_states = 5,
                                     double max_q_row_sum = 1.0) {
  const std::size_t n = 2 + static_cast<std::size_t>(rng.next_u64() %
                                                     (max_states - 1));
  const std::size_t n_abs =
      1 + static_cast<std::size_t>(rng.next_u64() % (n - 1));
  const std::size_t n_tr = n - n_abs;

  Matrix p(n, n, 0.0);
  Matrix theta(n, n, 0.0);
  for (std::size_t i = 0; i < n_tr; ++i) {
    std::vector<double> w(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) w[j] = rng.next_double();
    // Guarantee a direct absorption edge.
    w[n_tr + rng.next_u64() % n_abs] += 0.2;
    double total = 0.0;
    for (double v : w) total += v;
    for (std::size_t j = 0; j < n; ++j) p(i, j) = w[j] / total;
    if (max_q_row_sum < 1.0) {
      double q_sum = 0.0;
      for (std::size_t j = 0; j < n_tr; ++j) q_sum += p(i, j);
      if (q_sum > max_q_row_sum) {
        const double scale = max_q_row_sum / q_sum;
        double freed = 0.0;
        for (std::size_t j = 0; j < n_tr; ++j) {
          freed += p(i, j) * (1.0 - scale);
          p(i, j) *= scale;
        }
        double a_sum = 0.0;
        for (std::size_t j = n_tr; j < n; ++j) a_sum += p(i, j);
        for (std::size_t j = n_tr; j < n; ++j) {
          p(i, j) += freed * p(i, j) / a_sum;
        }
      }
    }
    for (std::size_t j = 0; j < n; ++j) {
      theta(i, j) = 2.0 * rng.next_double();
    }
  }
  for (std::size_t i = n_tr; i < n; ++i) p(i, i) = 1.0;
  return MrpSpec{p, theta};
}

// The worked two-state chain: stay with probability 0.7 earning 1, absorb
// with probability 0.3 earning 2. Expected total reward 13/3.
inline MrpSpec two_state_chain() {
  Matrix p(2, 2, {0.7, 0.3, 0.0, 1.0});
  Matrix theta(2, 2, {1.0, 2.0, 0.0, 0.0});
  return MrpSpec{p, theta};
}

}  // namespace fbcast::testing
