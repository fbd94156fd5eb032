#pragma once

#include <vector>

#include "fbcast/errors.hpp"

namespace fbcast {

// max c.x subject to a.x <= bound per constraint, and x_l >= 0 where the
// nonneg flag is set. Intended for tiny programs (<= 10 variables,
// <= 24 constraints); solved by exact vertex enumeration, which costs
// C(#rows, #vars) square solves.
struct LpProblem {
  std::vector<double> objective;
  std::vector<std::vector<double>> constraint_coeffs;
  std::vector<double> constraint_bounds;
  std::vector<bool> nonneg;
};

struct LpSolution {
  std::vector<double> x;
  double value = 0.0;
  // True when no other feasible vertex matches the optimal objective within
  // 1e-7 while differing from the optimum point by more than 1e-7.
  bool unique_optimum = true;
};

LpSolution solve_small_lp(const LpProblem& problem);

}  // namespace fbcast
