#include "fbcast/lp.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace fbcast {

namespace {

constexpr double kFeasTol = 1e-9;
constexpr double kTieTol = 1e-7;

// Solves rows(x) = rhs for a square system; returns false if singular.
bool solve_square(std::vector<std::vector<double>> rows,
                  std::vector<double> rhs, std::vector<double>& x) {
  const std::size_t n = rhs.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::fabs(rows[r][col]) > std::fabs(rows[pivot][col])) pivot = r;
    }
    if (std::fabs(rows[pivot][col]) < 1e-12) return false;
    std::swap(rows[pivot], rows[col]);
    std::swap(rhs[pivot], rhs[col]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = rows[r][col] / rows[col][col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) rows[r][c] -= f * rows[col][c];
      rhs[r] -= f * rhs[col];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) x[i] = rhs[i] / rows[i][i];
  return true;
}

bool lex_less(const std::vector<double>& a, const std::vector<double>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < b[i] - 1e-12) return true;
    if (a[i] > b[i] + 1e-12) return false;
  }
  return false;
}

}  // namespace

LpSolution solve_small_lp(const LpProblem& problem) {
  const std::size_t nvars = problem.objective.size();
  if (nvars == 0 || nvars > 10) {
    throw RejectedInputError("solve_small_lp: 1..10 variables supported");
  }
  if (problem.constraint_coeffs.size() != problem.constraint_bounds.size() ||
      problem.constraint_coeffs.size() > 24) {
    throw RejectedInputError("solve_small_lp: up to 24 constraints supported");
  }
  if (problem.nonneg.size() != nvars) {
    throw RejectedInputError("solve_small_lp: nonneg flags must match variables");
  }
  for (const auto& row : problem.constraint_coeffs) {
    if (row.size() != nvars) {
      throw RejectedInputError("solve_small_lp: constraint width mismatch");
    }
  }

  // Axis-ray unboundedness: a variable with positive objective weight that no
  // constraint bounds from above.
  for (std::size_t l = 0; l < nvars; ++l) {
    if (problem.objective[l] <= 0.0) continue;
    bool bounded = false;
    for (const auto& row : problem.constraint_coeffs) {
      if (row[l] > 0.0) {
        bounded = true;
        break;
      }
    }
    if (!bounded) {
      throw UnboundedError("solve_small_lp: objective unbounded along a coordinate");
    }
  }

  // All rows in a.x <= b form, including nonnegativity facets -x_l <= 0.
  std::vector<std::vector<double>> rows = problem.constraint_coeffs;
  std::vector<double> bounds = problem.constraint_bounds;
  for (std::size_t l = 0; l < nvars; ++l) {
    if (!problem.nonneg[l]) continue;
    std::vector<double> facet(nvars, 0.0);
    facet[l] = -1.0;
    rows.push_back(facet);
    bounds.push_back(0.0);
  }
  const std::size_t m = rows.size();
  if (m < nvars) {
    throw UnboundedError("solve_small_lp: too few constraints for a vertex");
  }

  auto feasible = [&](const std::vector<double>& x) {
    for (std::size_t r = 0; r < m; ++r) {
      double lhs = 0.0;
      for (std::size_t l = 0; l < nvars; ++l) lhs += rows[r][l] * x[l];
      if (lhs > bounds[r] + kFeasTol) return false;
    }
    return true;
  };

  std::vector<std::vector<double>> vertices;
  std::vector<std::size_t> pick(nvars);
  for (std::size_t i = 0; i < nvars; ++i) pick[i] = i;
  while (true) {
    std::vector<std::vector<double>> sys(nvars);
    std::vector<double> rhs(nvars);
    for (std::size_t i = 0; i < nvars; ++i) {
      sys[i] = rows[pick[i]];
      rhs[i] = bounds[pick[i]];
    }
    std::vector<double> x;
    if (solve_square(std::move(sys), std::move(rhs), x) && feasible(x)) {
      vertices.push_back(std::move(x));
    }
    // Next combination.
    std::size_t i = nvars;
    bool exhausted = true;
    while (i-- > 0) {
      if (pick[i] < m - nvars + i) {
        exhausted = false;
        break;
      }
    }
    if (exhausted) break;
    ++pick[i];
    for (std::size_t j = i + 1; j < nvars; ++j) pick[j] = pick[j - 1] + 1;
  }

  if (vertices.empty()) {
    std::vector<double> origin(nvars, 0.0);
    if (feasible(origin)) {
      throw UnboundedError("solve_small_lp: feasible region has no vertex");
    }
    throw InfeasibleError("solve_small_lp: no feasible point");
  }

  auto objective_of = [&](const std::vector<double>& x) {
    double v = 0.0;
    for (std::size_t l = 0; l < nvars; ++l) v += problem.objective[l] * x[l];
    return v;
  };

  LpSolution best;
  best.x = vertices.front();
  best.value = objective_of(best.x);
  for (const auto& v : vertices) {
    const double val = objective_of(v);
    if (val > best.value + 1e-12 ||
        (std::fabs(val - best.value) <= 1e-12 && lex_less(v, best.x))) {
      best.x = v;
      best.value = val;
    }
  }
  for (const auto& v : vertices) {
    if (objective_of(v) < best.value - kTieTol) continue;
    for (std::size_t l = 0; l < nvars; ++l) {
      if (std::fabs(v[l] - best.x[l]) > kTieTol) {
        best.unique_optimum = false;
        break;
      }
    }
    if (!best.unique_optimum) break;
  }
  return best;
}

}  // namespace fbcast
