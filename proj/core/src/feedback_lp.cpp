#include "fbcast/feedback_lp.hpp"

#include <algorithm>
#include <cmath>

namespace fbcast {

namespace {

constexpr double kFixedPointTol = 1e-12;
constexpr unsigned kMaxIterations = 1000000;

// The two users other than i, in increasing index order.
void others(std::size_t i, std::size_t& j, std::size_t& k) {
  j = (i == 0) ? 1 : 0;
  k = (i == 2) ? 1 : 2;
}

}  // namespace

ChannelTriple::ChannelTriple(std::array<double, 3> e) : eps(e) {
  for (double v : eps) {
    if (!(v >= 0.0 && v < 1.0)) {
      throw RejectedInputError("erasure rates must lie in [0,1)");
    }
  }
}

DistortionTriple::DistortionTriple(std::array<double, 3> dd) : d(dd) {
  for (double v : d) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw RejectedInputError("distortion targets must lie in [0,1]");
    }
  }
}

double systematic_latency(const ChannelTriple& eps) {
  return 1.0 / (1.0 - eps[0] * eps[1] * eps[2]);
}

QueueBounds queue_bounds(const ChannelTriple& eps,
                         const std::array<double, 3>& t) {
  for (double v : t) {
    if (v < 0.0) throw RejectedInputError("t components must be >= 0");
  }
  const double t0 = systematic_latency(eps);
  QueueBounds out;
  for (std::size_t i = 0; i < 3; ++i) {
    std::size_t j, k;
    others(i, j, k);
    out.q_jk_plus[i] = t0 * (1.0 - eps[i]) * eps[j] * eps[k];
    out.q_i_plus[i] = t0 * eps[i] * (1.0 - eps[j]) * (1.0 - eps[k]) +
                      t[j] * eps[i] * (1.0 - eps[k]) +
                      t[k] * eps[i] * (1.0 - eps[j]);
  }
  return out;
}

UncodedSolution solve_uncoded_lp(const ChannelTriple& eps) {
  const double t0 = systematic_latency(eps);
  std::array<double, 3> caps{};
  for (std::size_t i = 0; i < 3; ++i) {
    std::size_t j, k;
    others(i, j, k);
    caps[i] = t0 * (1.0 - eps[i]) * eps[j] * eps[k] / (1.0 - eps[j] * eps[k]);
  }

  std::array<double, 3> t{0.0, 0.0, 0.0};
  bool converged = false;
  for (unsigned it = 0; it < kMaxIterations; ++it) {
    const QueueBounds qb = queue_bounds(eps, t);
    std::array<double, 3> next{};
    double delta = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      next[i] = std::min(qb.q_i_plus[i] / (1.0 - eps[i]), caps[i]);
      delta = std::max(delta, std::fabs(next[i] - t[i]));
    }
    t = next;
    if (delta < kFixedPointTol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw NumericFailureError("solve_uncoded_lp: fixed point did not converge");
  }

  UncodedSolution out;
  out.t0 = t0;
  out.t = t;
  out.t_star = t0 + t[0] + t[1] + t[2];
  const QueueBounds qb = queue_bounds(eps, t);
  for (std::size_t i = 0; i < 3; ++i) {
    const double qi_route = qb.q_i_plus[i] / (1.0 - eps[i]);
    out.active_constraints[i] = (qi_route < caps[i] - kFixedPointTol)
                                    ? ActiveConstraint::queue_i_bound
                                    : ActiveConstraint::queue_jk_bound;
    out.residual_queues[i] = qb.q_i_plus[i] - t[i] * (1.0 - eps[i]);
  }
  return out;
}

LpProblem uncoded_lp_problem(const ChannelTriple& eps) {
  const double t0 = systematic_latency(eps);
  LpProblem p;
  p.objective = {1.0, 1.0, 1.0};
  p.nonneg = {true, true, true};
  for (std::size_t i = 0; i < 3; ++i) {
    std::size_t j, k;
    others(i, j, k);
    // (1-e_i) t_i - e_i(1-e_k) t_j - e_i(1-e_j) t_k <= T0 e_i(1-e_j)(1-e_k)
    std::vector<double> row(3, 0.0);
    row[i] = 1.0 - eps[i];
    row[j] = -eps[i] * (1.0 - eps[k]);
    row[k] = -eps[i] * (1.0 - eps[j]);
    p.constraint_coeffs.push_back(row);
    p.constraint_bounds.push_back(t0 * eps[i] * (1.0 - eps[j]) *
                                  (1.0 - eps[k]));
    // t_i <= Q_jk^+ / (1 - e_j e_k)
    std::vector<double> cap_row(3, 0.0);
    cap_row[i] = 1.0;
    p.constraint_coeffs.push_back(cap_row);
    p.constraint_bounds.push_back(t0 * (1.0 - eps[i]) * eps[j] * eps[k] /
                                  (1.0 - eps[j] * eps[k]));
  }
  return p;
}

LatencyBounds latency_bounds(const ChannelTriple& eps,
                             const DistortionTriple& d) {
  LatencyBounds out;
  for (std::size_t i = 0; i < 3; ++i) {
    out.w[i] = (1.0 - d[i]) / (1.0 - eps[i]);
  }
  out.w_minus = *std::min_element(out.w.begin(), out.w.end());
  out.w_plus = *std::max_element(out.w.begin(), out.w.end());
  return out;
}

OptimalityReport optimality_report(const ChannelTriple& eps,
                                   const DistortionTriple& d) {
  OptimalityReport out{solve_uncoded_lp(eps), latency_bounds(eps, d)};
  out.q_minus = *std::min_element(out.uncoded.residual_queues.begin(),
                                  out.uncoded.residual_queues.end());
  out.theorem2_holds = out.bounds.w_minus <= out.uncoded.t_star;
  // Strict positivity up to the fixed-point rounding scale: an active
  // singleton-queue constraint leaves residual dust of order 1e-12.
  out.theorem3_holds = out.q_minus > 1e-9;
  if (out.theorem2_holds || out.theorem3_holds) {
    out.achievable_latency = out.bounds.w_plus;
  }
  return out;
}

PoolsSolution solve_pools_lp(const PoolsInstance& instance) {
  for (double v : instance.pool) {
    if (v < 0.0) throw RejectedInputError("pool sizes must be >= 0");
  }
  // One variable per (pool, nonempty target subset) pair, skipping empty pools.
  std::vector<PoolAllocation> vars;
  for (unsigned mask = 1; mask < 8; ++mask) {
    if (instance.pool[mask] <= 0.0) continue;
    for (unsigned target = 1; target < 8; ++target) {
      if ((target & mask) != target) continue;
      vars.push_back({mask, target, 0.0});
    }
  }

  LpProblem p;
  const std::size_t nv = vars.size();
  if (nv == 0) {
    // Nothing available; feasible only if no demand remains.
    for (double dem : instance.demand) {
      if (dem > 1e-12) {
        throw InfeasibleError("solve_pools_lp: demand with no queue content");
      }
    }
    return {};
  }
  p.nonneg.assign(nv, true);
  p.objective.assign(nv, 0.0);
  for (std::size_t v = 0; v < nv; ++v) {
    double worst = 0.0;
    for (std::size_t u = 0; u < 3; ++u) {
      if (vars[v].target_mask & (1u << u)) worst = std::max(worst, instance.eps[u]);
    }
    // Minimizing latency == maximizing its negation.
    p.objective[v] = -1.0 / (1.0 - worst);
  }
  // Capacity per pool.
  for (unsigned mask = 1; mask < 8; ++mask) {
    if (instance.pool[mask] <= 0.0) continue;
    std::vector<double> row(nv, 0.0);
    for (std::size_t v = 0; v < nv; ++v) {
      if (vars[v].queue_mask == mask) row[v] = 1.0;
    }
    p.constraint_coeffs.push_back(row);
    p.constraint_bounds.push_back(instance.pool[mask]);
  }
  // Demand per user, written as -sum <= -demand.
  for (std::size_t u = 0; u < 3; ++u) {
    if (instance.demand[u] <= 0.0) continue;
    std::vector<double> row(nv, 0.0);
    for (std::size_t v = 0; v < nv; ++v) {
      if (vars[v].target_mask & (1u << u)) row[v] = -1.0;
    }
    p.constraint_coeffs.push_back(row);
    p.constraint_bounds.push_back(-instance.demand[u]);
  }

  LpSolution sol = solve_small_lp(p);
  PoolsSolution out;
  out.latency = -sol.value;
  for (std::size_t v = 0; v < nv; ++v) {
    if (sol.x[v] > 1e-12) {
      vars[v].amount = sol.x[v];
      out.allocations.push_back(vars[v]);
    }
  }
  return out;
}

PreprocessSolution solve_preprocess_lp(const PreprocessInstance& instance) {
  if (instance.q_i < 0.0 || instance.q_ij < 0.0 || instance.q_ik < 0.0) {
    throw RejectedInputError("queue sizes must be >= 0");
  }
  for (double r : instance.received) {
    if (r < 0.0 || r > 1.0) {
      throw RejectedInputError("received fractions must lie in [0,1]");
    }
  }
  if (instance.role_i > 2) throw RejectedInputError("role_i must be 0, 1 or 2");
  const std::size_t i = instance.role_i;
  std::size_t j, k;
  others(i, j, k);

  PoolsInstance pools{{}, {}, instance.eps};
  pools.pool[1u << i] = instance.q_i;
  pools.pool[(1u << i) | (1u << j)] = instance.q_ij;
  pools.pool[(1u << i) | (1u << k)] = instance.q_ik;
  for (std::size_t u = 0; u < 3; ++u) {
    pools.demand[u] = 1.0 - instance.d[u] - instance.received[u];
  }

  PoolsSolution sol = solve_pools_lp(pools);
  PreprocessSolution out;
  out.latency = sol.latency;
  const unsigned mi = 1u << i;
  const unsigned mij = (1u << i) | (1u << j);
  const unsigned mik = (1u << i) | (1u << k);
  for (const auto& a : sol.allocations) {
    if (a.queue_mask == mi && a.target_mask == mi) out.deltas[0] += a.amount;
    if (a.queue_mask == mij && a.target_mask == mi) out.deltas[1] += a.amount;
    if (a.queue_mask == mik && a.target_mask == mi) out.deltas[2] += a.amount;
    if (a.queue_mask == mij && a.target_mask == (1u << j)) out.deltas[3] += a.amount;
    if (a.queue_mask == mik && a.target_mask == (1u << k)) out.deltas[4] += a.amount;
    if (a.queue_mask == mij && a.target_mask == mij) out.deltas[5] += a.amount;
    if (a.queue_mask == mik && a.target_mask == mik) out.deltas[6] += a.amount;
  }
  return out;
}

}  // namespace fbcast
