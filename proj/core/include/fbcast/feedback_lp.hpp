#pragma once

#include <array>
#include <optional>
#include <vector>

#include "fbcast/lp.hpp"

namespace fbcast {

// Per-user erasure rates, each in [0, 1).
struct ChannelTriple {
  std::array<double, 3> eps;

  explicit ChannelTriple(std::array<double, 3> e);
  double operator[](std::size_t i) const { return eps[i]; }
};

// Per-user distortion targets, each in [0, 1].
struct DistortionTriple {
  std::array<double, 3> d;

  explicit DistortionTriple(std::array<double, 3> dd);
  double operator[](std::size_t i) const { return d[i]; }
};

// Expected normalized length of the systematic phase: 1/(1 - e1 e2 e3).
double systematic_latency(const ChannelTriple& eps);

struct QueueBounds {
  // q_jk_plus[i]: expected max normalized size of the pair queue shared by
  // the two users other than i.
  std::array<double, 3> q_jk_plus;
  // q_i_plus[i]: expected max normalized size of user i's singleton queue
  // after t_j and t_k pairing transmissions.
  std::array<double, 3> q_i_plus;
};

QueueBounds queue_bounds(const ChannelTriple& eps,
                         const std::array<double, 3>& t);

enum class ActiveConstraint { queue_i_bound, queue_jk_bound };

struct UncodedSolution {
  double t0 = 0.0;
  std::array<double, 3> t{};
  double t_star = 0.0;
  std::array<ActiveConstraint, 3> active_constraints{};
  std::array<double, 3> residual_queues{};
};

// Least fixed point of t_i <- min(Q_i^+(t_j,t_k)/(1-e_i), cap_i), found by
// monotone iteration from zero. Matches the LP characterization; see
// uncoded_lp_problem for the independent oracle.
UncodedSolution solve_uncoded_lp(const ChannelTriple& eps);

// The equivalent linear program, for cross-checking with solve_small_lp.
LpProblem uncoded_lp_problem(const ChannelTriple& eps);

struct LatencyBounds {
  std::array<double, 3> w{};  // (1 - d_i) / (1 - e_i)
  double w_minus = 0.0;
  double w_plus = 0.0;
};

LatencyBounds latency_bounds(const ChannelTriple& eps,
                             const DistortionTriple& d);

struct OptimalityReport {
  UncodedSolution uncoded;
  LatencyBounds bounds;
  double q_minus = 0.0;
  bool theorem2_holds = false;  // w_minus <= t_star
  bool theorem3_holds = false;  // min residual queue > 0
  // w_plus when either sufficient condition holds; empty otherwise.
  std::optional<double> achievable_latency;
};

OptimalityReport optimality_report(const ChannelTriple& eps,
                                   const DistortionTriple& d);

// Preprocessing instance for the channel-coding tail when the remaining
// queues are Q_i, Q_{i,j}, Q_{i,k}. Sizes and received fractions are in
// normalized (per-source-symbol) units; role_i names the concrete user
// (0-based) appearing in every remaining queue. j and k are the remaining
// users in increasing index order.
struct PreprocessInstance {
  double q_i = 0.0;
  double q_ij = 0.0;
  double q_ik = 0.0;
  std::array<double, 3> received{};  // indexed by concrete user
  ChannelTriple eps;
  DistortionTriple d;
  std::size_t role_i = 0;
};

// deltas in the order (d_i^i, d_ij^i, d_ik^i, d_ij^j, d_ik^k, d_ij^ij,
// d_ik^ik); latency is the optimal objective value.
struct PreprocessSolution {
  std::array<double, 7> deltas{};
  double latency = 0.0;
};

PreprocessSolution solve_preprocess_lp(const PreprocessInstance& instance);

// Generalized queue-preprocessing program over arbitrary queue pools.
// pool[mask] holds the amount of symbols needed by exactly the user set
// encoded in mask (bit u = user u), for mask in 1..7. demand[u] is the
// remaining amount user u must decode. Covers the mirrored all-pairs shape,
// which the companion analysis leaves as an analogous construction.
struct PoolsInstance {
  std::array<double, 8> pool{};
  std::array<double, 3> demand{};
  ChannelTriple eps;
};

struct PoolAllocation {
  unsigned queue_mask = 0;   // pool the symbols are taken from
  unsigned target_mask = 0;  // user set they are coded to
  double amount = 0.0;
};

struct PoolsSolution {
  std::vector<PoolAllocation> allocations;
  double latency = 0.0;
};

PoolsSolution solve_pools_lp(const PoolsInstance& instance);

}  // namespace fbcast
