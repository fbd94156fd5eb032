#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "fbcast/matrix.hpp"
#include "fbcast/mrp.hpp"

namespace fbcast {

// Reward columns of the chaining transition tables, in table order.
enum ChainReward : std::size_t {
  kRewardJ = 0,      // symbols decoded by target j
  kRewardK = 1,      // symbols decoded by target k
  kRewardE = 2,      // equations received by the builder
  kRewardQi = 3,     // symbols placed in Q_i
  kRewardQj = 4,     // symbols placed in Q_j
  kRewardQk = 5,     // symbols placed in Q_k
  kRewardQstar = 6,  // symbols placed in the chain-unlocking queue
};

// One outgoing transition of a transient chaining state for a specific
// channel noise (z_i, z_j, z_k); z = 1 means erased.
struct ChainTableRow {
  std::array<int, 3> z;
  int next_state;  // 1..6
  std::array<double, 7> reward;
};

// The eight noise rows of states 1, 2, 3 and 4. State 3 is generated from
// state 2 by exchanging the roles of the two targets.
const std::array<ChainTableRow, 8>& chain_state_rows(int state);

double noise_probability(const std::array<int, 3>& z, double eps_i,
                         double eps_j, double eps_k);

// Six-state absorbing Markov reward process of the chaining algorithm,
// in role coordinates: user i builds chains, users j and k are served
// point-to-point. States 5 and 6 are absorbing (6 = chain decoded).
struct ChainMrp {
  Matrix transition;               // 6x6
  std::array<Matrix, 7> rewards;   // 6x6 per reward column
  std::array<double, 3> eps;       // (eps_i, eps_j, eps_k)
};

ChainMrp build_chain_mrp(double eps_i, double eps_j, double eps_k);

// Concrete user indices (0-based) playing the roles.
struct ChainRoles {
  std::size_t builder = 0;
  std::size_t target_j = 1;
  std::size_t target_k = 2;
  // u: the target that is not the bottleneck, argmin of w_r(d_hat_r).
  std::size_t bottleneck_excluded = 1;
};

// Picks u from the two targets given per-user residual demands 1 - d_hat_r
// and erasure rates (lower point-to-point latency wins; ties go to target_j).
ChainRoles make_chain_roles(std::size_t builder,
                            const std::array<double, 3>& eps,
                            const std::array<double, 3>& residual_demands);

struct PerRunRewards {
  double e_reward_u = 0.0;  // expected accumulated reward for user u per run
  double e_reward_E_given_decode = 0.0;  // conditional on absorbing in state 6
  double e_reward_E_unconditional = 0.0;
  double p_decode = 0.0;  // probability a run ends in state 6
};

PerRunRewards per_run_rewards(const ChainMrp& model, const ChainRoles& roles);

// floor(N * demand_u / e_reward_u); demand_u = 1 - d_hat_u.
std::int64_t m_lower(std::uint64_t n_symbols, double demand_u,
                     double e_reward_u);

struct SufficiencyReport {
  double e_reward_u = 0.0;
  double e_reward_E = 0.0;
  std::int64_t m_lower = 0;
  double lhs = 0.0;  // m_lower
  double rhs = 0.0;  // N (1 - d_hat_i) / e_reward_E
  bool holds = false;
  double d_i_boundary = 1.0;  // smallest certified builder distortion
};

// residual_demands[r] = 1 - d_hat_r, indexed by concrete user. The default
// reads the decode reward conditionally on reaching state 6, matching the
// companion analysis; the unconditional variant is available for
// sensitivity checks.
SufficiencyReport sufficiency_check(const ChainMrp& model,
                                    const ChainRoles& roles,
                                    std::uint64_t n_symbols,
                                    const std::array<double, 3>& residual_demands,
                                    bool unconditional_decode_reward = false);

struct BoundaryPoint {
  double eps_u = 0.0;
  double d_hat_u = 0.0;
  double e_reward_u = 0.0;
  double e_reward_E = 0.0;
  double d_i_boundary = 1.0;
};

struct BoundarySpec {
  double eps_i = 0.0;
  double eps_k = 0.0;
  std::vector<double> eps_u_values;
  // Residual target distortion per sweep point; when empty, eps_u^2 is used.
  std::vector<double> d_hat_u_values;
  // Empty means the asymptotic boundary (floor dropped).
  std::optional<std::uint64_t> n_symbols;
  bool unconditional_decode_reward = false;
};

// Rebuilds the model at each swept eps_u and reports the certified builder
// distortion boundary.
std::vector<BoundaryPoint> distortion_boundary(const BoundarySpec& spec);

// Table-driven Monte Carlo of the chaining state machine: draws the noise
// each slot and applies the table rows directly. Validation oracle for the
// compiled matrices.
struct ChainRunStats {
  std::uint64_t runs = 0;
  std::array<std::array<std::uint64_t, 6>, 6> transition_counts{};
  std::array<double, 7> mean_rewards{};    // per run, by reward column
  std::array<double, 7> stddev_rewards{};
  std::uint64_t decode_runs = 0;
  double mean_reward_E_given_decode = 0.0;
  double stddev_reward_E_given_decode = 0.0;
};

ChainRunStats run_chain_monte_carlo(double eps_i, double eps_j, double eps_k,
                                    std::uint64_t runs, std::uint64_t seed);

}  // namespace fbcast
