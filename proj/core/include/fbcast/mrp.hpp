#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fbcast/matrix.hpp"

namespace fbcast {

// Discrete-time Markov chain with impulse rewards: transition(i,j) is the
// probability of moving from state i to state j, reward(i,j) the reward
// collected on that transition. States are 0-based here; CLI I/O is 1-based.
struct MrpSpec {
  Matrix transition;
  Matrix reward;

  std::size_t num_states() const { return transition.rows(); }
};

// Throws RejectedInputError unless rows are stochastic within 1e-9, entries
// lie in [0,1], and rewards are finite.
void validate(const MrpSpec& spec);

// Absorbing chain in canonical block form: transient states first, then
// absorbing states. q/r are the transition blocks, h1/h2 the matching blocks
// of H = reward (.) transition, fundamental = (I - Q)^-1.
struct CanonicalMrp {
  std::vector<std::size_t> permutation;  // canonical position -> original state
  std::vector<std::size_t> canon_of;     // original state -> canonical position
  std::size_t num_transient = 0;
  std::size_t num_absorbing = 0;
  Matrix q_block{1, 1};
  Matrix r_block{1, 1};
  Matrix h1_block{1, 1};
  Matrix h2_block{1, 1};
  Matrix fundamental{1, 1};

  std::size_t num_states() const { return num_transient + num_absorbing; }
  bool is_transient_original(std::size_t original) const {
    return canon_of[original] < num_transient;
  }
};

// Detects absorbing states (p_ii = 1 within 1e-12, other entries zero),
// checks every transient state reaches absorption, extracts the blocks.
// Throws NotAbsorbingError / RejectedInputError.
CanonicalMrp canonicalize(const MrpSpec& spec);

// P^n assembled in block form [[Q^n, sum Q^i R], [0, I]], canonical order.
Matrix transition_power(const CanonicalMrp& c, unsigned n);

// P^inf = [[0, N R], [0, I]], canonical order.
Matrix transition_limit(const CanonicalMrp& c);

// Scaled accumulated reward at horizon n, canonical order:
//   [[sum_{i<n} Q^i H1 Q^{n-1-i},  N(I-Q^n)H2 + N(I-Q^{n-1})H1 N R
//                                    - sum_{i<=n-2} Q^i H1 N Q^{n-1-i} R],
//    [0, 0]]
Matrix scaled_reward_n(const CanonicalMrp& c, unsigned n);

// Limit of the above: [[0, N(H2 + H1 N R)], [0, 0]], canonical order.
Matrix scaled_reward_inf(const CanonicalMrp& c);

struct RewardSummary {
  Matrix scaled;                  // original state order
  std::vector<double> per_state;  // row sums of scaled, original order
  std::optional<double> with_prior;
  // Horizon-infinity only: conditional reward by (transient, absorbing) pair
  // in canonical order, zero where the absorbing state is unreachable.
  std::optional<Matrix> conditional;
};

// horizon = nullopt means infinity. prior, if given, is over original state
// indices, nonnegative, summing to 1 within 1e-9.
RewardSummary unscaled_rewards(
    const CanonicalMrp& c, std::optional<unsigned> horizon,
    const std::optional<std::vector<double>>& prior = std::nullopt);

// Expected accumulated reward conditioned on absorbing in `absorbing_state`
// when started from `transient_state` (both original indices).
// Throws UnreachableAbsorptionError when P^inf(i,j) < 1e-12.
double conditional_absorption_reward(const CanonicalMrp& c,
                                     std::size_t transient_state,
                                     std::size_t absorbing_state);

struct EnumeratedReward {
  double scaled = 0.0;       // sum over paths of reward * probability
  double probability = 0.0;  // Pr(S_n = j | S_0 = i)
};

// Ground-truth oracle: exhaustive enumeration over all |Omega|^(n-1)
// intermediate sequences. Guarded to n <= 8 and |Omega| <= 6.
EnumeratedReward enumerate_reward(const MrpSpec& spec, unsigned n,
                                  std::size_t from, std::size_t to);

struct SimulatedReward {
  double mean_total_reward = 0.0;
  double stddev_total_reward = 0.0;
  // Indexed by original state; zero for non-absorbing states.
  std::vector<std::uint64_t> absorption_counts;
  std::vector<double> conditional_means;
  std::vector<double> conditional_stddevs;
  std::uint64_t trials = 0;
};

// Seeded Monte-Carlo run of the chain until absorption, accumulating impulse
// rewards. Identical seeds give bit-identical results.
SimulatedReward simulate_reward(const MrpSpec& spec, std::size_t start,
                                std::uint64_t trials, std::uint64_t seed);

// Power-iteration estimate of the spectral radius of the transient block.
double spectral_radius_estimate(const Matrix& q, unsigned iterations = 500);

// File format: the matrix text format twice (transition, then reward),
// separated by a blank line.
MrpSpec mrp_from_text(std::istream& in);
MrpSpec mrp_from_text(const std::string& text);
std::string to_text(const MrpSpec& spec);

}  // namespace fbcast
