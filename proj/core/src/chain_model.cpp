#include "fbcast/chain_model.hpp"

#include <algorithm>
#include <cmath>

#include "fbcast/rng.hpp"

namespace fbcast {

namespace {

// Rows ordered by noise (z_i, z_j, z_k) counting in binary.
// Reward order: rho_j, rho_k, rho_E, rho_Qi, rho_Qj, rho_Qk, rho_Qstar.
constexpr std::array<ChainTableRow, 8> kState1 = {{
    {{0, 0, 0}, 5, {1, 1, 1, 0, 0, 0, 1}},
    {{0, 0, 1}, 2, {1, 0, 1, 0, 0, 0, 0}},
    {{0, 1, 0}, 3, {0, 1, 1, 0, 0, 0, 0}},
    {{0, 1, 1}, 4, {0, 0, 1, 0, 0, 0, 0}},
    {{1, 0, 0}, 5, {1, 1, 0, 2, 0, 0, 0}},
    {{1, 0, 1}, 1, {1, 0, 0, 1, 0, 0, 0}},
    {{1, 1, 0}, 1, {0, 1, 0, 1, 0, 0, 0}},
    {{1, 1, 1}, 1, {0, 0, 0, 0, 0, 0, 0}},
}};

constexpr std::array<ChainTableRow, 8> kState2 = {{
    {{0, 0, 0}, 5, {1, 1, 1, 0, 0, 0, 1}},
    {{0, 0, 1}, 2, {1, 0, 1, 0, 0, 0, 0}},
    {{0, 1, 0}, 3, {0, 1, 1, 0, 0, 0, 0}},
    {{0, 1, 1}, 4, {0, 0, 1, 0, 0, 0, 0}},
    {{1, 0, 0}, 5, {1, 1, 0, 1, 0, 0, 1}},
    {{1, 0, 1}, 2, {1, 0, 0, 1, 0, 0, 0}},
    {{1, 1, 0}, 5, {0, 1, 0, 0, 0, 0, 1}},
    {{1, 1, 1}, 2, {0, 0, 0, 0, 0, 0, 0}},
}};

constexpr std::array<ChainTableRow, 8> kState4 = {{
    {{0, 0, 0}, 6, {1, 1, 1, 0, 0, 0, 0}},
    {{0, 0, 1}, 6, {1, 0, 1, 0, 0, 1, 0}},
    {{0, 1, 0}, 6, {0, 1, 1, 0, 1, 0, 0}},
    {{0, 1, 1}, 6, {0, 0, 1, 0, 1, 1, 0}},
    {{1, 0, 0}, 5, {1, 1, 0, 0, 0, 0, 1}},
    {{1, 0, 1}, 2, {1, 0, 0, 0, 0, 0, 0}},
    {{1, 1, 0}, 3, {0, 1, 0, 0, 0, 0, 0}},
    {{1, 1, 1}, 4, {0, 0, 0, 0, 0, 0, 0}},
}};

// State 3 mirrors state 2 with the target roles exchanged: the noise row
// (z_i, z_j, z_k) maps to state 2's (z_i, z_k, z_j), the j/k reward columns
// swap, and states 2 and 3 swap as successors.
std::array<ChainTableRow, 8> make_state3() {
  std::array<ChainTableRow, 8> rows{};
  for (std::size_t idx = 0; idx < 8; ++idx) {
    const int zi = static_cast<int>(idx >> 2) & 1;
    const int zj = static_cast<int>(idx >> 1) & 1;
    const int zk = static_cast<int>(idx) & 1;
    const std::size_t mirror =
        static_cast<std::size_t>(zi * 4 + zk * 2 + zj);
    const ChainTableRow& src = kState2[mirror];
    ChainTableRow row;
    row.z = {zi, zj, zk};
    row.next_state = src.next_state == 2 ? 3
                     : src.next_state == 3 ? 2
                                           : src.next_state;
    row.reward = {src.reward[kRewardK],     src.reward[kRewardJ],
                  src.reward[kRewardE],     src.reward[kRewardQi],
                  src.reward[kRewardQk],    src.reward[kRewardQj],
                  src.reward[kRewardQstar]};
    rows[idx] = row;
  }
  return rows;
}

const std::array<ChainTableRow, 8> kState3 = make_state3();

}  // namespace

const std::array<ChainTableRow, 8>& chain_state_rows(int state) {
  switch (state) {
    case 1:
      return kState1;
    case 2:
      return kState2;
    case 3:
      return kState3;
    case 4:
      return kState4;
    default:
      throw RejectedInputError("chain_state_rows: transient states are 1..4");
  }
}

double noise_probability(const std::array<int, 3>& z, double eps_i,
                         double eps_j, double eps_k) {
  const double pi = z[0] ? eps_i : 1.0 - eps_i;
  const double pj = z[1] ? eps_j : 1.0 - eps_j;
  const double pk = z[2] ? eps_k : 1.0 - eps_k;
  return pi * pj * pk;
}

ChainMrp build_chain_mrp(double eps_i, double eps_j, double eps_k) {
  for (double e : {eps_i, eps_j, eps_k}) {
    if (!(e >= 0.0 && e < 1.0)) {
      throw RejectedInputError("erasure rates must lie in [0,1)");
    }
  }
  ChainMrp model{Matrix(6, 6, 0.0),
                 {Matrix(6, 6, 0.0), Matrix(6, 6, 0.0), Matrix(6, 6, 0.0),
                  Matrix(6, 6, 0.0), Matrix(6, 6, 0.0), Matrix(6, 6, 0.0),
                  Matrix(6, 6, 0.0)},
                 {eps_i, eps_j, eps_k}};

  for (int state = 1; state <= 4; ++state) {
    const auto& rows = chain_state_rows(state);
    for (const auto& row : rows) {
      const double p = noise_probability(row.z, eps_i, eps_j, eps_k);
      const std::size_t l = static_cast<std::size_t>(state - 1);
      const std::size_t m = static_cast<std::size_t>(row.next_state - 1);
      model.transition(l, m) += p;
      for (std::size_t c = 0; c < 7; ++c) {
        // Accumulate Pr(Z) * reward; normalized to the conditional mean below.
        model.rewards[c](l, m) += p * row.reward[c];
      }
    }
  }
  for (std::size_t l = 0; l < 4; ++l) {
    for (std::size_t m = 0; m < 6; ++m) {
      const double p = model.transition(l, m);
      for (std::size_t c = 0; c < 7; ++c) {
        model.rewards[c](l, m) = p > 0.0 ? model.rewards[c](l, m) / p : 0.0;
      }
    }
  }
  model.transition(4, 4) = 1.0;
  model.transition(5, 5) = 1.0;
  return model;
}

ChainRoles make_chain_roles(std::size_t builder,
                            const std::array<double, 3>& eps,
                            const std::array<double, 3>& residual_demands) {
  if (builder > 2) throw RejectedInputError("builder must be 0, 1 or 2");
  ChainRoles roles;
  roles.builder = builder;
  roles.target_j = (builder == 0) ? 1 : 0;
  roles.target_k = (builder == 2) ? 1 : 2;
  const double wj = residual_demands[roles.target_j] / (1.0 - eps[roles.target_j]);
  const double wk = residual_demands[roles.target_k] / (1.0 - eps[roles.target_k]);
  roles.bottleneck_excluded = (wk < wj) ? roles.target_k : roles.target_j;
  return roles;
}

PerRunRewards per_run_rewards(const ChainMrp& model, const ChainRoles& roles) {
  const std::size_t u_column =
      (roles.bottleneck_excluded == roles.target_j) ? kRewardJ : kRewardK;

  MrpSpec u_spec{model.transition, model.rewards[u_column]};
  CanonicalMrp u_canon = canonicalize(u_spec);
  PerRunRewards out;
  out.e_reward_u =
      unscaled_rewards(u_canon, std::nullopt).per_state[0];  // from state 1

  MrpSpec e_spec{model.transition, model.rewards[kRewardE]};
  CanonicalMrp e_canon = canonicalize(e_spec);
  out.e_reward_E_unconditional =
      unscaled_rewards(e_canon, std::nullopt).per_state[0];
  // State 6 (original index 5) is the decoding absorbing state.
  out.e_reward_E_given_decode = conditional_absorption_reward(e_canon, 0, 5);
  Matrix pinf = transition_limit(e_canon);
  out.p_decode = pinf(e_canon.canon_of[0], e_canon.canon_of[5]);
  return out;
}

std::int64_t m_lower(std::uint64_t n_symbols, double demand_u,
                     double e_reward_u) {
  if (n_symbols == 0) throw RejectedInputError("n_symbols must be >= 1");
  if (demand_u < 0.0) throw RejectedInputError("demand must be >= 0");
  if (e_reward_u <= 0.0) {
    throw RejectedInputError("e_reward_u must be positive");
  }
  return static_cast<std::int64_t>(
      std::floor(static_cast<double>(n_symbols) * demand_u / e_reward_u));
}

SufficiencyReport sufficiency_check(const ChainMrp& model,
                                    const ChainRoles& roles,
                                    std::uint64_t n_symbols,
                                    const std::array<double, 3>& residual_demands,
                                    bool unconditional_decode_reward) {
  for (double dem : residual_demands) {
    if (dem < 0.0) throw RejectedInputError("demands must be >= 0");
  }
  const PerRunRewards rewards = per_run_rewards(model, roles);
  SufficiencyReport report;
  report.e_reward_u = rewards.e_reward_u;
  report.e_reward_E = unconditional_decode_reward
                          ? rewards.e_reward_E_unconditional
                          : rewards.e_reward_E_given_decode;
  const double demand_u = residual_demands[roles.bottleneck_excluded];
  const double demand_i = residual_demands[roles.builder];
  report.m_lower = m_lower(n_symbols, demand_u, report.e_reward_u);
  report.lhs = static_cast<double>(report.m_lower);
  report.rhs =
      static_cast<double>(n_symbols) * demand_i / report.e_reward_E;
  report.holds = report.lhs >= report.rhs;
  report.d_i_boundary =
      1.0 - static_cast<double>(report.m_lower) * report.e_reward_E /
                static_cast<double>(n_symbols);
  return report;
}

std::vector<BoundaryPoint> distortion_boundary(const BoundarySpec& spec) {
  if (spec.eps_u_values.empty()) {
    throw RejectedInputError("distortion_boundary: empty sweep");
  }
  if (!spec.d_hat_u_values.empty() &&
      spec.d_hat_u_values.size() != spec.eps_u_values.size()) {
    throw RejectedInputError("distortion_boundary: d_hat sweep length mismatch");
  }
  std::vector<BoundaryPoint> curve;
  curve.reserve(spec.eps_u_values.size());
  for (std::size_t idx = 0; idx < spec.eps_u_values.size(); ++idx) {
    const double eps_u = spec.eps_u_values[idx];
    const double d_hat_u = spec.d_hat_u_values.empty()
                               ? eps_u * eps_u
                               : spec.d_hat_u_values[idx];
    // Role coordinates: u plays target j.
    ChainMrp model = build_chain_mrp(spec.eps_i, eps_u, spec.eps_k);
    ChainRoles roles{0, 1, 2, 1};
    PerRunRewards rewards = per_run_rewards(model, roles);
    const double e_reward_E = spec.unconditional_decode_reward
                                  ? rewards.e_reward_E_unconditional
                                  : rewards.e_reward_E_given_decode;
    BoundaryPoint point;
    point.eps_u = eps_u;
    point.d_hat_u = d_hat_u;
    point.e_reward_u = rewards.e_reward_u;
    point.e_reward_E = e_reward_E;
    if (spec.n_symbols) {
      const std::int64_t m =
          m_lower(*spec.n_symbols, 1.0 - d_hat_u, rewards.e_reward_u);
      point.d_i_boundary = 1.0 - static_cast<double>(m) * e_reward_E /
                                     static_cast<double>(*spec.n_symbols);
    } else {
      point.d_i_boundary =
          1.0 - (1.0 - d_hat_u) * e_reward_E / rewards.e_reward_u;
    }
    curve.push_back(point);
  }
  return curve;
}

ChainRunStats run_chain_monte_carlo(double eps_i, double eps_j, double eps_k,
                                    std::uint64_t runs, std::uint64_t seed) {
  if (runs == 0) throw RejectedInputError("runs must be >= 1");
  Xoshiro256 rng(seed);
  ChainRunStats stats;
  stats.runs = runs;
  std::array<double, 7> sums{}, sq_sums{};
  double e_decode_sum = 0.0, e_decode_sq = 0.0;

  for (std::uint64_t r = 0; r < runs; ++r) {
    int state = 1;
    std::array<double, 7> acc{};
    while (state <= 4) {
      const int zi = rng.bernoulli(eps_i) ? 1 : 0;
      const int zj = rng.bernoulli(eps_j) ? 1 : 0;
      const int zk = rng.bernoulli(eps_k) ? 1 : 0;
      const auto& row =
          chain_state_rows(state)[static_cast<std::size_t>(zi * 4 + zj * 2 + zk)];
      for (std::size_t c = 0; c < 7; ++c) acc[c] += row.reward[c];
      stats.transition_counts[static_cast<std::size_t>(state - 1)]
                             [static_cast<std::size_t>(row.next_state - 1)]++;
      state = row.next_state;
    }
    for (std::size_t c = 0; c < 7; ++c) {
      sums[c] += acc[c];
      sq_sums[c] += acc[c] * acc[c];
    }
    if (state == 6) {
      stats.decode_runs++;
      e_decode_sum += acc[kRewardE];
      e_decode_sq += acc[kRewardE] * acc[kRewardE];
    }
  }

  const double n = static_cast<double>(runs);
  for (std::size_t c = 0; c < 7; ++c) {
    stats.mean_rewards[c] = sums[c] / n;
    const double var = std::max(
        0.0, sq_sums[c] / n - stats.mean_rewards[c] * stats.mean_rewards[c]);
    stats.stddev_rewards[c] = std::sqrt(var);
  }
  if (stats.decode_runs > 0) {
    const double dn = static_cast<double>(stats.decode_runs);
    stats.mean_reward_E_given_decode = e_decode_sum / dn;
    const double var =
        std::max(0.0, e_decode_sq / dn - stats.mean_reward_E_given_decode *
                                             stats.mean_reward_E_given_decode);
    stats.stddev_reward_E_given_decode = std::sqrt(var);
  }
  return stats;
}

}  // namespace fbcast
