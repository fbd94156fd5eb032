#include "fbcast/mrp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <sstream>

#include "fbcast/rng.hpp"

namespace fbcast {

namespace {

constexpr double kRowSumTol = 1e-9;
constexpr double kAbsorbTol = 1e-12;
constexpr double kEdgeTol = 1e-15;
constexpr double kUnreachableTol = 1e-12;

bool is_absorbing_row(const Matrix& p, std::size_t i) {
  if (std::fabs(p(i, i) - 1.0) > kAbsorbTol) return false;
  for (std::size_t j = 0; j < p.cols(); ++j) {
    if (j != i && std::fabs(p(i, j)) > kAbsorbTol) return false;
  }
  return true;
}

}  // namespace

void validate(const MrpSpec& spec) {
  const Matrix& p = spec.transition;
  if (p.rows() != p.cols()) {
    throw RejectedInputError("transition matrix must be square");
  }
  if (!spec.reward.same_shape(p)) {
    throw RejectedInputError("reward matrix shape must match transition");
  }
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < p.cols(); ++j) {
      const double v = p(i, j);
      if (v < -kAbsorbTol || v > 1.0 + kAbsorbTol) {
        throw RejectedInputError("transition entries must lie in [0,1]");
      }
      sum += v;
    }
    if (std::fabs(sum - 1.0) > kRowSumTol) {
      throw RejectedInputError("transition rows must sum to 1");
    }
  }
  // Matrix construction already guarantees finite rewards.
}

CanonicalMrp canonicalize(const MrpSpec& spec) {
  validate(spec);
  const Matrix& p = spec.transition;
  const std::size_t n = p.rows();

  std::vector<bool> absorbing(n, false);
  std::vector<std::size_t> transients, absorbers;
  for (std::size_t i = 0; i < n; ++i) {
    absorbing[i] = is_absorbing_row(p, i);
    (absorbing[i] ? absorbers : transients).push_back(i);
  }
  if (absorbers.empty()) {
    throw NotAbsorbingError("chain has no absorbing state");
  }

  // Every transient state must reach an absorbing state: BFS on reversed
  // edges from the absorbing set.
  std::vector<bool> reaches(n, false);
  std::deque<std::size_t> frontier;
  for (std::size_t a : absorbers) {
    reaches[a] = true;
    frontier.push_back(a);
  }
  while (!frontier.empty()) {
    const std::size_t v = frontier.front();
    frontier.pop_front();
    for (std::size_t u = 0; u < n; ++u) {
      if (!reaches[u] && p(u, v) > kEdgeTol) {
        reaches[u] = true;
        frontier.push_back(u);
      }
    }
  }
  for (std::size_t t : transients) {
    if (!reaches[t]) {
      throw NotAbsorbingError("transient state cannot reach absorption");
    }
  }
  if (transients.empty()) {
    throw RejectedInputError("chain has no transient state to analyze");
  }

  CanonicalMrp c;
  c.num_transient = transients.size();
  c.num_absorbing = absorbers.size();
  c.permutation = transients;
  c.permutation.insert(c.permutation.end(), absorbers.begin(), absorbers.end());
  c.canon_of.assign(n, 0);
  for (std::size_t pos = 0; pos < n; ++pos) c.canon_of[c.permutation[pos]] = pos;

  const std::size_t nt = c.num_transient;
  const std::size_t na = c.num_absorbing;
  Matrix q(nt, nt, 0.0), r(nt, na, 0.0), h1(nt, nt, 0.0), h2(nt, na, 0.0);
  for (std::size_t a = 0; a < nt; ++a) {
    const std::size_t i = transients[a];
    for (std::size_t b = 0; b < nt; ++b) {
      const std::size_t j = transients[b];
      q(a, b) = p(i, j);
      h1(a, b) = spec.reward(i, j) * p(i, j);
    }
    for (std::size_t b = 0; b < na; ++b) {
      const std::size_t j = absorbers[b];
      r(a, b) = p(i, j);
      h2(a, b) = spec.reward(i, j) * p(i, j);
    }
  }
  c.q_block = q;
  c.r_block = r;
  c.h1_block = h1;
  c.h2_block = h2;
  c.fundamental = inverse(subtract(Matrix::identity(nt), q));
  return c;
}

namespace {

// Assembles [[tl, tr], [0, br-or-0]] in canonical order.
Matrix assemble_blocks(const CanonicalMrp& c, const Matrix& tl,
                       const Matrix& tr, bool identity_bottom) {
  const std::size_t nt = c.num_transient;
  const std::size_t n = c.num_states();
  Matrix out(n, n, 0.0);
  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t j = 0; j < nt; ++j) out(i, j) = tl(i, j);
    for (std::size_t j = 0; j < c.num_absorbing; ++j)
      out(i, nt + j) = tr(i, j);
  }
  if (identity_bottom) {
    for (std::size_t j = 0; j < c.num_absorbing; ++j)
      out(nt + j, nt + j) = 1.0;
  }
  return out;
}

}  // namespace

Matrix transition_power(const CanonicalMrp& c, unsigned n) {
  if (n == 0) throw RejectedInputError("transition_power: n must be >= 1");
  const std::size_t nt = c.num_transient;
  Matrix qn = power(c.q_block, n);
  // sum_{i=0}^{n-1} Q^i R
  Matrix acc = Matrix::identity(nt);
  Matrix qi = Matrix::identity(nt);
  for (unsigned i = 1; i < n; ++i) {
    qi = multiply(qi, c.q_block);
    acc = add(acc, qi);
  }
  return assemble_blocks(c, qn, multiply(acc, c.r_block), true);
}

Matrix transition_limit(const CanonicalMrp& c) {
  Matrix zero(c.num_transient, c.num_transient, 0.0);
  return assemble_blocks(c, zero, multiply(c.fundamental, c.r_block), true);
}

Matrix scaled_reward_n(const CanonicalMrp& c, unsigned n) {
  if (n == 0) throw RejectedInputError("scaled_reward_n: n must be >= 1");
  const std::size_t nt = c.num_transient;
  const Matrix& q = c.q_block;
  const Matrix& nmat = c.fundamental;
  const Matrix eye = Matrix::identity(nt);

  // Transient block: sum_{i=0}^{n-1} Q^i H1 Q^{n-1-i}.
  Matrix d(nt, nt, 0.0);
  Matrix left = c.h1_block;  // Q^i H1
  for (unsigned i = 0; i < n; ++i) {
    d = add(d, multiply(left, power(q, n - 1 - i)));
    left = multiply(q, left);
  }

  // Absorbing block.
  Matrix cblock = multiply(multiply(nmat, subtract(eye, power(q, n))), c.h2_block);
  Matrix h1nr = multiply(c.h1_block, multiply(nmat, c.r_block));
  cblock = add(cblock,
               multiply(multiply(nmat, subtract(eye, power(q, n - 1))), h1nr));
  if (n >= 2) {
    Matrix tail = geometric_tail(n, multiply(c.h1_block, nmat), q);
    cblock = subtract(cblock, multiply(tail, c.r_block));
  }
  return assemble_blocks(c, d, cblock, false);
}

Matrix scaled_reward_inf(const CanonicalMrp& c) {
  const std::size_t nt = c.num_transient;
  Matrix inner = add(c.h2_block,
                     multiply(c.h1_block, multiply(c.fundamental, c.r_block)));
  return assemble_blocks(c, Matrix(nt, nt, 0.0),
                         multiply(c.fundamental, inner), false);
}

namespace {

Matrix to_original_order(const CanonicalMrp& c, const Matrix& canon) {
  const std::size_t n = c.num_states();
  Matrix out(n, n, 0.0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      out(c.permutation[a], c.permutation[b]) = canon(a, b);
  return out;
}

}  // namespace

RewardSummary unscaled_rewards(const CanonicalMrp& c,
                               std::optional<unsigned> horizon,
                               const std::optional<std::vector<double>>& prior) {
  const std::size_t n = c.num_states();
  if (prior) {
    if (prior->size() != n) {
      throw RejectedInputError("prior length must equal state count");
    }
    double sum = 0.0;
    for (double v : *prior) {
      if (v < -1e-15) throw RejectedInputError("prior entries must be >= 0");
      sum += v;
    }
    if (std::fabs(sum - 1.0) > 1e-9) {
      throw RejectedInputError("prior must sum to 1");
    }
  }

  Matrix canon = horizon ? scaled_reward_n(c, *horizon) : scaled_reward_inf(c);
  RewardSummary out{to_original_order(c, canon), {}, std::nullopt, std::nullopt};
  out.per_state.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) out.per_state[i] = out.scaled.row_sum(i);
  if (prior) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += out.per_state[i] * (*prior)[i];
    out.with_prior = acc;
  }
  if (!horizon) {
    Matrix pinf = multiply(c.fundamental, c.r_block);
    Matrix cond(c.num_transient, c.num_absorbing, 0.0);
    for (std::size_t i = 0; i < c.num_transient; ++i) {
      for (std::size_t j = 0; j < c.num_absorbing; ++j) {
        if (pinf(i, j) >= kUnreachableTol) {
          cond(i, j) = canon(i, c.num_transient + j) / pinf(i, j);
        }
      }
    }
    out.conditional = cond;
  }
  return out;
}

double conditional_absorption_reward(const CanonicalMrp& c,
                                     std::size_t transient_state,
                                     std::size_t absorbing_state) {
  if (transient_state >= c.num_states() || absorbing_state >= c.num_states()) {
    throw RejectedInputError("state index out of range");
  }
  const std::size_t ci = c.canon_of[transient_state];
  const std::size_t cj = c.canon_of[absorbing_state];
  if (ci >= c.num_transient) {
    throw RejectedInputError("first state must be transient");
  }
  if (cj < c.num_transient) {
    throw RejectedInputError("second state must be absorbing");
  }
  const std::size_t j = cj - c.num_transient;
  Matrix pinf = multiply(c.fundamental, c.r_block);
  if (pinf(ci, j) < kUnreachableTol) {
    throw UnreachableAbsorptionError("absorbing state unreachable from start");
  }
  Matrix rinf = scaled_reward_inf(c);
  return rinf(ci, c.num_transient + j) / pinf(ci, j);
}

EnumeratedReward enumerate_reward(const MrpSpec& spec, unsigned n,
                                  std::size_t from, std::size_t to) {
  validate(spec);
  const std::size_t states = spec.num_states();
  if (n == 0) throw RejectedInputError("enumerate_reward: n must be >= 1");
  if (n > 8 || states > 6) {
    throw RejectedInputError("enumerate_reward: guard n <= 8 and |Omega| <= 6");
  }
  if (from >= states || to >= states) {
    throw RejectedInputError("state index out of range");
  }

  EnumeratedReward out;
  std::vector<std::size_t> path(n + 1, 0);
  path[0] = from;
  path[n] = to;
  // Depth-first over the n-1 intermediate states.
  std::function<void(std::size_t, double, double)> rec =
      [&](std::size_t depth, double prob, double reward) {
        if (depth == n) {
          const double step = spec.transition(path[depth - 1], to);
          if (step == 0.0) return;
          const double p = prob * step;
          out.probability += p;
          out.scaled += p * (reward + spec.reward(path[depth - 1], to));
          return;
        }
        for (std::size_t k = 0; k < states; ++k) {
          const double step = spec.transition(path[depth - 1], k);
          if (step == 0.0) continue;
          path[depth] = k;
          rec(depth + 1, prob * step,
              reward + spec.reward(path[depth - 1], k));
        }
      };
  rec(1, 1.0, 0.0);
  return out;
}

SimulatedReward simulate_reward(const MrpSpec& spec, std::size_t start,
                                std::uint64_t trials, std::uint64_t seed) {
  if (trials == 0) throw RejectedInputError("trials must be >= 1");
  CanonicalMrp c = canonicalize(spec);  // validates absorbing structure
  const std::size_t n = spec.num_states();
  if (start >= n) throw RejectedInputError("state index out of range");

  std::vector<bool> absorbing(n, false);
  for (std::size_t pos = c.num_transient; pos < n; ++pos) {
    absorbing[c.permutation[pos]] = true;
  }

  Xoshiro256 rng(seed);
  SimulatedReward out;
  out.trials = trials;
  out.absorption_counts.assign(n, 0);
  std::vector<double> sums(n, 0.0), sq_sums(n, 0.0);
  double total = 0.0, total_sq = 0.0;

  for (std::uint64_t t = 0; t < trials; ++t) {
    std::size_t state = start;
    double reward = 0.0;
    while (!absorbing[state]) {
      const double u = rng.next_double();
      double acc = 0.0;
      std::size_t next = state;
      for (std::size_t j = 0; j < n; ++j) {
        const double p = spec.transition(state, j);
        if (p <= 0.0) continue;
        acc += p;
        next = j;
        if (u < acc) break;
      }
      reward += spec.reward(state, next);
      state = next;
    }
    total += reward;
    total_sq += reward * reward;
    out.absorption_counts[state] += 1;
    sums[state] += reward;
    sq_sums[state] += reward * reward;
  }

  const double mean = total / static_cast<double>(trials);
  out.mean_total_reward = mean;
  const double var =
      std::max(0.0, total_sq / static_cast<double>(trials) - mean * mean);
  out.stddev_total_reward = std::sqrt(var);
  out.conditional_means.assign(n, 0.0);
  out.conditional_stddevs.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const auto cnt = out.absorption_counts[j];
    if (cnt == 0) continue;
    const double m = sums[j] / static_cast<double>(cnt);
    out.conditional_means[j] = m;
    const double v =
        std::max(0.0, sq_sums[j] / static_cast<double>(cnt) - m * m);
    out.conditional_stddevs[j] = std::sqrt(v);
  }
  return out;
}

double spectral_radius_estimate(const Matrix& q, unsigned iterations) {
  if (q.rows() != q.cols()) {
    throw RejectedInputError("spectral_radius_estimate: square matrix required");
  }
  const std::size_t n = q.rows();
  std::vector<double> v(n, 1.0);
  double radius = 0.0;
  for (unsigned it = 0; it < iterations; ++it) {
    std::vector<double> w(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) w[i] += std::fabs(q(i, j)) * v[j];
    double norm = 0.0;
    for (double x : w) norm = std::max(norm, std::fabs(x));
    if (norm == 0.0) return 0.0;
    radius = norm;
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / norm;
  }
  return radius;
}

MrpSpec mrp_from_text(std::istream& in) {
  Matrix transition = matrix_from_text(in);
  Matrix reward = matrix_from_text(in);
  MrpSpec spec{transition, reward};
  validate(spec);
  return spec;
}

MrpSpec mrp_from_text(const std::string& text) {
  std::istringstream in(text);
  return mrp_from_text(in);
}

std::string to_text(const MrpSpec& spec) {
  return to_text(spec.transition) + "\n" + to_text(spec.reward);
}

}  // namespace fbcast
