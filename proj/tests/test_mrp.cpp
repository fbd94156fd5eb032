#include <doctest.h>

#include <cmath>

#include "fbcast/mrp.hpp"
#include "support.hpp"

using namespace fbcast;
using fbcast::testing::random_absorbing_spec;
using fbcast::testing::two_state_chain;

namespace {

// Canonical-order full transition matrix from the blocks.
Matrix canonical_p(const CanonicalMrp& c) { return transition_power(c, 1); }

}  // namespace

TEST_CASE("canonicalize the worked two-state chain") {
  // State 1 absorbing, state 2 transient (1-based).
  Matrix p(2, 2, {1.0, 0.0, 0.3, 0.7});
  Matrix theta(2, 2, 0.0);
  CanonicalMrp c = canonicalize({p, theta});
  CHECK(c.num_transient == 1);
  CHECK(c.num_absorbing == 1);
  REQUIRE(c.permutation.size() == 2);
  CHECK(c.permutation[0] == 1);  // transient first
  CHECK(c.permutation[1] == 0);
  CHECK(c.q_block(0, 0) == doctest::Approx(0.7));
  CHECK(c.r_block(0, 0) == doctest::Approx(0.3));
  CHECK(c.fundamental(0, 0) == doctest::Approx(10.0 / 3.0));
}

TEST_CASE("canonicalize rejects broken chains") {
  // Two transients cycling forever next to an unreachable absorbing state.
  Matrix cyc(3, 3, {0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0});
  CHECK_THROWS_AS(canonicalize({cyc, Matrix(3, 3, 0.0)}), NotAbsorbingError);

  Matrix no_abs(2, 2, {0.5, 0.5, 0.5, 0.5});
  CHECK_THROWS_AS(canonicalize({no_abs, Matrix(2, 2, 0.0)}), NotAbsorbingError);

  Matrix bad_rows(2, 2, {0.5, 0.4, 0.0, 1.0});
  CHECK_THROWS_AS(canonicalize({bad_rows, Matrix(2, 2, 0.0)}),
                  RejectedInputError);
}

TEST_CASE("transition power block assembly") {
  MrpSpec spec = two_state_chain();
  CanonicalMrp c = canonicalize(spec);
  Matrix p1 = transition_power(c, 1);
  CHECK(p1(0, 0) == doctest::Approx(0.7));
  CHECK(p1(0, 1) == doctest::Approx(0.3));
  CHECK(p1(1, 1) == doctest::Approx(1.0));

  Matrix p2 = transition_power(c, 2);
  CHECK(p2(0, 0) == doctest::Approx(0.49));
  CHECK(p2(0, 1) == doctest::Approx(0.51));

  Xoshiro256 rng(7);
  MrpSpec rnd = random_absorbing_spec(rng, 4);
  CanonicalMrp rc = canonicalize(rnd);
  CHECK(max_abs_diff(transition_power(rc, 5), power(canonical_p(rc), 5)) <=
        1e-12);
}

TEST_CASE("transition limit") {
  CanonicalMrp c = canonicalize(two_state_chain());
  Matrix pinf = transition_limit(c);
  CHECK(pinf(0, 1) == doctest::Approx(1.0));

  // Two absorbing exits in ratio 1:2.
  Matrix p(3, 3, {0.7, 0.1, 0.2, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0});
  CanonicalMrp c2 = canonicalize({p, Matrix(3, 3, 0.0)});
  Matrix pinf2 = transition_limit(c2);
  CHECK(pinf2(0, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(pinf2(0, 2) == doctest::Approx(2.0 / 3.0));

  Xoshiro256 rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    MrpSpec rnd = random_absorbing_spec(rng, 5);
    CanonicalMrp rc = canonicalize(rnd);
    CHECK(max_abs_diff(transition_limit(rc), power(canonical_p(rc), 4096)) <=
          1e-8);
    Matrix lim = transition_limit(rc);
    for (std::size_t i = 0; i < lim.rows(); ++i) {
      CHECK(lim.row_sum(i) == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("scaled rewards: small horizons and the worked value") {
  MrpSpec spec = two_state_chain();
  CanonicalMrp c = canonicalize(spec);

  // n = 1 is H itself.
  Matrix r1 = scaled_reward_n(c, 1);
  CHECK(r1(0, 0) == doctest::Approx(0.7));  // 1 * 0.7
  CHECK(r1(0, 1) == doctest::Approx(0.6));  // 2 * 0.3

  // n = 2 matches H P + P H.
  Matrix h(2, 2, {0.7, 0.6, 0.0, 0.0});
  Matrix p = canonical_p(c);
  Matrix expect2 = add(multiply(h, p), multiply(p, h));
  CHECK(max_abs_diff(scaled_reward_n(c, 2), expect2) <= 1e-12);
  CHECK(scaled_reward_n(c, 2)(0, 1) == doctest::Approx(1.23));
}

TEST_CASE("scaled reward limit") {
  CanonicalMrp c = canonicalize(two_state_chain());
  Matrix rinf = scaled_reward_inf(c);
  CHECK(rinf(0, 0) == doctest::Approx(0.0));
  CHECK(rinf(0, 1) == doctest::Approx(13.0 / 3.0));

  // Zero rewards give the zero matrix.
  Matrix p(2, 2, {0.7, 0.3, 0.0, 1.0});
  CanonicalMrp zc = canonicalize({p, Matrix(2, 2, 0.0)});
  CHECK(scaled_reward_inf(zc).max_abs() == 0.0);

  Xoshiro256 rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    MrpSpec rnd = random_absorbing_spec(rng, 5);
    CanonicalMrp rc = canonicalize(rnd);
    CHECK(max_abs_diff(scaled_reward_n(rc, 200), scaled_reward_inf(rc)) <=
          1e-6);
  }
}

TEST_CASE("recurrence identity") {
  Xoshiro256 rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    MrpSpec rnd = random_absorbing_spec(rng, 5);
    CanonicalMrp c = canonicalize(rnd);
    Matrix p = canonical_p(c);
    Matrix h(p.rows(), p.cols(), 0.0);
    for (std::size_t i = 0; i < c.num_transient; ++i) {
      for (std::size_t j = 0; j < c.num_transient; ++j)
        h(i, j) = c.h1_block(i, j);
      for (std::size_t j = 0; j < c.num_absorbing; ++j)
        h(i, c.num_transient + j) = c.h2_block(i, j);
    }
    for (unsigned n = 2; n <= 10; ++n) {
      Matrix lhs = scaled_reward_n(c, n);
      Matrix rhs = add(multiply(scaled_reward_n(c, n - 1), p),
                       multiply(power(p, n - 1), h));
      CHECK(max_abs_diff(lhs, rhs) <= 1e-10);
    }
  }
}

TEST_CASE("unscaled rewards and priors") {
  CanonicalMrp c = canonicalize(two_state_chain());
  RewardSummary inf = unscaled_rewards(c, std::nullopt);
  CHECK(inf.per_state[0] == doctest::Approx(13.0 / 3.0));
  CHECK(inf.per_state[1] == doctest::Approx(0.0));

  // Point mass matches per_state; uniform prior averages in the zero row.
  RewardSummary point =
      unscaled_rewards(c, std::nullopt, std::vector<double>{1.0, 0.0});
  CHECK(point.with_prior.has_value());
  CHECK(*point.with_prior == doctest::Approx(inf.per_state[0]));
  RewardSummary uniform =
      unscaled_rewards(c, std::nullopt, std::vector<double>{0.5, 0.5});
  CHECK(*uniform.with_prior == doctest::Approx(13.0 / 6.0));

  CHECK_THROWS_AS(
      unscaled_rewards(c, std::nullopt, std::vector<double>{0.7, 0.7}),
      RejectedInputError);
  CHECK_THROWS_AS(
      unscaled_rewards(c, std::nullopt, std::vector<double>{-0.5, 1.5}),
      RejectedInputError);
}

TEST_CASE("conditional absorption reward") {
  CanonicalMrp c = canonicalize(two_state_chain());
  // Single absorbing state: conditioning on a sure event.
  CHECK(conditional_absorption_reward(c, 0, 1) ==
        doctest::Approx(13.0 / 3.0));

  // Unreachable absorbing state.
  Matrix p(3, 3, {0.5, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0});
  CanonicalMrp c2 = canonicalize({p, Matrix(3, 3, 0.0)});
  CHECK_THROWS_AS(conditional_absorption_reward(c2, 0, 2),
                  UnreachableAbsorptionError);
  CHECK_THROWS_AS(conditional_absorption_reward(c2, 1, 2),
                  RejectedInputError);  // first argument must be transient
}

TEST_CASE("law of total expectation across absorbing states") {
  Xoshiro256 rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    MrpSpec rnd = random_absorbing_spec(rng, 5);
    CanonicalMrp c = canonicalize(rnd);
    Matrix pinf = transition_limit(c);
    RewardSummary inf = unscaled_rewards(c, std::nullopt);
    for (std::size_t ci = 0; ci < c.num_transient; ++ci) {
      const std::size_t orig_i = c.permutation[ci];
      double total = 0.0;
      bool all_reachable = true;
      for (std::size_t cj = 0; cj < c.num_absorbing; ++cj) {
        const double prob = pinf(ci, c.num_transient + cj);
        if (prob < 1e-12) {
          all_reachable = false;
          break;
        }
        const std::size_t orig_j = c.permutation[c.num_transient + cj];
        total += conditional_absorption_reward(c, orig_i, orig_j) * prob;
      }
      if (all_reachable) {
        CHECK(total == doctest::Approx(inf.per_state[orig_i]).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("enumeration oracle") {
  MrpSpec spec = two_state_chain();
  // n = 1: scaled reward is theta * p entrywise.
  EnumeratedReward e1 = enumerate_reward(spec, 1, 0, 1);
  CHECK(e1.scaled == doctest::Approx(0.6));
  CHECK(e1.probability == doctest::Approx(0.3));

  EnumeratedReward e2 = enumerate_reward(spec, 2, 0, 1);
  CHECK(e2.scaled == doctest::Approx(1.23));
  CHECK(e2.probability == doctest::Approx(0.51));

  MrpSpec zero{spec.transition, Matrix(2, 2, 0.0)};
  for (unsigned n = 1; n <= 4; ++n) {
    CHECK(enumerate_reward(zero, n, 0, 0).scaled == doctest::Approx(0.0));
    CHECK(enumerate_reward(zero, n, 0, 1).scaled == doctest::Approx(0.0));
  }

  CHECK_THROWS_AS(enumerate_reward(spec, 9, 0, 1), RejectedInputError);
}

TEST_CASE("closed form matches enumeration on random chains") {
  Xoshiro256 rng(37);
  for (int trial = 0; trial < 10; ++trial) {
    MrpSpec rnd = random_absorbing_spec(rng, 5);
    CanonicalMrp c = canonicalize(rnd);
    const unsigned n = 1 + static_cast<unsigned>(rng.next_u64() % 6);
    Matrix scaled = unscaled_rewards(c, n).scaled;
    for (std::size_t i = 0; i < rnd.num_states(); ++i) {
      for (std::size_t j = 0; j < rnd.num_states(); ++j) {
        EnumeratedReward e = enumerate_reward(rnd, n, i, j);
        CHECK(std::fabs(scaled(i, j) - e.scaled) <= 1e-9);
      }
    }
  }
}

TEST_CASE("monte carlo simulation of rewards") {
  MrpSpec spec = two_state_chain();
  SimulatedReward a = simulate_reward(spec, 0, 20000, 7);
  SimulatedReward b = simulate_reward(spec, 0, 20000, 7);
  CHECK(a.mean_total_reward == b.mean_total_reward);
  CHECK(a.absorption_counts[1] == b.absorption_counts[1]);

  SimulatedReward big = simulate_reward(spec, 0, 1000000, 12345);
  const double se =
      big.stddev_total_reward / std::sqrt(static_cast<double>(big.trials));
  CHECK(std::fabs(big.mean_total_reward - 13.0 / 3.0) <= 3.0 * se);
  CHECK(big.absorption_counts[1] == big.trials);

  CHECK_THROWS_AS(simulate_reward(spec, 0, 0, 1), RejectedInputError);
}

TEST_CASE("absorption histogram matches the limit distribution") {
  Xoshiro256 rng(43);
  MrpSpec rnd = random_absorbing_spec(rng, 5);
  CanonicalMrp c = canonicalize(rnd);
  Matrix pinf = transition_limit(c);
  const std::size_t start_orig = c.permutation[0];
  SimulatedReward sim = simulate_reward(rnd, start_orig, 200000, 99);
  for (std::size_t cj = 0; cj < c.num_absorbing; ++cj) {
    const double p = pinf(0, c.num_transient + cj);
    const std::size_t orig = c.permutation[c.num_transient + cj];
    const double freq = static_cast<double>(sim.absorption_counts[orig]) /
                        static_cast<double>(sim.trials);
    const double sigma =
        std::sqrt(p * (1.0 - p) / static_cast<double>(sim.trials));
    CHECK(std::fabs(freq - p) <= 3.0 * sigma + 1e-9);
  }
}

TEST_CASE("spectral radius of accepted transient blocks is below one") {
  Xoshiro256 rng(47);
  for (int trial = 0; trial < 10; ++trial) {
    MrpSpec rnd = random_absorbing_spec(rng, 5);
    CanonicalMrp c = canonicalize(rnd);
    CHECK(spectral_radius_estimate(c.q_block) < 1.0);
    CHECK(power(c.q_block, 4096).max_abs() <= 1e-10);
  }
}

TEST_CASE("vanishing transient reward block") {
  Xoshiro256 rng(53);
  for (int trial = 0; trial < 5; ++trial) {
    MrpSpec rnd = random_absorbing_spec(rng, 5, 0.9);
    CanonicalMrp c = canonicalize(rnd);
    Matrix rn = scaled_reward_n(c, 500);
    double max_d = 0.0;
    for (std::size_t i = 0; i < c.num_transient; ++i)
      for (std::size_t j = 0; j < c.num_transient; ++j)
        max_d = std::max(max_d, std::fabs(rn(i, j)));
    CHECK(max_d < 1e-8);
  }
}

TEST_CASE("mrp text format round trip") {
  MrpSpec spec = two_state_chain();
  MrpSpec back = mrp_from_text(to_text(spec));
  CHECK(max_abs_diff(spec.transition, back.transition) == 0.0);
  CHECK(max_abs_diff(spec.reward, back.reward) == 0.0);
}
