#include <doctest.h>

#include <cmath>

#include "fbcast/feedback_lp.hpp"
#include "fbcast/rng.hpp"

using namespace fbcast;

TEST_CASE("systematic latency") {
  CHECK(systematic_latency(ChannelTriple{{0.0, 0.0, 0.0}}) ==
        doctest::Approx(1.0));
  CHECK(systematic_latency(ChannelTriple{{0.3, 0.4, 0.5}}) ==
        doctest::Approx(1.0 / 0.94));
  // Raising any rate never lowers the latency.
  double prev = systematic_latency(ChannelTriple{{0.1, 0.4, 0.5}});
  for (double e1 : {0.2, 0.5, 0.8}) {
    const double cur = systematic_latency(ChannelTriple{{e1, 0.4, 0.5}});
    CHECK(cur >= prev);
    prev = cur;
  }
  CHECK_THROWS_AS((ChannelTriple{{1.0, 0.0, 0.0}}), RejectedInputError);
}

TEST_CASE("queue bounds") {
  ChannelTriple zero{{0.0, 0.0, 0.0}};
  QueueBounds qb0 = queue_bounds(zero, {0.0, 0.0, 0.0});
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(qb0.q_jk_plus[i] == doctest::Approx(0.0));
    CHECK(qb0.q_i_plus[i] == doctest::Approx(0.0));
  }

  ChannelTriple eps{{0.3, 0.4, 0.5}};
  QueueBounds qb = queue_bounds(eps, {0.0, 0.0, 0.0});
  CHECK(qb.q_jk_plus[0] == doctest::Approx(1.0638297872 * 0.7 * 0.2));

  // The t-dependent part is exactly linear.
  QueueBounds one = queue_bounds(eps, {0.1, 0.2, 0.3});
  QueueBounds two = queue_bounds(eps, {0.2, 0.4, 0.6});
  for (std::size_t i = 0; i < 3; ++i) {
    const double base = qb.q_i_plus[i];
    CHECK(two.q_i_plus[i] - base ==
          doctest::Approx(2.0 * (one.q_i_plus[i] - base)));
  }
  CHECK_THROWS_AS((queue_bounds(eps, {-0.1, 0.0, 0.0})), RejectedInputError);
}

TEST_CASE("uncoded fixed point: trivial and symmetric channels") {
  UncodedSolution zero = solve_uncoded_lp(ChannelTriple{{0.0, 0.0, 0.0}});
  CHECK(zero.t_star == doctest::Approx(1.0));
  for (double t : zero.t) CHECK(t == doctest::Approx(0.0));

  UncodedSolution sym = solve_uncoded_lp(ChannelTriple{{0.2, 0.2, 0.2}});
  const double each = (1.0 / 0.992) * 0.04 / 1.2;
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(sym.t[i] == doctest::Approx(each).epsilon(1e-9));
    CHECK(sym.active_constraints[i] == ActiveConstraint::queue_jk_bound);
  }
}

TEST_CASE("fixed point equals the vertex-enumeration optimum") {
  ChannelTriple eps{{0.3, 0.4, 0.5}};
  UncodedSolution fp = solve_uncoded_lp(eps);
  LpSolution lp = solve_small_lp(uncoded_lp_problem(eps));
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::fabs(fp.t[i] - lp.x[i]) <= 1e-8);
  }
  CHECK(fp.t_star == doctest::Approx(fp.t0 + lp.value).epsilon(1e-8));
}

TEST_CASE("fixed point / program equivalence over random channels") {
  Xoshiro256 rng(61);
  for (int trial = 0; trial < 40; ++trial) {
    std::array<double, 3> e{};
    for (auto& v : e) v = 0.9 * rng.next_double();
    ChannelTriple eps{e};
    UncodedSolution fp = solve_uncoded_lp(eps);
    const QueueBounds qb = queue_bounds(eps, fp.t);
    for (std::size_t i = 0; i < 3; ++i) {
      const std::size_t j = (i == 0) ? 1 : 0;
      const std::size_t k = (i == 2) ? 1 : 2;
      const double cap = qb.q_jk_plus[i] / (1.0 - eps[j] * eps[k]);
      const double qi_route = qb.q_i_plus[i] / (1.0 - eps[i]);
      // Componentwise equality with the minimum form.
      CHECK(std::fabs(fp.t[i] - std::min(qi_route, cap)) <= 1e-9);
      CHECK(fp.residual_queues[i] >= -1e-9);
    }
    LpSolution lp = solve_small_lp(uncoded_lp_problem(eps));
    CHECK(lp.unique_optimum);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(std::fabs(fp.t[i] - lp.x[i]) <= 1e-8);
    }
    CHECK(fp.t_star >= fp.t0 - 1e-12);
  }
}

TEST_CASE("pairing count vanishes without a shared pair queue") {
  UncodedSolution s = solve_uncoded_lp(ChannelTriple{{0.5, 0.0, 0.0}});
  CHECK(s.t[0] == doctest::Approx(0.0));  // eps_j = eps_k = 0 empties Q_{j,k}
}

TEST_CASE("latency bounds") {
  ChannelTriple zero{{0.0, 0.0, 0.0}};
  LatencyBounds lb = latency_bounds(zero, DistortionTriple{{0.2, 0.4, 0.9}});
  CHECK(lb.w[0] == doctest::Approx(0.8));
  CHECK(lb.w[1] == doctest::Approx(0.6));
  CHECK(lb.w[2] == doctest::Approx(0.1));
  CHECK(lb.w_minus == doctest::Approx(0.1));
  CHECK(lb.w_plus == doctest::Approx(0.8));

  ChannelTriple eps{{0.3, 0.4, 0.5}};
  LatencyBounds quad =
      latency_bounds(eps, DistortionTriple{{0.09, 0.16, 0.25}});
  CHECK(quad.w[0] == doctest::Approx(1.3));
  CHECK(quad.w[1] == doctest::Approx(1.4));
  CHECK(quad.w[2] == doctest::Approx(1.5));

  LatencyBounds nothing = latency_bounds(eps, DistortionTriple{{1.0, 1.0, 1.0}});
  CHECK(nothing.w_plus == doctest::Approx(0.0));
}

TEST_CASE("optimality report") {
  ChannelTriple eps{{0.3, 0.4, 0.5}};
  OptimalityReport r =
      optimality_report(eps, DistortionTriple{{0.09, 0.16, 1.0}});
  CHECK(r.theorem2_holds);  // some demand is free, w_minus = 0
  CHECK(r.achievable_latency.has_value());

  OptimalityReport quad =
      optimality_report(eps, DistortionTriple{{0.09, 0.16, 0.25}});
  CHECK(quad.bounds.w_minus == doctest::Approx(1.3));
  CHECK(quad.theorem2_holds == (1.3 <= quad.uncoded.t_star));
}

TEST_CASE("optimality persists to high third-user erasure rates") {
  // Fixed eps1=0.3, eps2=0.4, quadratic distortions, sweeping eps3.
  int certified_through = 0;
  for (int step = 0; step < 10; ++step) {
    const double e3 = 0.5 + 0.05 * step;
    ChannelTriple eps{{0.3, 0.4, e3}};
    DistortionTriple d{{0.09, 0.16, e3 * e3}};
    OptimalityReport r = optimality_report(eps, d);
    if (r.achievable_latency.has_value()) certified_through = step;
  }
  // Certified at least through eps3 = 0.8, but not for the whole sweep.
  CHECK(certified_through >= 6);
  OptimalityReport high = optimality_report(ChannelTriple{{0.3, 0.4, 0.95}},
                                            DistortionTriple{{0.09, 0.16, 0.9025}});
  CHECK_FALSE(high.achievable_latency.has_value());
}

TEST_CASE("preprocessing program: satisfied users need nothing") {
  PreprocessInstance inst{0.2,
                          0.1,
                          0.1,
                          {1.0, 1.0, 1.0},
                          ChannelTriple{{0.3, 0.4, 0.5}},
                          DistortionTriple{{0.0, 0.0, 0.0}},
                          0};
  PreprocessSolution sol = solve_preprocess_lp(inst);
  CHECK(sol.latency == doctest::Approx(0.0));
  for (double v : sol.deltas) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("preprocessing program: infeasible demand") {
  // Only Q_{i,j} can serve user j; demand exceeds its size.
  PreprocessInstance inst{0.5,
                          0.05,
                          0.3,
                          {1.0, 0.8, 1.0},
                          ChannelTriple{{0.3, 0.4, 0.5}},
                          DistortionTriple{{1.0, 0.0, 1.0}},
                          0};
  // 1 - d_j - r_j = 0.2 > 0.05.
  CHECK_THROWS_AS(solve_preprocess_lp(inst), InfeasibleError);
}

TEST_CASE("preprocessing program matches a hand-built oracle") {
  Xoshiro256 rng(71);
  for (int trial = 0; trial < 10; ++trial) {
    const double qi = 0.3 * rng.next_double();
    const double qij = 0.1 + 0.3 * rng.next_double();
    const double qik = 0.1 + 0.3 * rng.next_double();
    std::array<double, 3> e{0.6 * rng.next_double(), 0.6 * rng.next_double(),
                            0.6 * rng.next_double()};
    // Demands comfortably inside the queue capacities.
    const double demand_i = 0.5 * (qi + qij + qik) * rng.next_double();
    const double demand_j = 0.8 * qij * rng.next_double();
    const double demand_k = 0.8 * qik * rng.next_double();
    PreprocessInstance inst{qi,
                            qij,
                            qik,
                            {1.0 - demand_i, 1.0 - demand_j, 1.0 - demand_k},
                            ChannelTriple{e},
                            DistortionTriple{{0.0, 0.0, 0.0}},
                            0};
    PreprocessSolution sol = solve_preprocess_lp(inst);

    // Independent construction of the seven-variable program.
    LpProblem p;
    p.objective = {-1.0 / (1.0 - e[0]), -1.0 / (1.0 - e[0]),
                   -1.0 / (1.0 - e[0]), -1.0 / (1.0 - e[1]),
                   -1.0 / (1.0 - e[2]),
                   -1.0 / (1.0 - std::max(e[0], e[1])),
                   -1.0 / (1.0 - std::max(e[0], e[2]))};
    p.nonneg.assign(7, true);
    p.constraint_coeffs = {
        {1, 0, 0, 0, 0, 0, 0},     // |Q_i|
        {0, 1, 0, 1, 0, 1, 0},     // |Q_ij|
        {0, 0, 1, 0, 1, 0, 1},     // |Q_ik|
        {-1, -1, -1, 0, 0, -1, -1},  // user i demand
        {0, 0, 0, -1, 0, -1, 0},     // user j demand
        {0, 0, 0, 0, -1, 0, -1},     // user k demand
    };
    p.constraint_bounds = {qi, qij, qik, -demand_i, -demand_j, -demand_k};
    LpSolution oracle = solve_small_lp(p);
    CHECK(std::fabs(sol.latency - (-oracle.value)) <= 1e-9);

    // Raising a demand can never reduce the latency.
    PreprocessInstance harder = inst;
    harder.received[1] -= 0.01;
    if (demand_j + 0.01 <= qij) {
      CHECK(solve_preprocess_lp(harder).latency >= sol.latency - 1e-12);
    }
  }
}

TEST_CASE("pools program covers the all-pairs shape") {
  PoolsInstance inst{{}, {0.15, 0.1, 0.1}, ChannelTriple{{0.1, 0.4, 0.6}}};
  inst.pool[0b011] = 0.2;  // needed by users 1 and 2
  inst.pool[0b101] = 0.2;  // users 1 and 3
  inst.pool[0b110] = 0.2;  // users 2 and 3
  PoolsSolution sol = solve_pools_lp(inst);
  CHECK(sol.latency > 0.0);
  // Served amounts cover each demand.
  std::array<double, 3> served{};
  for (const auto& a : sol.allocations) {
    for (std::size_t u = 0; u < 3; ++u) {
      if (a.target_mask & (1u << u)) served[u] += a.amount;
    }
  }
  for (std::size_t u = 0; u < 3; ++u) {
    CHECK(served[u] >= inst.demand[u] - 1e-9);
  }
}
