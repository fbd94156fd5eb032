#include "fbcast/sim.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace fbcast {

namespace {

std::uint64_t ceil_count(double x) {
  return static_cast<std::uint64_t>(std::ceil(x - 1e-9));
}

}  // namespace

Simulator::Simulator(const SimConfig& cfg, std::ostream* trace_out)
    : cfg_(cfg),
      n_(cfg.n_symbols),
      rng_(cfg.seed),
      trace_out_(cfg.trace ? trace_out : nullptr) {
  if (n_ == 0) throw RejectedInputError("n_symbols must be >= 1");
  recon_mask_.assign(n_, 0);
  for (std::size_t u = 0; u < 3; ++u) {
    demand_count_[u] = ceil_count(static_cast<double>(n_) * (1.0 - cfg_.d[u]));
    satisfied_[u] = recon_count_[u] >= demand_count_[u];
    if (satisfied_[u]) satisfied_slot_[u] = 0;
  }
}

bool Simulator::all_satisfied() const {
  return satisfied_[0] && satisfied_[1] && satisfied_[2];
}

std::array<int, 3> Simulator::draw_noise() {
  std::array<int, 3> z{};
  for (std::size_t u = 0; u < 3; ++u) {
    z[u] = rng_.bernoulli(cfg_.eps[u]) ? 1 : 0;
  }
  return z;
}

void Simulator::note_slot(const char* phase, const std::array<int, 3>& z,
                          const std::string& action) {
  if (audit_interval_ > 0 && !preprocess_ran_ && slot_ % audit_interval_ == 0) {
    audit_conservation();
  }
  ++slot_;
  if (trace_out_) {
    (*trace_out_) << slot_ << ',' << phase << ',' << z[0] << ',' << z[1] << ','
                  << z[2] << ',' << action << '\n';
  }
}

void Simulator::deliver(std::size_t u, std::uint32_t s) {
  std::uint8_t& mask = recon_mask_[s];
  const std::uint8_t bit = static_cast<std::uint8_t>(1u << u);
  if (mask & bit) {
    throw std::logic_error("duplicate delivery: transmission was not innovative");
  }
  mask |= bit;
  ++recon_count_[u];
  ++receptions_[u];
  if (!satisfied_[u] && recon_count_[u] >= demand_count_[u]) {
    satisfied_[u] = true;
    satisfied_slot_[u] = static_cast<std::int64_t>(slot_);
  }
}

void Simulator::deliver_with_unlock(std::size_t u, std::uint32_t s) {
  deliver(u, s);
  auto it = chain_bonus_.find(s);
  if (it != chain_bonus_.end()) {
    for (std::uint32_t b : it->second) deliver(u, b);
    chain_bonus_.erase(it);
  }
}

// ---------------------------------------------------------------------------
// Systematic phase: each source symbol is retransmitted until some user
// receives it; the erased-at set routes the symbol into its queue.

void Simulator::run_systematic() {
  while (next_systematic_ < n_ && !all_satisfied()) {
    const std::uint32_t s = static_cast<std::uint32_t>(next_systematic_);
    while (true) {
      const auto z = draw_noise();
      note_slot("systematic", z, "sym=" + std::to_string(s));
      ++slots_systematic_;
      unsigned missing = 0;
      bool anyone = false;
      for (std::size_t u = 0; u < 3; ++u) {
        if (z[u] == 0) {
          deliver(u, s);
          anyone = true;
        } else {
          missing |= user_bit(u);
        }
      }
      if (anyone) {
        if (missing != 0) queues_[missing].push_back(s);
        ++next_systematic_;
        break;
      }
      if (all_satisfied()) break;
    }
  }
  for (unsigned m = 0; m < 8; ++m) queues_after_systematic_[m] = queues_[m].size();
}

// ---------------------------------------------------------------------------
// Instantly-decodable network coding: pairings q_i + q_{j,k} while possible,
// then triples q_1 + q_2 + q_3.

int Simulator::pick_pairing_type() const {
  for (std::size_t i = 0; i < 3; ++i) {
    const std::size_t j = (i == 0) ? 1 : 0;
    const std::size_t k = (i == 2) ? 1 : 2;
    if (!queues_[user_bit(i)].empty() &&
        !queues_[pair_mask(j, k)].empty()) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

bool Simulator::singles_nonempty() const {
  return !queues_[1].empty() && !queues_[2].empty() && !queues_[4].empty();
}

void Simulator::pairing_slot(int type) {
  const std::size_t i = static_cast<std::size_t>(type);
  const std::size_t j = (i == 0) ? 1 : 0;
  const std::size_t k = (i == 2) ? 1 : 2;
  auto& qi = queues_[user_bit(i)];
  auto& qjk = queues_[pair_mask(j, k)];
  const std::uint32_t a = qi.front();
  const std::uint32_t b = qjk.front();
  const auto z = draw_noise();
  note_slot("nc_pair", z,
            "type=" + std::to_string(i + 1) + " a=" + std::to_string(a) +
                " b=" + std::to_string(b));
  ++slots_nc_;
  ++pairing_slots_[i];
  if (z[i] == 0) {
    qi.pop_front();
    deliver(i, a);
  }
  const bool rj = z[j] == 0;
  const bool rk = z[k] == 0;
  if (rj || rk) {
    qjk.pop_front();
    if (rj) deliver(j, b);
    if (rk) deliver(k, b);
    if (rj && !rk) queues_[user_bit(k)].push_back(b);
    if (rk && !rj) queues_[user_bit(j)].push_back(b);
  }
}

void Simulator::triple_slot() {
  std::array<std::uint32_t, 3> syms{};
  for (std::size_t u = 0; u < 3; ++u) syms[u] = queues_[user_bit(u)].front();
  const auto z = draw_noise();
  note_slot("nc_triple", z, "syms");
  ++slots_nc_;
  ++triple_slots_;
  for (std::size_t u = 0; u < 3; ++u) {
    if (z[u] == 0) {
      queues_[user_bit(u)].pop_front();
      deliver(u, syms[u]);
    }
  }
}

void Simulator::run_network_coding() {
  while (!all_satisfied()) {
    const int type = pick_pairing_type();
    if (type >= 0) {
      pairing_slot(type);
      continue;
    }
    if (singles_nonempty()) {
      triple_slot();
      continue;
    }
    break;  // stopping condition: no pairing, no triple
  }
  if (!nc_snapshot_taken_) {
    for (unsigned m = 0; m < 8; ++m) queues_after_nc_[m] = queues_[m].size();
    nc_snapshot_taken_ = true;
  }
}

// ---------------------------------------------------------------------------
// Chaining phase.

bool Simulator::chain_in_chi(const ChainRun& run, std::uint32_t s) const {
  return std::find(run.chi.begin(), run.chi.end(), s) != run.chi.end();
}

bool Simulator::chain_start_run() {
  const std::size_t i = roles_->builder;
  auto& feed_j = queues_[pair_mask(i, roles_->target_j)];
  auto& feed_k = queues_[pair_mask(i, roles_->target_k)];
  if (feed_j.empty() || feed_k.empty()) return false;
  chain_.pending_j = feed_j.front();
  feed_j.pop_front();
  chain_.pending_k = feed_k.front();
  feed_k.pop_front();
  chain_.chi.clear();
  chain_.equations = 0;
  chain_.state = 1;
  chain_.active = true;
  return true;
}

void Simulator::chain_dissolve_live_run() {
  if (!chain_.active) return;
  const std::size_t i = roles_->builder;
  auto& feed_j = queues_[pair_mask(i, roles_->target_j)];
  auto& feed_k = queues_[pair_mask(i, roles_->target_k)];
  // Between slots the pending pair is always unreceived by its targets:
  // both symbols go back to their feed queues, and any other chain member
  // (target-received, so needed only by the builder) goes to Q_i. The
  // builder's partial equations are discarded.
  auto return_pending = [&](std::uint32_t p, std::deque<std::uint32_t>& feed) {
    feed.push_front(p);
    auto it = std::find(chain_.chi.begin(), chain_.chi.end(), p);
    if (it != chain_.chi.end()) chain_.chi.erase(it);
  };
  return_pending(chain_.pending_j, feed_j);
  return_pending(chain_.pending_k, feed_k);
  for (std::uint32_t s : chain_.chi) queues_[user_bit(i)].push_back(s);
  chain_.chi.clear();
  chain_.active = false;
}

bool Simulator::try_opportunistic() {
  const std::size_t i = roles_->builder;
  const std::size_t j = roles_->target_j;
  const std::size_t k = roles_->target_k;
  auto& qi = queues_[user_bit(i)];
  auto& qj = queues_[user_bit(j)];
  auto& qk = queues_[user_bit(k)];
  auto& feed_j = queues_[pair_mask(i, j)];
  auto& feed_k = queues_[pair_mask(i, k)];

  if (!qi.empty() && !qj.empty() && !qk.empty()) {
    const std::uint32_t si = qi.front(), sj = qj.front(), sk = qk.front();
    const auto z = draw_noise();
    note_slot("chain_opp", z, "triple");
    ++slots_tail_;
    if (z[i] == 0) {
      qi.pop_front();
      deliver(i, si);
    }
    if (z[j] == 0) {
      qj.pop_front();
      deliver(j, sj);
    }
    if (z[k] == 0) {
      qk.pop_front();
      deliver(k, sk);
    }
    return true;
  }
  // q_j + q_{i,k}: instantly decodable for everyone (i and k know q_j's
  // counterpart, j knows the pair-queue symbol).
  auto pair_send = [&](std::size_t solo, std::deque<std::uint32_t>& qsolo,
                       std::size_t other, std::deque<std::uint32_t>& feed,
                       const char* label) {
    const std::uint32_t s_solo = qsolo.front();
    const std::uint32_t s_pair = feed.front();
    const auto z = draw_noise();
    note_slot("chain_opp", z, label);
    ++slots_tail_;
    if (z[solo] == 0) {
      qsolo.pop_front();
      deliver(solo, s_solo);
    }
    const bool ri = z[i] == 0;
    const bool rother = z[other] == 0;
    if (ri || rother) {
      feed.pop_front();
      if (ri) deliver(i, s_pair);
      if (rother) deliver(other, s_pair);
      if (ri && !rother) queues_[user_bit(other)].push_back(s_pair);
      if (rother && !ri) queues_[user_bit(i)].push_back(s_pair);
    }
  };
  if (!qj.empty() && !feed_k.empty()) {
    pair_send(j, qj, k, feed_k, "j_with_ik");
    return true;
  }
  if (!qk.empty() && !feed_j.empty()) {
    pair_send(k, qk, j, feed_j, "k_with_ij");
    return true;
  }
  return false;
}

bool Simulator::chain_slot() {
  const std::size_t i = roles_->builder;
  const std::size_t j = roles_->target_j;
  const std::size_t k = roles_->target_k;
  auto& feed_j = queues_[pair_mask(i, j)];
  auto& feed_k = queues_[pair_mask(i, k)];

  const auto z = draw_noise();
  const int zi = z[i], zj = z[j], zk = z[k];
  const auto& row = chain_state_rows(
      chain_.state)[static_cast<std::size_t>(zi * 4 + zj * 2 + zk)];
  note_slot("chain", z,
            "s" + std::to_string(chain_.state) + "->" +
                std::to_string(row.next_state));
  ++slots_tail_;
  ++chain_transitions_[static_cast<std::size_t>(chain_.state - 1)]
                      [static_cast<std::size_t>(row.next_state - 1)];

  // Chain integrity: once started, every combination the builder receives
  // shares a symbol with the chain set.
  if (zi == 0 && !chain_.chi.empty() &&
      !chain_in_chi(chain_, chain_.pending_j) &&
      !chain_in_chi(chain_, chain_.pending_k)) {
    throw std::logic_error("chain integrity violated");
  }
  if (zi == 0) {
    if (!chain_in_chi(chain_, chain_.pending_j))
      chain_.chi.push_back(chain_.pending_j);
    if (!chain_in_chi(chain_, chain_.pending_k))
      chain_.chi.push_back(chain_.pending_k);
    ++chain_.equations;
  }

  const bool rj = zj == 0;
  const bool rk = zk == 0;
  if (rj) deliver(j, chain_.pending_j);
  if (rk) deliver(k, chain_.pending_k);

  const int next = row.next_state;

  // Received pendings outside the chain are needed only by the builder and
  // go to Q_i; chain members stay accounted, except that the first one at a
  // chain death becomes the unlocking symbol.
  std::optional<std::uint32_t> unlock;
  auto place_received = [&](std::uint32_t p) {
    if (next == 6) return;  // the decode below settles everything
    if (chain_in_chi(chain_, p)) {
      if (next == 5 && !unlock) unlock = p;
    } else {
      queues_[user_bit(i)].push_back(p);
    }
  };
  if (rj) place_received(chain_.pending_j);
  if (rk) place_received(chain_.pending_k);

  if (next == 6) {
    // Builder decodes the entire chain; the decoded count equals the
    // accumulated equation rewards for the run.
    if (chain_.chi.size() != chain_.equations) {
      throw std::logic_error("chain decode: equations do not match chain size");
    }
    for (std::uint32_t s : chain_.chi) deliver(i, s);
    if (!rj) queues_[user_bit(j)].push_back(chain_.pending_j);
    if (!rk) queues_[user_bit(k)].push_back(chain_.pending_k);
    chain_.chi.clear();
    chain_.active = false;
    ++chain_resets_;
    ++chain_decodes_;
    return true;
  }
  if (next == 5) {
    auto return_unreceived = [&](std::uint32_t p, bool received,
                                 std::deque<std::uint32_t>& feed) {
      if (received) return;
      if (chain_in_chi(chain_, p)) {
        throw std::logic_error("dead chain: unreceived pending inside chain");
      }
      feed.push_front(p);
    };
    return_unreceived(chain_.pending_j, rj, feed_j);
    return_unreceived(chain_.pending_k, rk, feed_k);
    if (unlock) {
      qstar_.push_back(*unlock);
      std::vector<std::uint32_t> bonus;
      for (std::uint32_t s : chain_.chi) {
        if (s != *unlock) bonus.push_back(s);
      }
      chain_bonus_[*unlock] = std::move(bonus);
    } else if (!chain_.chi.empty()) {
      throw std::logic_error("dead chain with members but no unlock symbol");
    }
    chain_.chi.clear();
    chain_.active = false;
    ++chain_resets_;
    return true;
  }

  // Transient continuation: swap in fresh feed symbols for pendings the
  // targets received; an empty feed ends the phase.
  auto dissolve_with_pending = [&](std::uint32_t p,
                                   std::deque<std::uint32_t>& feed) {
    // `p` is the surviving unreceived pending; the received one was already
    // placed above.
    feed.push_front(p);
    auto it = std::find(chain_.chi.begin(), chain_.chi.end(), p);
    if (it != chain_.chi.end()) chain_.chi.erase(it);
    for (std::uint32_t s : chain_.chi) queues_[user_bit(i)].push_back(s);
    chain_.chi.clear();
    chain_.active = false;
  };
  if (rj) {
    if (feed_j.empty()) {
      if (rk) {
        // Both pendings were received and placed; only chain members remain.
        for (std::uint32_t s : chain_.chi) queues_[user_bit(i)].push_back(s);
        chain_.chi.clear();
        chain_.active = false;
      } else {
        dissolve_with_pending(chain_.pending_k, feed_k);
      }
      return false;
    }
    chain_.pending_j = feed_j.front();
    feed_j.pop_front();
  }
  if (rk) {
    if (feed_k.empty()) {
      // pending_j is fresh from the feed (or unreceived); hand it back.
      dissolve_with_pending(chain_.pending_j, feed_j);
      return false;
    }
    chain_.pending_k = feed_k.front();
    feed_k.pop_front();
  }
  chain_.state = next;
  return true;
}

bool Simulator::run_chaining(const ChainRoles& roles) {
  roles_ = roles;
  while (true) {
    if (satisfied_[roles.builder] || satisfied_[roles.target_j] ||
        satisfied_[roles.target_k]) {
      chain_dissolve_live_run();
      return true;
    }
    if (!chain_.active && !chain_start_run()) {
      return false;  // feeds exhausted before a new chain could start
    }
    if (!cfg_.chaining_restricted && try_opportunistic()) continue;
    if (!chain_slot()) return false;  // feed exhausted mid-run
  }
}

// ---------------------------------------------------------------------------
// Idealized channel-coding tail: preprocesses the remaining queues through
// the latency-minimizing program and charges its objective as slots.

void Simulator::run_preprocess_coding() {
  if (chain_.active) {
    throw std::logic_error("preprocess entered with a live chain");
  }
  std::array<double, 8> pool{};
  for (unsigned m = 1; m < 8; ++m) {
    pool[m] = static_cast<double>(queues_[m].size());
  }
  if (next_systematic_ < n_) {
    throw std::logic_error("preprocess entered with unsent source symbols");
  }
  std::size_t builder = roles_ ? roles_->builder : 0;
  if (roles_) {
    double extra = static_cast<double>(qstar_.size());
    for (const auto& [unlock, bonus] : chain_bonus_) {
      extra += static_cast<double>(bonus.size());
    }
    pool[user_bit(builder)] += extra;
  }

  std::array<double, 3> deficits{};
  bool any = false;
  for (std::size_t u = 0; u < 3; ++u) {
    deficits[u] = satisfied_[u]
                      ? 0.0
                      : static_cast<double>(demand_count_[u] - recon_count_[u]);
    if (deficits[u] > 0.0) any = true;
  }
  preprocess_ran_ = true;
  if (!any) return;

  // Clean three-queue shape goes through the dedicated preprocessing
  // program; anything else through the generalized pools program.
  std::array<double, 3> gains{};
  double latency_slots = 0.0;
  int clean_i = -1;
  if (qstar_.empty() && chain_bonus_.empty()) {
    for (std::size_t i = 0; i < 3 && clean_i < 0; ++i) {
      const std::size_t j = (i == 0) ? 1 : 0;
      const std::size_t k = (i == 2) ? 1 : 2;
      bool clean = true;
      for (unsigned m = 1; m < 8; ++m) {
        if (pool[m] > 0.0 && m != user_bit(i) && m != pair_mask(i, j) &&
            m != pair_mask(i, k)) {
          clean = false;
        }
      }
      if (clean) clean_i = static_cast<int>(i);
    }
  }
  if (clean_i >= 0) {
    const std::size_t i = static_cast<std::size_t>(clean_i);
    const std::size_t j = (i == 0) ? 1 : 0;
    const std::size_t k = (i == 2) ? 1 : 2;
    const double dn = static_cast<double>(n_);
    PreprocessInstance inst{pool[user_bit(i)] / dn,
                            pool[pair_mask(i, j)] / dn,
                            pool[pair_mask(i, k)] / dn,
                            {},
                            cfg_.eps,
                            // Effective distortions consistent with the
                            // integer satisfaction thresholds.
                            DistortionTriple{{
                                1.0 - static_cast<double>(demand_count_[0]) / dn,
                                1.0 - static_cast<double>(demand_count_[1]) / dn,
                                1.0 - static_cast<double>(demand_count_[2]) / dn,
                            }},
                            i};
    for (std::size_t u = 0; u < 3; ++u) {
      inst.received[u] = static_cast<double>(recon_count_[u]) / dn;
    }
    PreprocessSolution sol = solve_preprocess_lp(inst);
    latency_slots = sol.latency * dn;
    gains[i] = (sol.deltas[0] + sol.deltas[1] + sol.deltas[2] +
                sol.deltas[5] + sol.deltas[6]) *
               dn;
    gains[j] = (sol.deltas[3] + sol.deltas[5]) * dn;
    gains[k] = (sol.deltas[4] + sol.deltas[6]) * dn;
  } else {
    PoolsInstance inst{pool, deficits, cfg_.eps};
    PoolsSolution sol = solve_pools_lp(inst);
    latency_slots = sol.latency;
    for (const auto& alloc : sol.allocations) {
      for (std::size_t u = 0; u < 3; ++u) {
        if (alloc.target_mask & user_bit(u)) gains[u] += alloc.amount;
      }
    }
  }

  const std::uint64_t slots = ceil_count(latency_slots);
  slot_ += slots;
  slots_tail_ += slots;
  if (trace_out_) {
    (*trace_out_) << slot_ << ",preprocess,-,-,-,slots=" << slots << '\n';
  }
  for (std::size_t u = 0; u < 3; ++u) {
    const std::uint64_t gained = ceil_count(gains[u]);
    recon_count_[u] = std::min(n_, recon_count_[u] + gained);
    if (!satisfied_[u] && recon_count_[u] >= demand_count_[u]) {
      satisfied_[u] = true;
      satisfied_slot_[u] = static_cast<std::int64_t>(slot_);
    }
  }
  for (std::size_t u = 0; u < 3; ++u) {
    if (!satisfied_[u]) {
      throw std::logic_error("preprocess left a user unsatisfied");
    }
  }
}

// ---------------------------------------------------------------------------
// Endgames: the two-user scheme on merged queues, then single-user service.

void Simulator::run_one_user(std::size_t u) {
  const bool is_builder = roles_ && roles_->builder == u;
  while (!satisfied_[u]) {
    std::deque<std::uint32_t>* source = nullptr;
    unsigned source_mask = 0;
    bool from_unsent = false;
    bool from_qstar = false;
    if (is_builder && !qstar_.empty()) {
      source = &qstar_;
      from_qstar = true;
    } else if (!queues_[user_bit(u)].empty()) {
      source = &queues_[user_bit(u)];
      source_mask = user_bit(u);
    } else {
      for (std::size_t x = 0; x < 3 && source == nullptr; ++x) {
        if (x == u) continue;
        const unsigned m = pair_mask(u, x);
        if (!queues_[m].empty()) {
          source = &queues_[m];
          source_mask = m;
        }
      }
      if (source == nullptr && next_systematic_ < n_) from_unsent = true;
    }
    if (source == nullptr && !from_unsent) {
      throw std::logic_error("single-user service with nothing owed");
    }
    const std::uint32_t s = from_unsent
                                ? static_cast<std::uint32_t>(next_systematic_)
                                : source->front();
    const auto z = draw_noise();
    note_slot("one_user", z, "u=" + std::to_string(u + 1));
    ++slots_nc_;
    if (z[u] == 0) {
      if (from_unsent) {
        ++next_systematic_;
      } else {
        source->pop_front();
      }
      if (from_qstar) {
        deliver_with_unlock(u, s);
      } else {
        deliver(u, s);
      }
      // Symbols shared with exited users leave their bookkeeping.
      for (std::size_t x = 0; x < 3; ++x) {
        if (x == u) continue;
        const bool was_owed =
            from_unsent || (source_mask & user_bit(x)) != 0;
        if (was_owed && !(recon_mask_[s] & (1u << x))) ++dropped_[x];
      }
    }
  }
}

void Simulator::run_two_user(std::size_t a, std::size_t b) {
  std::size_t e = 3;
  for (std::size_t u = 0; u < 3; ++u) {
    if (u != a && u != b) e = u;
  }
  // Fold the exited user's queues into the remaining ones.
  dropped_[e] += queues_[user_bit(e)].size();
  queues_[user_bit(e)].clear();
  auto merge = [&](std::size_t target) {
    auto& from = queues_[pair_mask(e, target)];
    auto& to = queues_[user_bit(target)];
    dropped_[e] += from.size();
    while (!from.empty()) {
      to.push_back(from.front());
      from.pop_front();
    }
  };
  merge(a);
  merge(b);
  if (roles_ && roles_->builder == e) {
    dropped_[e] += qstar_.size();
    qstar_.clear();
    for (const auto& [unlock, bonus] : chain_bonus_) {
      dropped_[e] += bonus.size();
    }
    chain_bonus_.clear();
  }

  auto& pool = queues_[pair_mask(a, b)];
  auto side = [&](std::size_t u) -> std::deque<std::uint32_t>* {
    if (roles_ && roles_->builder == u && !qstar_.empty()) return &qstar_;
    if (!queues_[user_bit(u)].empty()) return &queues_[user_bit(u)];
    return nullptr;
  };

  while (true) {
    if (satisfied_[a] && satisfied_[b]) return;
    if (satisfied_[a]) {
      run_one_user(b);
      return;
    }
    if (satisfied_[b]) {
      run_one_user(a);
      return;
    }
    auto* sa = side(a);
    auto* sb = side(b);
    if (sa != nullptr && sb != nullptr) {
      const std::uint32_t qa = sa->front();
      const std::uint32_t qb = sb->front();
      const auto z = draw_noise();
      note_slot("two_user", z,
                "combo a=" + std::to_string(qa) + " b=" + std::to_string(qb));
      ++slots_nc_;
      if (z[a] == 0) {
        sa->pop_front();
        deliver_with_unlock(a, qa);
      }
      if (z[b] == 0) {
        sb->pop_front();
        deliver_with_unlock(b, qb);
      }
      continue;
    }
    const bool have_pool = !pool.empty() || next_systematic_ < n_;
    if (have_pool) {
      const bool from_unsent = pool.empty();
      const std::uint32_t s = from_unsent
                                  ? static_cast<std::uint32_t>(next_systematic_)
                                  : pool.front();
      const auto z = draw_noise();
      note_slot("two_user", z, "pool s=" + std::to_string(s));
      ++slots_nc_;
      const bool ra = z[a] == 0;
      const bool rb = z[b] == 0;
      if (ra || rb) {
        if (from_unsent) {
          ++next_systematic_;
        } else {
          pool.pop_front();
        }
        if (ra) deliver(a, s);
        if (rb) deliver(b, s);
        if (ra && !rb) queues_[user_bit(b)].push_back(s);
        if (rb && !ra) queues_[user_bit(a)].push_back(s);
        if (from_unsent && !(recon_mask_[s] & (1u << e))) ++dropped_[e];
      }
      continue;
    }
    // One side empty with no pool: that user holds every symbol and must be
    // satisfied, handled at the top of the loop.
    throw std::logic_error("two-user service stalled");
  }
}

// ---------------------------------------------------------------------------
// Tail orchestration.

void Simulator::run_tail() {
  while (!all_satisfied()) {
    std::vector<std::size_t> unsat;
    for (std::size_t u = 0; u < 3; ++u) {
      if (!satisfied_[u]) unsat.push_back(u);
    }
    if (unsat.size() == 1) {
      run_one_user(unsat[0]);
      return;
    }
    if (unsat.size() == 2) {
      run_two_user(unsat[0], unsat[1]);
      continue;
    }

    // Three unsatisfied users: identify the terminal queue shape.
    const bool all_pairs = !queues_[pair_mask(0, 1)].empty() &&
                           !queues_[pair_mask(0, 2)].empty() &&
                           !queues_[pair_mask(1, 2)].empty();
    std::size_t builder = 0;
    if (all_pairs) {
      // Any user can build; the most reliable channel decodes chains fastest.
      for (std::size_t u = 1; u < 3; ++u) {
        if (cfg_.eps[u] < cfg_.eps[builder]) builder = u;
      }
    } else {
      bool found = false;
      for (std::size_t i = 0; i < 3 && !found; ++i) {
        const std::size_t j = (i == 0) ? 1 : 0;
        const std::size_t k = (i == 2) ? 1 : 2;
        if (!queues_[pair_mask(i, j)].empty() &&
            !queues_[pair_mask(i, k)].empty()) {
          builder = i;
          found = true;
        }
      }
      if (!found) {
        // No chaining shape; settle remaining demands by coding.
        run_preprocess_coding();
        continue;
      }
    }

    if (cfg_.tail_scheme == TailScheme::kChaining) {
      std::array<double, 3> residual{};
      for (std::size_t u = 0; u < 3; ++u) {
        residual[u] = static_cast<double>(demand_count_[u] - recon_count_[u]) /
                      static_cast<double>(n_);
      }
      const ChainRoles roles = make_chain_roles(builder, cfg_.eps.eps, residual);
      if (!run_chaining(roles) && !all_satisfied()) {
        run_preprocess_coding();
      }
    } else {
      run_preprocess_coding();
    }
  }
}

SimResult Simulator::run() {
  run_systematic();
  if (!all_satisfied()) run_network_coding();
  if (!nc_snapshot_taken_) {
    for (unsigned m = 0; m < 8; ++m) queues_after_nc_[m] = queues_[m].size();
    nc_snapshot_taken_ = true;
  }
  if (!all_satisfied()) run_tail();
  return result();
}

void Simulator::inject_tail_state(
    const std::array<std::uint64_t, 8>& queue_sizes,
    const std::array<std::uint64_t, 3>& remaining_demand) {
  std::uint64_t total = 0;
  for (unsigned m = 1; m < 8; ++m) total += queue_sizes[m];
  if (total > n_) {
    throw RejectedInputError("inject_tail_state: queue sizes exceed n_symbols");
  }
  recon_mask_.assign(n_, 0);
  for (auto& q : queues_) q.clear();
  qstar_.clear();
  chain_bonus_.clear();
  chain_ = ChainRun{};
  std::uint32_t cursor = 0;
  for (unsigned m = 1; m < 8; ++m) {
    for (std::uint64_t c = 0; c < queue_sizes[m]; ++c, ++cursor) {
      recon_mask_[cursor] = static_cast<std::uint8_t>(~m & 0x7u);
      queues_[m].push_back(cursor);
    }
  }
  for (std::uint64_t s = cursor; s < n_; ++s) recon_mask_[s] = 0x7;
  next_systematic_ = n_;
  for (std::size_t u = 0; u < 3; ++u) {
    std::uint64_t missing = 0;
    for (unsigned m = 1; m < 8; ++m) {
      if (m & user_bit(u)) missing += queue_sizes[m];
    }
    recon_count_[u] = n_ - missing;
    demand_count_[u] = recon_count_[u] + remaining_demand[u];
    if (demand_count_[u] > n_) {
      throw RejectedInputError("inject_tail_state: demand exceeds missing symbols");
    }
    satisfied_[u] = recon_count_[u] >= demand_count_[u];
    satisfied_slot_[u] = satisfied_[u] ? 0 : -1;
    dropped_[u] = 0;
    receptions_[u] = 0;
  }
}

void Simulator::audit_conservation() const {
  if (preprocess_ran_) {
    throw std::logic_error("audit unavailable after the preprocessing phase");
  }
  for (std::size_t u = 0; u < 3; ++u) {
    std::uint64_t owed = n_ - next_systematic_;
    for (unsigned m = 1; m < 8; ++m) {
      if (m & user_bit(u)) owed += queues_[m].size();
    }
    if (roles_ && roles_->builder == u) {
      owed += qstar_.size();
      for (const auto& [unlock, bonus] : chain_bonus_) owed += bonus.size();
    }
    if (chain_.active) {
      if (u == roles_->target_j) owed += 1;
      if (u == roles_->target_k) owed += 1;
      if (u == roles_->builder) {
        std::uint64_t members = chain_.chi.size();
        if (!chain_in_chi(chain_, chain_.pending_j)) ++members;
        if (!chain_in_chi(chain_, chain_.pending_k)) ++members;
        owed += members;
      }
    }
    if (recon_count_[u] + owed + dropped_[u] != n_) {
      throw std::logic_error("conservation violated for user " +
                             std::to_string(u + 1));
    }
  }
}

SimResult Simulator::result() const {
  SimResult r;
  r.seed = cfg_.seed;
  r.n_symbols = n_;
  r.eps = cfg_.eps.eps;
  r.d = cfg_.d.d;
  r.slots_systematic = slots_systematic_;
  r.slots_nc = slots_nc_;
  r.slots_tail = slots_tail_;
  const double dn = static_cast<double>(n_);
  r.latency = static_cast<double>(slot_) / dn;
  r.w_plus = latency_bounds(cfg_.eps, cfg_.d).w_plus;
  for (std::size_t u = 0; u < 3; ++u) {
    r.achieved_distortion[u] = 1.0 - static_cast<double>(recon_count_[u]) / dn;
    r.receptions[u] = receptions_[u];
    r.satisfaction_latency[u] =
        satisfied_slot_[u] >= 0
            ? static_cast<double>(satisfied_slot_[u]) / dn
            : r.latency;
  }
  r.t_hat0 = static_cast<double>(slots_systematic_) / dn;
  for (std::size_t i = 0; i < 3; ++i) {
    r.t_hat[i] = static_cast<double>(pairing_slots_[i]) / dn;
  }
  r.queues_after_systematic = queues_after_systematic_;
  r.queues_after_nc = queues_after_nc_;
  r.chain_resets = chain_resets_;
  r.chain_decodes = chain_decodes_;
  return r;
}

// ---------------------------------------------------------------------------

std::string SimResult::csv_header() {
  return "seed,N,eps1,eps2,eps3,d1,d2,d3,slots_systematic,slots_nc,slots_tail,"
         "latency,w_plus,dist1,dist2,dist3,t_hat0,t_hat1,t_hat2,t_hat3";
}

std::string SimResult::csv_row() const {
  std::ostringstream out;
  out.precision(12);
  out << seed << ',' << n_symbols;
  for (double e : eps) out << ',' << e;
  for (double v : d) out << ',' << v;
  out << ',' << slots_systematic << ',' << slots_nc << ',' << slots_tail;
  out << ',' << latency << ',' << w_plus;
  for (double v : achieved_distortion) out << ',' << v;
  out << ',' << t_hat0;
  for (double v : t_hat) out << ',' << v;
  return out.str();
}

SimConfig sim_config_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& err) {
    throw RejectedInputError(std::string("config parse error: ") + err.what());
  }
  auto require = [&](const char* key) {
    if (!j.contains(key)) {
      throw RejectedInputError(std::string("config missing field: ") + key);
    }
  };
  require("n_symbols");
  require("eps");
  require("d");
  require("seed");
  auto eps = j["eps"].get<std::vector<double>>();
  auto d = j["d"].get<std::vector<double>>();
  if (eps.size() != 3 || d.size() != 3) {
    throw RejectedInputError("eps and d must have three entries");
  }
  SimConfig cfg{j["n_symbols"].get<std::uint64_t>(),
                ChannelTriple{{eps[0], eps[1], eps[2]}},
                DistortionTriple{{d[0], d[1], d[2]}},
                j["seed"].get<std::uint64_t>()};
  if (j.contains("tail_scheme")) {
    const std::string scheme = j["tail_scheme"].get<std::string>();
    if (scheme == "chaining") {
      cfg.tail_scheme = TailScheme::kChaining;
    } else if (scheme == "preprocess_coding") {
      cfg.tail_scheme = TailScheme::kPreprocessCoding;
    } else {
      throw RejectedInputError("tail_scheme must be chaining or preprocess_coding");
    }
  }
  if (j.contains("chaining_restricted")) {
    cfg.chaining_restricted = j["chaining_restricted"].get<bool>();
  }
  if (j.contains("trace")) cfg.trace = j["trace"].get<bool>();
  return cfg;
}

std::string sim_config_to_json(const SimConfig& cfg) {
  nlohmann::json j;
  j["n_symbols"] = cfg.n_symbols;
  j["eps"] = {cfg.eps[0], cfg.eps[1], cfg.eps[2]};
  j["d"] = {cfg.d[0], cfg.d[1], cfg.d[2]};
  j["seed"] = cfg.seed;
  j["tail_scheme"] = cfg.tail_scheme == TailScheme::kChaining
                         ? "chaining"
                         : "preprocess_coding";
  j["chaining_restricted"] = cfg.chaining_restricted;
  j["trace"] = cfg.trace;
  return j.dump(2);
}

}  // namespace fbcast
