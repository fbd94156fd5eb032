#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "fbcast/chain_model.hpp"
#include "fbcast/feedback_lp.hpp"
#include "fbcast/rng.hpp"

namespace fbcast {

enum class TailScheme { kChaining, kPreprocessCoding };

struct SimConfig {
  std::uint64_t n_symbols = 0;
  ChannelTriple eps;
  DistortionTriple d;
  std::uint64_t seed = 0;
  TailScheme tail_scheme = TailScheme::kChaining;
  // When true, the chaining phase never sends the opportunistic side
  // combinations; this is the variant the Markov model analyzes.
  bool chaining_restricted = true;
  bool trace = false;
};

struct SimResult {
  std::uint64_t seed = 0;
  std::uint64_t n_symbols = 0;
  std::array<double, 3> eps{};
  std::array<double, 3> d{};
  std::uint64_t slots_systematic = 0;
  std::uint64_t slots_nc = 0;    // pairings, triples and the two-user endgame
  std::uint64_t slots_tail = 0;  // chaining and preprocessing phases
  double latency = 0.0;
  double w_plus = 0.0;
  std::array<double, 3> achieved_distortion{};
  std::array<std::uint64_t, 3> receptions{};
  std::array<double, 3> satisfaction_latency{};
  double t_hat0 = 0.0;              // systematic slots / N
  std::array<double, 3> t_hat{};    // pairing slots per type / N
  std::array<std::uint64_t, 8> queues_after_systematic{};  // by user-set mask
  std::array<std::uint64_t, 8> queues_after_nc{};
  std::uint64_t chain_resets = 0;
  std::uint64_t chain_decodes = 0;

  std::string csv_row() const;
  static std::string csv_header();
};

// Discrete-time simulation of the three-user erasure broadcast channel with
// universal feedback: systematic phase, instantly-decodable network coding,
// then a chaining or queue-preprocessing tail. One instance runs one seeded
// experiment; all randomness flows from the config seed.
class Simulator {
 public:
  explicit Simulator(const SimConfig& cfg, std::ostream* trace_out = nullptr);

  // Full pipeline. Deterministic for a fixed config.
  SimResult run();

  // Individual phases, exposed for targeted tests.
  void run_systematic();
  void run_network_coding();
  // Returns false when a chain feed queue ran dry with targets unsatisfied.
  bool run_chaining(const ChainRoles& roles);
  void run_preprocess_coding();
  // Two-user service on merged queues after one user has exited.
  void run_two_user(std::size_t a, std::size_t b);
  // Serves the tail after the network-coding stopping condition:
  // shape detection, the configured tail scheme, and the endgames.
  void run_tail();

  // Replaces the state with a synthetic tail configuration: queue_sizes[mask]
  // symbols are missing at exactly the users in mask, the rest of the source
  // is fully delivered, and user u must still decode remaining_demand[u]
  // symbols. Used to drive the tail from a constructed state.
  void inject_tail_state(const std::array<std::uint64_t, 8>& queue_sizes,
                         const std::array<std::uint64_t, 3>& remaining_demand);

  SimResult result() const;

  bool all_satisfied() const;
  bool satisfied(std::size_t u) const { return satisfied_[u]; }
  std::uint64_t queue_size(unsigned mask) const { return queues_[mask].size(); }
  std::uint64_t qstar_size() const { return qstar_.size(); }
  std::uint64_t recon_count(std::size_t u) const { return recon_count_[u]; }
  std::uint64_t total_slots() const { return slot_; }

  // Checks that every symbol a user still needs is owed by exactly one piece
  // of bookkeeping (a queue, the unsent pool, or the chain records).
  // Throws std::logic_error on violation. Unavailable after the idealized
  // preprocessing phase, which settles demands in aggregate.
  void audit_conservation() const;

  // Runs the conservation audit every `interval` slots (0 disables).
  void set_audit_interval(std::uint64_t interval) { audit_interval_ = interval; }

  // Chaining transitions observed by this simulator, [from 1..4][to 1..6].
  const std::array<std::array<std::uint64_t, 6>, 4>& chain_transitions() const {
    return chain_transitions_;
  }

 private:
  struct ChainRun {
    bool active = false;
    int state = 1;
    std::uint32_t pending_j = 0;
    std::uint32_t pending_k = 0;
    std::vector<std::uint32_t> chi;
    std::uint64_t equations = 0;
  };

  std::array<int, 3> draw_noise();
  void deliver(std::size_t u, std::uint32_t s);
  void deliver_with_unlock(std::size_t u, std::uint32_t s);
  void note_slot(const char* phase, const std::array<int, 3>& z,
                 const std::string& action);

  bool chain_in_chi(const ChainRun& run, std::uint32_t s) const;
  void chain_dissolve_live_run();
  bool chain_start_run();
  bool chain_slot();  // false when a feed replacement failed (exhaustion)
  bool try_opportunistic();

  void pairing_slot(int type);
  void triple_slot();
  void run_one_user(std::size_t u);
  int pick_pairing_type() const;
  bool singles_nonempty() const;

  unsigned user_bit(std::size_t u) const { return 1u << u; }
  unsigned pair_mask(std::size_t a, std::size_t b) const {
    return (1u << a) | (1u << b);
  }

  SimConfig cfg_;
  std::uint64_t n_;
  Xoshiro256 rng_;
  std::ostream* trace_out_;

  std::vector<std::uint8_t> recon_mask_;
  std::array<std::uint64_t, 3> recon_count_{};
  std::array<std::uint64_t, 3> demand_count_{};
  std::array<bool, 3> satisfied_{};
  std::array<std::int64_t, 3> satisfied_slot_{-1, -1, -1};
  std::array<std::uint64_t, 3> receptions_{};
  // Symbols a satisfied user still lacks but whose bookkeeping no longer
  // tracks them (dropped at queue merges and endgame deliveries).
  std::array<std::uint64_t, 3> dropped_{};

  std::array<std::deque<std::uint32_t>, 8> queues_;
  std::deque<std::uint32_t> qstar_;
  std::unordered_map<std::uint32_t, std::vector<std::uint32_t>> chain_bonus_;
  std::uint64_t next_systematic_ = 0;

  std::uint64_t slot_ = 0;
  std::uint64_t slots_systematic_ = 0;
  std::uint64_t slots_nc_ = 0;
  std::uint64_t slots_tail_ = 0;
  std::array<std::uint64_t, 3> pairing_slots_{};
  std::uint64_t triple_slots_ = 0;
  std::array<std::uint64_t, 8> queues_after_systematic_{};
  std::array<std::uint64_t, 8> queues_after_nc_{};
  bool nc_snapshot_taken_ = false;

  std::optional<ChainRoles> roles_;
  ChainRun chain_;
  std::uint64_t chain_resets_ = 0;
  std::uint64_t chain_decodes_ = 0;
  std::array<std::array<std::uint64_t, 6>, 4> chain_transitions_{};
  bool preprocess_ran_ = false;
  std::uint64_t audit_interval_ = 0;
};

SimConfig sim_config_from_json(const std::string& json_text);
std::string sim_config_to_json(const SimConfig& cfg);

}  // namespace fbcast
