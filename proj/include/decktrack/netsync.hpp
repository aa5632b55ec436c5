#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "decktrack/game.hpp"

namespace decktrack {

// Two-peer replication of the game state over a simulated channel. Peer 0 is
// the host: it assigns the authoritative total order to events from both
// sides and echoes that log to the guest. The guest applies its own events
// optimistically and reconciles against the authoritative log as it arrives,
// so both replicas serialize identically once the channel quiesces.

struct HandEventMsg {
  std::uint8_t origin_peer = 0;
  std::uint64_t origin_seq = 0;   // origin's numbering, used to match echoes
  double applied_time = 0.0;      // host-assigned effective time (echoes)
  HandEvent event;
};

struct CalibrationAnchorMsg {
  std::uint8_t origin_peer = 0;
  std::uint64_t origin_seq = 0;
  double applied_time = 0.0;
  std::uint8_t player = 0;  // whose deck anchor
  double u = 0.0;
  double v = 0.0;
  double heading = 0.0;
};

struct StateDigestMsg {
  std::uint64_t digest = 0;
  double at_time = 0.0;
};

using SyncPayload = std::variant<HandEventMsg, CalibrationAnchorMsg, StateDigestMsg>;

struct SyncMessage {
  std::uint64_t sequence = 0;  // strictly increasing per sender
  std::uint8_t sender = 0;
  SyncPayload payload;
};

/// Binary frame layout (all integers little-endian, doubles as IEEE-754
/// little-endian bit patterns):
///   u32 length of the remainder
///   u8 sender, u64 sequence, u8 payload kind (1/2/3), payload fields in
///   declaration order.
/// decode_message raises MalformedFrame with the offending byte offset.
std::vector<std::uint8_t> encode_message(const SyncMessage& message);
SyncMessage decode_message(std::span<const std::uint8_t> bytes);

struct ChannelConfig {
  double latency = 0.5;  // one-way seconds, the measured voice/data delay
  double drop_probability = 0.0;
  std::uint64_t rng_seed = 0;
  bool reliable_ordered = true;
};

enum class ApplyStatus : std::uint8_t {
  applied,
  buffered_out_of_order,
  duplicate,
  digest_ok,
  digest_mismatch,
};

struct ApplyRecord {
  double time = 0.0;
  int peer = 0;
  int origin = 0;
  std::uint64_t origin_seq = 0;
  bool authoritative = false;
  std::string description;
};

/// One replication endpoint. All event application is funneled through a
/// single logical owner; live transports must preserve the same serialized
/// apply contract.
class PeerSession {
 public:
  PeerSession() = default;
  PeerSession(int local_peer, std::uint64_t game_seed);

  int local_peer() const { return local_peer_; }
  bool is_host() const { return local_peer_ == 0; }

  /// Local event: applied immediately (host: authoritative; guest:
  /// optimistic) and queued for the wire.
  void submit_local_event(const HandEvent& event);
  void submit_local_anchor(double u, double v, double heading);

  /// Remote message in. Out-of-order messages are buffered, duplicates are
  /// no-ops, digests are compared against the local authoritative state.
  ApplyStatus peer_apply(const SyncMessage& message, double now);

  /// Messages waiting to be sent (drained by the transport).
  std::vector<SyncMessage> take_outbound();

  SyncMessage make_digest_message();

  const GameState& state() const { return display_; }
  const GameState& authoritative_state() const { return auth_; }
  bool divergence_detected() const { return divergence_detected_; }
  std::uint64_t pending_local() const { return pending_.size(); }
  const std::vector<ApplyRecord>& applies() const { return applies_; }

  /// Test hook: corrupts the replica to exercise divergence detection.
  void inject_fault();

 private:
  struct LogEntry {
    SyncPayload payload;
  };

  void apply_authoritative(const SyncPayload& payload, double now);
  void rebuild_display();
  double host_apply(SyncPayload payload, double now);  // returns effective time
  std::uint64_t next_out_seq_ = 1;
  std::uint64_t next_local_seq_ = 1;

  int local_peer_ = 0;
  GameState auth_;      // authoritative replica (host order)
  GameState display_;   // auth + optimistic local events (guest)
  std::deque<SyncPayload> pending_;  // guest events not yet echoed
  std::vector<SyncMessage> outbound_;
  std::map<std::uint64_t, SyncMessage> reorder_;  // keyed by sender sequence
  std::uint64_t last_applied_seq_ = 0;  // per remote sender (single remote)
  bool divergence_detected_ = false;
  std::vector<ApplyRecord> applies_;
};

/// Applies a hand event with the session's effective-time rule and resolves
/// the battle when both battle piles are filled. Shared by every replica so
/// the ordered log replays identically everywhere.
HandEffect apply_game_step(GameState& state, const HandEvent& event);

struct SessionOptions {
  std::uint64_t game_seed = 0;
  bool inject_fault = false;  // corrupts the guest replica near the end
  std::optional<std::array<double, 3>> anchor_a;  // u, v, heading
  std::optional<std::array<double, 3>> anchor_b;
};

struct SessionResult {
  bool converged = false;
  std::string final_state_a;
  std::string final_state_b;
  std::vector<ApplyRecord> transcript;
  std::uint64_t messages_sent = 0;
  std::uint64_t messages_delivered = 0;
  std::uint64_t messages_dropped = 0;
};

/// Discrete-event simulation of a full two-peer session: both traces are
/// played at their local peers, messages travel with the configured latency
/// and loss (retransmitted under reliable-ordered delivery), digests are
/// exchanged at quiescence, and the final replicas are compared.
SessionResult simulate_session(std::span<const HandEvent> trace_a,
                               std::span<const HandEvent> trace_b,
                               const ChannelConfig& channel,
                               const SessionOptions& options = {});

void write_transcript(std::ostream& sink, const SessionResult& result);

}  // namespace decktrack
