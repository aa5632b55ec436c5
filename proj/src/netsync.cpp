#include "decktrack/netsync.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <queue>

#include "decktrack/lineio.hpp"
#include "decktrack/rng.hpp"

namespace decktrack {

namespace {

constexpr std::uint8_t kKindHandEvent = 1;
constexpr std::uint8_t kKindAnchor = 2;
constexpr std::uint8_t kKindDigest = 3;

void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_i32(std::vector<std::uint8_t>& out, std::int32_t v) {
  put_u32(out, static_cast<std::uint32_t>(v));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

// Bounds-checked little-endian reader; errors carry the byte offset so a
// truncated or corrupt frame is diagnosable. Arbitrary input must never
// crash the decoder, only fail it.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_++]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  [[noreturn]] void fail(const std::string& what) const {
    raise(Errc::malformed_frame, what + " at byte offset " + std::to_string(pos_));
  }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) fail("frame truncated");
  }
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

double checked_finite(ByteReader& reader, double v, const char* what) {
  if (!std::isfinite(v)) reader.fail(std::string("non-finite ") + what);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_message(const SyncMessage& message) {
  std::vector<std::uint8_t> payload;
  put_u8(payload, message.sender);
  put_u64(payload, message.sequence);
  if (const auto* ev = std::get_if<HandEventMsg>(&message.payload)) {
    put_u8(payload, kKindHandEvent);
    put_u8(payload, ev->origin_peer);
    put_u64(payload, ev->origin_seq);
    put_f64(payload, ev->applied_time);
    put_f64(payload, ev->event.time);
    put_u8(payload, static_cast<std::uint8_t>(ev->event.player));
    put_u8(payload, static_cast<std::uint8_t>(ev->event.kind));
    put_u8(payload, static_cast<std::uint8_t>(ev->event.target));
    put_i32(payload, ev->event.target_id);
    put_f64(payload, ev->event.hand_uv.x());
    put_f64(payload, ev->event.hand_uv.y());
    put_f64(payload, ev->event.hand_height);
  } else if (const auto* anchor = std::get_if<CalibrationAnchorMsg>(&message.payload)) {
    put_u8(payload, kKindAnchor);
    put_u8(payload, anchor->origin_peer);
    put_u64(payload, anchor->origin_seq);
    put_f64(payload, anchor->applied_time);
    put_u8(payload, anchor->player);
    put_f64(payload, anchor->u);
    put_f64(payload, anchor->v);
    put_f64(payload, anchor->heading);
  } else {
    const auto& digest = std::get<StateDigestMsg>(message.payload);
    put_u8(payload, kKindDigest);
    put_u64(payload, digest.digest);
    put_f64(payload, digest.at_time);
  }

  std::vector<std::uint8_t> frame;
  frame.reserve(payload.size() + 4);
  put_u32(frame, static_cast<std::uint32_t>(payload.size()));
  frame.insert(frame.end(), payload.begin(), payload.end());
  return frame;
}

SyncMessage decode_message(std::span<const std::uint8_t> bytes) {
  ByteReader reader(bytes);
  const std::uint32_t length = reader.u32();
  if (length != reader.remaining()) reader.fail("length prefix does not match frame size");

  SyncMessage message;
  message.sender = reader.u8();
  if (message.sender >= kPlayers) reader.fail("sender out of range");
  message.sequence = reader.u64();
  const std::uint8_t kind = reader.u8();
  switch (kind) {
    case kKindHandEvent: {
      HandEventMsg ev;
      ev.origin_peer = reader.u8();
      if (ev.origin_peer >= kPlayers) reader.fail("origin peer out of range");
      ev.origin_seq = reader.u64();
      ev.applied_time = checked_finite(reader, reader.f64(), "applied_time");
      ev.event.time = checked_finite(reader, reader.f64(), "event time");
      ev.event.player = reader.u8();
      const std::uint8_t ev_kind = reader.u8();
      if (ev_kind > 1) reader.fail("bad event kind");
      ev.event.kind = static_cast<HandEvent::Kind>(ev_kind);
      const std::uint8_t target = reader.u8();
      if (target > 1) reader.fail("bad event target");
      ev.event.target = static_cast<HandEvent::Target>(target);
      ev.event.target_id = reader.i32();
      ev.event.hand_uv.x() = checked_finite(reader, reader.f64(), "hand u");
      ev.event.hand_uv.y() = checked_finite(reader, reader.f64(), "hand v");
      ev.event.hand_height = checked_finite(reader, reader.f64(), "hand height");
      message.payload = ev;
      break;
    }
    case kKindAnchor: {
      CalibrationAnchorMsg anchor;
      anchor.origin_peer = reader.u8();
      if (anchor.origin_peer >= kPlayers) reader.fail("origin peer out of range");
      anchor.origin_seq = reader.u64();
      anchor.applied_time = checked_finite(reader, reader.f64(), "applied_time");
      anchor.player = reader.u8();
      if (anchor.player >= kPlayers) reader.fail("anchor player out of range");
      anchor.u = checked_finite(reader, reader.f64(), "anchor u");
      anchor.v = checked_finite(reader, reader.f64(), "anchor v");
      anchor.heading = checked_finite(reader, reader.f64(), "anchor heading");
      message.payload = anchor;
      break;
    }
    case kKindDigest: {
      StateDigestMsg digest;
      digest.digest = reader.u64();
      digest.at_time = checked_finite(reader, reader.f64(), "digest time");
      message.payload = digest;
      break;
    }
    default:
      reader.fail("unknown payload kind");
  }
  if (reader.remaining() != 0) reader.fail("trailing bytes after payload");
  return message;
}

HandEffect apply_game_step(GameState& state, const HandEvent& event) {
  const HandEffect effect = apply_hand_event(state, event);
  // Battle resolution is a pure function of the ordered event log, so every
  // replica resolves identically; the host's ordering makes it authoritative.
  if (battle_ready(state)) resolve_battle(state);
  return effect;
}

namespace {

// A bad event (unknown card/pile id) must not tear down the session, and it
// must fail the same way on every replica replaying the log.
std::string apply_step_logged(GameState& state, const HandEvent& event) {
  try {
    return hand_effect_name(apply_game_step(state, event));
  } catch (const Error& e) {
    return errc_name(e.code());
  }
}

}  // namespace

namespace {

void install_anchor(GameState& state, const CalibrationAnchorMsg& anchor) {
  // Each calibrated deck anchor maps to that player's fixed seat on the
  // shared table; player 1's seat is player 0's rotated half a turn.
  Eigen::Vector2d uv(anchor.u, anchor.v);
  if (anchor.player == 1) uv = -uv;
  state.pile_anchors[static_cast<int>(deck_pile(anchor.player))] = uv;
}

}  // namespace

PeerSession::PeerSession(int local_peer, std::uint64_t game_seed) : local_peer_(local_peer) {
  auth_ = new_game(game_seed);
  display_ = auth_;
}

double PeerSession::host_apply(SyncPayload payload, double now) {
  double effective = 0.0;
  std::string description;
  int origin = 0;
  std::uint64_t origin_seq = 0;
  if (auto* ev = std::get_if<HandEventMsg>(&payload)) {
    HandEvent event = ev->event;
    effective = std::max(event.time, auth_.clock);
    event.time = effective;
    description = apply_step_logged(auth_, event);
    ev->applied_time = effective;
    origin = ev->origin_peer;
    origin_seq = ev->origin_seq;
  } else if (auto* anchor = std::get_if<CalibrationAnchorMsg>(&payload)) {
    install_anchor(auth_, *anchor);
    effective = std::max(anchor->applied_time, auth_.clock);
    anchor->applied_time = effective;
    description = "AnchorInstalled";
    origin = anchor->origin_peer;
    origin_seq = anchor->origin_seq;
  }
  display_ = auth_;
  applies_.push_back(
      ApplyRecord{now, local_peer_, origin, origin_seq, true, description});

  // Echo the ordered entry so the guest replays the same log.
  outbound_.push_back(SyncMessage{next_out_seq_++, static_cast<std::uint8_t>(local_peer_),
                                  payload});
  return effective;
}

void PeerSession::apply_authoritative(const SyncPayload& payload, double now) {
  std::string description;
  int origin = 0;
  std::uint64_t origin_seq = 0;
  if (const auto* ev = std::get_if<HandEventMsg>(&payload)) {
    HandEvent event = ev->event;
    event.time = std::max(ev->applied_time, auth_.clock);
    description = apply_step_logged(auth_, event);
    origin = ev->origin_peer;
    origin_seq = ev->origin_seq;
  } else if (const auto* anchor = std::get_if<CalibrationAnchorMsg>(&payload)) {
    install_anchor(auth_, *anchor);
    description = "AnchorInstalled";
    origin = anchor->origin_peer;
    origin_seq = anchor->origin_seq;
  }
  applies_.push_back(
      ApplyRecord{now, local_peer_, origin, origin_seq, true, description});

  if (origin == local_peer_ && !pending_.empty()) {
    // Our optimistic entry has been ordered; drop it from the pending set.
    const auto matches = [&](const SyncPayload& p) {
      if (const auto* pe = std::get_if<HandEventMsg>(&p)) return pe->origin_seq == origin_seq;
      if (const auto* pa = std::get_if<CalibrationAnchorMsg>(&p)) {
        return pa->origin_seq == origin_seq;
      }
      return false;
    };
    for (auto it = pending_.begin(); it != pending_.end(); ++it) {
      if (matches(*it)) {
        pending_.erase(it);
        break;
      }
    }
  }
  rebuild_display();
}

void PeerSession::rebuild_display() {
  display_ = auth_;
  for (const auto& payload : pending_) {
    if (const auto* ev = std::get_if<HandEventMsg>(&payload)) {
      HandEvent event = ev->event;
      event.time = std::max(event.time, display_.clock);
      apply_step_logged(display_, event);
    } else if (const auto* anchor = std::get_if<CalibrationAnchorMsg>(&payload)) {
      install_anchor(display_, *anchor);
    }
  }
}

void PeerSession::submit_local_event(const HandEvent& event) {
  HandEventMsg msg;
  msg.origin_peer = static_cast<std::uint8_t>(local_peer_);
  msg.origin_seq = next_local_seq_++;
  msg.event = event;
  msg.applied_time = event.time;
  if (is_host()) {
    host_apply(msg, event.time);  // host_apply also queues the echo
  } else {
    HandEvent optimistic = event;
    optimistic.time = std::max(event.time, display_.clock);
    const std::string description = apply_step_logged(display_, optimistic);
    pending_.push_back(msg);
    applies_.push_back(ApplyRecord{event.time, local_peer_, local_peer_, msg.origin_seq,
                                   false, description});
    outbound_.push_back(SyncMessage{next_out_seq_++, static_cast<std::uint8_t>(local_peer_),
                                    msg});
  }
}

void PeerSession::submit_local_anchor(double u, double v, double heading) {
  CalibrationAnchorMsg msg;
  msg.origin_peer = static_cast<std::uint8_t>(local_peer_);
  msg.origin_seq = next_local_seq_++;
  msg.player = static_cast<std::uint8_t>(local_peer_);
  msg.u = u;
  msg.v = v;
  msg.heading = heading;
  msg.applied_time = 0.0;
  if (is_host()) {
    host_apply(msg, 0.0);
  } else {
    install_anchor(display_, msg);
    pending_.push_back(msg);
    applies_.push_back(
        ApplyRecord{0.0, local_peer_, local_peer_, msg.origin_seq, false, "AnchorInstalled"});
    outbound_.push_back(SyncMessage{next_out_seq_++, static_cast<std::uint8_t>(local_peer_),
                                    msg});
  }
}

ApplyStatus PeerSession::peer_apply(const SyncMessage& message, double now) {
  if (message.sender == local_peer_) {
    raise(Errc::precondition_violated, "received a message from ourselves");
  }
  if (const auto* digest = std::get_if<StateDigestMsg>(&message.payload)) {
    if (digest->digest != game_state_digest(auth_)) {
      divergence_detected_ = true;
      applies_.push_back(ApplyRecord{now, local_peer_, message.sender, message.sequence,
                                     true, "DivergenceDetected"});
      return ApplyStatus::digest_mismatch;
    }
    applies_.push_back(
        ApplyRecord{now, local_peer_, message.sender, message.sequence, true, "DigestOk"});
    return ApplyStatus::digest_ok;
  }

  if (message.sequence <= last_applied_seq_) return ApplyStatus::duplicate;
  if (message.sequence != last_applied_seq_ + 1) {
    reorder_.emplace(message.sequence, message);
    return ApplyStatus::buffered_out_of_order;
  }

  const auto process = [&](const SyncMessage& m) {
    if (is_host()) {
      host_apply(m.payload, now);
    } else {
      apply_authoritative(m.payload, now);
    }
    last_applied_seq_ = m.sequence;
  };
  process(message);
  // Drain any buffered successors that became contiguous.
  auto it = reorder_.find(last_applied_seq_ + 1);
  while (it != reorder_.end()) {
    process(it->second);
    reorder_.erase(it);
    it = reorder_.find(last_applied_seq_ + 1);
  }
  return ApplyStatus::applied;
}

std::vector<SyncMessage> PeerSession::take_outbound() {
  std::vector<SyncMessage> out;
  out.swap(outbound_);
  return out;
}

SyncMessage PeerSession::make_digest_message() {
  StateDigestMsg digest;
  digest.digest = game_state_digest(auth_);
  digest.at_time = auth_.clock;
  return SyncMessage{next_out_seq_++, static_cast<std::uint8_t>(local_peer_), digest};
}

void PeerSession::inject_fault() {
  // Flip the turn marker on both replicas held by this peer; digests and
  // serializations diverge from the other peer from here on.
  auth_.turn = 1 - auth_.turn;
  display_.turn = 1 - display_.turn;
}

namespace {

struct QueuedEvent {
  double time = 0.0;
  int type_rank = 0;  // 0 = local trace event, 1 = delivery
  int peer = 0;       // acting peer (trace) or destination (delivery)
  std::uint64_t order = 0;
  // trace event
  HandEvent event;
  bool is_delivery = false;
  std::vector<std::uint8_t> bytes;
  int attempt = 0;

  bool operator>(const QueuedEvent& other) const {
    if (time != other.time) return time > other.time;
    if (type_rank != other.type_rank) return type_rank > other.type_rank;
    if (peer != other.peer) return peer > other.peer;
    return order > other.order;
  }
};

}  // namespace

SessionResult simulate_session(std::span<const HandEvent> trace_a,
                               std::span<const HandEvent> trace_b,
                               const ChannelConfig& channel, const SessionOptions& options) {
  std::array<PeerSession, 2> sessions = {PeerSession(0, options.game_seed),
                                         PeerSession(1, options.game_seed)};
  Rng drop_rng(channel.rng_seed);
  SessionResult result;

  std::priority_queue<QueuedEvent, std::vector<QueuedEvent>, std::greater<>> queue;
  std::uint64_t order = 0;

  const auto schedule_delivery = [&](int to_peer, std::vector<std::uint8_t> bytes,
                                     double at, int attempt) {
    QueuedEvent qe;
    qe.time = at;
    qe.type_rank = 1;
    qe.peer = to_peer;
    qe.order = order++;
    qe.is_delivery = true;
    qe.bytes = std::move(bytes);
    qe.attempt = attempt;
    queue.push(std::move(qe));
  };

  const auto flush_outbound = [&](int peer, double now) {
    for (const auto& message : sessions[peer].take_outbound()) {
      ++result.messages_sent;
      schedule_delivery(1 - peer, encode_message(message), now + channel.latency, 0);
    }
  };

  // Anchors are exchanged once, before gameplay.
  if (options.anchor_a) {
    sessions[0].submit_local_anchor((*options.anchor_a)[0], (*options.anchor_a)[1],
                                    (*options.anchor_a)[2]);
    flush_outbound(0, 0.0);
  }
  if (options.anchor_b) {
    sessions[1].submit_local_anchor((*options.anchor_b)[0], (*options.anchor_b)[1],
                                    (*options.anchor_b)[2]);
    flush_outbound(1, 0.0);
  }

  const auto queue_trace = [&](std::span<const HandEvent> trace, int peer) {
    for (const auto& event : trace) {
      QueuedEvent qe;
      qe.time = event.time;
      qe.type_rank = 0;
      qe.peer = peer;
      qe.order = order++;
      qe.event = event;
      queue.push(std::move(qe));
    }
  };
  queue_trace(trace_a, 0);
  queue_trace(trace_b, 1);

  double now = 0.0;
  const auto drain = [&] {
    while (!queue.empty()) {
      QueuedEvent qe = queue.top();
      queue.pop();
      now = std::max(now, qe.time);
      if (!qe.is_delivery) {
        sessions[qe.peer].submit_local_event(qe.event);
        flush_outbound(qe.peer, qe.time);
        continue;
      }
      if (channel.drop_probability > 0.0 &&
          drop_rng.uniform01() < channel.drop_probability) {
        ++result.messages_dropped;
        if (channel.reliable_ordered) {
          const double rto = channel.latency > 0.0 ? channel.latency : 0.05;
          ++result.messages_sent;
          schedule_delivery(qe.peer, std::move(qe.bytes), qe.time + rto, qe.attempt + 1);
        }
        continue;
      }
      ++result.messages_delivered;
      sessions[qe.peer].peer_apply(decode_message(qe.bytes), qe.time);
      flush_outbound(qe.peer, qe.time);
    }
  };
  drain();

  if (options.inject_fault) sessions[1].inject_fault();

  // Quiescence: exchange state digests (still over the lossy channel).
  for (int peer = 0; peer < 2; ++peer) {
    const SyncMessage digest = sessions[peer].make_digest_message();
    ++result.messages_sent;
    schedule_delivery(1 - peer, encode_message(digest), now + channel.latency, 0);
  }
  drain();

  result.final_state_a = serialize_game_state(sessions[0].state());
  result.final_state_b = serialize_game_state(sessions[1].state());
  result.converged = result.final_state_a == result.final_state_b &&
                     !sessions[0].divergence_detected() && !sessions[1].divergence_detected();

  result.transcript = sessions[0].applies();
  result.transcript.insert(result.transcript.end(), sessions[1].applies().begin(),
                           sessions[1].applies().end());
  std::stable_sort(result.transcript.begin(), result.transcript.end(),
                   [](const ApplyRecord& a, const ApplyRecord& b) {
                     if (a.time != b.time) return a.time < b.time;
                     return a.peer < b.peer;
                   });
  return result;
}

void write_transcript(std::ostream& sink, const SessionResult& result) {
  std::string out = "decktrack-transcript 1\n";
  for (const auto& record : result.transcript) {
    out += "apply ";
    append_double(out, record.time);
    out += " peer" + std::to_string(record.peer) + " origin" + std::to_string(record.origin) +
           ":" + std::to_string(record.origin_seq);
    out += record.authoritative ? " auth " : " opt ";
    out += record.description;
    out += '\n';
  }
  out += "messages sent ";
  out += std::to_string(result.messages_sent);
  out += " delivered ";
  out += std::to_string(result.messages_delivered);
  out += " dropped ";
  out += std::to_string(result.messages_dropped);
  out += '\n';
  out += "converged ";
  out += result.converged ? '1' : '0';
  out += '\n';
  sink << out;
}

}  // namespace decktrack
