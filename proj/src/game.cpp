#include "decktrack/game.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "decktrack/lineio.hpp"
#include "decktrack/registry.hpp"
#include "decktrack/rng.hpp"

namespace decktrack {

const char* pile_name(Pile pile) {
  switch (pile) {
    case Pile::deck0: return "deck0";
    case Pile::deck1: return "deck1";
    case Pile::battle1: return "battle1";
    case Pile::battle2: return "battle2";
    case Pile::score0: return "score0";
    case Pile::score1: return "score1";
  }
  return "?";
}

const char* hand_effect_name(HandEffect effect) {
  switch (effect) {
    case HandEffect::picked: return "Picked";
    case HandEffect::placed: return "Placed";
    case HandEffect::returned_to_previous: return "ReturnedToPrevious";
    case HandEffect::debounce_blocked: return "DebounceBlocked";
    case HandEffect::already_holding: return "AlreadyHolding";
    case HandEffect::hand_empty: return "HandEmpty";
    case HandEffect::not_top_of_pile: return "NotTopOfPile";
    case HandEffect::out_of_reach: return "OutOfReach";
    case HandEffect::rejected_player: return "RejectedPlayer";
    case HandEffect::no_op: return "NoOp";
  }
  return "?";
}

std::array<Eigen::Vector2d, kPileCount> default_pile_anchors() {
  // Player 0 sits at v < 0; player 1's side is mirrored through the center.
  std::array<Eigen::Vector2d, kPileCount> anchors;
  anchors[static_cast<int>(Pile::deck0)] = {0.30, -0.25};
  anchors[static_cast<int>(Pile::deck1)] = {-0.30, 0.25};
  anchors[static_cast<int>(Pile::battle1)] = {0.07, -0.07};
  anchors[static_cast<int>(Pile::battle2)] = {-0.07, 0.07};
  anchors[static_cast<int>(Pile::score0)] = {-0.30, -0.25};
  anchors[static_cast<int>(Pile::score1)] = {0.30, 0.25};
  return anchors;
}

std::optional<int> GameState::held_card(int player) const {
  for (int card = 0; card < kGameCards; ++card) {
    if (cards[card].location.kind == CardLocation::Kind::held &&
        cards[card].location.holder == player) {
      return card;
    }
  }
  return std::nullopt;
}

GameState new_game(std::uint64_t seed) {
  GameState state;
  state.pile_anchors = default_pile_anchors();
  Rng rng(seed);
  for (int player = 0; player < kPlayers; ++player) {
    std::vector<int> order(kCardsPerDeck);
    std::iota(order.begin(), order.end(), player * kCardsPerDeck);
    rng.shuffle(order.begin(), order.end());
    auto& deck = state.piles[static_cast<int>(deck_pile(player))];
    deck = order;
    for (int card : order) {
      state.cards[card].location = {CardLocation::Kind::in_pile, deck_pile(player), 0};
      state.cards[card].previous_pile = deck_pile(player);
    }
  }
  return state;
}

namespace {

bool within_reach(const GameState& state, const HandEvent& event, Pile pile) {
  const Eigen::Vector2d anchor = state.pile_anchors[static_cast<int>(pile)];
  const double planar = (event.hand_uv - anchor).norm();
  return std::hypot(planar, event.hand_height) <= kHandRadius;
}

bool within_snap(const GameState& state, const HandEvent& event, Pile pile) {
  const Eigen::Vector2d anchor = state.pile_anchors[static_cast<int>(pile)];
  return (event.hand_uv - anchor).norm() <= kSnapRadius &&
         std::abs(event.hand_height) <= kHandRadius;
}

void place_card(GameState& state, int card, Pile pile, double time) {
  auto& info = state.cards[card];
  state.piles[static_cast<int>(pile)].push_back(card);
  info.location = {CardLocation::Kind::in_pile, pile, 0};
  info.previous_pile = pile;
  info.last_transition_time = time;
}

}  // namespace

HandEffect apply_hand_event(GameState& state, const HandEvent& event) {
  if (event.time < state.clock) {
    raise(Errc::precondition_violated, "events must be applied in time order");
  }
  state.clock = event.time;

  if (event.player < 0 || event.player >= kPlayers) return HandEffect::rejected_player;
  if (event.kind == HandEvent::Kind::collider_exit) return HandEffect::no_op;

  if (event.target == HandEvent::Target::card) {
    const int card = event.target_id;
    if (card < 0 || card >= kGameCards) {
      raise(Errc::unknown_card, "card " + std::to_string(card) + " does not exist");
    }
    if (state.held_card(event.player)) return HandEffect::already_holding;
    auto& info = state.cards[card];
    if (info.location.kind != CardLocation::Kind::in_pile) {
      return HandEffect::not_top_of_pile;
    }
    const auto& pile = state.piles[static_cast<int>(info.location.pile)];
    if (pile.empty() || pile.back() != card) return HandEffect::not_top_of_pile;
    if (!within_reach(state, event, info.location.pile)) return HandEffect::out_of_reach;
    if (event.time - info.last_transition_time < kDebounceSeconds) {
      return HandEffect::debounce_blocked;
    }
    state.piles[static_cast<int>(info.location.pile)].pop_back();
    info.previous_pile = info.location.pile;
    info.location = {CardLocation::Kind::held, Pile::deck0, event.player};
    info.last_transition_time = event.time;
    return HandEffect::picked;
  }

  // Pile target: a placement attempt while holding a card.
  if (event.target_id < 0 || event.target_id >= kPileCount) {
    raise(Errc::unknown_pile, "pile " + std::to_string(event.target_id) + " does not exist");
  }
  const Pile pile = static_cast<Pile>(event.target_id);
  const auto held = state.held_card(event.player);
  if (!held) return HandEffect::hand_empty;
  auto& info = state.cards[*held];
  if (event.time - info.last_transition_time < kDebounceSeconds) {
    return HandEffect::debounce_blocked;
  }
  if (within_snap(state, event, pile)) {
    place_card(state, *held, pile, event.time);
    return HandEffect::placed;
  }
  // Outside every snap region: the card snaps back to where it came from.
  place_card(state, *held, info.previous_pile, event.time);
  return HandEffect::returned_to_previous;
}

bool battle_ready(const GameState& state) {
  return state.piles[static_cast<int>(Pile::battle1)].size() == 1 &&
         state.piles[static_cast<int>(Pile::battle2)].size() == 1;
}

BattleOutcome resolve_battle(GameState& state) {
  auto& battle1 = state.piles[static_cast<int>(Pile::battle1)];
  auto& battle2 = state.piles[static_cast<int>(Pile::battle2)];
  if (battle1.size() != 1 || battle2.size() != 1) {
    raise(Errc::battle_incomplete, "battle piles must hold exactly one card each");
  }
  const int card1 = battle1.front();
  const int card2 = battle2.front();
  battle1.clear();
  battle2.clear();

  BattleOutcome outcome;
  const int rank1 = card_rank(card1);
  const int rank2 = card_rank(card2);
  if (rank1 == rank2) {
    for (int card : {card1, card2}) {
      state.pot.push_back(card);
      state.cards[card].location.kind = CardLocation::Kind::in_pot;
    }
    outcome.winner = std::nullopt;
  } else {
    const int winner = rank1 > rank2 ? 0 : 1;
    const Pile score = score_pile(winner);
    std::vector<int> captured = {card1, card2};
    captured.insert(captured.end(), state.pot.begin(), state.pot.end());
    state.pot.clear();
    for (int card : captured) {
      state.piles[static_cast<int>(score)].push_back(card);
      state.cards[card].location = {CardLocation::Kind::in_pile, score, 0};
      state.cards[card].previous_pile = score;
    }
    outcome.winner = winner;
    outcome.captured = static_cast<int>(captured.size());
  }
  outcome.pot_after = static_cast<int>(state.pot.size());
  state.turn = 1 - state.turn;
  return outcome;
}

std::optional<GameOutcome> game_over(const GameState& state) {
  if (state.deck_size(0) != 0 || state.deck_size(1) != 0) return std::nullopt;
  if (state.held_card(0) || state.held_card(1)) return std::nullopt;
  GameOutcome outcome;
  outcome.score0 = state.score(0);
  outcome.score1 = state.score(1);
  if (outcome.score0 > outcome.score1) {
    outcome.winner = 0;
  } else if (outcome.score1 > outcome.score0) {
    outcome.winner = 1;
  }
  return outcome;
}

std::string serialize_game_state(const GameState& state) {
  std::string out = "decktrack-state 1\n";
  out += "clock ";
  append_double(out, state.clock);
  out += "\nturn " + std::to_string(state.turn) + "\n";
  for (int p = 0; p < kPileCount; ++p) {
    out += "pile ";
    out += pile_name(static_cast<Pile>(p));
    out += ' ';
    append_double(out, state.pile_anchors[p].x());
    out += ' ';
    append_double(out, state.pile_anchors[p].y());
    for (int card : state.piles[p]) out += ' ' + std::to_string(card);
    out += '\n';
  }
  out += "pot";
  for (int card : state.pot) out += ' ' + std::to_string(card);
  out += '\n';
  for (int player = 0; player < kPlayers; ++player) {
    const auto held = state.held_card(player);
    out += "held " + std::to_string(player) + ' ' + std::to_string(held ? *held : -1) + '\n';
  }
  for (int card = 0; card < kGameCards; ++card) {
    out += "card " + std::to_string(card) + ' ';
    append_double(out, state.cards[card].last_transition_time);
    out += '\n';
  }
  out += "scores " + std::to_string(state.score(0)) + ' ' + std::to_string(state.score(1)) +
         '\n';
  return out;
}

std::uint64_t game_state_digest(const GameState& state) {
  const std::string text = serialize_game_state(state);
  std::uint64_t hash = 1469598103934665603ULL;  // FNV-1a 64
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

void write_event_trace(std::ostream& sink, std::span<const HandEvent> events) {
  std::string out = "decktrack-events 1\n";
  for (const auto& event : events) {
    append_double(out, event.time);
    out += ' ' + std::to_string(event.player);
    out += event.kind == HandEvent::Kind::collider_enter ? " enter" : " exit";
    out += event.target == HandEvent::Target::card ? " card " : " pile ";
    out += std::to_string(event.target_id);
    out += ' ';
    append_double(out, event.hand_uv.x());
    out += ' ';
    append_double(out, event.hand_uv.y());
    out += ' ';
    append_double(out, event.hand_height);
    out += '\n';
  }
  sink << out;
}

std::vector<HandEvent> read_event_trace(std::istream& source, const std::string& name) {
  LineReader reader(source, name);
  expect_header(reader, "decktrack-events", 1);
  std::vector<HandEvent> events;
  while (reader.next()) {
    reader.expect_fields(8);
    HandEvent event;
    event.time = reader.get_double(0);
    event.player = static_cast<int>(reader.get_int(1));
    const std::string& kind = reader.token(2);
    if (kind == "enter") {
      event.kind = HandEvent::Kind::collider_enter;
    } else if (kind == "exit") {
      event.kind = HandEvent::Kind::collider_exit;
    } else {
      reader.fail(2, "expected enter|exit");
    }
    const std::string& target = reader.token(3);
    if (target == "card") {
      event.target = HandEvent::Target::card;
    } else if (target == "pile") {
      event.target = HandEvent::Target::pile;
    } else {
      reader.fail(3, "expected card|pile");
    }
    event.target_id = static_cast<int>(reader.get_int(4));
    event.hand_uv = {reader.get_double(5), reader.get_double(6)};
    event.hand_height = reader.get_double(7);
    events.push_back(event);
  }
  return events;
}

}  // namespace decktrack
