#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "decktrack/error.hpp"
#include "decktrack/registry.hpp"

namespace decktrack {

inline constexpr int kGameCards = kPlayers * kCardsPerDeck;  // 52 physical cards each
inline constexpr double kDebounceSeconds = 2.0;
inline constexpr double kSnapRadius = 0.02;   // tolerated correspondence error
inline constexpr double kHandRadius = 0.05;   // hand collider sphere

enum class Pile : std::uint8_t {
  deck0 = 0,
  deck1 = 1,
  battle1 = 2,  // player 0's played card
  battle2 = 3,  // player 1's played card
  score0 = 4,
  score1 = 5,
};
inline constexpr int kPileCount = 6;

inline Pile deck_pile(int player) { return player == 0 ? Pile::deck0 : Pile::deck1; }
inline Pile battle_pile(int player) { return player == 0 ? Pile::battle1 : Pile::battle2; }
inline Pile score_pile(int player) { return player == 0 ? Pile::score0 : Pile::score1; }
const char* pile_name(Pile pile);

/// Where a card currently lives. Tied battle cards accumulate in a neutral
/// pot that the next decided battle's winner collects.
struct CardLocation {
  enum class Kind : std::uint8_t { in_pile, held, in_pot } kind = Kind::in_pile;
  Pile pile = Pile::deck0;  // valid when kind == in_pile
  int holder = 0;           // valid when kind == held
};

struct CardState {
  CardLocation location;
  Pile previous_pile = Pile::deck0;  // where the card returns if a place misses
  double last_transition_time = -1e30;
};

struct HandEvent {
  double time = 0.0;
  int player = 0;
  enum class Kind : std::uint8_t { collider_enter = 0, collider_exit = 1 } kind =
      Kind::collider_enter;
  enum class Target : std::uint8_t { card = 0, pile = 1 } target = Target::card;
  int target_id = 0;
  Eigen::Vector2d hand_uv = Eigen::Vector2d::Zero();  // table-plane coordinates
  double hand_height = 0.0;
};

/// Two-player War session state. Scores are pile sizes by construction.
struct GameState {
  std::array<CardState, kGameCards> cards;
  std::array<std::vector<int>, kPileCount> piles;  // stacks, back() is the top
  std::vector<int> pot;
  std::array<Eigen::Vector2d, kPileCount> pile_anchors;
  int turn = 0;
  double clock = 0.0;

  int score(int player) const {
    return static_cast<int>(piles[static_cast<int>(score_pile(player))].size());
  }
  std::optional<int> held_card(int player) const;
  int deck_size(int player) const {
    return static_cast<int>(piles[static_cast<int>(deck_pile(player))].size());
  }
};

/// Default pile anchors around the shared table; player 1's side is player
/// 0's mirrored through the table center.
std::array<Eigen::Vector2d, kPileCount> default_pile_anchors();

/// Fresh game: each player's 52 cards shuffled into their own deck by a
/// seeded Fisher-Yates; every other pile starts empty.
GameState new_game(std::uint64_t seed);

enum class HandEffect : std::uint8_t {
  picked,
  placed,
  returned_to_previous,  // place event outside every snap region
  debounce_blocked,
  already_holding,
  hand_empty,
  not_top_of_pile,
  out_of_reach,
  rejected_player,
  no_op,
};
const char* hand_effect_name(HandEffect effect);

/// Applies one collider event. Transitions for a card within 2 seconds of
/// its previous transition are ignored (DebounceBlocked); a player holds at
/// most one card; pickups target a pile's top card and placements target a
/// pile region. Events never abort the session; invalid ids raise
/// UnknownCard/UnknownPile, everything else is reported as the effect.
HandEffect apply_hand_event(GameState& state, const HandEvent& event);

struct BattleOutcome {
  std::optional<int> winner;  // empty on a tie
  int captured = 0;           // cards moved to the winner's score pile
  int pot_after = 0;
};

/// Resolves a battle once each battle pile holds exactly one card. The
/// higher rank wins both cards plus any accumulated pot; a tie moves both
/// cards into the pot.
BattleOutcome resolve_battle(GameState& state);

/// True when both battle piles hold exactly one card.
bool battle_ready(const GameState& state);

struct GameOutcome {
  std::optional<int> winner;  // empty on a draw
  int score0 = 0;
  int score1 = 0;
};

/// Game over once both decks are empty and no card is held.
std::optional<GameOutcome> game_over(const GameState& state);

/// Canonical serialization used for replay comparison and digests. Two
/// replicas are converged exactly when their serializations match.
std::string serialize_game_state(const GameState& state);
std::uint64_t game_state_digest(const GameState& state);

/// Hand event trace, one event per line:
///   time player kind target target_id u v height
void write_event_trace(std::ostream& sink, std::span<const HandEvent> events);
std::vector<HandEvent> read_event_trace(std::istream& source,
                                        const std::string& name = "events");

}  // namespace decktrack
