#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <unordered_map>
#include <vector>

#include "decktrack/geometry.hpp"

namespace decktrack {

// Physical constants of the printed material. Tag edge lengths come from the
// two marker size classes (0.3 in and 0.9 in on edge); cards are standard
// poker size. Everything is stored in meters.
inline constexpr double kInch = 0.0254;
inline constexpr double kSmallTagEdge = 0.3 * kInch;
inline constexpr double kLargeTagEdge = 0.9 * kInch;
inline constexpr double kCardWidth = 0.0635;
inline constexpr double kCardHeight = 0.0889;

inline constexpr int kPlayers = 2;
inline constexpr int kCardsPerDeck = 52;
inline constexpr int kTagsPerSide = 28;
inline constexpr int kSmallTagsPerSide = 26;
inline constexpr int kTagsPerDeck = kCardsPerDeck * 2 * kTagsPerSide;  // 2912
inline constexpr int kBoardCols = 7;
inline constexpr int kBoardRows = 5;
inline constexpr int kBoardTagCount = kBoardCols * kBoardRows;  // 35
inline constexpr double kBoardWidth = 11.0 * kInch;   // letter sheet, landscape
inline constexpr double kBoardHeight = 8.5 * kInch;
inline constexpr int kDictionaryCount = 3;
inline constexpr int kPlayerTagBudget = 3000;  // sourcing limit per tracker

inline constexpr int kBoardCardId = -1;

enum class SizeClass : std::uint8_t { small = 0, large = 1 };
enum class CardSide : std::uint8_t { front = 0, back = 1 };

inline double tag_edge(SizeClass size) {
  switch (size) {
    case SizeClass::small: return kSmallTagEdge;
    case SizeClass::large: return kLargeTagEdge;
  }
  raise(Errc::size_class_unknown, "invalid size class value");
}

/// Registry entry binding a tag id to its place in the world: which card (or
/// the board), which face, the size class, and the offset from the tag center
/// to the card center expressed in the card-plane (U, W) frame.
struct TagSpec {
  int tag_id = 0;
  int dictionary_id = 0;
  int card_id = kBoardCardId;  // 0..103 = owner*52+index, -1 = board
  CardSide side = CardSide::front;
  SizeClass size_class = SizeClass::small;
  Eigen::Vector2d offset = Eigen::Vector2d::Zero();  // card center - tag center
  double rotation_in_card = 0.0;                     // about the card normal

  bool operator==(const TagSpec& o) const {
    return tag_id == o.tag_id && dictionary_id == o.dictionary_id && card_id == o.card_id &&
           side == o.side && size_class == o.size_class && offset.x() == o.offset.x() &&
           offset.y() == o.offset.y() && rotation_in_card == o.rotation_in_card;
  }
};

inline int card_owner(int card_id) { return card_id / kCardsPerDeck; }
inline int card_index(int card_id) { return card_id % kCardsPerDeck; }
inline int make_card_id(int owner, int index) { return owner * kCardsPerDeck + index; }

/// Rank 2..14 (ace high) and suit 0..3, fixed by card index.
inline int card_rank(int card_id) { return 2 + card_index(card_id) % 13; }
inline int card_suit(int card_id) { return card_index(card_id) / 13; }

/// Rigid placement of a tag within its card (tag frame -> card frame).
/// Front tags share the card normal; back tags are flipped half a turn about
/// the card's W axis, mirroring how the sheet is printed double-sided.
Posed tag_placement_in_card(const TagSpec& spec);

struct DeckLayout {
  int owner = 0;
  int base_tag_id = 0;
  std::vector<TagSpec> tags;  // all 2912, sorted by tag_id
};

struct BoardLayout {
  int base_tag_id = 0;
  std::vector<TagSpec> tags;  // all 35, sorted by tag_id

  /// Tag center on the sheet, (U, W) in the board frame.
  static Eigen::Vector2d grid_position(int slot);
};

/// Deterministic deck layout: 26 small tags on the peripheral ring of a 6x9
/// cell grid plus 2 large tags on the vertical center line. The seed shuffles
/// which id of the deck's contiguous range lands on which (card, side, slot).
DeckLayout generate_deck_layout(std::uint64_t deck_seed, int owner);

/// 7x5 grid of small tags on a letter-size sheet, ids in a reserved range.
BoardLayout generate_board_layout();

/// Immutable tag database with O(1) lookup, validated on construction.
class Registry {
 public:
  Registry() = default;

  static Registry build(std::span<const DeckLayout> decks, const BoardLayout* board);
  static Registry from_specs(std::vector<TagSpec> specs);  // validates

  const TagSpec& lookup(int tag_id) const;
  bool contains(int tag_id) const { return index_.count(tag_id) != 0; }
  std::size_t size() const { return specs_.size(); }
  std::span<const TagSpec> specs() const { return specs_; }

  std::vector<int> owners_present() const;
  bool has_board() const;

  /// Registry restricted to one player's deck plus the board; enforces the
  /// 3,000-tag sourcing budget of a single tracker.
  Registry for_player(int owner) const;

 private:
  std::vector<TagSpec> specs_;  // sorted by tag_id
  std::unordered_map<int, std::size_t> index_;
};

/// Line-record layout format, one tag per line:
///   tag_id dictionary_id card_id side size_class offset_u offset_w rotation
/// Round-trips bit-exactly.
void save_layout(const Registry& registry, std::ostream& sink);
Registry load_layout(std::istream& source, const std::string& name = "layout");

}  // namespace decktrack
