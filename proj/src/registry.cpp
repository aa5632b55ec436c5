#include "decktrack/registry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "decktrack/lineio.hpp"
#include "decktrack/rng.hpp"

namespace decktrack {

namespace {

constexpr int kRingCols = 6;
constexpr int kRingRows = 9;
constexpr double kLargeTagRow = 0.017;  // vertical offset of the two large tags

// 28 tag-center slots per card side: the peripheral ring of a 6x9 cell grid
// (26 cells) followed by the two large tags on the vertical center line.
// The ring keeps small tags spread around the card edge so partial occlusion
// still leaves some visible, and cell spacing exceeds the tag footprint.
Eigen::Vector2d slot_center(int slot) {
  if (slot >= kSmallTagsPerSide) {
    return {0.0, slot == kSmallTagsPerSide ? -kLargeTagRow : kLargeTagRow};
  }
  static const auto ring = [] {
    std::vector<std::pair<int, int>> cells;
    for (int j = 0; j < kRingRows; ++j) {
      for (int i = 0; i < kRingCols; ++i) {
        if (i == 0 || i == kRingCols - 1 || j == 0 || j == kRingRows - 1) {
          cells.emplace_back(j, i);
        }
      }
    }
    return cells;
  }();
  const auto [j, i] = ring[static_cast<std::size_t>(slot)];
  const double cell_u = kCardWidth / kRingCols;
  const double cell_w = kCardHeight / kRingRows;
  return {-kCardWidth / 2 + (i + 0.5) * cell_u, -kCardHeight / 2 + (j + 0.5) * cell_w};
}

int dictionary_of_local_id(int local_id, int total) {
  const int third = (total + kDictionaryCount - 1) / kDictionaryCount;
  return std::min(local_id / third, kDictionaryCount - 1);
}

void validate_specs(const std::vector<TagSpec>& specs) {
  const double card_half_diag = std::hypot(kCardWidth, kCardHeight) / 2;
  const double board_half_diag = std::hypot(kBoardWidth, kBoardHeight) / 2;

  std::set<int> ids;
  // (card_id, side) -> [small count, large count]; card_id -1 keys the board.
  std::map<std::pair<int, int>, std::array<int, 2>> groups;
  for (const auto& spec : specs) {
    if (!ids.insert(spec.tag_id).second) {
      raise(Errc::schema_violation,
            "duplicate tag_id " + std::to_string(spec.tag_id));
    }
    if (spec.dictionary_id < 0 || spec.dictionary_id >= kDictionaryCount) {
      raise(Errc::schema_violation, "dictionary_id out of range for tag " +
                                        std::to_string(spec.tag_id));
    }
    if (!std::isfinite(spec.rotation_in_card) || !spec.offset.allFinite()) {
      raise(Errc::schema_violation, "non-finite geometry for tag " +
                                        std::to_string(spec.tag_id));
    }
    if (spec.card_id == kBoardCardId) {
      if (spec.side != CardSide::front || spec.size_class != SizeClass::small) {
        raise(Errc::schema_violation, "board tags must be small front tags");
      }
      if (spec.offset.norm() > board_half_diag + 1e-12) {
        raise(Errc::schema_violation, "board tag offset exceeds the sheet");
      }
    } else {
      if (spec.card_id < 0 || spec.card_id >= kPlayers * kCardsPerDeck) {
        raise(Errc::schema_violation,
              "card_id out of range for tag " + std::to_string(spec.tag_id));
      }
      if (spec.offset.norm() > card_half_diag + 1e-12) {
        raise(Errc::schema_violation, "tag offset exceeds the card diagonal");
      }
    }
    groups[{spec.card_id, spec.card_id == kBoardCardId
                              ? 0
                              : static_cast<int>(spec.side)}][static_cast<int>(
        spec.size_class)]++;
  }

  std::set<int> owners;
  for (const auto& [key, counts] : groups) {
    const auto [card_id, side] = key;
    if (card_id == kBoardCardId) {
      if (counts[0] != kBoardTagCount || counts[1] != 0) {
        raise(Errc::schema_violation, "board must carry exactly " +
                                          std::to_string(kBoardTagCount) + " tags, got " +
                                          std::to_string(counts[0] + counts[1]));
      }
      continue;
    }
    if (counts[0] != kSmallTagsPerSide ||
        counts[1] != kTagsPerSide - kSmallTagsPerSide) {
      raise(Errc::schema_violation,
            "card " + std::to_string(card_id) + " side " + std::to_string(side) +
                " must carry 26 small + 2 large tags, got " +
                std::to_string(counts[0]) + " + " + std::to_string(counts[1]));
    }
    owners.insert(card_owner(card_id));
  }
  for (int owner : owners) {
    int sides_present = 0;
    for (const auto& [key, counts] : groups) {
      if (key.first != kBoardCardId && card_owner(key.first) == owner) ++sides_present;
    }
    if (sides_present != kCardsPerDeck * 2) {
      raise(Errc::schema_violation, "deck " + std::to_string(owner) +
                                        " is incomplete: " + std::to_string(sides_present) +
                                        " card sides present");
    }
  }
}

}  // namespace

Posed tag_placement_in_card(const TagSpec& spec) {
  const Eigen::Vector2d center = -spec.offset;  // offset = card center - tag center
  const Vector3d t(center.x(), 0.0, center.y());
  Matrix3d r =
      Eigen::AngleAxisd(spec.rotation_in_card, Vector3d::UnitY()).toRotationMatrix();
  if (spec.side == CardSide::back) {
    r = Eigen::AngleAxisd(M_PI, Vector3d::UnitZ()).toRotationMatrix() * r;
  }
  return Posed(r, t);
}

Eigen::Vector2d BoardLayout::grid_position(int slot) {
  const int i = slot % kBoardCols;
  const int j = slot / kBoardCols;
  const double cell_u = kBoardWidth / kBoardCols;
  const double cell_w = kBoardHeight / kBoardRows;
  return {-kBoardWidth / 2 + (i + 0.5) * cell_u, -kBoardHeight / 2 + (j + 0.5) * cell_w};
}

DeckLayout generate_deck_layout(std::uint64_t deck_seed, int owner) {
  DeckLayout layout;
  layout.owner = owner;
  layout.base_tag_id = owner * kTagsPerDeck;

  std::vector<int> ids(kTagsPerDeck);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(mix_seed(deck_seed, static_cast<std::uint64_t>(owner)));
  rng.shuffle(ids.begin(), ids.end());

  layout.tags.reserve(kTagsPerDeck);
  int position = 0;
  for (int card = 0; card < kCardsPerDeck; ++card) {
    for (int side = 0; side < 2; ++side) {
      for (int slot = 0; slot < kTagsPerSide; ++slot, ++position) {
        const int local_id = ids[static_cast<std::size_t>(position)];
        TagSpec spec;
        spec.tag_id = layout.base_tag_id + local_id;
        spec.dictionary_id = dictionary_of_local_id(local_id, kTagsPerDeck);
        spec.card_id = make_card_id(owner, card);
        spec.side = static_cast<CardSide>(side);
        spec.size_class =
            slot < kSmallTagsPerSide ? SizeClass::small : SizeClass::large;
        spec.offset = -slot_center(slot);
        spec.rotation_in_card = 0.0;
        layout.tags.push_back(spec);
      }
    }
  }
  std::sort(layout.tags.begin(), layout.tags.end(),
            [](const TagSpec& a, const TagSpec& b) { return a.tag_id < b.tag_id; });
  return layout;
}

BoardLayout generate_board_layout() {
  BoardLayout layout;
  layout.base_tag_id = kPlayers * kTagsPerDeck;
  layout.tags.reserve(kBoardTagCount);
  for (int slot = 0; slot < kBoardTagCount; ++slot) {
    TagSpec spec;
    spec.tag_id = layout.base_tag_id + slot;
    spec.dictionary_id = kDictionaryCount - 1;
    spec.card_id = kBoardCardId;
    spec.side = CardSide::front;
    spec.size_class = SizeClass::small;
    spec.offset = -BoardLayout::grid_position(slot);
    spec.rotation_in_card = 0.0;
    layout.tags.push_back(spec);
  }
  return layout;
}

Registry Registry::build(std::span<const DeckLayout> decks, const BoardLayout* board) {
  std::vector<TagSpec> specs;
  for (const auto& deck : decks) {
    specs.insert(specs.end(), deck.tags.begin(), deck.tags.end());
  }
  if (board != nullptr) {
    specs.insert(specs.end(), board->tags.begin(), board->tags.end());
  }
  return from_specs(std::move(specs));
}

Registry Registry::from_specs(std::vector<TagSpec> specs) {
  std::sort(specs.begin(), specs.end(),
            [](const TagSpec& a, const TagSpec& b) { return a.tag_id < b.tag_id; });
  validate_specs(specs);
  Registry registry;
  registry.specs_ = std::move(specs);
  registry.index_.reserve(registry.specs_.size());
  for (std::size_t i = 0; i < registry.specs_.size(); ++i) {
    registry.index_.emplace(registry.specs_[i].tag_id, i);
  }
  return registry;
}

const TagSpec& Registry::lookup(int tag_id) const {
  const auto it = index_.find(tag_id);
  if (it == index_.end()) {
    raise(Errc::unknown_tag, "tag " + std::to_string(tag_id) + " is not in the registry");
  }
  return specs_[it->second];
}

std::vector<int> Registry::owners_present() const {
  std::set<int> owners;
  for (const auto& spec : specs_) {
    if (spec.card_id != kBoardCardId) owners.insert(card_owner(spec.card_id));
  }
  return {owners.begin(), owners.end()};
}

bool Registry::has_board() const {
  return std::any_of(specs_.begin(), specs_.end(),
                     [](const TagSpec& s) { return s.card_id == kBoardCardId; });
}

Registry Registry::for_player(int owner) const {
  std::vector<TagSpec> subset;
  for (const auto& spec : specs_) {
    if (spec.card_id == kBoardCardId || card_owner(spec.card_id) == owner) {
      subset.push_back(spec);
    }
  }
  if (subset.size() > static_cast<std::size_t>(kPlayerTagBudget)) {
    raise(Errc::tag_budget_exceeded,
          "player registry needs " + std::to_string(subset.size()) + " tags, budget is " +
              std::to_string(kPlayerTagBudget));
  }
  return from_specs(std::move(subset));
}

void save_layout(const Registry& registry, std::ostream& sink) {
  std::string out = "decktrack-layout 1\n";
  for (const auto& spec : registry.specs()) {
    out += std::to_string(spec.tag_id);
    out += ' ';
    out += std::to_string(spec.dictionary_id);
    out += ' ';
    out += std::to_string(spec.card_id);
    out += ' ';
    out += std::to_string(static_cast<int>(spec.side));
    out += ' ';
    out += std::to_string(static_cast<int>(spec.size_class));
    out += ' ';
    append_double(out, spec.offset.x());
    out += ' ';
    append_double(out, spec.offset.y());
    out += ' ';
    append_double(out, spec.rotation_in_card);
    out += '\n';
  }
  sink << out;
}

Registry load_layout(std::istream& source, const std::string& name) {
  LineReader reader(source, name);
  expect_header(reader, "decktrack-layout", 1);
  std::vector<TagSpec> specs;
  while (reader.next()) {
    reader.expect_fields(8);
    TagSpec spec;
    spec.tag_id = static_cast<int>(reader.get_int(0));
    spec.dictionary_id = static_cast<int>(reader.get_int(1));
    spec.card_id = static_cast<int>(reader.get_int(2));
    const long long side = reader.get_int(3);
    if (side != 0 && side != 1) reader.fail(3, "side must be 0 or 1");
    spec.side = static_cast<CardSide>(side);
    const long long size = reader.get_int(4);
    if (size != 0 && size != 1) reader.fail(4, "size class must be 0 or 1");
    spec.size_class = static_cast<SizeClass>(size);
    spec.offset = {reader.get_double(5), reader.get_double(6)};
    spec.rotation_in_card = reader.get_double(7);
    specs.push_back(spec);
  }
  return Registry::from_specs(std::move(specs));
}

}  // namespace decktrack
