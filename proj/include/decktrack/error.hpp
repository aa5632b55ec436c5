#pragma once

#include <stdexcept>
#include <string>

namespace decktrack {

enum class Errc {
  non_positive_depth,
  length_mismatch,
  degenerate_configuration,
  no_valid_pose,
  size_class_unknown,
  unknown_tag,
  tag_budget_exceeded,
  schema_violation,
  empty_candidate_set,
  mixed_card_ids,
  insufficient_history,
  insufficient_tags,
  degenerate_geometry,
  board_not_visible,
  deck_not_visible,
  unknown_pile,
  unknown_card,
  battle_incomplete,
  malformed_frame,
  out_of_order,
  divergence_detected,
  precondition_violated,
  io_error,
};

const char* errc_name(Errc code);

/// Library-wide exception carrying a stable error code plus context text.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
  throw Error(code, message);
}

inline const char* errc_name(Errc code) {
  switch (code) {
    case Errc::non_positive_depth: return "NonPositiveDepth";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::degenerate_configuration: return "DegenerateConfiguration";
    case Errc::no_valid_pose: return "NoValidPose";
    case Errc::size_class_unknown: return "SizeClassUnknown";
    case Errc::unknown_tag: return "UnknownTag";
    case Errc::tag_budget_exceeded: return "TagBudgetExceeded";
    case Errc::schema_violation: return "SchemaViolation";
    case Errc::empty_candidate_set: return "EmptyCandidateSet";
    case Errc::mixed_card_ids: return "MixedCardIds";
    case Errc::insufficient_history: return "InsufficientHistory";
    case Errc::insufficient_tags: return "InsufficientTags";
    case Errc::degenerate_geometry: return "DegenerateGeometry";
    case Errc::board_not_visible: return "BoardNotVisible";
    case Errc::deck_not_visible: return "DeckNotVisible";
    case Errc::unknown_pile: return "UnknownPile";
    case Errc::unknown_card: return "UnknownCard";
    case Errc::battle_incomplete: return "BattleIncomplete";
    case Errc::malformed_frame: return "MalformedFrame";
    case Errc::out_of_order: return "OutOfOrder";
    case Errc::divergence_detected: return "DivergenceDetected";
    case Errc::precondition_violated: return "PreconditionViolated";
    case Errc::io_error: return "IoError";
  }
  return "UnknownError";
}

}  // namespace decktrack
