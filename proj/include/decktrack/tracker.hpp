#pragma once

#include <span>
#include <vector>

#include "decktrack/scene.hpp"
#include "decktrack/tag_pose.hpp"

namespace decktrack {

/// One per-tag vote for a card's pose, obtained by composing the tag pose
/// with the inverse of the tag's in-card placement.
struct CardCandidate {
  int card_id = 0;
  Posed pose;  // card frame -> camera frame
  int source_tag_id = 0;
  double weight = 1.0;  // ambiguous planar solutions are down-weighted
  double reprojection_error = 0.0;
};

struct CardPoseEstimate {
  int card_id = 0;
  Posed pose;
  int candidate_count = 0;
  double fused_reprojection_error = 0.0;  // weight-averaged candidate error
  double timestamp = 0.0;
};

struct CandidateOptions {
  double ambiguous_weight = 0.25;
  SolveOptions solve;
};

struct CandidateResult {
  std::vector<CardCandidate> candidates;  // grouped by card_id, then tag_id
  int skipped = 0;                        // unknown tags and solver failures
};

/// Solves every observation in the frame and maps each tag pose to a card
/// pose vote. A bad tag never aborts the frame; it is counted instead.
CandidateResult card_candidates(const ObservationFrame& frame, const Registry& registry,
                                const Intrinsicsd& k, SolverKind solver,
                                const CandidateOptions& options = {});

struct FusionPolicy {
  bool use_weights = true;
};

/// Robust fusion of one card's candidates: weighted component-wise median
/// translation and weighted chordal-mean rotation. The result does not
/// depend on candidate order (candidates are sorted by source tag id, which
/// also breaks weighted-median ties deterministically).
CardPoseEstimate fuse_candidates(std::span<const CardCandidate> candidates,
                                 const FusionPolicy& policy = {});

enum class LifecycleEvent { session_start, first_card_pickup, board_removed };

/// When the card tracker has been disabled by the first card pickup it stays
/// off for the rest of the session; the board tracker is disabled separately
/// by removing the calibration board.
struct TrackerLifecycle {
  bool card_tracker_enabled = true;
  bool table_tracker_enabled = true;
};

TrackerLifecycle lifecycle_apply(TrackerLifecycle state, LifecycleEvent event);

struct TrackResult {
  std::vector<CardPoseEstimate> cards;
  std::vector<TagPoseEstimate> board;
  int skipped = 0;
};

/// Full per-frame pipeline. Card observations are ignored while the card
/// tracker is disabled; board observations flow while the table tracker is
/// enabled. Output is deterministic for a given input regardless of the
/// internal parallel schedule.
TrackResult track_frame(const TrackerLifecycle& lifecycle, const ObservationFrame& frame,
                        const Registry& registry, const Intrinsicsd& k, SolverKind solver,
                        const CandidateOptions& options = {});

struct JitterEntry {
  int card_id = 0;
  int samples = 0;
  double sigma_pos = 0.0;      // meters, RMS deviation from the window mean
  double sigma_rot_deg = 0.0;  // degrees, RMS geodesic angle to the mean
  bool flagged = false;        // sigma_rot_deg > threshold
};

struct JitterReport {
  int window = 0;
  double flag_threshold_deg = 0.5;
  std::vector<JitterEntry> entries;  // sorted by card_id
};

/// Sliding-window jitter statistics over a pose history. The window is the
/// trailing `window` samples per card; cards with fewer than 2 samples are
/// omitted. Rotational sigma above 0.5 degrees raises the flag.
JitterReport jitter_metrics(std::span<const CardPoseEstimate> history, int window);

/// Card-pose trace, one estimate per line:
///   timestamp card_id tx ty tz rx ry rz candidate_count error
void write_pose_trace(std::ostream& sink, std::span<const CardPoseEstimate> estimates);
std::vector<CardPoseEstimate> read_pose_trace(std::istream& source,
                                              const std::string& name = "poses");

}  // namespace decktrack
