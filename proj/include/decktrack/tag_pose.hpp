#pragma once

#include "decktrack/frame.hpp"
#include "decktrack/planar_pose.hpp"
#include "decktrack/registry.hpp"

namespace decktrack {

/// Per-tag solver output: the tag frame expressed in the camera frame.
struct TagPoseEstimate {
  int tag_id = 0;
  Posed pose;
  double reprojection_error = 0.0;  // RMS pixels
  bool ambiguous = false;
};

struct SolveOptions {
  double ambiguity_margin_px = 0.3;
  LmConfig lm;
};

/// Solves one observed tag with the requested solver, using the model size of
/// the tag's size class. LM-refined starts from the DLT solution.
TagPoseEstimate estimate_tag_pose(const Intrinsicsd& k, const TagSpec& spec,
                                  const TagObservation& obs, SolverKind solver,
                                  const SolveOptions& options = {});

}  // namespace decktrack
