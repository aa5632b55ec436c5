#include "decktrack/tag_pose.hpp"

namespace decktrack {

TagPoseEstimate estimate_tag_pose(const Intrinsicsd& k, const TagSpec& spec,
                                  const TagObservation& obs, SolverKind solver,
                                  const SolveOptions& options) {
  if (spec.tag_id != obs.tag_id) {
    raise(Errc::precondition_violated,
          "observation tag " + std::to_string(obs.tag_id) + " does not match spec tag " +
              std::to_string(spec.tag_id));
  }
  const double s = tag_edge(spec.size_class);

  TagPoseEstimate estimate;
  estimate.tag_id = spec.tag_id;
  switch (solver) {
    case SolverKind::ippe: {
      const auto pair = ippe_solve(k, s, obs.corners, options.ambiguity_margin_px);
      estimate.pose = pair.best;
      estimate.reprojection_error = pair.best_error;
      estimate.ambiguous = pair.ambiguous;
      return estimate;
    }
    case SolverKind::dlt: {
      estimate.pose = dlt_solve(k, s, obs.corners);
      break;
    }
    case SolverKind::lm_refined: {
      const Posed initial = dlt_solve(k, s, obs.corners);
      estimate.pose = lm_refine(k, s, obs.corners, initial, options.lm);
      break;
    }
  }
  const auto model = canonical_tag_corners(s);
  estimate.reprojection_error = reprojection_error<double>(k, estimate.pose, model, obs.corners);
  return estimate;
}

}  // namespace decktrack
