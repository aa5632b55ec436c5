#include "decktrack/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>

#include "decktrack/lineio.hpp"
#include "decktrack/parallel.hpp"

namespace decktrack {

TrackerLifecycle lifecycle_apply(TrackerLifecycle state, LifecycleEvent event) {
  switch (event) {
    case LifecycleEvent::session_start:
      state.card_tracker_enabled = true;
      state.table_tracker_enabled = true;
      break;
    case LifecycleEvent::first_card_pickup:
      state.card_tracker_enabled = false;
      break;
    case LifecycleEvent::board_removed:
      state.table_tracker_enabled = false;
      break;
  }
  return state;
}

namespace {

struct PerTagResult {
  std::optional<TagPoseEstimate> estimate;
  const TagSpec* spec = nullptr;
};

// Solves every observation independently (parallel over large frames) into
// indexed slots; downstream consumption runs in index order, so results are
// identical no matter how the work was scheduled.
std::vector<PerTagResult> solve_frame(const ObservationFrame& frame, const Registry& registry,
                                      const Intrinsicsd& k, SolverKind solver,
                                      const CandidateOptions& options) {
  std::vector<PerTagResult> results(frame.observations.size());
  parallel_for(frame.observations.size(), [&](std::size_t i) {
    const auto& obs = frame.observations[i];
    if (!registry.contains(obs.tag_id)) return;
    const TagSpec& spec = registry.lookup(obs.tag_id);
    results[i].spec = &spec;
    try {
      results[i].estimate = estimate_tag_pose(k, spec, obs, solver, options.solve);
    } catch (const Error&) {
      results[i].estimate.reset();  // counted as skipped by the caller
    }
  });
  return results;
}

CardCandidate to_candidate(const TagPoseEstimate& estimate, const TagSpec& spec,
                           double ambiguous_weight) {
  CardCandidate candidate;
  candidate.card_id = spec.card_id;
  candidate.pose = estimate.pose * tag_placement_in_card(spec).inverse();
  candidate.source_tag_id = spec.tag_id;
  candidate.weight = estimate.ambiguous ? ambiguous_weight : 1.0;
  candidate.reprojection_error = estimate.reprojection_error;
  return candidate;
}

double weighted_median(std::vector<std::pair<double, double>>& value_weight) {
  std::sort(value_weight.begin(), value_weight.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double total = 0.0;
  for (const auto& [value, weight] : value_weight) total += weight;
  double cumulative = 0.0;
  for (const auto& [value, weight] : value_weight) {
    cumulative += weight;
    if (cumulative >= total / 2.0) return value;
  }
  return value_weight.back().first;
}

Matrix3d chordal_mean_rotation(std::span<const Matrix3d> rotations,
                               std::span<const double> weights) {
  Eigen::Matrix4d accum = Eigen::Matrix4d::Zero();
  for (std::size_t i = 0; i < rotations.size(); ++i) {
    const Eigen::Quaterniond q(rotations[i]);
    const Eigen::Vector4d v(q.w(), q.x(), q.y(), q.z());
    accum += weights[i] * (v * v.transpose());
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(accum);
  const Eigen::Vector4d v = eig.eigenvectors().col(3);  // largest eigenvalue
  Eigen::Quaterniond mean(v(0), v(1), v(2), v(3));
  mean.normalize();
  return mean.toRotationMatrix();
}

}  // namespace

CandidateResult card_candidates(const ObservationFrame& frame, const Registry& registry,
                                const Intrinsicsd& k, SolverKind solver,
                                const CandidateOptions& options) {
  const auto solved = solve_frame(frame, registry, k, solver, options);
  CandidateResult result;
  result.candidates.reserve(solved.size());
  for (const auto& r : solved) {
    if (!r.estimate) {
      ++result.skipped;
      continue;
    }
    if (r.spec->card_id == kBoardCardId) continue;  // board tags are not card votes
    result.candidates.push_back(to_candidate(*r.estimate, *r.spec, options.ambiguous_weight));
  }
  std::stable_sort(result.candidates.begin(), result.candidates.end(),
                   [](const CardCandidate& a, const CardCandidate& b) {
                     if (a.card_id != b.card_id) return a.card_id < b.card_id;
                     return a.source_tag_id < b.source_tag_id;
                   });
  return result;
}

CardPoseEstimate fuse_candidates(std::span<const CardCandidate> candidates,
                                 const FusionPolicy& policy) {
  if (candidates.empty()) {
    raise(Errc::empty_candidate_set, "cannot fuse an empty candidate set");
  }
  std::vector<CardCandidate> sorted(candidates.begin(), candidates.end());
  for (const auto& candidate : sorted) {
    if (candidate.card_id != sorted.front().card_id) {
      raise(Errc::mixed_card_ids, "candidates span multiple cards");
    }
  }
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const CardCandidate& a, const CardCandidate& b) {
                     return a.source_tag_id < b.source_tag_id;
                   });

  CardPoseEstimate fused;
  fused.card_id = sorted.front().card_id;
  fused.candidate_count = static_cast<int>(sorted.size());

  double weight_total = 0.0;
  double error_accum = 0.0;
  bool all_identical = true;
  for (const auto& candidate : sorted) {
    const double w = policy.use_weights ? candidate.weight : 1.0;
    weight_total += w;
    error_accum += w * candidate.reprojection_error;
    if ((candidate.pose.rotation - sorted.front().pose.rotation).norm() != 0.0 ||
        (candidate.pose.translation - sorted.front().pose.translation).norm() != 0.0) {
      all_identical = false;
    }
  }
  fused.fused_reprojection_error = weight_total > 0.0 ? error_accum / weight_total : 0.0;
  if (all_identical) {
    fused.pose = sorted.front().pose;
    return fused;
  }

  for (int axis = 0; axis < 3; ++axis) {
    std::vector<std::pair<double, double>> value_weight;
    value_weight.reserve(sorted.size());
    for (const auto& candidate : sorted) {
      value_weight.emplace_back(candidate.pose.translation[axis],
                                policy.use_weights ? candidate.weight : 1.0);
    }
    fused.pose.translation[axis] = weighted_median(value_weight);
  }

  std::vector<Matrix3d> rotations;
  std::vector<double> weights;
  rotations.reserve(sorted.size());
  for (const auto& candidate : sorted) {
    rotations.push_back(candidate.pose.rotation);
    weights.push_back(policy.use_weights ? candidate.weight : 1.0);
  }
  fused.pose.rotation = chordal_mean_rotation(rotations, weights);
  return fused;
}

TrackResult track_frame(const TrackerLifecycle& lifecycle, const ObservationFrame& frame,
                        const Registry& registry, const Intrinsicsd& k, SolverKind solver,
                        const CandidateOptions& options) {
  TrackResult result;
  const auto solved = solve_frame(frame, registry, k, solver, options);

  std::vector<CardCandidate> candidates;
  candidates.reserve(solved.size());
  for (const auto& r : solved) {
    if (r.spec == nullptr || !r.estimate) {
      ++result.skipped;
      continue;
    }
    if (r.spec->card_id == kBoardCardId) {
      if (lifecycle.table_tracker_enabled) result.board.push_back(*r.estimate);
      continue;
    }
    if (!lifecycle.card_tracker_enabled) continue;
    candidates.push_back(to_candidate(*r.estimate, *r.spec, options.ambiguous_weight));
  }

  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const CardCandidate& a, const CardCandidate& b) {
                     if (a.card_id != b.card_id) return a.card_id < b.card_id;
                     return a.source_tag_id < b.source_tag_id;
                   });
  std::size_t begin = 0;
  while (begin < candidates.size()) {
    std::size_t end = begin;
    while (end < candidates.size() && candidates[end].card_id == candidates[begin].card_id) {
      ++end;
    }
    CardPoseEstimate estimate = fuse_candidates(
        std::span<const CardCandidate>(candidates.data() + begin, end - begin));
    estimate.timestamp = frame.timestamp;
    result.cards.push_back(std::move(estimate));
    begin = end;
  }
  return result;
}

JitterReport jitter_metrics(std::span<const CardPoseEstimate> history, int window) {
  if (window < 2) {
    raise(Errc::insufficient_history, "jitter window must cover at least 2 samples");
  }
  std::map<int, std::vector<const CardPoseEstimate*>> by_card;
  for (const auto& estimate : history) {
    by_card[estimate.card_id].push_back(&estimate);
  }

  JitterReport report;
  report.window = window;
  for (auto& [card_id, samples] : by_card) {
    if (samples.size() < 2) continue;
    const std::size_t n = std::min<std::size_t>(samples.size(), static_cast<std::size_t>(window));
    const std::size_t first = samples.size() - n;

    Vector3d mean_t = Vector3d::Zero();
    for (std::size_t i = first; i < samples.size(); ++i) {
      mean_t += samples[i]->pose.translation;
    }
    mean_t /= static_cast<double>(n);

    std::vector<Matrix3d> rotations;
    std::vector<double> weights(n, 1.0);
    rotations.reserve(n);
    for (std::size_t i = first; i < samples.size(); ++i) {
      rotations.push_back(samples[i]->pose.rotation);
    }
    const Matrix3d mean_r = chordal_mean_rotation(rotations, weights);

    double pos_sq = 0.0;
    double rot_sq = 0.0;
    for (std::size_t i = first; i < samples.size(); ++i) {
      pos_sq += (samples[i]->pose.translation - mean_t).squaredNorm();
      const double angle = rotation_distance(mean_r, samples[i]->pose.rotation);
      rot_sq += angle * angle;
    }
    JitterEntry entry;
    entry.card_id = card_id;
    entry.samples = static_cast<int>(n);
    entry.sigma_pos = std::sqrt(pos_sq / static_cast<double>(n));
    entry.sigma_rot_deg = std::sqrt(rot_sq / static_cast<double>(n)) * 180.0 / M_PI;
    entry.flagged = entry.sigma_rot_deg > report.flag_threshold_deg;
    report.entries.push_back(entry);
  }
  return report;
}

void write_pose_trace(std::ostream& sink, std::span<const CardPoseEstimate> estimates) {
  std::string out = "decktrack-poses 1\n";
  for (const auto& estimate : estimates) {
    append_double(out, estimate.timestamp);
    out += ' ';
    out += std::to_string(estimate.card_id);
    const Vector3d rvec = rotation_to_rodrigues(estimate.pose.rotation);
    for (int i = 0; i < 3; ++i) {
      out += ' ';
      append_double(out, estimate.pose.translation[i]);
    }
    for (int i = 0; i < 3; ++i) {
      out += ' ';
      append_double(out, rvec[i]);
    }
    out += ' ';
    out += std::to_string(estimate.candidate_count);
    out += ' ';
    append_double(out, estimate.fused_reprojection_error);
    out += '\n';
  }
  sink << out;
}

std::vector<CardPoseEstimate> read_pose_trace(std::istream& source, const std::string& name) {
  LineReader reader(source, name);
  expect_header(reader, "decktrack-poses", 1);
  std::vector<CardPoseEstimate> estimates;
  while (reader.next()) {
    reader.expect_fields(10);
    CardPoseEstimate estimate;
    estimate.timestamp = reader.get_double(0);
    estimate.card_id = static_cast<int>(reader.get_int(1));
    estimate.pose.translation = {reader.get_double(2), reader.get_double(3),
                                 reader.get_double(4)};
    estimate.pose.rotation = rodrigues_to_rotation(
        Vector3d(reader.get_double(5), reader.get_double(6), reader.get_double(7)));
    estimate.candidate_count = static_cast<int>(reader.get_int(8));
    estimate.fused_reprojection_error = reader.get_double(9);
    estimates.push_back(estimate);
  }
  return estimates;
}

}  // namespace decktrack
