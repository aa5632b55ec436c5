#include "decktrack/calibration.hpp"

#include <algorithm>
#include <cmath>

#include "decktrack/lineio.hpp"

namespace decktrack {

namespace {

// Minimal rotation carrying unit vector `from` onto unit vector `to`.
Matrix3d rotation_between(const Vector3d& from, const Vector3d& to) {
  const Vector3d axis = from.cross(to);
  const double s = axis.norm();
  const double c = from.dot(to);
  if (s < 1e-14) {
    if (c > 0.0) return Matrix3d::Identity();
    // Antiparallel: rotate half a turn about any axis orthogonal to `from`.
    Vector3d ortho = std::abs(from.x()) < 0.9 ? Vector3d::UnitX() : Vector3d::UnitY();
    ortho = (ortho - from * from.dot(ortho)).normalized();
    return Eigen::AngleAxisd(M_PI, ortho).toRotationMatrix();
  }
  const Matrix3d k = skew(axis);
  return Matrix3d(Matrix3d::Identity() + k + k * k * ((1.0 - c) / (s * s)));
}

}  // namespace

TablePlane fit_table_plane(std::span<const TagPoseEstimate> board_estimates,
                           const BoardLayout& board_layout) {
  std::vector<const TagPoseEstimate*> used;
  for (const auto& estimate : board_estimates) {
    const bool known = std::any_of(
        board_layout.tags.begin(), board_layout.tags.end(),
        [&](const TagSpec& spec) { return spec.tag_id == estimate.tag_id; });
    if (known) used.push_back(&estimate);
  }
  if (used.size() < 3) {
    raise(Errc::insufficient_tags, "plane fit needs at least 3 board tags, got " +
                                       std::to_string(used.size()));
  }

  Vector3d centroid = Vector3d::Zero();
  for (const auto* estimate : used) centroid += estimate->pose.translation;
  centroid /= static_cast<double>(used.size());

  Matrix3d scatter = Matrix3d::Zero();
  for (const auto* estimate : used) {
    const Vector3d d = estimate->pose.translation - centroid;
    scatter += d * d.transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Matrix3d> eig(scatter);
  // Collinear centers leave two near-zero eigenvalues.
  if (eig.eigenvalues()(1) < 1e-12 * std::max(eig.eigenvalues()(2), 1e-300)) {
    raise(Errc::degenerate_geometry, "board tag centers are collinear");
  }

  TablePlane plane;
  plane.normal = eig.eigenvectors().col(0).normalized();
  // Orient the normal toward the camera side (the camera sits at the origin
  // of the estimate frame).
  if (plane.normal.dot(centroid) > 0.0) plane.normal = -plane.normal;
  plane.offset = plane.normal.dot(centroid);
  plane.origin = centroid;

  double rms = 0.0;
  for (const auto* estimate : used) {
    const double d = plane.normal.dot(estimate->pose.translation) - plane.offset;
    rms += d * d;
  }
  plane.fit_rms = std::sqrt(rms / static_cast<double>(used.size()));

  // In-plane axes follow the board grid orientation: project the mean board
  // U direction into the plane so pile coordinates track the printed sheet.
  Vector3d board_u = Vector3d::Zero();
  for (const auto* estimate : used) board_u += estimate->pose.rotation.col(0);
  board_u -= plane.normal * plane.normal.dot(board_u);
  if (board_u.norm() < 1e-9) {
    board_u = Vector3d::UnitX() - plane.normal * plane.normal.x();
    if (board_u.norm() < 1e-9) board_u = Vector3d::UnitZ() - plane.normal * plane.normal.z();
  }
  plane.axis_u = board_u.normalized();
  plane.axis_v = plane.normal.cross(plane.axis_u).normalized();
  return plane;
}

Posed project_to_plane(const Posed& pose, const TablePlane& plane) {
  Posed out = pose;
  out.translation -= plane.normal * plane.height_above(pose.translation);

  // The card plane normal is the rotated model Y axis. Align it with the
  // table normal through the minimal rotation, which preserves the card's
  // in-plane heading. The sign keeps the card facing the way it already was.
  const Vector3d card_normal = pose.rotation.col(1);
  const Vector3d target =
      card_normal.dot(plane.normal) >= 0.0 ? plane.normal : Vector3d(-plane.normal);
  out.rotation = rotation_between(card_normal, target) * pose.rotation;
  return out;
}

SceneCalibration calibrate_scene(const ObservationFrame& frame, const Registry& registry,
                                 const Intrinsicsd& k, const Posed& extrinsic,
                                 SolverKind solver) {
  TrackerLifecycle lifecycle;  // both trackers run during calibration
  const TrackResult tracked = track_frame(lifecycle, frame, registry, k, solver);
  if (tracked.board.size() < 3) {
    raise(Errc::board_not_visible, "calibration frame shows " +
                                       std::to_string(tracked.board.size()) +
                                       " board tags, need 3");
  }
  if (tracked.cards.empty()) {
    raise(Errc::deck_not_visible, "calibration frame shows no deck card");
  }

  const BoardLayout board = generate_board_layout();
  TablePlane plane = fit_table_plane(tracked.board, board);

  // The stacked deck exposes only its top card; with several cards visible
  // prefer the best-supported estimate (ties break toward the lowest id).
  const CardPoseEstimate* deck_card = &tracked.cards.front();
  for (const auto& card : tracked.cards) {
    if (card.candidate_count > deck_card->candidate_count) deck_card = &card;
  }
  const Posed anchor_pose = project_to_plane(deck_card->pose, plane);

  SceneCalibration calibration;
  calibration.extrinsic = extrinsic;
  calibration.deck_anchor.position = plane.to_plane(anchor_pose.translation);
  const Vector3d heading_dir = anchor_pose.rotation.col(0);
  calibration.deck_anchor.heading =
      std::atan2(heading_dir.dot(plane.axis_v), heading_dir.dot(plane.axis_u));

  // Express the plane in the headset frame. The anchor's plane coordinates
  // ride along with the plane frame, so they are unchanged.
  calibration.table.normal = extrinsic.rotation * plane.normal;
  calibration.table.origin = extrinsic * plane.origin;
  calibration.table.offset = calibration.table.normal.dot(calibration.table.origin);
  calibration.table.axis_u = extrinsic.rotation * plane.axis_u;
  calibration.table.axis_v = extrinsic.rotation * plane.axis_v;
  calibration.table.fit_rms = plane.fit_rms;
  return calibration;
}

void save_calibration(const SceneCalibration& calib, std::ostream& sink) {
  std::string out = "decktrack-calib 1\n";
  const auto vec3 = [&out](const Vector3d& v) {
    for (int i = 0; i < 3; ++i) {
      out += ' ';
      append_double(out, v[i]);
    }
  };
  out += "plane";
  vec3(calib.table.normal);
  out += ' ';
  append_double(out, calib.table.offset);
  out += '\n';
  out += "frame";
  vec3(calib.table.origin);
  vec3(calib.table.axis_u);
  vec3(calib.table.axis_v);
  out += '\n';
  out += "anchor ";
  append_double(out, calib.deck_anchor.position.x());
  out += ' ';
  append_double(out, calib.deck_anchor.position.y());
  out += ' ';
  append_double(out, calib.deck_anchor.heading);
  out += '\n';
  out += "extrinsic";
  vec3(calib.extrinsic.translation);
  vec3(rotation_to_rodrigues(calib.extrinsic.rotation));
  out += '\n';
  sink << out;
}

SceneCalibration load_calibration(std::istream& source, const std::string& name) {
  LineReader reader(source, name);
  expect_header(reader, "decktrack-calib", 1);
  SceneCalibration calib;
  bool have_plane = false;
  bool have_frame = false;
  bool have_anchor = false;
  bool have_extrinsic = false;
  while (reader.next()) {
    const std::string& kind = reader.token(0);
    const auto vec3 = [&reader](std::size_t field) {
      return Vector3d(reader.get_double(field), reader.get_double(field + 1),
                      reader.get_double(field + 2));
    };
    if (kind == "plane") {
      reader.expect_fields(5);
      calib.table.normal = vec3(1);
      calib.table.offset = reader.get_double(4);
      have_plane = true;
    } else if (kind == "frame") {
      reader.expect_fields(10);
      calib.table.origin = vec3(1);
      calib.table.axis_u = vec3(4);
      calib.table.axis_v = vec3(7);
      have_frame = true;
    } else if (kind == "anchor") {
      reader.expect_fields(4);
      calib.deck_anchor.position = {reader.get_double(1), reader.get_double(2)};
      calib.deck_anchor.heading = reader.get_double(3);
      have_anchor = true;
    } else if (kind == "extrinsic") {
      reader.expect_fields(7);
      calib.extrinsic = Posed::from_rodrigues(vec3(4), vec3(1));
      have_extrinsic = true;
    } else {
      reader.fail(0, "unknown record '" + kind + "'");
    }
  }
  if (!have_plane || !have_frame || !have_anchor || !have_extrinsic) {
    raise(Errc::schema_violation, name + ": missing calibration records");
  }
  return calib;
}

}  // namespace decktrack
