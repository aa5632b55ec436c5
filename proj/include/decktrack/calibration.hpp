#pragma once

#include <istream>
#include <ostream>
#include <span>

#include "decktrack/tracker.hpp"

namespace decktrack {

/// Table surface fitted from board tag poses, with an in-plane frame for 2D
/// pile coordinates. normal is unit length and oriented toward the camera
/// side; points x on the plane satisfy normal . x = offset.
struct TablePlane {
  Eigen::Vector3d normal = Eigen::Vector3d::UnitY();
  double offset = 0.0;
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();  // on the plane
  Eigen::Vector3d axis_u = Eigen::Vector3d::UnitX();
  Eigen::Vector3d axis_v = Eigen::Vector3d::UnitZ();
  double fit_rms = 0.0;  // residual of the tag centers

  Eigen::Vector2d to_plane(const Eigen::Vector3d& p) const {
    const Eigen::Vector3d d = p - origin;
    return {d.dot(axis_u), d.dot(axis_v)};
  }
  double height_above(const Eigen::Vector3d& p) const { return normal.dot(p) - offset; }
};

/// 2D pose within the table plane.
struct PlanePose2 {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  double heading = 0.0;  // angle of the card's U axis in plane coordinates
};

/// Least-squares plane through the board tag centers (centroid plus smallest
/// scatter eigenvector). Needs at least 3 non-collinear estimates. The
/// in-plane axes follow the board grid orientation so pile coordinates are
/// meaningful.
TablePlane fit_table_plane(std::span<const TagPoseEstimate> board_estimates,
                           const BoardLayout& board_layout);

/// Orthogonal projection of a pose onto the plane: the translation moves
/// along the normal, and the rotation becomes the closest rotation whose
/// card plane is parallel to the table, preserving the in-plane heading.
Posed project_to_plane(const Posed& pose, const TablePlane& plane);

struct SceneCalibration {
  TablePlane table;        // in the headset frame
  PlanePose2 deck_anchor;  // local deck position on the table
  Posed extrinsic;         // camera frame -> headset frame
};

/// One-shot scene calibration from a single frame showing the board and the
/// stacked deck's top card. Results are expressed in the headset frame via
/// the camera-to-headset extrinsic.
SceneCalibration calibrate_scene(const ObservationFrame& frame, const Registry& registry,
                                 const Intrinsicsd& k, const Posed& extrinsic,
                                 SolverKind solver = SolverKind::ippe);

void save_calibration(const SceneCalibration& calib, std::ostream& sink);
SceneCalibration load_calibration(std::istream& source, const std::string& name = "calib");

}  // namespace decktrack
