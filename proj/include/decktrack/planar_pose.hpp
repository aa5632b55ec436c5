#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <optional>

#include "decktrack/error.hpp"
#include "decktrack/geometry.hpp"
#include "decktrack/homography.hpp"

namespace decktrack {

enum class SolverKind { ippe, dlt, lm_refined };

/// The two geometrically valid poses for a planar target, ranked by
/// reprojection error. `ambiguous` is set when the errors are within the
/// requested margin of each other (acute near fronto-parallel views).
template <class S>
struct PoseSolutionPair {
  Pose<S> best;
  std::optional<Pose<S>> alternate;
  S best_error = S(0);
  S alternate_error = S(0);
  bool ambiguous = false;
};

struct LmConfig {
  int max_iters = 50;
  double gradient_tol = 1e-10;
  double step_tol = 1e-12;
  double lambda0 = 1e-3;
};

namespace detail {

// (U, W) plane coordinates of the canonical tag model, matching the corner
// order of canonical_tag_corners.
template <class S>
std::array<Vector2<S>, 4> tag_plane_coords(S side) {
  const S h = side / S(2);
  return {Vector2<S>(-h, -h), Vector2<S>(h, -h), Vector2<S>(h, h), Vector2<S>(-h, h)};
}

template <class S>
std::array<Vector2<S>, 4> normalize_pixels(const CameraIntrinsics<S>& k,
                                           const std::array<Vector2<S>, 4>& pixels) {
  std::array<Vector2<S>, 4> out;
  for (int i = 0; i < 4; ++i) {
    out[i] = Vector2<S>((pixels[i].x() - k.cx) / k.fx, (pixels[i].y() - k.cy) / k.fy);
  }
  return out;
}

// Rotation whose third column is the unit vector along (p, q, 1).
template <class S>
Matrix3<S> rotation_to_ray(S p, S q) {
  const Vector3<S> dir = Vector3<S>(p, q, S(1)).normalized();
  const Vector3<S> axis(-dir.y(), dir.x(), S(0));  // e_z x dir
  const S s = axis.norm();
  const S c = dir.z();
  if (s < S(1e-14)) return Matrix3<S>::Identity();
  const Matrix3<S> k = skew(Vector3<S>(axis));
  return Matrix3<S>(Matrix3<S>::Identity() + k + k * k * ((S(1) - c) / (s * s)));
}

// The canonical tag plane is Y = 0, so a pose maps plane coordinates
// (U, W) through rotation columns 0 and 2. The planar solvers work in the
// conventional Z = 0 parameterization and this shuffle converts back:
// given an orthonormal frame [a, b, n] with n = a x b, the tag rotation is
// [a, -n, b] (det +1, a <- U axis, b <- W axis).
template <class S>
Matrix3<S> plane_frame_to_tag_rotation(const Vector3<S>& a, const Vector3<S>& b) {
  Matrix3<S> r;
  r.col(0) = a;
  r.col(1) = -a.cross(b);
  r.col(2) = b;
  return r;
}

// Least-squares translation for a fixed rotation from the normalized-image
// projection constraints of the 4 corners.
template <class S>
Vector3<S> translation_for_rotation(const Matrix3<S>& r,
                                    const std::array<Vector3<S>, 4>& model,
                                    const std::array<Vector2<S>, 4>& norm_pts) {
  Matrix3<S> ata = Matrix3<S>::Zero();
  Vector3<S> atb = Vector3<S>::Zero();
  for (int i = 0; i < 4; ++i) {
    const Vector3<S> rp = r * model[i];
    const S x = norm_pts[i].x();
    const S y = norm_pts[i].y();
    Eigen::Matrix<S, 2, 3> a;
    a << S(1), S(0), -x, S(0), S(1), -y;
    Vector2<S> b(x * rp.z() - rp.x(), y * rp.z() - rp.y());
    ata += a.transpose() * a;
    atb += a.transpose() * b;
  }
  return ata.ldlt().solve(atb);
}

}  // namespace detail

/// Closed-form planar pose from the first-order homography expansion at the
/// model centroid. Returns both solutions of the two-fold planar ambiguity,
/// ranked by reprojection error; candidates that land behind the camera are
/// dropped and NoValidPose is raised when none survives.
template <class S>
PoseSolutionPair<S> ippe_solve(const CameraIntrinsics<S>& k, S tag_size,
                               const std::array<Vector2<S>, 4>& pixels,
                               S ambiguity_margin_px = S(0.3)) {
  if (!(tag_size > S(0))) raise(Errc::precondition_violated, "tag size must be positive");
  const auto plane = detail::tag_plane_coords(tag_size);
  const auto norm_pts = detail::normalize_pixels(k, pixels);
  const Matrix3<S> h = detail::homography_4pt(plane, norm_pts);
  if (std::abs(h(2, 2)) < S(1e-12)) {
    raise(Errc::degenerate_configuration, "model centroid projects to infinity");
  }

  // Jacobian of the homography map at the model centroid, and the image of
  // the centroid itself (h is already scaled so h(2,2) = 1).
  const S p = h(0, 2);
  const S q = h(1, 2);
  Eigen::Matrix<S, 2, 2> j;
  j << h(0, 0) - h(2, 0) * p, h(0, 1) - h(2, 1) * p, h(1, 0) - h(2, 0) * q,
      h(1, 1) - h(2, 1) * q;

  const Matrix3<S> rv = detail::rotation_to_ray(p, q);

  // B = [I2 | -v] * Rv restricted to its first two columns; the third column
  // vanishes because Rv's last column points along (p, q, 1).
  Eigen::Matrix<S, 2, 2> b;
  b << rv(0, 0) - p * rv(2, 0), rv(0, 1) - p * rv(2, 1), rv(1, 0) - q * rv(2, 0),
      rv(1, 1) - q * rv(2, 1);
  const S det_b = b(0, 0) * b(1, 1) - b(0, 1) * b(1, 0);
  if (std::abs(det_b) < S(1e-14)) {
    raise(Errc::degenerate_configuration, "ray frame is singular");
  }
  Eigen::Matrix<S, 2, 2> binv;
  binv << b(1, 1), -b(0, 1), -b(1, 0), b(0, 0);
  binv /= det_b;

  const Eigen::Matrix<S, 2, 2> rt = binv * j;

  // Largest singular value of rt recovers the depth scale: the upper 2x2
  // block of a rotation always has largest singular value exactly 1.
  const S g00 = rt(0, 0) * rt(0, 0) + rt(1, 0) * rt(1, 0);
  const S g01 = rt(0, 0) * rt(0, 1) + rt(1, 0) * rt(1, 1);
  const S g11 = rt(0, 1) * rt(0, 1) + rt(1, 1) * rt(1, 1);
  const S disc = std::sqrt(std::max(S(0), (g00 - g11) * (g00 - g11) + S(4) * g01 * g01));
  const S gamma = std::sqrt(std::max(S(0), (g00 + g11 + disc) / S(2)));
  if (!(gamma > S(0))) raise(Errc::degenerate_configuration, "degenerate homography jacobian");

  const S r00 = rt(0, 0) / gamma;
  const S r01 = rt(0, 1) / gamma;
  const S r10 = rt(1, 0) / gamma;
  const S r11 = rt(1, 1) / gamma;
  S c0 = std::sqrt(std::max(S(0), S(1) - r00 * r00 - r10 * r10));
  S c1 = std::sqrt(std::max(S(0), S(1) - r01 * r01 - r11 * r11));
  const S sp = -(r00 * r01 + r10 * r11);  // c0 * c1 must equal this
  if (sp < S(0)) c1 = -c1;

  const auto model = canonical_tag_corners(tag_size);

  struct Candidate {
    Pose<S> pose;
    S error;
  };
  std::array<Candidate, 2> cands;
  int n = 0;
  for (const S sign : {S(1), S(-1)}) {
    const Vector3<S> col_a = rv * Vector3<S>(r00, r10, sign * c0);
    const Vector3<S> col_b = rv * Vector3<S>(r01, r11, sign * c1);
    const Matrix3<S> r = detail::plane_frame_to_tag_rotation(col_a, col_b);
    const Vector3<S> t = detail::translation_for_rotation(r, model, norm_pts);
    if (!(t.z() > S(0))) continue;
    bool in_front = true;
    for (const auto& m : model) {
      if (!((r * m + t).z() > S(0))) {
        in_front = false;
        break;
      }
    }
    if (!in_front) continue;
    Pose<S> pose(r, t);
    cands[n++] = {pose, reprojection_error<S>(k, pose, model, pixels)};
  }
  if (n == 0) raise(Errc::no_valid_pose, "both planar solutions lie behind the camera");

  PoseSolutionPair<S> out;
  if (n == 2 && cands[1].error < cands[0].error) std::swap(cands[0], cands[1]);
  out.best = cands[0].pose;
  out.best_error = cands[0].error;
  if (n == 2) {
    out.alternate = cands[1].pose;
    out.alternate_error = cands[1].error;
    out.ambiguous = (cands[1].error - cands[0].error) < ambiguity_margin_px;
  }
  return out;
}

/// Planar pose through homography decomposition: the columns of K^-1 H give
/// the two in-plane rotation columns and the translation up to a common
/// scale; the nearest rotation is recovered by polar decomposition.
template <class S>
Pose<S> dlt_solve(const CameraIntrinsics<S>& k, S tag_size,
                  const std::array<Vector2<S>, 4>& pixels) {
  if (!(tag_size > S(0))) raise(Errc::precondition_violated, "tag size must be positive");
  const auto plane = detail::tag_plane_coords(tag_size);
  const auto norm_pts = detail::normalize_pixels(k, pixels);
  const Matrix3<S> h = detail::homography_4pt(plane, norm_pts);

  const Vector3<S> h1 = h.col(0);
  const Vector3<S> h2 = h.col(1);
  const S norm_sum = h1.norm() + h2.norm();
  if (!(norm_sum > S(0))) raise(Errc::degenerate_configuration, "zero homography columns");
  S lambda = S(2) / norm_sum;
  if (lambda * h(2, 2) < S(0)) lambda = -lambda;  // keep the plane in front

  const Vector3<S> a = lambda * h1;
  const Vector3<S> b = lambda * h2;
  const Matrix3<S> g = detail::plane_frame_to_tag_rotation(a.normalized(), b.normalized());

  Eigen::JacobiSVD<Matrix3<S>> svd(g, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3<S> r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < S(0)) {
    Matrix3<S> flip = Matrix3<S>::Identity();
    flip(2, 2) = S(-1);
    r = svd.matrixU() * flip * svd.matrixV().transpose();
  }

  const auto model = canonical_tag_corners(tag_size);
  const Vector3<S> t = detail::translation_for_rotation(r, model, norm_pts);
  if (!(t.z() > S(0))) raise(Errc::no_valid_pose, "decomposed pose lies behind the camera");
  for (const auto& m : model) {
    if (!((r * m + t).z() > S(0))) {
      raise(Errc::no_valid_pose, "decomposed pose places corners behind the camera");
    }
  }
  return Pose<S>(r, t);
}

/// d(R(v) p)/dv for the Rodrigues parameterization (Gallego & Yezzi form).
template <class S>
Matrix3<S> rotated_point_jacobian(const Vector3<S>& rvec, const Vector3<S>& p) {
  const Matrix3<S> r = rodrigues_to_rotation(rvec);
  const Vector3<S> rp = r * p;
  const S n2 = rvec.squaredNorm();
  if (n2 < S(1e-16)) return -skew(Vector3<S>(rp));
  const Matrix3<S> vx = skew(rvec);
  const Matrix3<S> i_minus_r = Matrix3<S>::Identity() - r;
  Matrix3<S> jac;
  for (int i = 0; i < 3; ++i) {
    const Vector3<S> w = rvec.cross(Vector3<S>(i_minus_r.col(i)));
    const Matrix3<S> mi = (rvec[i] * vx + skew(w)) / n2;
    jac.col(i) = mi * rp;
  }
  return jac;
}

/// 8x6 Jacobian of the stacked corner residuals (projected - observed) with
/// respect to [rvec; t]. Row order matches the corner order.
template <class S>
Eigen::Matrix<S, 8, 6> reprojection_jacobian(const CameraIntrinsics<S>& k,
                                             const Vector3<S>& rvec, const Vector3<S>& t,
                                             const std::array<Vector3<S>, 4>& model) {
  const Matrix3<S> r = rodrigues_to_rotation(rvec);
  Eigen::Matrix<S, 8, 6> jac;
  for (int i = 0; i < 4; ++i) {
    const Vector3<S> w = r * model[i] + t;
    const S iz = S(1) / w.z();
    Eigen::Matrix<S, 2, 3> dpix;
    dpix << k.fx * iz, S(0), -k.fx * w.x() * iz * iz, S(0), k.fy * iz,
        -k.fy * w.y() * iz * iz;
    const Matrix3<S> drot = rotated_point_jacobian(rvec, model[i]);
    jac.template block<2, 3>(2 * i, 0) = dpix * drot;
    jac.template block<2, 3>(2 * i, 3) = dpix;
  }
  return jac;
}

/// Levenberg-Marquardt refinement of a planar pose over 6 DOF
/// (Rodrigues vector + translation). Only improving steps are accepted, so
/// the returned reprojection error never exceeds the initial one.
template <class S>
Pose<S> lm_refine(const CameraIntrinsics<S>& k, S tag_size,
                  const std::array<Vector2<S>, 4>& pixels, const Pose<S>& initial,
                  const LmConfig& cfg = {}) {
  const auto model = canonical_tag_corners(tag_size);

  const auto residuals = [&](const Vector3<S>& rvec, const Vector3<S>& t,
                             Eigen::Matrix<S, 8, 1>& res) -> bool {
    const Matrix3<S> r = rodrigues_to_rotation(rvec);
    for (int i = 0; i < 4; ++i) {
      const Vector3<S> w = r * model[i] + t;
      if (!(w.z() > S(0))) return false;
      res(2 * i) = k.fx * w.x() / w.z() + k.cx - pixels[i].x();
      res(2 * i + 1) = k.fy * w.y() / w.z() + k.cy - pixels[i].y();
    }
    return true;
  };

  Vector3<S> rvec = rotation_to_rodrigues(initial.rotation);
  Vector3<S> t = initial.translation;
  Eigen::Matrix<S, 8, 1> res;
  if (!residuals(rvec, t, res)) {
    raise(Errc::no_valid_pose, "initial pose places the tag behind the camera");
  }
  S cost = res.squaredNorm();
  S lambda = S(cfg.lambda0);

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    const Eigen::Matrix<S, 8, 6> jac = reprojection_jacobian(k, rvec, t, model);
    const Eigen::Matrix<S, 6, 1> grad = jac.transpose() * res;
    if (grad.template lpNorm<Eigen::Infinity>() < S(cfg.gradient_tol)) break;
    const Eigen::Matrix<S, 6, 6> jtj = jac.transpose() * jac;

    bool stepped = false;
    while (lambda < S(1e100)) {
      Eigen::Matrix<S, 6, 6> aug = jtj;
      aug.diagonal().array() += lambda;
      const Eigen::Matrix<S, 6, 1> delta = aug.ldlt().solve(-grad);
      if (delta.norm() < S(cfg.step_tol) * (std::sqrt(rvec.squaredNorm() + t.squaredNorm()) +
                                            S(cfg.step_tol))) {
        return Pose<S>(rodrigues_to_rotation(rvec), t);
      }
      Vector3<S> rvec_new = rvec + delta.template head<3>();
      const Vector3<S> t_new = t + delta.template tail<3>();
      // Keep the rotation vector in the fundamental ball.
      const S ang = rvec_new.norm();
      if (ang > S(M_PI)) {
        rvec_new *= (S(1) - S(2) * S(M_PI) / ang);
      }
      Eigen::Matrix<S, 8, 1> res_new;
      if (residuals(rvec_new, t_new, res_new)) {
        const S cost_new = res_new.squaredNorm();
        if (cost_new < cost) {
          rvec = rvec_new;
          t = t_new;
          res = res_new;
          cost = cost_new;
          lambda = std::max(lambda / S(10), S(1e-12));
          stepped = true;
          break;
        }
      }
      lambda *= S(10);
    }
    if (!stepped) break;
  }
  return Pose<S>(rodrigues_to_rotation(rvec), t);
}

}  // namespace decktrack
