#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>

#include "decktrack/error.hpp"
#include "decktrack/geometry.hpp"

namespace decktrack {

namespace detail {

template <class S>
bool any_three_collinear(const std::array<Vector2<S>, 4>& pts) {
  // Area threshold is relative to the point spread so the check is
  // scale-free.
  S scale = S(0);
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) scale = std::max(scale, (pts[i] - pts[j]).norm());
  if (scale == S(0)) return true;
  const S tol = S(1e-10) * scale * scale;
  for (int a = 0; a < 4; ++a) {
    for (int b = a + 1; b < 4; ++b) {
      for (int c = b + 1; c < 4; ++c) {
        const Vector2<S> u = pts[b] - pts[a];
        const Vector2<S> v = pts[c] - pts[a];
        if (std::abs(u.x() * v.y() - u.y() * v.x()) <= tol) return true;
      }
    }
  }
  return false;
}

// Similarity transform moving the points to zero centroid and sqrt(2) RMS
// radius (Hartley conditioning).
template <class S>
Matrix3<S> conditioning_transform(const std::array<Vector2<S>, 4>& pts) {
  Vector2<S> centroid = Vector2<S>::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= S(4);
  S rms = S(0);
  for (const auto& p : pts) rms += (p - centroid).squaredNorm();
  rms = std::sqrt(rms / S(4));
  const S scale = rms > S(0) ? std::sqrt(S(2)) / rms : S(1);
  Matrix3<S> t;
  t << scale, S(0), -scale * centroid.x(), S(0), scale, -scale * centroid.y(), S(0), S(0), S(1);
  return t;
}

// Core 4-point homography: src (plane coords) -> dst, solved through the
// 8x9 nullspace. Throws DegenerateConfiguration on rank deficiency.
template <class S>
Matrix3<S> homography_4pt(const std::array<Vector2<S>, 4>& src,
                          const std::array<Vector2<S>, 4>& dst) {
  if (any_three_collinear(src)) {
    raise(Errc::degenerate_configuration, "three model points are collinear");
  }
  if (any_three_collinear(dst)) {
    raise(Errc::degenerate_configuration, "three image points are collinear");
  }
  const Matrix3<S> ts = conditioning_transform(src);
  const Matrix3<S> td = conditioning_transform(dst);

  Eigen::Matrix<S, 8, 9> a = Eigen::Matrix<S, 8, 9>::Zero();
  for (int i = 0; i < 4; ++i) {
    const Vector3<S> m = ts * Vector3<S>(src[i].x(), src[i].y(), S(1));
    const Vector3<S> p = td * Vector3<S>(dst[i].x(), dst[i].y(), S(1));
    a.row(2 * i) << m.x(), m.y(), S(1), S(0), S(0), S(0), -p.x() * m.x(), -p.x() * m.y(), -p.x();
    a.row(2 * i + 1) << S(0), S(0), S(0), m.x(), m.y(), S(1), -p.y() * m.x(), -p.y() * m.y(),
        -p.y();
  }

  Eigen::JacobiSVD<Eigen::Matrix<S, 8, 9>> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv(0) > S(0)) || sv(6) < S(1e-10) * sv(0)) {
    raise(Errc::degenerate_configuration, "homography system is rank deficient");
  }
  const Eigen::Matrix<S, 9, 1> h = svd.matrixV().col(8);
  Matrix3<S> hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);

  Matrix3<S> result = td.inverse() * hn * ts;
  if (std::abs(result.determinant()) < S(1e-12) * std::pow(result.norm(), S(3))) {
    raise(Errc::degenerate_configuration, "homography is not invertible");
  }
  if (std::abs(result(2, 2)) > S(1e-12) * result.norm()) {
    result /= result(2, 2);
  }
  return result;
}

}  // namespace detail

/// Exact homography mapping four tag-plane coordinates (U, W) to four pixels,
/// normalized so the bottom-right entry is 1 when it is nonzero.
template <class S>
Matrix3<S> homography_from_4_points(const std::array<Vector2<S>, 4>& model_uv,
                                    const std::array<Vector2<S>, 4>& pixels) {
  return detail::homography_4pt(model_uv, pixels);
}

}  // namespace decktrack
