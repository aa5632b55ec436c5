#include <doctest.h>

#include <algorithm>

#include "decktrack/planar_pose.hpp"
#include "decktrack/registry.hpp"
#include "support/test_oracles.hpp"

using namespace decktrack;

namespace {

const Intrinsicsd kCam{1000, 1000, 960, 540};

std::array<Vector2d, 4> oracle_pixels(const Intrinsicsd& k, const Posed& pose, double s) {
  const auto model = oracle::tag_corners(s);
  const oracle::Mat3 r = testutil::from_eigen(pose.rotation);
  const oracle::Vec3 t = {pose.translation.x(), pose.translation.y(), pose.translation.z()};
  std::array<Vector2d, 4> out;
  for (int i = 0; i < 4; ++i) {
    const auto px = oracle::project(k.fx, k.fy, k.cx, k.cy, r, t, model[i]);
    out[i] = {px[0], px[1]};
  }
  return out;
}

}  // namespace

TEST_CASE("ippe recovers a noise-free frontal tag") {
  const double s = 0.05;
  const Posed truth = testutil::facing_camera_pose(Vector3d(0, 0, 0.5));
  const auto pixels = oracle_pixels(kCam, truth, s);

  const auto pair = ippe_solve(kCam, s, pixels);
  CHECK(testutil::translation_distance(pair.best, truth) < 1e-8);
  CHECK(rotation_distance(pair.best.rotation, truth.rotation) < 1e-6);
}

TEST_CASE("ippe on a tilted tag: ground truth wins, mirror pose trails") {
  Rng rng(211);
  const double s = 0.04;
  for (int trial = 0; trial < 20; ++trial) {
    const auto tag = testutil::synthetic_tag(rng, kCam, s, 30.0 * M_PI / 180,
                                             40.0 * M_PI / 180, 0.35, 0.6);
    const auto pair = ippe_solve(kCam, s, tag.pixels);
    CHECK(rotation_distance(pair.best.rotation, tag.pose.rotation) < 1e-6);
    CHECK(testutil::translation_distance(pair.best, tag.pose) < 1e-6);
    REQUIRE(pair.alternate.has_value());
    CHECK(pair.alternate_error > pair.best_error);
    CHECK_FALSE(pair.ambiguous);
    // The alternate is the reflected pose, not a duplicate of the best.
    CHECK(rotation_distance(pair.alternate->rotation, pair.best.rotation) > 0.01);
  }
}

TEST_CASE("fronto-parallel view flags the planar ambiguity") {
  const double s = 0.05;
  const Posed truth = testutil::facing_camera_pose(Vector3d(0, 0, 0.5), 0.3);
  const auto pair = ippe_solve(kCam, s, oracle_pixels(kCam, truth, s));
  CHECK(pair.ambiguous);
}

TEST_CASE("ten-degree tilt does not flag ambiguity at working scale") {
  // Validates the 0.3 px default margin: fronto-parallel flags (above),
  // 10-degree-plus tilts at tabletop range do not.
  Rng rng(223);
  for (int trial = 0; trial < 20; ++trial) {
    const auto tag = testutil::synthetic_tag(rng, kCam, 0.05, 10.0 * M_PI / 180,
                                             45.0 * M_PI / 180, 0.35, 0.5);
    const auto pair = ippe_solve(kCam, 0.05, tag.pixels);
    CHECK_FALSE(pair.ambiguous);
  }
}

TEST_CASE("pose round-trip property: tilt >= 5 degrees, 300 random poses") {
  Rng rng(227);
  int ok = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const double s = trial % 2 == 0 ? kSmallTagEdge : kLargeTagEdge;
    const auto tag =
        testutil::synthetic_tag(rng, kCam, s, 5.0 * M_PI / 180, 60.0 * M_PI / 180);
    const auto pair = ippe_solve(kCam, s, tag.pixels);
    if (rotation_distance(pair.best.rotation, tag.pose.rotation) < 1e-6 &&
        testutil::translation_distance(pair.best, tag.pose) < 1e-6) {
      ++ok;
    }
  }
  CHECK(ok >= 299);
}

TEST_CASE("both ippe candidates reproject with corner order preserved") {
  Rng rng(229);
  const double s = 0.05;
  const auto model = canonical_tag_corners(s);
  for (int trial = 0; trial < 20; ++trial) {
    const auto tag = testutil::synthetic_tag(rng, kCam, s, 0.2, 1.0);
    const auto pair = ippe_solve(kCam, s, tag.pixels);
    REQUIRE(pair.alternate.has_value());
    for (const Posed& pose : {pair.best, *pair.alternate}) {
      // Per-corner residuals must be small for their own corner, never a
      // better match against some permutation of the others.
      for (int i = 0; i < 4; ++i) {
        const Vector2d own = project_point(kCam, pose * model[i]) - tag.pixels[i];
        double best_other = 1e30;
        for (int j = 0; j < 4; ++j) {
          if (j == i) continue;
          best_other = std::min(
              best_other,
              (project_point(kCam, pose * model[i]) - tag.pixels[j]).norm());
        }
        CHECK(own.norm() < best_other);
      }
    }
  }
}

TEST_CASE("degenerate corners raise DegenerateConfiguration") {
  std::array<Vector2d, 4> collinear = {Vector2d(100, 100), Vector2d(200, 200),
                                       Vector2d(300, 300), Vector2d(400, 200)};
  try {
    (void)ippe_solve(kCam, 0.05, collinear);
    FAIL("expected DegenerateConfiguration");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::degenerate_configuration);
  }
  try {
    (void)dlt_solve(kCam, 0.05, collinear);
    FAIL("expected DegenerateConfiguration");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::degenerate_configuration);
  }
}

TEST_CASE("reversed corner winding resolves to a back-facing pose") {
  // Swapping the corner correspondence to the opposite winding is exactly a
  // physically flipped tag: the solver reports the pose with its plane
  // normal pointing away from the camera (culling that is the renderer's
  // job, not the solver's).
  const double s = 0.05;
  const Posed truth = testutil::facing_camera_pose(Vector3d(0, 0, 0.5), 0.2);
  auto pixels = oracle_pixels(kCam, truth, s);
  std::swap(pixels[1], pixels[3]);
  const auto pair = ippe_solve(kCam, s, pixels);
  const Vector3d normal = pair.best.rotation.col(1);
  CHECK(normal.dot(pair.best.translation) > 0.0);
  CHECK(pair.best.translation.z() > 0.0);
}

TEST_CASE("dlt agrees with ippe on noise-free data") {
  Rng rng(233);
  const double s = 0.05;

  const Posed frontal = testutil::facing_camera_pose(Vector3d(0, 0, 0.5));
  const auto frontal_px = oracle_pixels(kCam, frontal, s);
  const Posed dlt_frontal = dlt_solve(kCam, s, frontal_px);
  const auto ippe_frontal = ippe_solve(kCam, s, frontal_px);
  CHECK(rotation_distance(dlt_frontal.rotation, ippe_frontal.best.rotation) < 1e-6);
  CHECK((dlt_frontal.translation - ippe_frontal.best.translation).norm() < 1e-6);

  const auto model = canonical_tag_corners(s);
  for (int trial = 0; trial < 20; ++trial) {
    const auto tag = testutil::synthetic_tag(rng, kCam, s, 0.2, 0.9);
    const Posed pose = dlt_solve(kCam, s, tag.pixels);
    CHECK(reprojection_error<double>(kCam, pose, model, tag.pixels) < 1e-6);
  }
}

TEST_CASE("lm is a fixed point at the ground truth") {
  const double s = 0.05;
  const Posed truth = testutil::facing_camera_pose(Vector3d(0.05, -0.02, 0.6), 0.7);
  const auto pixels = oracle_pixels(kCam, truth, s);
  const Posed refined = lm_refine(kCam, s, pixels, truth);
  CHECK(rotation_distance(refined.rotation, truth.rotation) < 1e-9);
  CHECK((refined.translation - truth.translation).norm() < 1e-9);
}

TEST_CASE("lm converges from a perturbed start on noise-free pixels") {
  Rng rng(239);
  const double s = 0.05;
  for (int trial = 0; trial < 20; ++trial) {
    const auto tag = testutil::synthetic_tag(rng, kCam, s, 0.1, 0.9);
    Vector3d rvec = rotation_to_rodrigues(tag.pose.rotation);
    Vector3d axis(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    axis.normalize();
    rvec += axis * 0.05;  // 0.05 rad rotation error
    Vector3d t = tag.pose.translation + Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1),
                                                 rng.uniform(-1, 1))
                                            .normalized() *
                                            0.005;  // 5 mm
    const Posed refined = lm_refine(kCam, s, tag.pixels, Posed::from_rodrigues(rvec, t));
    CHECK(rotation_distance(refined.rotation, tag.pose.rotation) < 1e-7);
    CHECK((refined.translation - tag.pose.translation).norm() < 1e-7);
  }
}

TEST_CASE("analytic jacobian matches central finite differences") {
  Rng rng(241);
  const double s = 0.05;
  const double h = 1e-6;
  const auto model = canonical_tag_corners(s);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto tag = testutil::synthetic_tag(rng, kCam, s, 0.05, 1.0);
    const Vector3d rvec = rotation_to_rodrigues(tag.pose.rotation);
    const Vector3d t = tag.pose.translation;
    const auto analytic = reprojection_jacobian(kCam, rvec, t, model);

    const auto project_all = [&](const Vector3d& rv, const Vector3d& tv) {
      Eigen::Matrix<double, 8, 1> out;
      const Matrix3d r = rodrigues_to_rotation(rv);
      for (int i = 0; i < 4; ++i) {
        const Vector3d w = r * model[i] + tv;
        out(2 * i) = kCam.fx * w.x() / w.z() + kCam.cx;
        out(2 * i + 1) = kCam.fy * w.y() / w.z() + kCam.cy;
      }
      return out;
    };

    Eigen::Matrix<double, 8, 6> numeric;
    for (int p = 0; p < 6; ++p) {
      Vector3d rp = rvec, rm = rvec, tp = t, tm = t;
      if (p < 3) {
        rp[p] += h;
        rm[p] -= h;
      } else {
        tp[p - 3] += h;
        tm[p - 3] -= h;
      }
      numeric.col(p) = (project_all(rp, tp) - project_all(rm, tm)) / (2 * h);
    }
    const double scale = std::max(analytic.norm(), numeric.norm());
    worst = std::max(worst, (analytic - numeric).norm() / scale);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("solver agreement: ippe, dlt, lm(dlt-init) pairwise within 1e-4") {
  Rng rng(251);
  const double s = 0.04;
  for (int trial = 0; trial < 50; ++trial) {
    const auto tag = testutil::synthetic_tag(rng, kCam, s, 0.1, 1.0);
    const Posed a = ippe_solve(kCam, s, tag.pixels).best;
    const Posed b = dlt_solve(kCam, s, tag.pixels);
    const Posed c = lm_refine(kCam, s, tag.pixels, b);
    for (const auto& [x, y] : {std::pair{a, b}, std::pair{a, c}, std::pair{b, c}}) {
      CHECK(rotation_distance(x.rotation, y.rotation) < 1e-4);
      CHECK((x.translation - y.translation).norm() < 1e-4);
    }
  }
}

TEST_CASE("lm never increases the reprojection error") {
  Rng rng(257);
  const double s = 0.05;
  const auto model = canonical_tag_corners(s);
  for (int trial = 0; trial < 50; ++trial) {
    const auto tag = testutil::synthetic_tag(rng, kCam, s, 0.05, 1.0);
    auto pixels = tag.pixels;
    for (auto& px : pixels) px += Vector2d(rng.gaussian(0, 1.0), rng.gaussian(0, 1.0));
    // Random rough initials near the truth.
    Vector3d rvec = rotation_to_rodrigues(tag.pose.rotation);
    rvec += Vector3d(rng.gaussian(0, 0.1), rng.gaussian(0, 0.1), rng.gaussian(0, 0.1));
    const Vector3d t = tag.pose.translation +
                       Vector3d(rng.gaussian(0, 0.01), rng.gaussian(0, 0.01),
                                rng.gaussian(0, 0.01));
    const Posed initial = Posed::from_rodrigues(rvec, t);
    if (!((initial * model[0]).z() > 0) || !((initial * model[2]).z() > 0)) continue;
    const double before = reprojection_error<double>(kCam, initial, model, pixels);
    const Posed refined = lm_refine(kCam, s, pixels, initial);
    const double after = reprojection_error<double>(kCam, refined, model, pixels);
    CHECK(after <= before + 1e-12);
  }
}

TEST_CASE("lm rejects an initial pose behind the camera") {
  const double s = 0.05;
  const Posed truth = testutil::facing_camera_pose(Vector3d(0, 0, 0.5));
  const auto pixels = oracle_pixels(kCam, truth, s);
  Posed behind = truth;
  behind.translation.z() = -0.5;
  try {
    (void)lm_refine(kCam, s, pixels, behind);
    FAIL("expected NoValidPose");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::no_valid_pose);
  }
}

TEST_CASE("median ippe rotation error decreases with tag size under noise") {
  Rng rng(263);
  const double sigma = 0.5;
  std::vector<double> sizes = {kSmallTagEdge, kLargeTagEdge, 3 * kLargeTagEdge};
  std::vector<double> medians;
  for (const double s : sizes) {
    std::vector<double> errors;
    for (int trial = 0; trial < 500; ++trial) {
      const auto tag = testutil::synthetic_tag(rng, kCam, s, 0.25, 0.9, 0.5, 0.7);
      auto pixels = tag.pixels;
      for (auto& px : pixels) {
        px += Vector2d(rng.gaussian(0, sigma), rng.gaussian(0, sigma));
      }
      try {
        const auto pair = ippe_solve(kCam, s, pixels);
        errors.push_back(rotation_distance(pair.best.rotation, tag.pose.rotation));
      } catch (const Error&) {
        errors.push_back(M_PI);  // failure counts as maximal error
      }
    }
    std::nth_element(errors.begin(), errors.begin() + errors.size() / 2, errors.end());
    const double median = errors[errors.size() / 2];
    CHECK(std::isfinite(median));
    medians.push_back(median);
  }
  CHECK(medians[1] < medians[0]);
  CHECK(medians[2] < medians[1]);
}
