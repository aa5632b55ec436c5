#include <doctest.h>

#include "decktrack/geometry.hpp"
#include "support/test_oracles.hpp"

using namespace decktrack;

TEST_CASE("canonical tag corners match the four-point model") {
  const auto c = canonical_tag_corners(1.0);
  CHECK(c[0] == Vector3d(-0.5, 0, -0.5));
  CHECK(c[1] == Vector3d(0.5, 0, -0.5));
  CHECK(c[2] == Vector3d(0.5, 0, 0.5));
  CHECK(c[3] == Vector3d(-0.5, 0, 0.5));
}

TEST_CASE("degenerate scale gives four zero corners") {
  for (const auto& p : canonical_tag_corners(0.0)) CHECK(p.norm() == 0.0);
}

TEST_CASE("size classes scale the model by the side-length ratio") {
  const double s0 = 0.3 * 0.0254;
  const auto small = canonical_tag_corners(s0);
  const auto large = canonical_tag_corners(3.0 * s0);
  for (int i = 0; i < 4; ++i) CHECK((large[i] - 3.0 * small[i]).norm() == doctest::Approx(0.0));
}

TEST_CASE("corner centroid is the origin for any scale") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto c = canonical_tag_corners(rng.uniform(0.0, 2.0));
    CHECK((c[0] + c[1] + c[2] + c[3]).norm() < 1e-15);
  }
}

TEST_CASE("rodrigues vector to rotation: pinned cases") {
  CHECK((rodrigues_to_rotation(Vector3d(0, 0, 0)) - Matrix3d::Identity()).norm() == 0.0);

  const Matrix3d half_turn_x = rodrigues_to_rotation(Vector3d(M_PI, 0, 0));
  Matrix3d expected = Vector3d(1, -1, -1).asDiagonal();
  CHECK((half_turn_x - expected).norm() < 1e-15);

  const Matrix3d quarter_z = rodrigues_to_rotation(Vector3d(0, 0, M_PI / 2));
  Matrix3d rows;
  rows << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  CHECK((quarter_z - rows).norm() < 1e-15);
}

TEST_CASE("rodrigues matches the longhand formula on random vectors") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const Vector3d axis(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    if (axis.norm() < 1e-6) continue;
    const double angle = rng.uniform(0, M_PI);
    const Matrix3d ours = rodrigues_to_rotation(Vector3d(axis.normalized() * angle));
    const Matrix3d reference =
        testutil::to_eigen(oracle::rotation({axis.x(), axis.y(), axis.z()}, angle));
    CHECK((ours - reference).norm() < 1e-13);
  }
}

TEST_CASE("rotation to rodrigues: identity and half turn") {
  CHECK(rotation_to_rodrigues(Matrix3d(Matrix3d::Identity())).norm() == 0.0);

  const Matrix3d half_turn_x = Vector3d(1, -1, -1).asDiagonal();
  const Vector3d r = rotation_to_rodrigues(half_turn_x);
  // Axis sign at pi follows the documented first-positive-component rule.
  CHECK((r - Vector3d(M_PI, 0, 0)).norm() < 1e-9);
}

TEST_CASE("rodrigues round-trip: 1000 random rotations within 1e-9") {
  Rng rng(13);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Matrix3d r = testutil::random_rotation(rng);
    const Matrix3d back = rodrigues_to_rotation(rotation_to_rodrigues(r));
    worst = std::max(worst, (r - back).norm());
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("rodrigues vector round-trip on the open ball") {
  Rng rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    Vector3d axis(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    if (axis.norm() < 1e-6) continue;
    const Vector3d rvec = axis.normalized() * rng.uniform(1e-6, M_PI - 1e-6);
    const Vector3d back = rotation_to_rodrigues(rodrigues_to_rotation(rvec));
    CHECK((rvec - back).norm() < 1e-9);
  }
}

TEST_CASE("random rotations satisfy the orthonormality invariants") {
  Rng rng(19);
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix3d r = testutil::random_rotation(rng);
    CHECK((r.transpose() * r - Matrix3d::Identity()).norm() < 1e-9);
    CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(is_rotation_matrix(r));
  }
}

TEST_CASE("transform_model_to_world: pinned and oracle-checked") {
  CHECK(transform_model_to_world(Posed(), Vector3d(1, 2, 3)) == Vector3d(1, 2, 3));

  Posed lifted;
  lifted.translation = Vector3d(0, 0, 1);
  CHECK(transform_model_to_world(lifted, Vector3d(0, 0, 0)) == Vector3d(0, 0, 1));

  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix3d r = testutil::random_rotation(rng);
    const Vector3d t(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
    const Vector3d p(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
    const Vector3d ours = transform_model_to_world(Posed(r, t), p);
    const oracle::Vec3 expect = oracle::transform(
        testutil::from_eigen(r), {t.x(), t.y(), t.z()}, {p.x(), p.y(), p.z()});
    CHECK((ours - Vector3d(expect[0], expect[1], expect[2])).norm() < 1e-12);
  }
}

TEST_CASE("project_point: pinned examples") {
  const Intrinsicsd unit{1, 1, 0, 0};
  CHECK(project_point(unit, Vector3d(0, 0, 1)) == Vector2d(0, 0));

  const Intrinsicsd k{500, 500, 320, 240};
  CHECK(project_point(k, Vector3d(0.1, 0, 1)) == Vector2d(370, 240));

  CHECK_THROWS_AS((void)project_point(k, Vector3d(0, 0, -1)), Error);
  try {
    (void)project_point(k, Vector3d(0, 0, 0));
    FAIL("expected NonPositiveDepth");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::non_positive_depth);
  }
}

TEST_CASE("projection is scale-invariant along rays") {
  Rng rng(29);
  const Intrinsicsd k{1000, 1000, 960, 540};
  for (int trial = 0; trial < 200; ++trial) {
    const Vector3d w(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.1, 3.0));
    const double lambda = rng.uniform(0.05, 20.0);
    const Vector2d a = project_point(k, w);
    const Vector2d b = project_point(k, Vector3d(lambda * w));
    CHECK((a - b).norm() < 1e-9);
  }
}

TEST_CASE("reprojection error: exact, pinned offset, and oracle") {
  const Intrinsicsd k{1000, 1000, 960, 540};
  const double s = 0.05;
  const auto model = canonical_tag_corners(s);
  const Posed pose = testutil::facing_camera_pose(Vector3d(0, 0, 0.6));

  std::array<Vector2d, 4> observed;
  for (int i = 0; i < 4; ++i) observed[i] = project_point(k, pose * model[i]);
  CHECK(reprojection_error<double>(k, pose, model, observed) == doctest::Approx(0.0));

  // One corner off by (3, 4): RMS = sqrt(25 / 4) = 2.5 exactly.
  auto shifted = observed;
  shifted[2] += Vector2d(3, 4);
  CHECK(reprojection_error<double>(k, pose, model, shifted) == doctest::Approx(2.5).epsilon(1e-12));

  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    auto noisy = observed;
    double sq[4];
    for (int i = 0; i < 4; ++i) {
      const Vector2d d(rng.uniform(-3, 3), rng.uniform(-3, 3));
      noisy[i] += d;
      sq[i] = d.squaredNorm();
    }
    const double expect = oracle::rms(sq, 4);
    CHECK(reprojection_error<double>(k, pose, model, noisy) ==
          doctest::Approx(expect).epsilon(1e-12));
  }

  std::array<Vector2d, 3> three = {observed[0], observed[1], observed[2]};
  try {
    (void)reprojection_error<double>(k, pose, model, three);
    FAIL("expected LengthMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::length_mismatch);
  }
}

TEST_CASE("geometry core instantiates for float") {
  const CameraIntrinsics<float> k{100.f, 100.f, 0.f, 0.f};
  const auto corners = canonical_tag_corners(0.5f);
  CHECK(corners[2] == Vector3<float>(0.25f, 0.f, 0.25f));
  const Vector2<float> px = project_point(k, Vector3<float>(0.f, 0.f, 2.f));
  CHECK(px.norm() == 0.f);
  const Matrix3<float> r = rodrigues_to_rotation(Vector3<float>(0.f, 0.f, 0.5f));
  CHECK(is_rotation_matrix(r, 1e-5f));
}
