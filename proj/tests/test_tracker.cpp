#include <doctest.h>

#include <sstream>

#include "decktrack/tracker.hpp"
#include "support/test_oracles.hpp"

using namespace decktrack;

namespace {

Registry one_deck_registry(std::uint64_t seed = 33) {
  const std::array<DeckLayout, 1> decks = {generate_deck_layout(seed, 0)};
  const BoardLayout board = generate_board_layout();
  return Registry::build(decks, &board);
}

}  // namespace

TEST_CASE("28 noise-free observations agree to a fraction of a micron") {
  const Registry registry = one_deck_registry();
  const Intrinsicsd k = default_intrinsics();
  SceneState scene;
  scene.cards.push_back(CardInstance{5, testutil::facing_camera_pose({0, 0, 0.5}, 0.4)});
  const ObservationFrame frame = render_frame(scene, k, registry, {});

  const CandidateResult result = card_candidates(frame, registry, k, SolverKind::ippe);
  REQUIRE(result.candidates.size() == 28);
  CHECK(result.skipped == 0);
  for (const auto& a : result.candidates) {
    for (const auto& b : result.candidates) {
      CHECK(rotation_distance(a.pose.rotation, b.pose.rotation) < 1e-6);
      CHECK((a.pose.translation - b.pose.translation).norm() < 1e-6);
    }
  }
}

TEST_CASE("a single tag is sufficient: one candidate matches the full fusion") {
  const Registry registry = one_deck_registry();
  const Intrinsicsd k = default_intrinsics();
  SceneState scene;
  scene.cards.push_back(CardInstance{11, testutil::facing_camera_pose({0.02, 0.03, 0.5})});
  const ObservationFrame all = render_frame(scene, k, registry, {});

  const auto all_cands = card_candidates(all, registry, k, SolverKind::ippe).candidates;
  const CardPoseEstimate fused = fuse_candidates(all_cands);

  ObservationFrame one = all;
  one.observations.resize(1);
  const auto one_cand = card_candidates(one, registry, k, SolverKind::ippe).candidates;
  REQUIRE(one_cand.size() == 1);
  const CardPoseEstimate single = fuse_candidates(one_cand);

  CHECK(rotation_distance(single.pose.rotation, fused.pose.rotation) < 1e-6);
  CHECK((single.pose.translation - fused.pose.translation).norm() < 1e-6);
}

TEST_CASE("one corrupt tag id is counted and the rest of the frame survives") {
  const Registry registry = one_deck_registry();
  const Intrinsicsd k = default_intrinsics();
  SceneState scene;
  scene.cards.push_back(CardInstance{2, testutil::facing_camera_pose({0, 0, 0.5})});
  ObservationFrame frame = render_frame(scene, k, registry, {});
  REQUIRE(frame.observations.size() == 28);
  frame.observations[4].tag_id = 999999;  // not in the registry

  const CandidateResult result = card_candidates(frame, registry, k, SolverKind::ippe);
  CHECK(result.skipped == 1);
  CHECK(result.candidates.size() == 27);
}

TEST_CASE("fusion: identical candidates return that pose exactly") {
  CardCandidate c;
  c.card_id = 3;
  c.pose = testutil::facing_camera_pose({0.1, 0.2, 0.7}, 1.1);
  c.source_tag_id = 17;
  std::vector<CardCandidate> cands(5, c);
  for (int i = 0; i < 5; ++i) cands[i].source_tag_id = 10 + i;
  const CardPoseEstimate fused = fuse_candidates(cands);
  CHECK((fused.pose.rotation - c.pose.rotation).norm() == 0.0);
  CHECK((fused.pose.translation - c.pose.translation).norm() == 0.0);
  CHECK(fused.candidate_count == 5);
}

TEST_CASE("fusion: the median shrugs off one displaced candidate") {
  CardCandidate base;
  base.card_id = 0;
  base.pose = testutil::facing_camera_pose({0, 0, 0.6});
  std::vector<CardCandidate> cands;
  for (int i = 0; i < 27; ++i) {
    CardCandidate c = base;
    c.source_tag_id = i;
    cands.push_back(c);
  }
  CardCandidate outlier = base;
  outlier.source_tag_id = 27;
  outlier.pose.translation += Vector3d(0.1, 0, 0);  // 10 cm off
  cands.push_back(outlier);

  const CardPoseEstimate fused = fuse_candidates(cands);
  CHECK((fused.pose.translation - base.pose.translation).norm() < 1e-9);
}

TEST_CASE("fusion: single candidate is returned as-is") {
  CardCandidate c;
  c.card_id = 40;
  c.pose = testutil::facing_camera_pose({-0.05, 0.02, 0.8}, 0.2);
  const CardPoseEstimate fused = fuse_candidates(std::vector<CardCandidate>{c});
  CHECK((fused.pose.rotation - c.pose.rotation).norm() == 0.0);
  CHECK((fused.pose.translation - c.pose.translation).norm() == 0.0);
}

TEST_CASE("fusion is independent of candidate order") {
  Rng rng(301);
  std::vector<CardCandidate> cands;
  for (int i = 0; i < 12; ++i) {
    CardCandidate c;
    c.card_id = 1;
    c.source_tag_id = 100 + i;
    c.weight = i % 3 == 0 ? 0.25 : 1.0;
    Posed p = testutil::facing_camera_pose({0, 0, 0.6}, 0.3);
    p.translation += Vector3d(rng.gaussian(0, 0.002), rng.gaussian(0, 0.002),
                              rng.gaussian(0, 0.002));
    p.rotation = testutil::random_rotation(rng, 0.0, 0.01) * p.rotation;
    c.pose = p;
    cands.push_back(c);
  }
  const CardPoseEstimate forward = fuse_candidates(cands);
  std::vector<CardCandidate> shuffled = cands;
  rng.shuffle(shuffled.begin(), shuffled.end());
  const CardPoseEstimate scrambled = fuse_candidates(shuffled);
  CHECK((forward.pose.rotation - scrambled.pose.rotation).norm() == 0.0);
  CHECK((forward.pose.translation - scrambled.pose.translation).norm() == 0.0);
}

TEST_CASE("fusion error cases") {
  try {
    (void)fuse_candidates(std::vector<CardCandidate>{});
    FAIL("expected EmptyCandidateSet");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::empty_candidate_set);
  }
  CardCandidate a;
  a.card_id = 0;
  CardCandidate b;
  b.card_id = 1;
  try {
    (void)fuse_candidates(std::vector<CardCandidate>{a, b});
    FAIL("expected MixedCardIds");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::mixed_card_ids);
  }
}

TEST_CASE("lifecycle: pickup kills card tracking for the session") {
  TrackerLifecycle state;
  state = lifecycle_apply(state, LifecycleEvent::session_start);
  CHECK(state.card_tracker_enabled);
  CHECK(state.table_tracker_enabled);

  state = lifecycle_apply(state, LifecycleEvent::first_card_pickup);
  CHECK_FALSE(state.card_tracker_enabled);
  CHECK(state.table_tracker_enabled);

  // Idempotent.
  state = lifecycle_apply(state, LifecycleEvent::first_card_pickup);
  CHECK_FALSE(state.card_tracker_enabled);

  state = lifecycle_apply(state, LifecycleEvent::board_removed);
  CHECK_FALSE(state.table_tracker_enabled);

  // Board removal before any pickup leaves the card tracker running.
  TrackerLifecycle fresh = lifecycle_apply({}, LifecycleEvent::board_removed);
  CHECK(fresh.card_tracker_enabled);
  CHECK_FALSE(fresh.table_tracker_enabled);
}

TEST_CASE("track_frame: oracle frame, gating, and empty input") {
  const Registry registry = one_deck_registry();
  const Intrinsicsd k = default_intrinsics();
  SceneState scene;
  scene.cards.push_back(CardInstance{0, testutil::facing_camera_pose({-0.05, 0, 0.55})});
  scene.cards.push_back(CardInstance{1, testutil::facing_camera_pose({0.07, 0, 0.55})});
  scene.board = Posed(Eigen::AngleAxisd(M_PI, Vector3d::UnitZ()).toRotationMatrix(),
                      Vector3d(0, 0.25, 0.8));
  const ObservationFrame frame = render_frame(scene, k, registry, {});
  REQUIRE(frame.observations.size() > 56);

  TrackerLifecycle enabled;
  const TrackResult full = track_frame(enabled, frame, registry, k, SolverKind::ippe);
  CHECK(full.cards.size() == 2);
  CHECK(full.board.size() > 0);
  for (const auto& card : full.cards) {
    const Posed& truth = scene.cards[static_cast<std::size_t>(card.card_id)].pose;
    CHECK(rotation_distance(card.pose.rotation, truth.rotation) < 1e-6);
    CHECK((card.pose.translation - truth.translation).norm() < 1e-6);
    CHECK(card.timestamp == frame.timestamp);
  }

  const TrackerLifecycle after_pickup =
      lifecycle_apply(enabled, LifecycleEvent::first_card_pickup);
  const TrackResult gated = track_frame(after_pickup, frame, registry, k, SolverKind::ippe);
  CHECK(gated.cards.empty());
  CHECK(gated.board.size() == full.board.size());

  const TrackerLifecycle all_off =
      lifecycle_apply(after_pickup, LifecycleEvent::board_removed);
  const TrackResult dark = track_frame(all_off, frame, registry, k, SolverKind::ippe);
  CHECK(dark.cards.empty());
  CHECK(dark.board.empty());

  const TrackResult empty = track_frame(enabled, ObservationFrame{}, registry, k,
                                        SolverKind::ippe);
  CHECK(empty.cards.empty());
  CHECK(empty.board.empty());
  CHECK(empty.skipped == 0);
}

TEST_CASE("track_frame output is bit-deterministic") {
  const Registry registry = one_deck_registry();
  const Intrinsicsd k = default_intrinsics();
  SceneState scene;
  for (int i = 0; i < 6; ++i) {
    scene.cards.push_back(CardInstance{
        i, testutil::facing_camera_pose({-0.25 + 0.1 * i, 0, 0.6}, 0.1 * i)});
  }
  NoiseModel noise;
  noise.corner_sigma = 0.4;
  noise.rng_seed = 12;
  const ObservationFrame frame = render_frame(scene, k, registry, noise);

  const TrackResult a = track_frame({}, frame, registry, k, SolverKind::ippe);
  const TrackResult b = track_frame({}, frame, registry, k, SolverKind::ippe);
  REQUIRE(a.cards.size() == b.cards.size());
  for (std::size_t i = 0; i < a.cards.size(); ++i) {
    CHECK((a.cards[i].pose.rotation - b.cards[i].pose.rotation).norm() == 0.0);
    CHECK((a.cards[i].pose.translation - b.cards[i].pose.translation).norm() == 0.0);
    CHECK(a.cards[i].fused_reprojection_error == b.cards[i].fused_reprojection_error);
  }
}

TEST_CASE("jitter: constant history reports zero and no flag") {
  std::vector<CardPoseEstimate> history;
  for (int i = 0; i < 30; ++i) {
    CardPoseEstimate e;
    e.card_id = 1;
    e.pose = testutil::facing_camera_pose({0, 0, 0.5});
    e.timestamp = i / 30.0;
    history.push_back(e);
  }
  const JitterReport report = jitter_metrics(history, 30);
  REQUIRE(report.entries.size() == 1);
  CHECK(report.entries[0].sigma_pos == 0.0);
  CHECK(report.entries[0].sigma_rot_deg == 0.0);
  CHECK_FALSE(report.entries[0].flagged);
}

TEST_CASE("jitter: alternating +/-1 degree reads exactly one degree and flags") {
  std::vector<CardPoseEstimate> history;
  const Posed base = testutil::facing_camera_pose({0, 0, 0.5});
  for (int i = 0; i < 40; ++i) {
    const double angle = (i % 2 == 0 ? 1.0 : -1.0) * M_PI / 180.0;
    CardPoseEstimate e;
    e.card_id = 7;
    e.pose.rotation =
        Eigen::AngleAxisd(angle, Vector3d::UnitZ()).toRotationMatrix() * base.rotation;
    e.pose.translation = base.translation;
    history.push_back(e);
  }
  const JitterReport report = jitter_metrics(history, 40);
  REQUIRE(report.entries.size() == 1);
  CHECK(report.entries[0].sigma_pos == doctest::Approx(0.0));
  CHECK(report.entries[0].sigma_rot_deg == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(report.entries[0].flagged);
}

TEST_CASE("jitter grows monotonically with corner noise") {
  const Registry registry = one_deck_registry();
  const Intrinsicsd k = default_intrinsics();
  SceneState scene;
  scene.cards.push_back(CardInstance{0, testutil::facing_camera_pose({0, 0, 0.5}, 0.1)});

  std::vector<double> sigmas;
  for (const double noise_px : {0.1, 0.5, 1.0}) {
    std::vector<CardPoseEstimate> history;
    NoiseModel noise;
    noise.corner_sigma = noise_px;
    noise.rng_seed = 55;
    for (int f = 0; f < 150; ++f) {
      scene.timestamp = f / 30.0;
      const ObservationFrame frame = render_frame(scene, k, registry, noise);
      const TrackResult result = track_frame({}, frame, registry, k, SolverKind::ippe);
      REQUIRE(result.cards.size() == 1);
      history.push_back(result.cards[0]);
    }
    const JitterReport report = jitter_metrics(history, 150);
    REQUIRE(report.entries.size() == 1);
    CHECK(std::isfinite(report.entries[0].sigma_rot_deg));
    sigmas.push_back(report.entries[0].sigma_rot_deg);
  }
  CHECK(sigmas[0] <= sigmas[1]);
  CHECK(sigmas[1] <= sigmas[2]);
}

TEST_CASE("jitter preconditions") {
  std::vector<CardPoseEstimate> history(5);
  try {
    (void)jitter_metrics(history, 1);
    FAIL("expected InsufficientHistory");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::insufficient_history);
  }
  // A card with a single sample is omitted rather than reported.
  std::vector<CardPoseEstimate> lone(1);
  lone[0].card_id = 3;
  const JitterReport report = jitter_metrics(lone, 10);
  CHECK(report.entries.empty());
}

TEST_CASE("card-pose traces round-trip") {
  std::vector<CardPoseEstimate> estimates;
  Rng rng(501);
  for (int i = 0; i < 10; ++i) {
    CardPoseEstimate e;
    e.card_id = i;
    e.timestamp = i / 30.0;
    e.pose = Posed(testutil::random_rotation(rng),
                   Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.2, 2)));
    e.candidate_count = 1 + i;
    e.fused_reprojection_error = rng.uniform(0, 2);
    estimates.push_back(e);
  }
  std::stringstream buffer;
  write_pose_trace(buffer, estimates);
  const auto loaded = read_pose_trace(buffer);
  REQUIRE(loaded.size() == estimates.size());
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    CHECK(loaded[i].card_id == estimates[i].card_id);
    CHECK(loaded[i].timestamp == estimates[i].timestamp);
    CHECK(loaded[i].candidate_count == estimates[i].candidate_count);
    CHECK((loaded[i].pose.translation - estimates[i].pose.translation).norm() == 0.0);
    // Rotations pass through the Rodrigues encoding.
    CHECK(rotation_distance(loaded[i].pose.rotation, estimates[i].pose.rotation) < 1e-12);
  }
}
