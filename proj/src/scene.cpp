#include "decktrack/scene.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "decktrack/lineio.hpp"
#include "decktrack/rng.hpp"

namespace decktrack {

Posed tag_camera_pose(const TagSpec& spec, const Posed& entity_to_world,
                      const Posed& world_to_camera) {
  return world_to_camera * entity_to_world * tag_placement_in_card(spec);
}

namespace {

struct TagRender {
  const TagSpec* spec;
  Posed camera_pose;
};

bool tag_visible(const Posed& camera_pose, double edge, const Intrinsicsd& k,
                 const RenderOptions& options, std::array<Eigen::Vector2d, 4>& corners) {
  // Back-face test: the tag's outward normal must point toward the camera.
  const Vector3d normal = camera_pose.rotation.col(1);
  if (normal.dot(camera_pose.translation) >= 0.0) return false;
  const auto model = canonical_tag_corners(edge);
  for (int c = 0; c < 4; ++c) {
    const Vector3d p = camera_pose * model[c];
    if (!(p.z() > 0.0)) return false;
    corners[c] = {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
    if (corners[c].x() < 0.0 || corners[c].x() >= options.image_width ||
        corners[c].y() < 0.0 || corners[c].y() >= options.image_height) {
      return false;
    }
  }
  return true;
}

}  // namespace

ObservationFrame render_frame(const SceneState& scene, const Intrinsicsd& k,
                              const Registry& registry, const NoiseModel& noise,
                              const RenderOptions& options) {
  ObservationFrame frame;
  frame.timestamp = scene.timestamp;

  // Entity poses keyed by the registry's card_id convention (-1 = board).
  std::map<int, const Posed*> entities;
  for (const auto& card : scene.cards) entities[card.card_id] = &card.pose;
  if (scene.board) entities[kBoardCardId] = &*scene.board;

  const std::set<int> hidden(noise.hidden_tags.begin(), noise.hidden_tags.end());
  // Per-frame RNG stream so frames can be rendered in parallel and still be
  // reproducible. Draw order within a frame: optional occlusion draw, then 8
  // noise draws, for each visible tag in ascending tag_id order.
  Rng rng(mix_seed(noise.rng_seed, std::bit_cast<std::uint64_t>(scene.timestamp)));

  for (const auto& spec : registry.specs()) {
    const auto entity = entities.find(spec.card_id);
    if (entity == entities.end()) continue;
    const Posed camera_pose =
        scene.world_to_camera * (*entity->second) * tag_placement_in_card(spec);
    std::array<Eigen::Vector2d, 4> corners;
    if (!tag_visible(camera_pose, tag_edge(spec.size_class), k, options, corners)) continue;
    if (hidden.count(spec.tag_id) != 0) continue;
    if (noise.hide_probability > 0.0 && rng.uniform01() < noise.hide_probability) continue;
    if (noise.corner_sigma > 0.0) {
      for (auto& corner : corners) {
        corner.x() += rng.gaussian(0.0, noise.corner_sigma);
        corner.y() += rng.gaussian(0.0, noise.corner_sigma);
      }
    }
    frame.observations.push_back(TagObservation{spec.tag_id, corners});
  }
  return frame;
}

namespace {

struct Keyframe {
  double time;
  Vector3d position;
  Vector3d rvec;
};

Posed sample_track(const std::vector<Keyframe>& track, double t) {
  if (t <= track.front().time) {
    return Posed::from_rodrigues(track.front().rvec, track.front().position);
  }
  if (t >= track.back().time) {
    return Posed::from_rodrigues(track.back().rvec, track.back().position);
  }
  std::size_t hi = 1;
  while (track[hi].time < t) ++hi;
  const auto& a = track[hi - 1];
  const auto& b = track[hi];
  const double span = b.time - a.time;
  const double alpha = span > 0.0 ? (t - a.time) / span : 1.0;
  const Vector3d position = a.position + alpha * (b.position - a.position);
  const Eigen::Quaterniond qa(rodrigues_to_rotation(a.rvec));
  const Eigen::Quaterniond qb(rodrigues_to_rotation(b.rvec));
  return Posed(qa.slerp(alpha, qb).toRotationMatrix(), position);
}

}  // namespace

std::vector<SceneState> script_scene(std::istream& source, const std::string& name) {
  LineReader reader(source, name);
  if (!reader.next()) reader.fail_line("empty scene script");
  if (reader.size() != 3 || reader.token(0) != "decktrack-scene") {
    reader.fail_line("expected 'decktrack-scene 1 <fps>' header");
  }
  if (reader.get_int(1) != 1) reader.fail(1, "unsupported schema version");
  const double fps = reader.get_double(2);
  if (!(fps > 0.0)) reader.fail(2, "fps must be positive");

  // entity key: -2 camera, -1 board, >= 0 card id
  std::map<int, std::vector<Keyframe>> tracks;
  while (reader.next()) {
    reader.expect_fields(8);
    const std::string& entity = reader.token(0);
    int key = 0;
    if (entity == "camera") {
      key = -2;
    } else if (entity == "board") {
      key = kBoardCardId;
    } else if (entity.rfind("card:", 0) == 0) {
      int owner = -1;
      int index = -1;
      const auto sep = entity.find(':', 5);
      if (sep != std::string::npos) {
        try {
          owner = std::stoi(entity.substr(5, sep - 5));
          index = std::stoi(entity.substr(sep + 1));
        } catch (...) {
          owner = -1;
        }
      }
      if (owner < 0 || owner >= kPlayers || index < 0 || index >= kCardsPerDeck) {
        reader.fail(0, "bad card entity '" + entity + "'");
      }
      key = make_card_id(owner, index);
    } else {
      reader.fail(0, "unknown entity '" + entity + "'");
    }
    Keyframe kf;
    kf.time = reader.get_double(1);
    kf.position = {reader.get_double(2), reader.get_double(3), reader.get_double(4)};
    kf.rvec = {reader.get_double(5), reader.get_double(6), reader.get_double(7)};
    tracks[key].push_back(kf);
  }
  if (tracks.empty()) return {};

  double t0 = std::numeric_limits<double>::max();
  double t1 = std::numeric_limits<double>::lowest();
  for (auto& [key, track] : tracks) {
    std::stable_sort(track.begin(), track.end(),
                     [](const Keyframe& a, const Keyframe& b) { return a.time < b.time; });
    t0 = std::min(t0, track.front().time);
    t1 = std::max(t1, track.back().time);
  }

  const int frames = static_cast<int>(std::llround((t1 - t0) * fps)) + 1;
  std::vector<SceneState> states;
  states.reserve(static_cast<std::size_t>(frames));
  for (int f = 0; f < frames; ++f) {
    SceneState state;
    state.timestamp = t0 + f / fps;
    for (const auto& [key, track] : tracks) {
      const Posed pose = sample_track(track, state.timestamp);
      if (key == -2) {
        state.world_to_camera = pose.inverse();  // script gives camera-in-world
      } else if (key == kBoardCardId) {
        state.board = pose;
      } else {
        state.cards.push_back(CardInstance{key, pose});
      }
    }
    states.push_back(std::move(state));
  }
  return states;
}

}  // namespace decktrack
