#pragma once

#include <istream>
#include <optional>
#include <vector>

#include "decktrack/frame.hpp"
#include "decktrack/registry.hpp"

namespace decktrack {

/// Ground-truth state for one rendered instant. Card poses map the card
/// frame (card center at origin, card face in the Y = 0 plane) into world
/// coordinates; world_to_camera maps world into the camera frame.
struct CardInstance {
  int card_id = 0;
  Posed pose;  // card frame -> world
};

struct SceneState {
  double timestamp = 0.0;
  std::vector<CardInstance> cards;
  std::optional<Posed> board;  // board frame -> world
  Posed world_to_camera;
};

struct NoiseModel {
  double corner_sigma = 0.0;        // Gaussian, px, per coordinate
  double hide_probability = 0.0;    // per-tag Bernoulli occlusion
  std::vector<int> hidden_tags;     // explicit occlusion set
  std::uint64_t rng_seed = 0;
};

struct RenderOptions {
  int image_width = 1920;
  int image_height = 1080;
};

/// Default harness camera (plausible phone-camera scale; the real device
/// intrinsics are a runtime parameter everywhere).
inline Intrinsicsd default_intrinsics() { return Intrinsicsd{1000.0, 1000.0, 960.0, 540.0}; }

/// Projects every registry tag of the scene's entities into the image.
/// Tags facing away from the camera, behind it, or outside the image bounds
/// are culled; occluded tags are dropped; Gaussian corner noise is applied
/// last. Deterministic given the noise seed (each frame derives its own
/// stream from seed and timestamp, so frames may be rendered in parallel).
ObservationFrame render_frame(const SceneState& scene, const Intrinsicsd& k,
                              const Registry& registry, const NoiseModel& noise,
                              const RenderOptions& options = {});

/// Keyframed scene script:
///   decktrack-scene 1 <fps>
///   <entity> <time> <tx> <ty> <tz> <rx> <ry> <rz>
/// entity is `camera`, `board`, or `card:<owner>:<index>`; camera keyframes
/// give the camera pose in world coordinates (inverted to world->camera at
/// evaluation). Poses interpolate linearly in position and along the
/// geodesic in rotation, sampled at the fixed frame rate between the first
/// and last keyframe times (both included).
std::vector<SceneState> script_scene(std::istream& source, const std::string& name = "scene");

/// Placement of a tag in the camera frame for a given card pose.
Posed tag_camera_pose(const TagSpec& spec, const Posed& entity_to_world,
                      const Posed& world_to_camera);

}  // namespace decktrack
