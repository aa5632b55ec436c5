#pragma once

#include <Eigen/Dense>
#include <array>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

namespace decktrack {

/// One detected tag in a frame: its id and the four image-space corners in
/// the canonical corner order.
struct TagObservation {
  int tag_id = 0;
  std::array<Eigen::Vector2d, 4> corners;
};

struct ObservationFrame {
  double timestamp = 0.0;
  std::vector<TagObservation> observations;
};

/// Observation trace interchange format, one observation per line:
///   timestamp tag_id x0 y0 x1 y1 x2 y2 x3 y3
/// Consecutive lines with an identical timestamp form one frame.
void write_observation_trace(std::ostream& sink, std::span<const ObservationFrame> frames);
std::vector<ObservationFrame> read_observation_trace(std::istream& source,
                                                     const std::string& name = "obs");

}  // namespace decktrack
