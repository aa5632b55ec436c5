#include "decktrack/frame.hpp"

#include <span>

#include "decktrack/lineio.hpp"

namespace decktrack {

void write_observation_trace(std::ostream& sink, std::span<const ObservationFrame> frames) {
  std::string out = "decktrack-obs 1\n";
  for (const auto& frame : frames) {
    for (const auto& obs : frame.observations) {
      append_double(out, frame.timestamp);
      out += ' ';
      out += std::to_string(obs.tag_id);
      for (const auto& corner : obs.corners) {
        out += ' ';
        append_double(out, corner.x());
        out += ' ';
        append_double(out, corner.y());
      }
      out += '\n';
    }
    if (frame.observations.empty()) {
      // Keep empty frames visible in the trace so frame counts survive IO.
      append_double(out, frame.timestamp);
      out += " -1\n";
    }
  }
  sink << out;
}

std::vector<ObservationFrame> read_observation_trace(std::istream& source,
                                                     const std::string& name) {
  LineReader reader(source, name);
  expect_header(reader, "decktrack-obs", 1);
  std::vector<ObservationFrame> frames;
  while (reader.next()) {
    const double timestamp = reader.get_double(0);
    const int tag_id = static_cast<int>(reader.get_int(1));
    if (frames.empty() || frames.back().timestamp != timestamp) {
      frames.push_back(ObservationFrame{timestamp, {}});
    }
    if (tag_id < 0) {
      reader.expect_fields(2);  // empty-frame marker
      continue;
    }
    reader.expect_fields(10);
    TagObservation obs;
    obs.tag_id = tag_id;
    for (int c = 0; c < 4; ++c) {
      obs.corners[c] = {reader.get_double(2 + 2 * c), reader.get_double(3 + 2 * c)};
    }
    frames.back().observations.push_back(obs);
  }
  return frames;
}

}  // namespace decktrack
