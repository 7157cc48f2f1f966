#pragma once

#include <cstdint>
#include <vector>

namespace mlstm {

// Dataset sampling rate and the frame arithmetic built on it.
inline constexpr double kFrameRateHz = 10.0;
inline constexpr double kFrameDt = 1.0 / kFrameRateHz;

struct TrackPoint {
  std::int64_t frame = 0;
  double x = 0.0;  // lateral, meters
  double y = 0.0;  // longitudinal, meters
  int lane = 1;
};

// Frames are strictly increasing and contiguous.
struct VehicleTrack {
  std::int64_t vehicle_id = 0;
  std::vector<TrackPoint> points;

  bool empty() const { return points.empty(); }
  std::int64_t first_frame() const { return points.front().frame; }
  std::int64_t last_frame() const { return points.back().frame; }
  bool covers(std::int64_t frame) const {
    return !points.empty() && frame >= first_frame() && frame <= last_frame();
  }
  // nullptr when the frame is outside the track.
  const TrackPoint* at(std::int64_t frame) const {
    if (!covers(frame)) return nullptr;
    return &points[static_cast<std::size_t>(frame - first_frame())];
  }
};

}  // namespace mlstm
