#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mlstm/maneuvers.hpp"
#include "mlstm/trackstore.hpp"

namespace mlstm::synth {

// Defaults give a small mixed-traffic scene. Speeds are m/s, lengths m.
struct SynthConfig {
  int n_vehicles = 40;
  int n_lanes = 3;
  double duration_s = 60.0;
  double lane_width_m = 3.7;
  double pct_lane_changes = 0.2;
  double pct_braking = 0.2;
  double speed_min = 20.0;
  double speed_max = 30.0;
  // Followers replay their lane leader's speed profile after a headway delay
  // (a shifted copy of the leader trajectory), so braking propagates
  // backwards through each lane. In this mode pct_braking is the chance that
  // each 20 s slot of a lane leader's timeline holds a brake event.
  bool platoon = false;
  double headway_min_s = 1.5;
  double headway_max_s = 2.5;
  double brake_ratio_min = 0.4;
  double brake_ratio_max = 0.6;
  std::string dataset_tag = "synth";
};

enum class EventKind { LaneChangeLeft, LaneChangeRight, Brake };

// A scripted maneuver: the cross-over frame for lane changes, the onset of
// deceleration for brakes.
struct ScriptEvent {
  std::int64_t vehicle_id = 0;
  std::int64_t frame = 0;
  EventKind kind = EventKind::Brake;
  friend auto operator<=>(const ScriptEvent&, const ScriptEvent&) = default;
};

// Brake segment: linear deceleration over 3 s to ratio * cruise, hold, then
// linear recovery over 5 s.
struct BrakeScript {
  std::int64_t onset = 0;
  double ratio = 0.5;
  std::int64_t hold_frames = 40;
};

inline constexpr std::int64_t kDecelFrames = 30;
inline constexpr std::int64_t kRecoverFrames = 50;
// Lateral smoothstep spans 4 s centered on the cross-over frame.
inline constexpr std::int64_t kLaneChangeHalfFrames = 20;

struct VehicleScript {
  std::int64_t vehicle_id = 0;
  int lane = 1;
  double y0 = 0.0;      // longitudinal position at frame 0
  double speed = 25.0;  // cruise speed
  std::vector<BrakeScript> brakes;
  std::optional<std::int64_t> lane_change_frame;
  int lane_change_dir = 0;  // -1 left, +1 right
  // Follow mode: copy `leader`'s longitudinal trajectory delayed by
  // delay_frames and shifted back by gap_m. Speed and brakes are ignored.
  std::optional<std::int64_t> leader;
  std::int64_t delay_frames = 0;
  double gap_m = 0.0;
};

struct SynthResult {
  TrackStore store;
  std::vector<ScriptEvent> events;
};

// Renders scripts over frames [0, n_frames). Leaders must precede their
// followers in `scripts`.
SynthResult render(const std::vector<VehicleScript>& scripts, std::int64_t n_frames,
                   double lane_width_m, const std::string& dataset_tag);

// Throws ConfigError for infeasible configurations. Pure function of
// (config, seed).
SynthResult generate(const SynthConfig& config, std::uint64_t seed);

// CSV: vehicle_id,frame,maneuver with maneuver in
// {lane_change_left, lane_change_right, brake}.
void write_script_log(std::ostream& os, const std::vector<ScriptEvent>& events);

double lane_center(int lane, double lane_width_m);

}  // namespace mlstm::synth
