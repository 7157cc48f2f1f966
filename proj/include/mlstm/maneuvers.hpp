#pragma once

#include <cstdint>
#include <string_view>

#include "mlstm/track.hpp"

namespace mlstm {

enum class Lateral : int { KeepLane = 0, ChangeLeft = 1, ChangeRight = 2 };
enum class Longitudinal : int { Normal = 0, Brake = 1 };

inline constexpr int kNumLateral = 3;
inline constexpr int kNumLongitudinal = 2;
inline constexpr int kNumManeuvers = kNumLateral * kNumLongitudinal;

struct ManeuverLabel {
  Lateral lateral = Lateral::KeepLane;
  Longitudinal longitudinal = Longitudinal::Normal;

  // 2 * lateral + longitudinal, in [0, 6).
  int joint_index() const { return 2 * static_cast<int>(lateral) + static_cast<int>(longitudinal); }
  static ManeuverLabel from_joint(int index);
  friend bool operator==(const ManeuverLabel&, const ManeuverLabel&) = default;
};

std::string_view to_string(Lateral v);
std::string_view to_string(Longitudinal v);
Lateral lateral_from_string(std::string_view s);
Longitudinal longitudinal_from_string(std::string_view s);

// Lane-change state within +-4 s (40 frames) of a cross-over. Smaller lane
// ids are further left, so a decreasing id is a left change.
inline constexpr std::int64_t kLaneChangeWindowFrames = 40;
inline constexpr std::int64_t kHorizonFrames = 50;
inline constexpr double kBrakeRatio = 0.8;
inline constexpr double kMinSpeedForBrake = 0.1;  // m/s

Lateral label_lateral(const VehicleTrack& track, std::int64_t t);
Longitudinal label_longitudinal(const VehicleTrack& track, std::int64_t t,
                                std::int64_t horizon = kHorizonFrames);
ManeuverLabel label_maneuver(const VehicleTrack& track, std::int64_t t);

// Speed from positions: central differences, one-sided at the track ends.
double speed_at(const VehicleTrack& track, std::int64_t frame);

}  // namespace mlstm
