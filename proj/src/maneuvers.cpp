#include "mlstm/maneuvers.hpp"

#include <cmath>
#include <string>

#include "mlstm/error.hpp"

namespace mlstm {

ManeuverLabel ManeuverLabel::from_joint(int index) {
  if (index < 0 || index >= kNumManeuvers) {
    throw OutOfRangeError("joint maneuver index " + std::to_string(index));
  }
  return {static_cast<Lateral>(index / 2), static_cast<Longitudinal>(index % 2)};
}

std::string_view to_string(Lateral v) {
  switch (v) {
    case Lateral::KeepLane: return "keep";
    case Lateral::ChangeLeft: return "left";
    case Lateral::ChangeRight: return "right";
  }
  return "?";
}

std::string_view to_string(Longitudinal v) {
  return v == Longitudinal::Brake ? "brake" : "normal";
}

Lateral lateral_from_string(std::string_view s) {
  if (s == "keep") return Lateral::KeepLane;
  if (s == "left") return Lateral::ChangeLeft;
  if (s == "right") return Lateral::ChangeRight;
  throw ArgumentError("unknown lateral maneuver: " + std::string(s));
}

Longitudinal longitudinal_from_string(std::string_view s) {
  if (s == "normal") return Longitudinal::Normal;
  if (s == "brake") return Longitudinal::Brake;
  throw ArgumentError("unknown longitudinal maneuver: " + std::string(s));
}

Lateral label_lateral(const VehicleTrack& track, std::int64_t t) {
  if (!track.covers(t)) {
    throw OutOfRangeError("vehicle " + std::to_string(track.vehicle_id) + " has no frame " +
                          std::to_string(t));
  }
  // Cross-over at c: lane(c) differs from lane(c - 1). Scan outward from t,
  // earlier side first, so the nearest wins and ties go to the earlier one.
  auto crossing = [&](std::int64_t c) -> const TrackPoint* {
    const TrackPoint* cur = track.at(c);
    const TrackPoint* prev = track.at(c - 1);
    if (cur == nullptr || prev == nullptr || cur->lane == prev->lane) return nullptr;
    return cur;
  };
  for (std::int64_t d = 0; d <= kLaneChangeWindowFrames; ++d) {
    for (const std::int64_t c : {t - d, t + d}) {
      if (const TrackPoint* cur = crossing(c)) {
        const TrackPoint* prev = track.at(c - 1);
        return cur->lane < prev->lane ? Lateral::ChangeLeft : Lateral::ChangeRight;
      }
      if (d == 0) break;
    }
  }
  return Lateral::KeepLane;
}

double speed_at(const VehicleTrack& track, std::int64_t frame) {
  const TrackPoint* p = track.at(frame);
  if (p == nullptr) {
    throw OutOfRangeError("vehicle " + std::to_string(track.vehicle_id) + " has no frame " +
                          std::to_string(frame));
  }
  const TrackPoint* prev = track.at(frame - 1);
  const TrackPoint* next = track.at(frame + 1);
  const TrackPoint* a = prev != nullptr ? prev : p;
  const TrackPoint* b = next != nullptr ? next : p;
  const double span = static_cast<double>(b->frame - a->frame) * kFrameDt;
  if (span <= 0.0) return 0.0;
  return std::hypot(b->x - a->x, b->y - a->y) / span;
}

Longitudinal label_longitudinal(const VehicleTrack& track, std::int64_t t,
                                std::int64_t horizon) {
  const double v0 = speed_at(track, t);
  if (v0 < kMinSpeedForBrake) return Longitudinal::Normal;
  double sum = 0.0;
  int n = 0;
  for (std::int64_t f = t + 1; f <= t + horizon && track.covers(f); ++f) {
    sum += speed_at(track, f);
    ++n;
  }
  if (n == 0) return Longitudinal::Normal;
  return sum / n < kBrakeRatio * v0 ? Longitudinal::Brake : Longitudinal::Normal;
}

ManeuverLabel label_maneuver(const VehicleTrack& track, std::int64_t t) {
  return {label_lateral(track, t), label_longitudinal(track, t)};
}

}  // namespace mlstm
