#include "mlstm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <random>

#include "mlstm/error.hpp"

namespace mlstm::synth {
namespace {

constexpr std::int64_t kSlotFrames = 200;
constexpr double kMaxSpeed = 45.0;

double brake_factor(const std::vector<BrakeScript>& brakes, std::int64_t f) {
  double factor = 1.0;
  for (const BrakeScript& b : brakes) {
    const std::int64_t d = f - b.onset;
    double v = 1.0;
    if (d <= 0) {
      v = 1.0;
    } else if (d <= kDecelFrames) {
      v = 1.0 - (1.0 - b.ratio) * static_cast<double>(d) / kDecelFrames;
    } else if (d <= kDecelFrames + b.hold_frames) {
      v = b.ratio;
    } else if (d <= kDecelFrames + b.hold_frames + kRecoverFrames) {
      v = b.ratio + (1.0 - b.ratio) * static_cast<double>(d - kDecelFrames - b.hold_frames) /
                        kRecoverFrames;
    }
    factor = std::min(factor, v);
  }
  return factor;
}

double smoothstep(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}

}  // namespace

double lane_center(int lane, double lane_width_m) { return (lane - 0.5) * lane_width_m; }

SynthResult render(const std::vector<VehicleScript>& scripts, std::int64_t n_frames,
                   double lane_width_m, const std::string& dataset_tag) {
  std::map<std::int64_t, std::size_t> index;
  std::vector<std::int64_t> chain_delay(scripts.size(), 0);
  for (std::size_t i = 0; i < scripts.size(); ++i) {
    const VehicleScript& s = scripts[i];
    if (s.leader) {
      auto it = index.find(*s.leader);
      if (it == index.end()) {
        throw ConfigError("vehicle " + std::to_string(s.vehicle_id) +
                          " follows a leader that is not scripted before it");
      }
      chain_delay[i] = chain_delay[it->second] + s.delay_frames;
    }
    index[s.vehicle_id] = i;
  }
  const std::int64_t first =
      -(scripts.empty() ? 0 : *std::max_element(chain_delay.begin(), chain_delay.end())) - 1;
  const std::size_t span = static_cast<std::size_t>(n_frames - first);

  // Longitudinal position per vehicle over [first, n_frames).
  std::vector<std::vector<double>> ys(scripts.size());
  std::vector<std::vector<std::int64_t>> onsets(scripts.size());
  std::vector<double> cruise(scripts.size());
  for (std::size_t i = 0; i < scripts.size(); ++i) {
    const VehicleScript& s = scripts[i];
    std::vector<double>& y = ys[i];
    y.assign(span, 0.0);
    if (s.leader) {
      const std::size_t li = index.at(*s.leader);
      cruise[i] = cruise[li];
      for (std::size_t k = 0; k < span; ++k) {
        const std::int64_t src = static_cast<std::int64_t>(k) - s.delay_frames;
        const double base =
            src >= 0 ? ys[li][static_cast<std::size_t>(src)]
                     : ys[li][0] + static_cast<double>(src) * cruise[li] * kFrameDt;
        y[k] = base - s.gap_m;
      }
      for (std::int64_t o : onsets[li]) onsets[i].push_back(o + s.delay_frames);
    } else {
      cruise[i] = s.speed;
      auto speed = [&](std::int64_t f) { return s.speed * brake_factor(s.brakes, f); };
      const std::size_t zero = static_cast<std::size_t>(-first);
      y[zero] = s.y0;
      for (std::size_t k = zero + 1; k < span; ++k) {
        const std::int64_t f = static_cast<std::int64_t>(k) + first;
        y[k] = y[k - 1] + 0.5 * (speed(f - 1) + speed(f)) * kFrameDt;
      }
      for (std::size_t k = zero; k-- > 0;) {
        const std::int64_t f = static_cast<std::int64_t>(k) + first;
        y[k] = y[k + 1] - 0.5 * (speed(f) + speed(f + 1)) * kFrameDt;
      }
      for (const BrakeScript& b : s.brakes) onsets[i].push_back(b.onset);
    }
  }

  SynthResult result;
  std::vector<VehicleTrack> tracks;
  for (std::size_t i = 0; i < scripts.size(); ++i) {
    const VehicleScript& s = scripts[i];
    VehicleTrack tr;
    tr.vehicle_id = s.vehicle_id;
    tr.points.reserve(static_cast<std::size_t>(n_frames));
    const int target = s.lane + s.lane_change_dir;
    for (std::int64_t f = 0; f < n_frames; ++f) {
      TrackPoint p;
      p.frame = f;
      p.y = ys[i][static_cast<std::size_t>(f - first)];
      p.x = lane_center(s.lane, lane_width_m);
      p.lane = s.lane;
      if (s.lane_change_frame) {
        const std::int64_t c = *s.lane_change_frame;
        const double u = static_cast<double>(f - (c - kLaneChangeHalfFrames)) /
                         (2.0 * kLaneChangeHalfFrames);
        p.x += (lane_center(target, lane_width_m) - lane_center(s.lane, lane_width_m)) *
               smoothstep(u);
        if (f >= c) p.lane = target;
      }
      tr.points.push_back(p);
    }
    tracks.push_back(std::move(tr));

    if (s.lane_change_frame && *s.lane_change_frame >= 0 && *s.lane_change_frame < n_frames) {
      result.events.push_back({s.vehicle_id, *s.lane_change_frame,
                               s.lane_change_dir < 0 ? EventKind::LaneChangeLeft
                                                     : EventKind::LaneChangeRight});
    }
    for (std::int64_t o : onsets[i]) {
      if (o >= 0 && o < n_frames) result.events.push_back({s.vehicle_id, o, EventKind::Brake});
    }
  }
  std::sort(result.events.begin(), result.events.end());
  result.store = TrackStore(std::move(tracks), dataset_tag);
  return result;
}

SynthResult generate(const SynthConfig& cfg, std::uint64_t seed) {
  if (cfg.n_vehicles < 0) throw ConfigError("synth: n_vehicles must be >= 0");
  if (cfg.n_lanes < 1) throw ConfigError("synth: n_lanes must be >= 1");
  if (cfg.pct_lane_changes < 0 || cfg.pct_lane_changes > 1 || cfg.pct_braking < 0 ||
      cfg.pct_braking > 1) {
    throw ConfigError("synth: percentages must lie in [0, 1]");
  }
  if (cfg.pct_lane_changes > 0 && cfg.n_lanes < 2) {
    throw ConfigError("synth: lane changes need at least 2 lanes");
  }
  if (!(cfg.speed_min > 0) || cfg.speed_max < cfg.speed_min || cfg.speed_max > kMaxSpeed) {
    throw ConfigError("synth: speeds must satisfy 0 < speed_min <= speed_max <= 45");
  }
  if (!(cfg.brake_ratio_min > 0) || cfg.brake_ratio_max < cfg.brake_ratio_min ||
      cfg.brake_ratio_max > 0.6) {
    throw ConfigError("synth: brake ratios must satisfy 0 < min <= max <= 0.6");
  }
  if (cfg.headway_min_s < 0.1 || cfg.headway_max_s < cfg.headway_min_s) {
    throw ConfigError("synth: headways must satisfy 0.1 <= min <= max");
  }
  if (!(cfg.lane_width_m > 0)) throw ConfigError("synth: lane_width_m must be positive");
  const auto n_frames = static_cast<std::int64_t>(std::llround(cfg.duration_s * kFrameRateHz));
  if (n_frames < 1) throw ConfigError("synth: duration_s too short");
  const bool events = cfg.pct_lane_changes > 0 || cfg.pct_braking > 0;
  // Lane changes need 6 s of track on either side, brakes a full event plus
  // the horizon.
  if (events && n_frames < 200) {
    throw ConfigError("synth: duration_s must be >= 20 s to fit scripted events");
  }

  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  auto uniform_int = [&](std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
  };
  auto draw_brake = [&](std::int64_t onset) {
    return BrakeScript{onset, uniform(cfg.brake_ratio_min, cfg.brake_ratio_max),
                       uniform_int(20, 60)};
  };

  const int n = cfg.n_vehicles;
  std::vector<VehicleScript> scripts(static_cast<std::size_t>(n));
  std::vector<double> lane_speed(static_cast<std::size_t>(cfg.n_lanes));
  std::vector<double> lane_tail(static_cast<std::size_t>(cfg.n_lanes));
  std::vector<std::int64_t> lane_last(static_cast<std::size_t>(cfg.n_lanes), -1);
  for (int l = 0; l < cfg.n_lanes; ++l) {
    lane_speed[static_cast<std::size_t>(l)] = uniform(cfg.speed_min, cfg.speed_max);
    lane_tail[static_cast<std::size_t>(l)] = 2000.0 + uniform(0.0, 50.0);
  }

  for (int i = 0; i < n; ++i) {
    VehicleScript& s = scripts[static_cast<std::size_t>(i)];
    const auto l = static_cast<std::size_t>(i % cfg.n_lanes);
    s.vehicle_id = i + 1;
    s.lane = static_cast<int>(l) + 1;
    if (cfg.platoon && lane_last[l] >= 0) {
      s.leader = lane_last[l];
      s.delay_frames = static_cast<std::int64_t>(
          std::llround(uniform(cfg.headway_min_s, cfg.headway_max_s) * kFrameRateHz));
      s.gap_m = uniform(8.0, 12.0);
    } else {
      s.speed = cfg.platoon ? lane_speed[l] : uniform(cfg.speed_min, cfg.speed_max);
      s.y0 = lane_tail[l];
      lane_tail[l] -= uniform(40.0, 70.0);
    }
    lane_last[l] = s.vehicle_id;
  }

  if (cfg.platoon) {
    // Brake slots over the leader timeline, including the part before frame 0
    // that delayed followers replay.
    std::int64_t max_delay = 0;
    std::map<std::int64_t, std::int64_t> delay;
    for (const auto& s : scripts) {
      delay[s.vehicle_id] = s.leader ? delay[*s.leader] + s.delay_frames : 0;
      max_delay = std::max(max_delay, delay[s.vehicle_id]);
    }
    for (auto& s : scripts) {
      if (s.leader) continue;
      for (std::int64_t slot = -((max_delay / kSlotFrames) + 1) * kSlotFrames; slot < n_frames;
           slot += kSlotFrames) {
        if (uniform(0.0, 1.0) < cfg.pct_braking) s.brakes.push_back(draw_brake(slot + uniform_int(0, 40)));
      }
    }
  } else {
    std::vector<std::size_t> order(scripts.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_brake = static_cast<std::size_t>(std::llround(cfg.pct_braking * n));
    for (std::size_t k = 0; k < n_brake; ++k)
      scripts[order[k]].brakes.push_back(draw_brake(uniform_int(30, n_frames - 150)));
  }

  std::vector<std::size_t> order(scripts.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_change = static_cast<std::size_t>(std::llround(cfg.pct_lane_changes * n));
  for (std::size_t k = 0; k < n_change; ++k) {
    VehicleScript& s = scripts[order[k]];
    s.lane_change_frame = uniform_int(60, n_frames - 60);
    if (s.lane == 1) {
      s.lane_change_dir = 1;
    } else if (s.lane == cfg.n_lanes) {
      s.lane_change_dir = -1;
    } else {
      s.lane_change_dir = uniform(0.0, 1.0) < 0.5 ? -1 : 1;
    }
  }

  return render(scripts, n_frames, cfg.lane_width_m, cfg.dataset_tag);
}

void write_script_log(std::ostream& os, const std::vector<ScriptEvent>& events) {
  os << "vehicle_id,frame,maneuver\n";
  for (const auto& e : events) {
    const char* name = e.kind == EventKind::Brake            ? "brake"
                       : e.kind == EventKind::LaneChangeLeft ? "lane_change_left"
                                                             : "lane_change_right";
    os << e.vehicle_id << ',' << e.frame << ',' << name << '\n';
  }
}

}  // namespace mlstm::synth
