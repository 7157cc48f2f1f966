#include "mlstm/synth.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "mlstm/error.hpp"
#include "mlstm/maneuvers.hpp"

namespace mlstm::synth {
namespace {

VehicleScript cruiser(std::int64_t id, int lane, double speed) {
  VehicleScript s;
  s.vehicle_id = id;
  s.lane = lane;
  s.speed = speed;
  return s;
}

std::string csv(const TrackStore& s) {
  std::ostringstream os;
  write_trajectories(os, s);
  return os.str();
}

TEST(Generate, SameSeedIsBitwiseIdentical) {
  SynthConfig cfg;
  const auto a = generate(cfg, 7);
  const auto b = generate(cfg, 7);
  EXPECT_EQ(csv(a.store), csv(b.store));
  EXPECT_EQ(a.events, b.events);
  EXPECT_NE(csv(generate(cfg, 8).store), csv(a.store));
}

TEST(Generate, NoEventsMeansKeepNormalEverywhere) {
  SynthConfig cfg;
  cfg.pct_lane_changes = 0;
  cfg.pct_braking = 0;
  const auto r = generate(cfg, 3);
  EXPECT_TRUE(r.events.empty());
  for (const auto& [id, tr] : r.store.tracks()) {
    for (std::int64_t t = tr.first_frame(); t <= tr.last_frame(); t += 13) {
      EXPECT_EQ(label_maneuver(tr, t), ManeuverLabel{}) << id << "@" << t;
    }
  }
}

TEST(Generate, EventCountsFollowPercentages) {
  SynthConfig cfg;
  cfg.n_vehicles = 50;
  cfg.pct_lane_changes = 0.2;
  cfg.pct_braking = 0.3;
  const auto r = generate(cfg, 11);
  int changes = 0, brakes = 0;
  for (const auto& e : r.events) (e.kind == EventKind::Brake ? brakes : changes)++;
  EXPECT_EQ(changes, 10);
  EXPECT_EQ(brakes, 15);
  EXPECT_EQ(r.store.size(), 50u);
}

TEST(Generate, RejectsInfeasibleConfigs) {
  SynthConfig one_lane;
  one_lane.n_lanes = 1;
  EXPECT_THROW(generate(one_lane, 1), ConfigError);
  SynthConfig bad_pct;
  bad_pct.pct_braking = 1.5;
  EXPECT_THROW(generate(bad_pct, 1), ConfigError);
  SynthConfig short_run;
  short_run.duration_s = 10;
  EXPECT_THROW(generate(short_run, 1), ConfigError);
  SynthConfig mild;
  mild.brake_ratio_max = 0.9;
  EXPECT_THROW(generate(mild, 1), ConfigError);
  SynthConfig quiet = short_run;
  quiet.pct_braking = 0;
  quiet.pct_lane_changes = 0;
  EXPECT_NO_THROW(generate(quiet, 1));
}

TEST(Render, ScriptedLeftChangeLabels) {
  VehicleScript s = cruiser(1, 3, 25.0);
  s.lane_change_frame = 500;
  s.lane_change_dir = -1;
  const auto r = render({s}, 1000, 3.7, "t");
  const auto& tr = r.store.track(1);
  for (std::int64_t t = 460; t <= 540; ++t) EXPECT_EQ(label_lateral(tr, t), Lateral::ChangeLeft) << t;
  EXPECT_EQ(label_lateral(tr, 459), Lateral::KeepLane);
  EXPECT_EQ(label_lateral(tr, 541), Lateral::KeepLane);
  // Smooth lateral ramp: halfway at the cross-over, lane centers outside.
  EXPECT_NEAR(tr.at(500)->x, 0.5 * (lane_center(3, 3.7) + lane_center(2, 3.7)), 1e-12);
  EXPECT_DOUBLE_EQ(tr.at(480)->x, lane_center(3, 3.7));
  EXPECT_DOUBLE_EQ(tr.at(520)->x, lane_center(2, 3.7));
  ASSERT_EQ(r.events.size(), 1u);
  EXPECT_EQ(r.events[0].kind, EventKind::LaneChangeLeft);
}

TEST(Render, HalfSpeedBrakeLabelledAtOnset) {
  VehicleScript s = cruiser(1, 2, 30.0);
  s.brakes.push_back({300, 0.5, 40});
  const auto r = render({s}, 800, 3.7, "t");
  const auto& tr = r.store.track(1);
  EXPECT_EQ(label_longitudinal(tr, 300), Longitudinal::Brake);
  EXPECT_EQ(label_longitudinal(tr, 200), Longitudinal::Normal);
  EXPECT_NEAR(speed_at(tr, 250), 30.0, 1e-9);
  EXPECT_NEAR(speed_at(tr, 350), 15.0, 1e-9);
}

TEST(Render, FollowerReplaysLeaderWithDelay) {
  VehicleScript lead = cruiser(1, 2, 28.0);
  lead.y0 = 500;
  lead.brakes.push_back({100, 0.5, 30});
  VehicleScript follow;
  follow.vehicle_id = 2;
  follow.lane = 2;
  follow.leader = 1;
  follow.delay_frames = 20;
  follow.gap_m = 10;
  const auto r = render({lead, follow}, 400, 3.7, "t");
  const auto& a = r.store.track(1);
  const auto& b = r.store.track(2);
  for (std::int64_t f = 20; f < 400; f += 17) EXPECT_NEAR(b.at(f)->y, a.at(f - 20)->y - 10, 1e-9);
  // Before frame 0 the leader cruises, so the follower's early frames are
  // a constant-speed extrapolation.
  EXPECT_NEAR(b.at(0)->y, 500 - 20 * 2.8 - 10, 1e-9);
  ASSERT_EQ(r.events.size(), 2u);
  EXPECT_EQ(r.events[1].vehicle_id, 2);
  EXPECT_EQ(r.events[1].frame, 120);
}

TEST(Render, FollowerBeforeLeaderRejected) {
  VehicleScript follow;
  follow.vehicle_id = 2;
  follow.leader = 1;
  EXPECT_THROW(render({follow, cruiser(1, 1, 20)}, 100, 3.7, "t"), ConfigError);
}

TEST(Generate, PlatoonPropagatesBrakesBackwards) {
  SynthConfig cfg;
  cfg.platoon = true;
  cfg.n_vehicles = 12;
  cfg.n_lanes = 3;
  cfg.pct_lane_changes = 0;
  cfg.pct_braking = 1.0;
  const auto r = generate(cfg, 5);
  // Every lane leader brakes in every slot, so every follower has onsets too.
  for (const auto& [id, tr] : r.store.tracks()) {
    const bool has = std::any_of(r.events.begin(), r.events.end(),
                                 [&](const ScriptEvent& e) { return e.vehicle_id == id; });
    EXPECT_TRUE(has) << id;
  }
}

TEST(Generate, RoundTripsThroughTrajectoryFormat) {
  const auto r = generate(SynthConfig{}, 21);
  std::istringstream in(csv(r.store));
  const TrackStore back = parse_trajectories(in, UnitMode::Meters);
  EXPECT_EQ(csv(back), csv(r.store));
}

TEST(ScriptLog, Format) {
  std::ostringstream os;
  write_script_log(os, {{3, 40, EventKind::Brake}, {4, 90, EventKind::LaneChangeRight}});
  EXPECT_EQ(os.str(), "vehicle_id,frame,maneuver\n3,40,brake\n4,90,lane_change_right\n");
}

}  // namespace
}  // namespace mlstm::synth
