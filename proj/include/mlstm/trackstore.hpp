#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mlstm/maneuvers.hpp"
#include "mlstm/tensor.hpp"
#include "mlstm/track.hpp"

namespace mlstm {

// Immutable after construction; all queries are const and thread safe.
class TrackStore {
 public:
  TrackStore() = default;
  // Validates every track (contiguous increasing frames, lane >= 1, no
  // longitudinal jump above kMaxStepMeters) and builds the frame index.
  TrackStore(std::vector<VehicleTrack> tracks, std::string dataset_tag);

  static constexpr double kMaxStepMeters = 5.0;

  const std::string& dataset_tag() const { return tag_; }
  std::size_t size() const { return tracks_.size(); }
  bool empty() const { return tracks_.empty(); }
  const std::map<std::int64_t, VehicleTrack>& tracks() const { return tracks_; }
  const VehicleTrack* find(std::int64_t vehicle_id) const;
  const VehicleTrack& track(std::int64_t vehicle_id) const;
  // Sorted ids of vehicles present at a frame (empty span if none).
  std::span<const std::int64_t> vehicles_at(std::int64_t frame) const;
  std::vector<std::int64_t> vehicle_ids() const;

 private:
  std::map<std::int64_t, VehicleTrack> tracks_;
  std::unordered_map<std::int64_t, std::vector<std::int64_t>> by_frame_;
  std::string tag_;
};

enum class UnitMode { Feet, Meters };
inline constexpr double kFeetToMeters = 0.3048;

// Column names looked up in a header row, and the positional fallback for
// header-less files. Defaults follow the public NGSIM exports.
struct ColumnMapping {
  std::string vehicle_id = "Vehicle_ID";
  std::string frame = "Frame_ID";
  std::string x = "Local_X";
  std::string y = "Local_Y";
  std::string lane = "Lane_ID";
  std::array<int, 5> positional = {0, 1, 4, 5, 13};
};

struct ParseOptions {
  ColumnMapping columns;
  std::string dataset_tag;
};

// Comma- or whitespace-delimited rows, optionally preceded by a header.
TrackStore parse_trajectories(std::istream& in, UnitMode unit, const ParseOptions& opts = {});
TrackStore load_trajectories(const std::filesystem::path& path, UnitMode unit,
                             ParseOptions opts = {});
// CSV in meters with a Vehicle_ID,Frame_ID,Local_X,Local_Y,Lane_ID header.
void write_trajectories(std::ostream& out, const TrackStore& store);

// Position of `other_id` at frame s relative to `vehicle_id` at frame t.
std::pair<double, double> to_local_frame(const TrackStore& store, std::int64_t vehicle_id,
                                         std::int64_t t, std::int64_t other_id, std::int64_t s);

// Slot order of the six neighbors; "left" is lane_id - 1.
enum class NeighborSlot : int {
  SameAhead = 0,
  SameBehind,
  LeftAhead,
  LeftBehind,
  RightAhead,
  RightBehind,
};
inline constexpr int kNumNeighbors = 6;
using NeighborSet = std::array<std::optional<std::int64_t>, kNumNeighbors>;

// Nearest vehicle ahead (dy >= 0) and behind (dy < 0) in the ego lane and
// the two adjacent lanes at frame t. Ties in |dy| go to the smaller id.
NeighborSet select_neighbors(const TrackStore& store, std::int64_t vehicle_id, std::int64_t t);

// Sample geometry at the 5 Hz working rate.
inline constexpr int kDownsample = 2;
inline constexpr int kHistoryFrames = 30;
inline constexpr int kFutureFrames = 50;
inline constexpr int kHistoryLen = kHistoryFrames / kDownsample + 1;  // 16 = T_h + 1
inline constexpr int kFutureLen = kFutureFrames / kDownsample;        // 25 = T_f
inline constexpr int kChannels = 2 + 2 * kNumNeighbors;               // 14

struct Sample {
  std::int64_t vehicle_id = 0;
  std::int64_t frame = 0;
  double origin_x = 0.0;
  double origin_y = 0.0;
  Tensor2 history{kHistoryLen, kChannels};  // row k is frame t - 30 + 2k
  Tensor2 future{kFutureLen, 2};            // row k is frame t + 2 + 2k
  ManeuverLabel label;
  std::array<bool, kNumNeighbors> neighbor_mask{};
};

// std::nullopt is the skip signal: fewer than 30 frames of history or 50
// frames of future around t. Neighbor rows for frames where a selected
// neighbor is not tracked are zero-filled.
std::optional<Sample> build_sample(const TrackStore& store, std::int64_t vehicle_id,
                                   std::int64_t t);

struct SampleBatch {
  std::vector<Sample> samples;
  std::size_t skipped = 0;
};

// Builds samples for every listed vehicle at every frame f with
// (f - first_frame) % stride == 0. Runs in parallel over vehicles; output
// order is deterministic (by vehicle id, then frame).
SampleBatch build_samples(const TrackStore& store, std::span<const std::int64_t> vehicle_ids,
                          int stride);

struct VehicleRef {
  std::size_t subset = 0;
  std::int64_t vehicle_id = 0;
  friend auto operator<=>(const VehicleRef&, const VehicleRef&) = default;
};

struct TrainTestSplit {
  std::vector<VehicleRef> train;
  std::vector<VehicleRef> test;
  std::vector<std::string> warnings;
};

// A quarter of each subset's vehicles (at least one) go to test.
TrainTestSplit split_train_test(std::span<const TrackStore> subsets, std::uint64_t seed);

struct SplitSamples {
  std::vector<Sample> train;
  std::vector<Sample> test;
  std::size_t skipped = 0;
};

// build_samples over each side of `split`, subsets in order.
SplitSamples build_split_samples(std::span<const TrackStore> subsets, const TrainTestSplit& split,
                                 int stride);

}  // namespace mlstm
