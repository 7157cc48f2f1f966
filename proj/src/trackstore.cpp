#include "mlstm/trackstore.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <iterator>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "mlstm/error.hpp"

namespace mlstm {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  if (line.find(',') != std::string_view::npos) {
    std::size_t start = 0;
    while (true) {
      const std::size_t pos = line.find(',', start);
      out.push_back(trim(line.substr(start, pos - start)));
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
  } else {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      const std::size_t start = i;
      while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      if (i > start) out.push_back(line.substr(start, i - start));
    }
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

std::int64_t parse_integral(std::string_view s, const char* column, std::size_t line_no) {
  double v = 0.0;
  if (!parse_double(s, v) || v != std::floor(v) || std::abs(v) > 9e15) {
    throw SchemaError("line " + std::to_string(line_no) + ": column " + column +
                      " is not an integer: '" + std::string(s) + "'");
  }
  return static_cast<std::int64_t>(v);
}

double parse_real(std::string_view s, const char* column, std::size_t line_no) {
  double v = 0.0;
  if (!parse_double(s, v) || !std::isfinite(v)) {
    throw SchemaError("line " + std::to_string(line_no) + ": column " + column +
                      " is not a number: '" + std::string(s) + "'");
  }
  return v;
}

void validate_track(const VehicleTrack& tr) {
  const std::string id = std::to_string(tr.vehicle_id);
  for (std::size_t i = 0; i < tr.points.size(); ++i) {
    const TrackPoint& p = tr.points[i];
    if (p.lane < 1) {
      throw IntegrityError("vehicle " + id + ": lane id " + std::to_string(p.lane) +
                           " at frame " + std::to_string(p.frame) + " is below 1");
    }
    if (i == 0) continue;
    const TrackPoint& q = tr.points[i - 1];
    if (p.frame == q.frame) {
      throw IntegrityError("vehicle " + id + ": duplicate frame " + std::to_string(p.frame));
    }
    if (p.frame != q.frame + 1) {
      throw IntegrityError("vehicle " + id + ": frame gap between " + std::to_string(q.frame) +
                           " and " + std::to_string(p.frame));
    }
    if (std::abs(p.y - q.y) > TrackStore::kMaxStepMeters) {
      throw IntegrityError("vehicle " + id + ": longitudinal jump at frame " +
                           std::to_string(p.frame));
    }
  }
}

}  // namespace

TrackStore::TrackStore(std::vector<VehicleTrack> tracks, std::string dataset_tag)
    : tag_(std::move(dataset_tag)) {
  for (auto& tr : tracks) {
    if (tr.points.empty()) continue;
    validate_track(tr);
    const std::int64_t id = tr.vehicle_id;
    if (!tracks_.emplace(id, std::move(tr)).second) {
      throw IntegrityError("vehicle " + std::to_string(id) + " appears in two tracks");
    }
  }
  for (const auto& [id, tr] : tracks_)
    for (const auto& p : tr.points) by_frame_[p.frame].push_back(id);
  // Ids arrive in map order, so every per-frame list is already sorted.
}

const VehicleTrack* TrackStore::find(std::int64_t vehicle_id) const {
  auto it = tracks_.find(vehicle_id);
  return it == tracks_.end() ? nullptr : &it->second;
}

const VehicleTrack& TrackStore::track(std::int64_t vehicle_id) const {
  const VehicleTrack* tr = find(vehicle_id);
  if (tr == nullptr) throw OutOfRangeError("unknown vehicle " + std::to_string(vehicle_id));
  return *tr;
}

std::span<const std::int64_t> TrackStore::vehicles_at(std::int64_t frame) const {
  auto it = by_frame_.find(frame);
  if (it == by_frame_.end()) return {};
  return it->second;
}

std::vector<std::int64_t> TrackStore::vehicle_ids() const {
  std::vector<std::int64_t> ids;
  ids.reserve(tracks_.size());
  for (const auto& [id, tr] : tracks_) ids.push_back(id);
  return ids;
}

TrackStore parse_trajectories(std::istream& in, UnitMode unit, const ParseOptions& opts) {
  const ColumnMapping& cm = opts.columns;
  const std::array<const std::string*, 5> names = {&cm.vehicle_id, &cm.frame, &cm.x, &cm.y,
                                                   &cm.lane};
  std::array<int, 5> idx = cm.positional;
  bool resolved = false;
  const double factor = unit == UnitMode::Feet ? kFeetToMeters : 1.0;

  std::map<std::int64_t, std::vector<TrackPoint>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view sv = trim(line);
    if (sv.empty() || sv.front() == '#') continue;
    const auto fields = split_fields(sv);
    if (!resolved) {
      resolved = true;
      double probe = 0.0;
      const bool header = std::any_of(fields.begin(), fields.end(),
                                      [&](std::string_view f) { return !parse_double(f, probe); });
      if (header) {
        for (std::size_t c = 0; c < names.size(); ++c) {
          const std::string want = lower(*names[c]);
          auto it = std::find_if(fields.begin(), fields.end(),
                                 [&](std::string_view f) { return lower(f) == want; });
          if (it == fields.end()) throw SchemaError("missing column " + *names[c]);
          idx[c] = static_cast<int>(it - fields.begin());
        }
        continue;
      }
    }
    for (std::size_t c = 0; c < names.size(); ++c) {
      if (idx[c] < 0 || static_cast<std::size_t>(idx[c]) >= fields.size()) {
        throw SchemaError("missing column " + *names[c] + " (line " + std::to_string(line_no) +
                          " has " + std::to_string(fields.size()) + " fields)");
      }
    }
    const auto field = [&](int c) { return fields[static_cast<std::size_t>(idx[c])]; };
    TrackPoint p;
    const std::int64_t vid = parse_integral(field(0), cm.vehicle_id.c_str(), line_no);
    p.frame = parse_integral(field(1), cm.frame.c_str(), line_no);
    p.x = parse_real(field(2), cm.x.c_str(), line_no) * factor;
    p.y = parse_real(field(3), cm.y.c_str(), line_no) * factor;
    p.lane = static_cast<int>(parse_integral(field(4), cm.lane.c_str(), line_no));
    rows[vid].push_back(p);
  }

  std::vector<VehicleTrack> tracks;
  tracks.reserve(rows.size());
  for (auto& [vid, pts] : rows) {
    std::sort(pts.begin(), pts.end(),
              [](const TrackPoint& a, const TrackPoint& b) { return a.frame < b.frame; });
    for (std::size_t i = 1; i < pts.size(); ++i) {
      if (pts[i].frame == pts[i - 1].frame) {
        throw IntegrityError("vehicle " + std::to_string(vid) + ": duplicate frame " +
                             std::to_string(pts[i].frame));
      }
    }
    tracks.push_back(VehicleTrack{vid, std::move(pts)});
  }
  return TrackStore(std::move(tracks), opts.dataset_tag);
}

TrackStore load_trajectories(const std::filesystem::path& path, UnitMode unit,
                             ParseOptions opts) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  if (opts.dataset_tag.empty()) opts.dataset_tag = path.stem().string();
  return parse_trajectories(in, unit, opts);
}

void write_trajectories(std::ostream& out, const TrackStore& store) {
  out << "Vehicle_ID,Frame_ID,Local_X,Local_Y,Lane_ID\n";
  out << std::setprecision(17);
  for (const auto& [id, tr] : store.tracks())
    for (const auto& p : tr.points)
      out << id << ',' << p.frame << ',' << p.x << ',' << p.y << ',' << p.lane << '\n';
}

std::pair<double, double> to_local_frame(const TrackStore& store, std::int64_t vehicle_id,
                                         std::int64_t t, std::int64_t other_id, std::int64_t s) {
  const TrackPoint* origin = store.track(vehicle_id).at(t);
  const TrackPoint* other = store.track(other_id).at(s);
  if (origin == nullptr || other == nullptr) {
    throw OutOfRangeError("to_local_frame: vehicle " +
                          std::to_string(origin == nullptr ? vehicle_id : other_id) +
                          " has no frame " + std::to_string(origin == nullptr ? t : s));
  }
  return {other->x - origin->x, other->y - origin->y};
}

NeighborSet select_neighbors(const TrackStore& store, std::int64_t vehicle_id, std::int64_t t) {
  const TrackPoint* ego = store.track(vehicle_id).at(t);
  if (ego == nullptr) {
    throw OutOfRangeError("select_neighbors: vehicle " + std::to_string(vehicle_id) +
                          " has no frame " + std::to_string(t));
  }
  NeighborSet slots;
  std::array<double, kNumNeighbors> best;
  best.fill(std::numeric_limits<double>::infinity());
  for (const std::int64_t id : store.vehicles_at(t)) {
    if (id == vehicle_id) continue;
    const TrackPoint* p = store.track(id).at(t);
    int base = -1;
    if (p->lane == ego->lane) base = 0;
    else if (p->lane == ego->lane - 1) base = 2;
    else if (p->lane == ego->lane + 1) base = 4;
    if (base < 0) continue;
    const double dy = p->y - ego->y;
    const int slot = base + (dy >= 0.0 ? 0 : 1);
    const double dist = std::abs(dy);
    // Ids are visited in increasing order, so strict < keeps the smaller id on ties.
    if (dist < best[slot]) {
      best[slot] = dist;
      slots[slot] = id;
    }
  }
  return slots;
}

std::optional<Sample> build_sample(const TrackStore& store, std::int64_t vehicle_id,
                                   std::int64_t t) {
  const VehicleTrack& ego = store.track(vehicle_id);
  if (!ego.covers(t - kHistoryFrames) || !ego.covers(t + kFutureFrames)) return std::nullopt;

  Sample s;
  s.vehicle_id = vehicle_id;
  s.frame = t;
  const TrackPoint* o = ego.at(t);
  s.origin_x = o->x;
  s.origin_y = o->y;

  const NeighborSet nb = select_neighbors(store, vehicle_id, t);
  std::array<const VehicleTrack*, kNumNeighbors> nb_tracks{};
  for (int k = 0; k < kNumNeighbors; ++k) {
    s.neighbor_mask[k] = nb[k].has_value();
    if (nb[k]) nb_tracks[k] = &store.track(*nb[k]);
  }

  for (int row = 0; row < kHistoryLen; ++row) {
    const std::int64_t f = t - kHistoryFrames + kDownsample * row;
    const TrackPoint* p = ego.at(f);
    s.history(row, 0) = p->x - o->x;
    s.history(row, 1) = p->y - o->y;
    for (int k = 0; k < kNumNeighbors; ++k) {
      if (nb_tracks[k] == nullptr) continue;
      if (const TrackPoint* q = nb_tracks[k]->at(f)) {
        s.history(row, 2 + 2 * k) = q->x - o->x;
        s.history(row, 3 + 2 * k) = q->y - o->y;
      }
    }
  }
  // Exact zero at the origin row regardless of rounding.
  s.history(kHistoryLen - 1, 0) = 0.0;
  s.history(kHistoryLen - 1, 1) = 0.0;

  for (int row = 0; row < kFutureLen; ++row) {
    const TrackPoint* p = ego.at(t + kDownsample * (row + 1));
    s.future(row, 0) = p->x - o->x;
    s.future(row, 1) = p->y - o->y;
  }
  s.label = label_maneuver(ego, t);
  return s;
}

SampleBatch build_samples(const TrackStore& store, std::span<const std::int64_t> vehicle_ids,
                          int stride) {
  if (stride < 1) throw ArgumentError("sample stride must be >= 1");
  std::vector<std::int64_t> ids(vehicle_ids.begin(), vehicle_ids.end());
  std::sort(ids.begin(), ids.end());
  std::vector<const VehicleTrack*> tracks;
  for (std::int64_t id : ids) tracks.push_back(&store.track(id));  // throws before the parallel loop
  std::vector<SampleBatch> per_vehicle(ids.size());
  const auto n = static_cast<std::ptrdiff_t>(ids.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const VehicleTrack& tr = *tracks[static_cast<std::size_t>(i)];
    SampleBatch& out = per_vehicle[static_cast<std::size_t>(i)];
    for (std::int64_t f = tr.first_frame(); f <= tr.last_frame(); f += stride) {
      if (auto s = build_sample(store, tr.vehicle_id, f)) {
        out.samples.push_back(std::move(*s));
      } else {
        ++out.skipped;
      }
    }
  }
  SampleBatch all;
  for (auto& b : per_vehicle) {
    all.skipped += b.skipped;
    std::move(b.samples.begin(), b.samples.end(), std::back_inserter(all.samples));
  }
  return all;
}

TrainTestSplit split_train_test(std::span<const TrackStore> subsets, std::uint64_t seed) {
  TrainTestSplit split;
  for (std::size_t s = 0; s < subsets.size(); ++s) {
    std::vector<std::int64_t> ids = subsets[s].vehicle_ids();
    if (ids.empty()) continue;
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(s)};
    std::mt19937_64 rng(seq);
    // Fisher-Yates with explicit index draws keeps the split identical across
    // standard library implementations.
    for (std::size_t i = ids.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(ids[i - 1], ids[j]);
    }
    std::size_t n_test = ids.size() / 4;
    if (n_test == 0) {
      n_test = 1;
      split.warnings.push_back("subset '" + subsets[s].dataset_tag() + "' has only " +
                               std::to_string(ids.size()) +
                               " vehicles; assigning one to the test split");
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
      (i < n_test ? split.test : split.train).push_back(VehicleRef{s, ids[i]});
    }
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

SplitSamples build_split_samples(std::span<const TrackStore> subsets, const TrainTestSplit& split,
                                 int stride) {
  SplitSamples out;
  for (std::size_t i = 0; i < subsets.size(); ++i) {
    for (auto [refs, dst] : {std::pair{&split.train, &out.train}, std::pair{&split.test, &out.test}}) {
      std::vector<std::int64_t> ids;
      for (const auto& r : *refs)
        if (r.subset == i) ids.push_back(r.vehicle_id);
      SampleBatch b = build_samples(subsets[i], ids, stride);
      out.skipped += b.skipped;
      std::move(b.samples.begin(), b.samples.end(), std::back_inserter(*dst));
    }
  }
  return out;
}

}  // namespace mlstm
