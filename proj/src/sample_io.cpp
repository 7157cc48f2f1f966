#include "mlstm/sample_io.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "mlstm/binary_io.hpp"
#include "mlstm/error.hpp"

namespace mlstm {
namespace {

constexpr char kMagic[8] = {'M', 'L', 'S', 'M', 'P', 'L', '0', '1'};

bool is_jsonl(const std::filesystem::path& p) { return p.extension() == ".jsonl"; }

}  // namespace

void write_samples_binary(std::ostream& os, const std::vector<Sample>& samples) {
  os.write(kMagic, sizeof(kMagic));
  binio::put_u32(os, kHistoryLen);
  binio::put_u32(os, kChannels);
  binio::put_u32(os, kFutureLen);
  binio::put_u64(os, samples.size());
  for (const Sample& s : samples) {
    binio::put_i64(os, s.vehicle_id);
    binio::put_i64(os, s.frame);
    binio::put_f64(os, s.origin_x);
    binio::put_f64(os, s.origin_y);
    binio::put_u8(os, static_cast<std::uint8_t>(s.label.lateral));
    binio::put_u8(os, static_cast<std::uint8_t>(s.label.longitudinal));
    for (bool m : s.neighbor_mask) binio::put_u8(os, m ? 1 : 0);
    for (double v : s.history.flat()) binio::put_f64(os, v);
    for (double v : s.future.flat()) binio::put_f64(os, v);
  }
}

std::vector<Sample> read_samples_binary(std::istream& is) {
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw SchemaError("not a sample file (bad magic)");
  }
  const std::uint32_t hl = binio::get_u32(is);
  const std::uint32_t ch = binio::get_u32(is);
  const std::uint32_t fl = binio::get_u32(is);
  if (hl != kHistoryLen || ch != kChannels || fl != kFutureLen) {
    throw SchemaError("sample file geometry " + std::to_string(hl) + "x" + std::to_string(ch) +
                      "/" + std::to_string(fl) + " does not match this build");
  }
  const std::uint64_t n = binio::get_u64(is);
  std::vector<Sample> out;
  for (std::uint64_t i = 0; i < n; ++i) {
    Sample s;
    s.vehicle_id = binio::get_i64(is);
    s.frame = binio::get_i64(is);
    s.origin_x = binio::get_f64(is);
    s.origin_y = binio::get_f64(is);
    const int lat = binio::get_u8(is);
    const int lon = binio::get_u8(is);
    if (lat >= kNumLateral || lon >= kNumLongitudinal) {
      throw SchemaError("sample " + std::to_string(i) + ": maneuver code out of range");
    }
    s.label = {static_cast<Lateral>(lat), static_cast<Longitudinal>(lon)};
    for (bool& m : s.neighbor_mask) m = binio::get_u8(is) != 0;
    for (double& v : s.history.flat()) v = binio::get_f64(is);
    for (double& v : s.future.flat()) v = binio::get_f64(is);
    out.push_back(std::move(s));
  }
  return out;
}

void write_samples_jsonl(std::ostream& os, const std::vector<Sample>& samples) {
  for (const Sample& s : samples) {
    nlohmann::json j;
    j["vehicle_id"] = s.vehicle_id;
    j["frame"] = s.frame;
    j["origin"] = {s.origin_x, s.origin_y};
    j["lateral"] = to_string(s.label.lateral);
    j["longitudinal"] = to_string(s.label.longitudinal);
    j["neighbor_mask"] = s.neighbor_mask;
    auto rows = [](const Tensor2& t) {
      nlohmann::json arr = nlohmann::json::array();
      for (std::size_t r = 0; r < t.rows(); ++r) {
        const auto row = t.row_span(r);
        arr.push_back(std::vector<double>(row.begin(), row.end()));
      }
      return arr;
    };
    j["history"] = rows(s.history);
    j["future"] = rows(s.future);
    os << j.dump() << '\n';
  }
}

std::vector<Sample> read_samples_jsonl(std::istream& is) {
  std::vector<Sample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Sample s;
      s.vehicle_id = j.at("vehicle_id").get<std::int64_t>();
      s.frame = j.at("frame").get<std::int64_t>();
      s.origin_x = j.at("origin").at(0).get<double>();
      s.origin_y = j.at("origin").at(1).get<double>();
      s.label = {lateral_from_string(j.at("lateral").get<std::string>()),
                 longitudinal_from_string(j.at("longitudinal").get<std::string>())};
      s.neighbor_mask = j.at("neighbor_mask").get<std::array<bool, kNumNeighbors>>();
      auto fill = [](const nlohmann::json& rows, Tensor2& t, const char* what) {
        if (rows.size() != t.rows()) throw SchemaError(std::string(what) + ": wrong row count");
        for (std::size_t r = 0; r < t.rows(); ++r) {
          if (rows[r].size() != t.cols()) {
            throw SchemaError(std::string(what) + ": wrong column count");
          }
          for (std::size_t c = 0; c < t.cols(); ++c) t(r, c) = rows[r][c].get<double>();
        }
      };
      fill(j.at("history"), s.history, "history");
      fill(j.at("future"), s.future, "future");
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError("samples line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ArgumentError& e) {
      throw SchemaError("samples line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void save_samples(const std::filesystem::path& path, const std::vector<Sample>& samples) {
  std::ofstream os(path, is_jsonl(path) ? std::ios::out : std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  if (is_jsonl(path)) {
    write_samples_jsonl(os, samples);
  } else {
    write_samples_binary(os, samples);
  }
}

std::vector<Sample> load_samples(const std::filesystem::path& path) {
  std::ifstream is(path, is_jsonl(path) ? std::ios::in : std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  return is_jsonl(path) ? read_samples_jsonl(is) : read_samples_binary(is);
}

}  // namespace mlstm
