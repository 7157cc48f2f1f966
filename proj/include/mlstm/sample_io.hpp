#pragma once

// Sample record formats.
//
// Binary (little-endian throughout):
//   header:  magic "MLSMPL01" (8 bytes), u32 history_len (16),
//            u32 channels (14), u32 future_len (25), u64 record count
//   record:  i64 vehicle_id, i64 frame, f64 origin_x, f64 origin_y,
//            u8 lateral, u8 longitudinal, u8 neighbor_mask[6],
//            f64 history[history_len * channels] (row-major, time major),
//            f64 future[future_len * 2]
//
// JSON lines: one object per sample with keys vehicle_id, frame, origin
// [x, y], lateral, longitudinal, neighbor_mask, history (array of rows),
// future (array of rows).

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mlstm/trackstore.hpp"

namespace mlstm {

void write_samples_binary(std::ostream& os, const std::vector<Sample>& samples);
std::vector<Sample> read_samples_binary(std::istream& is);
void write_samples_jsonl(std::ostream& os, const std::vector<Sample>& samples);
std::vector<Sample> read_samples_jsonl(std::istream& is);

// Format chosen by extension: ".jsonl" is JSON lines, anything else binary.
void save_samples(const std::filesystem::path& path, const std::vector<Sample>& samples);
std::vector<Sample> load_samples(const std::filesystem::path& path);

}  // namespace mlstm
