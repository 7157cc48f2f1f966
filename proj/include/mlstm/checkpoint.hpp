#pragma once

// Checkpoint layout (all integers and floats little-endian):
//
//   magic      8 bytes  "MLSTMCKP"
//   version    u32      kCheckpointVersion
//   n_hyper    u32
//   n_hyper x  { name: u32 length + bytes, value: f64 }
//   n_params   u32
//   n_params x { name: u32 length + bytes, rows: u32, cols: u32,
//                payload: rows*cols f64, row-major }
//
// LSTM weights are stored as (4*hidden x in) with gate row blocks in the
// order input, forget, cell, output. Optimizer moments are not stored.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "mlstm/params.hpp"

namespace mlstm {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::map<std::string, double> hyper;
  ParamSet params;
};

void write_checkpoint(std::ostream& os, const Checkpoint& ck);
Checkpoint read_checkpoint(std::istream& is);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mlstm
