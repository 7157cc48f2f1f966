#include "mlstm/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include "mlstm/binary_io.hpp"
#include "mlstm/error.hpp"

namespace mlstm {
namespace {
constexpr char kMagic[8] = {'M', 'L', 'S', 'T', 'M', 'C', 'K', 'P'};
}

void write_checkpoint(std::ostream& os, const Checkpoint& ck) {
  os.write(kMagic, sizeof(kMagic));
  binio::put_u32(os, kCheckpointVersion);
  binio::put_u32(os, static_cast<std::uint32_t>(ck.hyper.size()));
  for (const auto& [k, v] : ck.hyper) {
    binio::put_str(os, k);
    binio::put_f64(os, v);
  }
  binio::put_u32(os, static_cast<std::uint32_t>(ck.params.size()));
  for (const auto& p : ck.params.entries()) {
    binio::put_str(os, p.name);
    binio::put_u32(os, static_cast<std::uint32_t>(p.value.rows()));
    binio::put_u32(os, static_cast<std::uint32_t>(p.value.cols()));
    for (double v : p.value.flat()) binio::put_f64(os, v);
  }
}

Checkpoint read_checkpoint(std::istream& is) {
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw SchemaError("not a checkpoint file (bad magic)");
  }
  const std::uint32_t version = binio::get_u32(is);
  if (version != kCheckpointVersion) {
    throw SchemaError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  const std::uint32_t n_hyper = binio::get_u32(is);
  for (std::uint32_t i = 0; i < n_hyper; ++i) {
    std::string key = binio::get_str(is);
    ck.hyper[key] = binio::get_f64(is);
  }
  const std::uint32_t n_params = binio::get_u32(is);
  for (std::uint32_t i = 0; i < n_params; ++i) {
    std::string name = binio::get_str(is);
    const std::uint32_t rows = binio::get_u32(is);
    const std::uint32_t cols = binio::get_u32(is);
    if (static_cast<std::uint64_t>(rows) * cols > (1ull << 28)) {
      throw SchemaError("parameter " + name + " is implausibly large");
    }
    std::vector<double> data(static_cast<std::size_t>(rows) * cols);
    for (double& v : data) v = binio::get_f64(is);
    ck.params.add(std::move(name), Tensor2(rows, cols, std::move(data)));
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  write_checkpoint(os, ck);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  return read_checkpoint(is);
}

}  // namespace mlstm
