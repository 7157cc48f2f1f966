#include "mlstm/sample_io.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "mlstm/error.hpp"
#include "test_util.hpp"

namespace mlstm {
namespace {

std::vector<Sample> fixture() {
  std::mt19937_64 rng(8);
  std::vector<Sample> out;
  for (int i = 0; i < 5; ++i) {
    Sample s = testing::random_sample(rng, 100.0);
    s.vehicle_id = 1000 + i;
    s.frame = -5 + 40 * i;
    s.origin_x = 0.1 * i;
    s.origin_y = 1e5 / 3.0 + i;
    s.neighbor_mask = {i % 2 == 0, true, false, i == 3, false, true};
    out.push_back(s);
  }
  return out;
}

void expect_same(const std::vector<Sample>& a, const std::vector<Sample>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].vehicle_id, b[i].vehicle_id);
    EXPECT_EQ(a[i].frame, b[i].frame);
    EXPECT_EQ(a[i].origin_x, b[i].origin_x);
    EXPECT_EQ(a[i].origin_y, b[i].origin_y);
    EXPECT_EQ(a[i].label, b[i].label);
    EXPECT_EQ(a[i].neighbor_mask, b[i].neighbor_mask);
    EXPECT_EQ(a[i].history, b[i].history);
    EXPECT_EQ(a[i].future, b[i].future);
  }
}

TEST(SampleIo, BinaryRoundTripIsExact) {
  const auto s = fixture();
  std::stringstream buf;
  write_samples_binary(buf, s);
  expect_same(read_samples_binary(buf), s);
}

TEST(SampleIo, BinaryHeaderLayout) {
  std::stringstream buf;
  write_samples_binary(buf, fixture());
  const std::string bytes = buf.str();
  EXPECT_EQ(bytes.substr(0, 8), "MLSMPL01");
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 16);  // history_len, little-endian
  EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 14);
  EXPECT_EQ(static_cast<unsigned char>(bytes[16]), 25);
  const std::size_t record = 8 + 8 + 8 + 8 + 1 + 1 + 6 + 8 * (16 * 14 + 25 * 2);
  EXPECT_EQ(bytes.size(), 8 + 12 + 8 + 5 * record);
}

TEST(SampleIo, JsonlRoundTripIsExact) {
  const auto s = fixture();
  std::stringstream buf;
  write_samples_jsonl(buf, s);
  expect_same(read_samples_jsonl(buf), s);
}

TEST(SampleIo, RejectsCorruptInput) {
  std::stringstream bad_magic("NOTMAGIC");
  EXPECT_THROW(read_samples_binary(bad_magic), SchemaError);
  std::stringstream buf;
  write_samples_binary(buf, fixture());
  std::stringstream truncated(buf.str().substr(0, buf.str().size() - 3));
  EXPECT_THROW(read_samples_binary(truncated), SchemaError);
  std::stringstream bad_json("{\"vehicle_id\": 1}\n");
  EXPECT_THROW(read_samples_jsonl(bad_json), SchemaError);
}

TEST(SampleIo, FileFormatByExtension) {
  const auto dir = std::filesystem::temp_directory_path() / "mlstm_sample_io_test";
  std::filesystem::create_directories(dir);
  const auto s = fixture();
  for (const char* name : {"a.bin", "a.jsonl"}) {
    save_samples(dir / name, s);
    expect_same(load_samples(dir / name), s);
  }
  std::ifstream first(dir / "a.jsonl");
  EXPECT_EQ(first.get(), '{');
  std::filesystem::remove_all(dir);
  EXPECT_THROW(load_samples(dir / "missing.bin"), Error);
}

}  // namespace
}  // namespace mlstm
