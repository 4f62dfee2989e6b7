#include <gtest/gtest.h>

#include <cstring>
#include <sstream>

#include "fastertucker/checkpoint.hpp"
#include "fastertucker/error.hpp"
#include "helpers.hpp"

namespace fastertucker {
namespace {

TEST(Checkpoint, RoundTripIsExact) {
  const auto m = testing::random_model({5, 6, 7, 3}, {2, 3, 4, 2}, 3, 12);
  std::stringstream buf;
  save_checkpoint(buf, m);
  EXPECT_EQ(load_checkpoint(buf), m);
}

TEST(Checkpoint, FileRoundTrip) {
  testing::TempDir dir;
  const auto m = testing::random_model({4, 4, 4}, {2, 2, 2}, 2, 1);
  save_checkpoint(dir / "m.ftk", m);
  EXPECT_EQ(load_checkpoint(dir / "m.ftk"), m);
  EXPECT_THROW(load_checkpoint(dir / "missing.ftk"), IoError);
}

TEST(Checkpoint, HeaderLayout) {
  const Model m({3, 4, 5}, {1, 2, 1}, 2);
  std::stringstream buf;
  save_checkpoint(buf, m);
  const std::string bytes = buf.str();
  ASSERT_GE(bytes.size(), 8u + 12u);
  EXPECT_EQ(bytes.substr(0, 8), std::string("FTUCKER\0", 8));
  std::uint32_t header[3];
  std::memcpy(header, bytes.data() + 8, sizeof header);
  EXPECT_EQ(header[0], kCheckpointVersion);
  EXPECT_EQ(header[1], 3u);
  EXPECT_EQ(header[2], 2u);
  // dims + ranks, then 3*1 + 4*2 + 5*1 factor entries and 2*(1+2+1) core entries
  EXPECT_EQ(bytes.size(), 20u + 6 * 4 + (16 + 8) * 8);
}

TEST(Checkpoint, RejectsCorruptInput) {
  const auto m = testing::random_model({3, 3, 3}, {2, 2, 2}, 2, 1);
  std::stringstream buf;
  save_checkpoint(buf, m);
  std::string bytes = buf.str();

  std::istringstream truncated(bytes.substr(0, bytes.size() - 5));
  EXPECT_THROW(load_checkpoint(truncated), IoError);

  std::string bad = bytes;
  bad[0] = 'X';
  std::istringstream bad_magic(bad);
  EXPECT_THROW(load_checkpoint(bad_magic), IoError);
}

}  // namespace
}  // namespace fastertucker
