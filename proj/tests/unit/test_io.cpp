#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "splatcarve/error.hpp"
#include "splatcarve/image.hpp"
#include "splatcarve/io.hpp"

using namespace splatcarve;
namespace fs = std::filesystem;

TEST(Io, LittleEndianEncoding) {
  std::string buf;
  io::append_u32(buf, 0x01020304u);
  io::append_f32(buf, 1.0f);
  ASSERT_EQ(buf.size(), 8u);
  EXPECT_EQ(static_cast<unsigned char>(buf[0]), 0x04);
  EXPECT_EQ(static_cast<unsigned char>(buf[3]), 0x01);
  EXPECT_EQ(static_cast<unsigned char>(buf[7]), 0x3f);
  std::size_t off = 0;
  EXPECT_EQ(io::read_u32(buf, off), 0x01020304u);
  EXPECT_EQ(io::read_f32(buf, off), 1.0f);
  EXPECT_THROW(io::read_u32(buf, off), Error);
}

TEST(Io, DoubleTextRoundTrip) {
  for (double v : {0.0, -1.5, 0.1, 1.0 / 3.0, 6.02214076e23, std::numeric_limits<double>::denorm_min()})
    EXPECT_EQ(io::parse_double(io::format_double(v)), v);
  EXPECT_EQ(io::parse_double(" 2.5\r"), 2.5);
  EXPECT_THROW(io::parse_double("2.5x"), Error);
  EXPECT_THROW(io::parse_double(""), Error);
  EXPECT_EQ(io::parse_csv_row("1,2.5,-3"), (std::vector<double>{1.0, 2.5, -3.0}));
}

TEST(Io, AtomicWriteReplaces) {
  const auto path = fs::temp_directory_path() / "splatcarve_io" / "nested" / "f.txt";
  fs::remove_all(path.parent_path().parent_path());
  io::write_atomic(path, "first");
  io::write_atomic(path, "second");
  EXPECT_EQ(io::read_file(path), "second");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(path.parent_path())) ++files;
  EXPECT_EQ(files, 1u);
  fs::remove_all(path.parent_path().parent_path());
  try {
    io::read_file(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingFile);
  }
}

TEST(Png, QuantizationAndChannels) {
  EXPECT_EQ(to_u8(-0.2), 0);
  EXPECT_EQ(to_u8(1.7), 255);
  EXPECT_EQ(to_u8(127.4 / 255.0), 127);
  EXPECT_EQ(to_u8(127.6 / 255.0), 128);

  const auto path = fs::temp_directory_path() / "splatcarve_png_rgba.png";
  Image rgba(5, 3, 4, 0.25);
  rgba.at(4, 2, 0) = 1.0;
  write_png(path, rgba);
  const Image rgb = read_png_rgb(path);
  EXPECT_EQ(rgb.channels(), 3);
  EXPECT_EQ(rgb.width(), 5);
  EXPECT_EQ(rgb.at(4, 2, 0), 1.0);
  EXPECT_NEAR(rgb.at(0, 0, 1), 0.25, 0.5 / 255.0);
  EXPECT_THROW(write_png(path, Image(2, 2, 2)), Error);
  fs::remove(path);
}
