#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace splatcarve {

// Interleaved row-major image with double channels, nominally in [0,1].
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, double fill = 0.0)
      : width_(width), height_(height), channels_(channels),
        data_(static_cast<std::size_t>(width) * height * channels, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  double& at(int col, int row, int ch) { return data_[index(col, row, ch)]; }
  double at(int col, int row, int ch) const { return data_[index(col, row, ch)]; }
  double* pixel(int col, int row) { return data_.data() + index(col, row, 0); }
  const double* pixel(int col, int row) const { return data_.data() + index(col, row, 0); }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool operator==(const Image&) const = default;

 private:
  std::size_t index(int col, int row, int ch) const {
    return (static_cast<std::size_t>(row) * width_ + col) * channels_ + ch;
  }

  int width_ = 0, height_ = 0, channels_ = 0;
  std::vector<double> data_;
};

// Binary mask with values in {0,1}.
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height, std::uint8_t fill = 0)
      : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return data_.size(); }

  std::uint8_t& at(int col, int row) { return data_[static_cast<std::size_t>(row) * width_ + col]; }
  std::uint8_t at(int col, int row) const { return data_[static_cast<std::size_t>(row) * width_ + col]; }

  std::vector<std::uint8_t>& data() { return data_; }
  const std::vector<std::uint8_t>& data() const { return data_; }
  std::size_t count() const;

  bool operator==(const Mask&) const = default;

 private:
  int width_ = 0, height_ = 0;
  std::vector<std::uint8_t> data_;
};

// 8-bit PNG I/O. Reads scale to [0,1]; writes round to nearest and clamp.
// Alpha in RGB inputs is dropped.
Image read_png_rgb(const std::filesystem::path& path);
// Raw 8-bit gray levels (RGB inputs are averaged).
std::vector<std::uint8_t> read_png_gray8(const std::filesystem::path& path, int& width, int& height);
void write_png(const std::filesystem::path& path, const Image& image);  // 1, 3 or 4 channels
void write_png(const std::filesystem::path& path, const Mask& mask);    // 0 -> 0, 1 -> 255

std::uint8_t to_u8(double value);

}  // namespace splatcarve
