#include "splatcarve/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "splatcarve/error.hpp"

namespace splatcarve {

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

std::uint8_t to_u8(double value) {
  const double scaled = std::clamp(value, 0.0, 1.0) * 255.0;
  return static_cast<std::uint8_t>(std::lround(scaled));
}

namespace {

struct PngBuffer {
  int width = 0;
  int height = 0;
  bool color = false;
  std::vector<std::uint8_t> rgb;  // always 3 channels
};

PngBuffer read_rgb8(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw Error(ErrorCode::MissingFile, "missing image file: " + path.string());
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str()))
    throw Error(ErrorCode::IoError, "cannot decode PNG " + path.string() + ": " + img.message);
  PngBuffer out;
  out.width = static_cast<int>(img.width);
  out.height = static_cast<int>(img.height);
  out.color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  // Decode with alpha so libpng does not composite, then drop it.
  img.format = PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> rgba(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, rgba.data(), 0, nullptr)) {
    png_image_free(&img);
    throw Error(ErrorCode::IoError, "cannot decode PNG " + path.string() + ": " + img.message);
  }
  out.rgb.resize(rgba.size() / 4 * 3);
  for (std::size_t p = 0, q = 0; p < rgba.size(); p += 4, q += 3)
    std::copy_n(rgba.begin() + static_cast<std::ptrdiff_t>(p), 3, out.rgb.begin() + static_cast<std::ptrdiff_t>(q));
  return out;
}

void write_raw(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes, int width,
               int height, png_uint_32 format) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = format;
  if (!png_image_write_to_file(&img, tmp.string().c_str(), 0, bytes.data(), 0, nullptr))
    throw Error(ErrorCode::IoError, "cannot write PNG " + path.string() + ": " + img.message);
  std::filesystem::rename(tmp, path);
}

}  // namespace

Image read_png_rgb(const std::filesystem::path& path) {
  const PngBuffer buf = read_rgb8(path);
  Image image(buf.width, buf.height, 3);
  std::transform(buf.rgb.begin(), buf.rgb.end(), image.data().begin(),
                 [](std::uint8_t v) { return v / 255.0; });
  return image;
}

std::vector<std::uint8_t> read_png_gray8(const std::filesystem::path& path, int& width,
                                         int& height) {
  const PngBuffer buf = read_rgb8(path);
  width = buf.width;
  height = buf.height;
  std::vector<std::uint8_t> gray(static_cast<std::size_t>(width) * height);
  for (std::size_t i = 0; i < gray.size(); ++i) {
    const auto* p = &buf.rgb[3 * i];
    gray[i] = buf.color ? static_cast<std::uint8_t>((p[0] + p[1] + p[2] + 1) / 3) : p[0];
  }
  return gray;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  png_uint_32 format = 0;
  switch (image.channels()) {
    case 1: format = PNG_FORMAT_GRAY; break;
    case 3: format = PNG_FORMAT_RGB; break;
    case 4: format = PNG_FORMAT_RGBA; break;
    default: throw Error(ErrorCode::BadDimensions, "PNG output needs 1, 3 or 4 channels");
  }
  std::vector<std::uint8_t> bytes(image.data().size());
  std::transform(image.data().begin(), image.data().end(), bytes.begin(), to_u8);
  write_raw(path, bytes, image.width(), image.height(), format);
}

void write_png(const std::filesystem::path& path, const Mask& mask) {
  std::vector<std::uint8_t> bytes(mask.data().size());
  std::transform(mask.data().begin(), mask.data().end(), bytes.begin(),
                 [](std::uint8_t v) { return static_cast<std::uint8_t>(v ? 255 : 0); });
  write_raw(path, bytes, mask.width(), mask.height(), PNG_FORMAT_GRAY);
}

}  // namespace splatcarve
