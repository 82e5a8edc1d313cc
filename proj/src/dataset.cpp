#include "splatcarve/dataset.hpp"

#include <cstdio>

#include "splatcarve/error.hpp"

namespace splatcarve {

namespace {

std::string padded(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06d", index);
  return buf;
}

void check_dims(int w, int h, const PinholeCamera& cam, const std::filesystem::path& path) {
  if (w != cam.width() || h != cam.height())
    throw Error(ErrorCode::DimensionMismatch,
                path.string() + " is " + std::to_string(w) + "x" + std::to_string(h) +
                    ", camera expects " + std::to_string(cam.width()) + "x" +
                    std::to_string(cam.height()));
}

}  // namespace

std::filesystem::path frame_path(const std::filesystem::path& root, const PinholeCamera& cam, int index) {
  return root / cam.name() / ("frame_" + padded(index) + ".png");
}

std::filesystem::path mask_path(const std::filesystem::path& root, const PinholeCamera& cam, int index) {
  return root / cam.name() / ("mask_" + padded(index) + ".png");
}

Mask binarize(std::span<const std::uint8_t> gray, int width, int height) {
  Mask mask(width, height);
  for (std::size_t i = 0; i < gray.size(); ++i) mask.data()[i] = gray[i] > kMaskThreshold ? 1 : 0;
  return mask;
}

FrameSet load_frame(const std::filesystem::path& root, int index, const CameraRig& rig) {
  FrameSet frame;
  frame.index = index;
  frame.images.resize(rig.size());
  frame.masks.resize(rig.size());
  for (std::size_t c = 0; c < rig.size(); ++c) {
    const auto& cam = rig[c];
    const auto fpath = frame_path(root, cam, index);
    const auto mpath = mask_path(root, cam, index);
    if (!std::filesystem::exists(fpath)) throw Error(ErrorCode::MissingFile, "missing frame " + fpath.string());
    if (!std::filesystem::exists(mpath)) throw Error(ErrorCode::MissingFile, "missing mask " + mpath.string());
    frame.images[c] = read_png_rgb(fpath);
    check_dims(frame.images[c].width(), frame.images[c].height(), cam, fpath);
    int w = 0, h = 0;
    const auto gray = read_png_gray8(mpath, w, h);
    check_dims(w, h, cam, mpath);
    frame.masks[c] = binarize(gray, w, h);
  }
  return frame;
}

void write_frame(const std::filesystem::path& root, const FrameSet& frame, const CameraRig& rig) {
  for (std::size_t c = 0; c < rig.size(); ++c) {
    write_png(frame_path(root, rig[c], frame.index), frame.images.at(c));
    write_png(mask_path(root, rig[c], frame.index), frame.masks.at(c));
  }
}

std::optional<Pixel> mask_centroid(const Mask& mask) {
  double su = 0.0, sv = 0.0;
  std::size_t n = 0;
  for (int row = 0; row < mask.height(); ++row) {
    for (int col = 0; col < mask.width(); ++col) {
      if (mask.at(col, row)) {
        su += col;
        sv += row;
        ++n;
      }
    }
  }
  if (n == 0) return std::nullopt;
  return Pixel{su / static_cast<double>(n), sv / static_cast<double>(n)};
}

}  // namespace splatcarve
