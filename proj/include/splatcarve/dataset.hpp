#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "splatcarve/camera.hpp"
#include "splatcarve/image.hpp"

namespace splatcarve {

// Synchronized images and masks for one frame, one entry per rig camera.
struct FrameSet {
  int index = 0;
  std::vector<Image> images;  // H x W x 3, [0,1]
  std::vector<Mask> masks;
};

// Dataset layout:
//   <root>/<camera name>/frame_<index>.png   8-bit RGB
//   <root>/<camera name>/mask_<index>.png    8-bit grayscale
// with <index> zero-padded to six digits.
std::filesystem::path frame_path(const std::filesystem::path& root, const PinholeCamera& cam, int index);
std::filesystem::path mask_path(const std::filesystem::path& root, const PinholeCamera& cam, int index);

constexpr std::uint8_t kMaskThreshold = 127;  // gray > 127 is foreground

Mask binarize(std::span<const std::uint8_t> gray, int width, int height);

FrameSet load_frame(const std::filesystem::path& root, int index, const CameraRig& rig);
void write_frame(const std::filesystem::path& root, const FrameSet& frame, const CameraRig& rig);

// Mean (u = col, v = row) of all set pixels; nullopt for an empty mask.
std::optional<Pixel> mask_centroid(const Mask& mask);

}  // namespace splatcarve
