#include "splatcarve/carve.hpp"
#include "splatcarve/error.hpp"

namespace splatcarve::reference {

std::vector<std::uint8_t> mask_counts(std::span<const Mask> masks, const CameraRig& rig,
                                      const GridSpec& spec) {
  spec.validate();
  std::vector<std::uint8_t> counts(spec.voxel_count(), 0);
  for (std::size_t v = 0; v < counts.size(); ++v) {
    const Vec3 x = spec.voxel_center(v);
    for (std::size_t c = 0; c < rig.size(); ++c) {
      const auto& cam = rig[c];
      const Vec3 xc = cam.to_camera(x);
      if (!(xc.z() > 0.0)) continue;
      const Projection p = project(cam, x);
      int col, row;
      if (cam.pixel_index(p.pixel, col, row) && masks[c].at(col, row)) ++counts[v];
    }
  }
  return counts;
}

std::vector<float> assign_colors(std::span<const float> occupancy, const GridSpec& spec,
                                 std::span<const Image> images, const CameraRig& rig,
                                 std::span<const std::vector<std::uint8_t>> visible) {
  std::vector<float> color(3 * spec.voxel_count(), 0.0f);
  for (std::size_t v = 0; v < spec.voxel_count(); ++v) {
    if (!(occupancy[v] > 0.0f)) continue;
    const Vec3 x = spec.voxel_center(v);
    double acc[3] = {0.0, 0.0, 0.0};
    double wsum = 0.0;
    for (std::size_t c = 0; c < rig.size(); ++c) {
      const auto& cam = rig[c];
      if (!(cam.to_camera(x).z() > 0.0)) continue;
      int col, row;
      if (!cam.pixel_index(project(cam, x).pixel, col, row)) continue;
      const double w = visible[c][v] ? 1.0 : kOccludedWeight;
      for (int ch = 0; ch < 3; ++ch) acc[ch] += w * images[c].at(col, row, ch);
      wsum += w;
    }
    if (wsum > 0.0)
      for (int ch = 0; ch < 3; ++ch) color[3 * v + ch] = static_cast<float>(acc[ch] / wsum);
  }
  return color;
}

}  // namespace splatcarve::reference
