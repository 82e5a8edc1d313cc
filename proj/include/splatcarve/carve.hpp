#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "splatcarve/camera.hpp"
#include "splatcarve/image.hpp"

namespace splatcarve {

// Oriented cubic lattice. The full lattice has `base_resolution` cells per
// axis and is centered on `center`; the stored block is the sub-box starting
// at `offset` with extent `dims`. The first axis is rotated by `azimuth`
// about world z; the third axis is world z.
struct GridSpec {
  int base_resolution = 112;
  std::array<int, 3> dims{112, 112, 112};
  std::array<int, 3> offset{0, 0, 0};
  double edge = 0.01;
  Vec3 center = Vec3::Zero();
  double azimuth = 0.0;

  void validate() const;
  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t linear(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * dims[1] + j) * dims[2] + k;
  }
  std::array<int, 3> unravel(std::size_t idx) const;
  Mat3 axes() const;  // columns are the grid axes in world coordinates
  Vec3 voxel_center(int i, int j, int k) const;
  Vec3 voxel_center(std::size_t idx) const;
  double bounding_radius() const;  // radius of the sphere enclosing the stored block
};

// Occupancy in {0, 0.5, 1} after dual-threshold carving plus RGB per voxel.
// Storage is x-major: index = (i * dy + j) * dz + k.
struct VoxelGrid {
  GridSpec spec;
  std::vector<float> occupancy;
  std::vector<float> color;  // 3 per voxel
};

// Number of cameras whose mask is set at the nearest pixel to each voxel
// center. Projections outside an image or behind a camera count as unmasked.
std::vector<std::uint8_t> mask_counts(std::span<const Mask> masks, const CameraRig& rig,
                                      const GridSpec& spec);

// 1 where at least `min_cameras` masks agree, else 0.
std::vector<std::uint8_t> carve_occupancy(std::span<const Mask> masks, const CameraRig& rig,
                                          const GridSpec& spec, int min_cameras);

// Mean of the N = C and N = C - 1 binary volumes.
std::vector<float> carve_dual(std::span<const Mask> masks, const CameraRig& rig,
                              const GridSpec& spec);

// Depth-buffer visibility from one camera. Voxels with occupancy > 0 are
// processed nearest first (ties by index); the first voxel to reach a pixel
// is visible, later ones are occluded. Voxels that land outside the image are
// reported as not visible.
std::vector<std::uint8_t> visibility(std::span<const float> occupancy, const CameraRig& rig,
                                     const GridSpec& spec, std::size_t camera);

constexpr double kOccludedWeight = 0.25;

// Weighted mean of nearest-pixel samples: 1 for visible, 0.25 for occluded,
// 0 outside the image. Voxels with occupancy 0 or no weight get black.
std::vector<float> assign_colors(std::span<const float> occupancy, const GridSpec& spec,
                                 std::span<const Image> images, const CameraRig& rig,
                                 std::span<const std::vector<std::uint8_t>> visible);

// Full per-frame carve: dual occupancy, visibility per camera, colors.
VoxelGrid carve_volume(std::span<const Mask> masks, std::span<const Image> images,
                       const CameraRig& rig, const GridSpec& spec);

// Edge length so that the full lattice spans `scale` times the largest
// pairwise distance between the given centers.
double edge_from_center_history(std::span<const Vec3> centers, int base_resolution,
                                double scale = 1.2);

struct TruncationBox {
  std::array<int, 3> offset{0, 0, 0};
  std::array<int, 3> dims{0, 0, 0};
};

struct TruncateOptions {
  std::uint32_t min_usage = 1;
  int alignment = 16;
  // Upper bound on the voxel count of the returned box; 0 disables it. When
  // exceeded, the usage threshold is raised until the box fits.
  std::size_t max_voxels = 0;
};

// Adds one to `usage` (indexed over the full base lattice) for every voxel of
// `grid` with occupancy > 0.
void accumulate_usage(std::span<std::uint32_t> usage, const VoxelGrid& grid);

TruncationBox truncate_volume(std::span<const std::uint32_t> usage, int base_resolution,
                              const TruncateOptions& options = {});

GridSpec apply_truncation(const GridSpec& spec, const TruncationBox& box);

// Volume file: raw little-endian float32 in (x, y, z, channel) order with
// channels (occupancy, r, g, b), plus a JSON header at `<stem>.json`.
void write_volume(const std::filesystem::path& bin_path, const VoxelGrid& grid);
VoxelGrid read_volume(const std::filesystem::path& bin_path);

namespace reference {

// Straightforward serial versions kept for testing and benchmarking.
std::vector<std::uint8_t> mask_counts(std::span<const Mask> masks, const CameraRig& rig,
                                      const GridSpec& spec);
std::vector<float> assign_colors(std::span<const float> occupancy, const GridSpec& spec,
                                 std::span<const Image> images, const CameraRig& rig,
                                 std::span<const std::vector<std::uint8_t>> visible);

}  // namespace reference

}  // namespace splatcarve
