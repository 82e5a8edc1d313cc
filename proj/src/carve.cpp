#include "splatcarve/carve.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "splatcarve/error.hpp"

namespace splatcarve {

void GridSpec::validate() const {
  if (base_resolution < 1) throw Error(ErrorCode::InvalidArgument, "grid base resolution must be >= 1");
  if (!(edge > 0.0)) throw Error(ErrorCode::InvalidArgument, "grid edge length must be positive");
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1 || dims[a] > base_resolution)
      throw Error(ErrorCode::InvalidArgument, "grid dims must lie in [1, base resolution]");
    if (offset[a] < 0 || offset[a] + dims[a] > base_resolution)
      throw Error(ErrorCode::InvalidArgument, "grid block exceeds the base lattice");
  }
}

std::array<int, 3> GridSpec::unravel(std::size_t idx) const {
  const int k = static_cast<int>(idx % dims[2]);
  idx /= dims[2];
  const int j = static_cast<int>(idx % dims[1]);
  const int i = static_cast<int>(idx / dims[1]);
  return {i, j, k};
}

Mat3 GridSpec::axes() const {
  const double c = std::cos(azimuth), s = std::sin(azimuth);
  Mat3 r;
  r << c, -s, 0.0,  //
      s, c, 0.0,    //
      0.0, 0.0, 1.0;
  return r;
}

Vec3 GridSpec::voxel_center(int i, int j, int k) const {
  const double half = 0.5 * base_resolution;
  const Vec3 local((i + offset[0] + 0.5 - half) * edge, (j + offset[1] + 0.5 - half) * edge,
                   (k + offset[2] + 0.5 - half) * edge);
  return center + axes() * local;
}

Vec3 GridSpec::voxel_center(std::size_t idx) const {
  const auto [i, j, k] = unravel(idx);
  return voxel_center(i, j, k);
}

double GridSpec::bounding_radius() const {
  return 0.5 * edge * std::sqrt(double(dims[0]) * dims[0] + double(dims[1]) * dims[1] +
                                double(dims[2]) * dims[2]);
}

namespace {

// Camera-frame coordinates of voxel (i, j, k) are origin + i*di + j*dj + k*dk.
struct VoxelToCamera {
  Vec3 origin, di, dj, dk;

  VoxelToCamera(const PinholeCamera& cam, const GridSpec& spec) {
    const Mat3 a = cam.rotation() * spec.axes() * spec.edge;
    const double half = 0.5 * spec.base_resolution;
    const Vec3 first(spec.offset[0] + 0.5 - half, spec.offset[1] + 0.5 - half,
                     spec.offset[2] + 0.5 - half);
    origin = cam.rotation() * spec.center + cam.translation() + a * first;
    di = a.col(0);
    dj = a.col(1);
    dk = a.col(2);
  }
};

inline bool nearest_pixel(const PinholeCamera& cam, const Vec3& xc, int& col, int& row) {
  if (!(xc.z() > 0.0)) return false;
  const double iz = 1.0 / xc.z();
  return cam.pixel_index({cam.fx() * xc.x() * iz + cam.cx(), cam.fy() * xc.y() * iz + cam.cy()},
                         col, row);
}

void check_inputs(std::span<const Mask> masks, const CameraRig& rig, const GridSpec& spec) {
  spec.validate();
  if (masks.size() != rig.size())
    throw Error(ErrorCode::DimensionMismatch, "one mask per camera is required");
  for (std::size_t c = 0; c < rig.size(); ++c)
    if (masks[c].width() != rig[c].width() || masks[c].height() != rig[c].height())
      throw Error(ErrorCode::DimensionMismatch, "mask size differs from camera " + rig[c].name());
}

}  // namespace

namespace {

struct MaskView {
  double fx, fy, cx, cy;
  int width, height;
  const std::uint8_t* data;
};

// Mask hit counts. Once a voxel can no longer reach `floor` hits the scan of
// the remaining cameras is skipped, so counts below `floor` are lower bounds
// (the value at or above it is exact). floor = 0 gives exact counts.
std::vector<std::uint8_t> count_hits(std::span<const Mask> masks, const CameraRig& rig, const GridSpec& spec,
                                     int floor) {
  check_inputs(masks, rig, spec);
  std::vector<VoxelToCamera> maps;
  std::vector<MaskView> views;
  for (std::size_t c = 0; c < rig.size(); ++c) {
    maps.emplace_back(rig[c], spec);
    views.push_back({rig[c].fx(), rig[c].fy(), rig[c].cx(), rig[c].cy(), rig[c].width(), rig[c].height(),
                     masks[c].data().data()});
  }

  const int nx = spec.dims[0], ny = spec.dims[1], nz = spec.dims[2];
  const auto ncam = static_cast<int>(rig.size());
  std::vector<std::uint8_t> counts(spec.voxel_count());

#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      for (int k = 0; k < nz; ++k) {
        int count = 0;
        for (int c = 0; c < ncam; ++c) {
          if (count + (ncam - c) < floor) break;
          const auto& m = maps[c];
          const Vec3 xc = m.origin + double(i) * m.di + double(j) * m.dj + double(k) * m.dk;
          if (!(xc.z() > 0.0)) continue;
          const MaskView& v = views[c];
          const double iz = 1.0 / xc.z();
          const double col = std::floor(v.fx * xc.x() * iz + v.cx + 0.5);
          const double row = std::floor(v.fy * xc.y() * iz + v.cy + 0.5);
          if (!(col >= 0.0 && col < v.width && row >= 0.0 && row < v.height)) continue;
          count += v.data[static_cast<std::size_t>(row) * v.width + static_cast<std::size_t>(col)] != 0;
        }
        counts[spec.linear(i, j, k)] = static_cast<std::uint8_t>(count);
      }
    }
  }
  return counts;
}

}  // namespace

std::vector<std::uint8_t> mask_counts(std::span<const Mask> masks, const CameraRig& rig,
                                      const GridSpec& spec) {
  return count_hits(masks, rig, spec, 0);
}

std::vector<std::uint8_t> carve_occupancy(std::span<const Mask> masks, const CameraRig& rig,
                                          const GridSpec& spec, int min_cameras) {
  if (min_cameras < 1 || min_cameras > static_cast<int>(rig.size()))
    throw Error(ErrorCode::InvalidArgument, "camera threshold must lie in [1, C]");
  auto counts = count_hits(masks, rig, spec, min_cameras);
  for (auto& c : counts) c = c >= min_cameras ? 1 : 0;
  return counts;
}

std::vector<float> carve_dual(std::span<const Mask> masks, const CameraRig& rig,
                              const GridSpec& spec) {
  const int ncam = static_cast<int>(rig.size());
  if (ncam < 2) throw Error(ErrorCode::InvalidArgument, "dual carving needs at least two cameras");
  const auto counts = count_hits(masks, rig, spec, ncam - 1);
  std::vector<float> occ(counts.size());
  std::transform(counts.begin(), counts.end(), occ.begin(), [ncam](std::uint8_t c) {
    return 0.5f * static_cast<float>((c >= ncam) + (c >= ncam - 1));
  });
  return occ;
}

std::vector<std::uint8_t> visibility(std::span<const float> occupancy, const CameraRig& rig,
                                     const GridSpec& spec, std::size_t camera) {
  spec.validate();
  if (occupancy.size() != spec.voxel_count())
    throw Error(ErrorCode::DimensionMismatch, "occupancy size does not match the grid");
  const auto& cam = rig[camera];

  std::vector<std::size_t> active;
  for (std::size_t v = 0; v < occupancy.size(); ++v)
    if (occupancy[v] > 0.0f) active.push_back(v);

  const VoxelToCamera map(cam, spec);
  const auto n = static_cast<std::ptrdiff_t>(active.size());
  std::vector<double> dist2(active.size());
  std::vector<std::int64_t> pixel(active.size());

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t a = 0; a < n; ++a) {
    const auto [i, j, k] = spec.unravel(active[a]);
    const Vec3 xc = map.origin + double(i) * map.di + double(j) * map.dj + double(k) * map.dk;
    dist2[a] = xc.squaredNorm();
    int col, row;
    pixel[a] = nearest_pixel(cam, xc, col, row) ? std::int64_t(row) * cam.width() + col : -1;
  }

  std::vector<std::size_t> order(active.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dist2[a] != dist2[b] ? dist2[a] < dist2[b] : active[a] < active[b];
  });

  std::vector<std::uint8_t> claimed(static_cast<std::size_t>(cam.width()) * cam.height(), 0);
  std::vector<std::uint8_t> visible(occupancy.size(), 0);
  for (auto a : order) {
    if (pixel[a] < 0) continue;
    auto& slot = claimed[static_cast<std::size_t>(pixel[a])];
    if (!slot) {
      slot = 1;
      visible[active[a]] = 1;
    }
  }
  return visible;
}

std::vector<float> assign_colors(std::span<const float> occupancy, const GridSpec& spec,
                                 std::span<const Image> images, const CameraRig& rig,
                                 std::span<const std::vector<std::uint8_t>> visible) {
  spec.validate();
  if (images.size() != rig.size() || visible.size() != rig.size())
    throw Error(ErrorCode::DimensionMismatch, "one image and one visibility mask per camera");
  std::vector<VoxelToCamera> maps;
  for (const auto& cam : rig) maps.emplace_back(cam, spec);

  const auto n = static_cast<std::ptrdiff_t>(spec.voxel_count());
  const auto ncam = rig.size();
  std::vector<float> color(3 * spec.voxel_count(), 0.0f);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t v = 0; v < n; ++v) {
    if (!(occupancy[v] > 0.0f)) continue;
    const auto [i, j, k] = spec.unravel(static_cast<std::size_t>(v));
    double acc[3] = {0.0, 0.0, 0.0};
    double wsum = 0.0;
    for (std::size_t c = 0; c < ncam; ++c) {
      const auto& m = maps[c];
      const Vec3 xc = m.origin + double(i) * m.di + double(j) * m.dj + double(k) * m.dk;
      int col, row;
      if (!nearest_pixel(rig[c], xc, col, row)) continue;
      const double w = visible[c][v] ? 1.0 : kOccludedWeight;
      const double* px = images[c].pixel(col, row);
      for (int ch = 0; ch < 3; ++ch) acc[ch] += w * px[ch];
      wsum += w;
    }
    if (wsum > 0.0)
      for (int ch = 0; ch < 3; ++ch) color[3 * v + ch] = static_cast<float>(acc[ch] / wsum);
  }
  return color;
}

VoxelGrid carve_volume(std::span<const Mask> masks, std::span<const Image> images,
                       const CameraRig& rig, const GridSpec& spec) {
  VoxelGrid grid;
  grid.spec = spec;
  grid.occupancy = carve_dual(masks, rig, spec);
  std::vector<std::vector<std::uint8_t>> vis;
  vis.reserve(rig.size());
  for (std::size_t c = 0; c < rig.size(); ++c) vis.push_back(visibility(grid.occupancy, rig, spec, c));
  grid.color = assign_colors(grid.occupancy, spec, images, rig, vis);
  return grid;
}

double edge_from_center_history(std::span<const Vec3> centers, int base_resolution, double scale) {
  double longest = 0.0;
  for (std::size_t a = 0; a < centers.size(); ++a)
    for (std::size_t b = a + 1; b < centers.size(); ++b)
      longest = std::max(longest, (centers[a] - centers[b]).norm());
  if (!(longest > 0.0))
    throw Error(ErrorCode::ConfigInvalid,
                "center history has no spread; set the grid edge length explicitly");
  return scale * longest / base_resolution;
}

void accumulate_usage(std::span<std::uint32_t> usage, const VoxelGrid& grid) {
  const auto& s = grid.spec;
  const auto base = static_cast<std::size_t>(s.base_resolution);
  if (usage.size() != base * base * base)
    throw Error(ErrorCode::DimensionMismatch, "usage array must cover the full base lattice");
  for (std::size_t v = 0; v < grid.occupancy.size(); ++v) {
    if (!(grid.occupancy[v] > 0.0f)) continue;
    const auto [i, j, k] = s.unravel(v);
    const std::size_t bi = i + s.offset[0], bj = j + s.offset[1], bk = k + s.offset[2];
    ++usage[(bi * base + bj) * base + bk];
  }
}

namespace {

bool used_box(std::span<const std::uint32_t> usage, int base, std::uint32_t threshold,
              std::array<int, 3>& lo, std::array<int, 3>& hi) {
  lo = {base, base, base};
  hi = {-1, -1, -1};
  std::size_t idx = 0;
  for (int i = 0; i < base; ++i)
    for (int j = 0; j < base; ++j)
      for (int k = 0; k < base; ++k, ++idx) {
        if (usage[idx] < threshold) continue;
        const int p[3] = {i, j, k};
        for (int a = 0; a < 3; ++a) {
          lo[a] = std::min(lo[a], p[a]);
          hi[a] = std::max(hi[a], p[a]);
        }
      }
  return hi[0] >= 0;
}

TruncationBox pad_box(const std::array<int, 3>& lo, const std::array<int, 3>& hi, int base,
                      int alignment) {
  TruncationBox box;
  for (int a = 0; a < 3; ++a) {
    const int extent = hi[a] - lo[a] + 1;
    const int padded = std::min(base, (extent + alignment - 1) / alignment * alignment);
    const int start = lo[a] - (padded - extent) / 2;
    box.offset[a] = std::clamp(start, 0, base - padded);
    box.dims[a] = padded;
  }
  return box;
}

}  // namespace

TruncationBox truncate_volume(std::span<const std::uint32_t> usage, int base_resolution,
                              const TruncateOptions& options) {
  const auto base = static_cast<std::size_t>(base_resolution);
  if (usage.size() != base * base * base)
    throw Error(ErrorCode::DimensionMismatch, "usage array must cover the full base lattice");
  if (options.alignment < 1) throw Error(ErrorCode::InvalidArgument, "alignment must be >= 1");

  std::vector<std::uint32_t> levels(usage.begin(), usage.end());
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

  std::uint32_t threshold = std::max<std::uint32_t>(options.min_usage, 1);
  for (;;) {
    std::array<int, 3> lo, hi;
    if (!used_box(usage, base_resolution, threshold, lo, hi))
      throw Error(ErrorCode::EmptyUsage, "no voxel reaches the usage threshold");
    TruncationBox box = pad_box(lo, hi, base_resolution, options.alignment);
    const std::size_t voxels = std::size_t(box.dims[0]) * box.dims[1] * box.dims[2];
    if (options.max_voxels == 0 || voxels <= options.max_voxels) return box;
    auto next = std::upper_bound(levels.begin(), levels.end(), threshold);
    if (next == levels.end())
      throw Error(ErrorCode::EmptyUsage, "no usage threshold fits the voxel budget");
    threshold = *next;
  }
}

GridSpec apply_truncation(const GridSpec& spec, const TruncationBox& box) {
  GridSpec out = spec;
  out.offset = box.offset;
  out.dims = box.dims;
  out.validate();
  return out;
}

}  // namespace splatcarve
