#pragma once

#include <Eigen/Geometry>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "splatcarve/camera.hpp"
#include "splatcarve/carve.hpp"
#include "splatcarve/image.hpp"

namespace splatcarve {

struct GaussianParticle {
  Vec3 mean = Vec3::Zero();
  Vec3 log_scale = Vec3::Zero();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Vec3 color = Vec3::Zero();
  double opacity = 1.0;

  // R diag(exp(2 s)) R^T
  Mat3 covariance() const;
};

struct SplatDefaults {
  double render_threshold = 0.5;
  double size_factor = 0.7;  // isotropic scale = size_factor * edge
  double opacity = 0.9;
};

// One particle per voxel with occupancy >= render_threshold, centered on the
// voxel, in voxel index order.
std::vector<GaussianParticle> voxels_to_gaussians(const VoxelGrid& grid,
                                                  const SplatDefaults& defaults = {});

struct ProjectedGaussian {
  Vec2 mean = Vec2::Zero();
  Mat2 covariance = Mat2::Identity();
  double depth = 0.0;
};

// Jacobian of the pinhole map at camera-frame point `xc`.
Eigen::Matrix<double, 2, 3> pinhole_jacobian(const PinholeCamera& cam, const Vec3& xc);

// Sigma' = J W Sigma W^T J^T + floor * I with W the camera rotation.
ProjectedGaussian project_gaussian(const GaussianParticle& particle, const PinholeCamera& cam,
                                   double covariance_floor = 0.3);

struct RasterConfig {
  double cutoff_sigma = 3.0;
  double covariance_floor = 0.3;
  double min_transmittance = 1e-4;
  int tile_size = 16;
};

// H x W x 4 image: composited RGB over the background, then coverage
// 1 - prod(1 - a_i).
using RenderedImage = Image;

// Screen-space footprint of one particle, ready for compositing.
struct Footprint {
  std::uint32_t particle = 0;
  Vec2 mean = Vec2::Zero();
  double conic_xx = 0.0, conic_xy = 0.0, conic_yy = 0.0;  // inverse 2D covariance
  double depth = 0.0;
  double opacity = 0.0;
  Vec3 color = Vec3::Zero();
  int col_min = 0, col_max = -1, row_min = 0, row_max = -1;

  double mahalanobis2(double u, double v) const {
    const double du = u - mean.x(), dv = v - mean.y();
    return conic_xx * du * du + 2.0 * conic_xy * du * dv + conic_yy * dv * dv;
  }
};

// Footprints sorted front to back (depth, then particle index) and binned
// into square tiles. Every consumer of the compositing order goes through
// this plan.
struct RasterPlan {
  int width = 0, height = 0, tile_size = 16;
  int tiles_x = 0, tiles_y = 0;
  double cutoff2 = 9.0;
  double min_transmittance = 1e-4;
  std::vector<Footprint> footprints;
  std::vector<std::vector<std::uint32_t>> tiles;  // indices into footprints

  const std::vector<std::uint32_t>& tile_at(int col, int row) const {
    return tiles[static_cast<std::size_t>(row / tile_size) * tiles_x + col / tile_size];
  }
};

RasterPlan plan_raster(std::span<const GaussianParticle> particles, const PinholeCamera& cam,
                       const RasterConfig& config = {});

struct Contribution {
  std::uint32_t particle = 0;
  double gaussian = 0.0;  // exp(-d^2 / 2)
  double alpha = 0.0;     // opacity * gaussian
};

// Front-to-back contributions at one pixel in compositing order, with the
// same cutoff and early-exit rule as the rasterizer. Returns the final
// transmittance.
double trace_pixel(const RasterPlan& plan, int col, int row, std::vector<Contribution>& out);

RenderedImage rasterize(std::span<const GaussianParticle> particles, const PinholeCamera& cam,
                        const Vec3& background, const RasterConfig& config = {});

// Particle file: little-endian uint32 count, then per particle 14 float32
// values: mean(3), log_scale(3), quaternion w,x,y,z (4), color(3), opacity.
void write_particles(const std::filesystem::path& path, std::span<const GaussianParticle> particles);
std::vector<GaussianParticle> read_particles(const std::filesystem::path& path);

namespace reference {

// Untiled serial rasterizer over the globally sorted footprint list.
RenderedImage rasterize(std::span<const GaussianParticle> particles, const PinholeCamera& cam,
                        const Vec3& background, const RasterConfig& config = {});

}  // namespace reference

}  // namespace splatcarve
