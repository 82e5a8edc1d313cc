#include "splatcarve/splat.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "splatcarve/error.hpp"
#include "splatcarve/io.hpp"

namespace splatcarve {

Mat3 GaussianParticle::covariance() const {
  const Mat3 r = rotation.normalized().toRotationMatrix();
  const Vec3 var = (2.0 * log_scale).array().exp();
  return r * var.asDiagonal() * r.transpose();
}

std::vector<GaussianParticle> voxels_to_gaussians(const VoxelGrid& grid, const SplatDefaults& defaults) {
  if (!(defaults.render_threshold > 0.0 && defaults.render_threshold <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "render threshold must lie in (0, 1]");
  const double log_s = std::log(defaults.size_factor * grid.spec.edge);
  std::vector<GaussianParticle> out;
  for (std::size_t v = 0; v < grid.occupancy.size(); ++v) {
    if (grid.occupancy[v] < defaults.render_threshold) continue;
    GaussianParticle p;
    p.mean = grid.spec.voxel_center(v);
    p.log_scale = Vec3::Constant(log_s);
    p.color = Vec3(grid.color[3 * v], grid.color[3 * v + 1], grid.color[3 * v + 2]);
    p.opacity = defaults.opacity;
    out.push_back(p);
  }
  return out;
}

Eigen::Matrix<double, 2, 3> pinhole_jacobian(const PinholeCamera& cam, const Vec3& xc) {
  const double iz = 1.0 / xc.z();
  Eigen::Matrix<double, 2, 3> j;
  j << cam.fx() * iz, 0.0, -cam.fx() * xc.x() * iz * iz,  //
      0.0, cam.fy() * iz, -cam.fy() * xc.y() * iz * iz;
  return j;
}

ProjectedGaussian project_gaussian(const GaussianParticle& particle, const PinholeCamera& cam,
                                   double covariance_floor) {
  const Vec3 xc = cam.to_camera(particle.mean);
  if (!(xc.z() > 0.0)) throw Error(ErrorCode::PointBehindCamera, "particle is behind the camera");
  const Eigen::Matrix<double, 2, 3> jw = pinhole_jacobian(cam, xc) * cam.rotation();
  ProjectedGaussian out;
  out.covariance = jw * particle.covariance() * jw.transpose();
  out.covariance = (0.5 * (out.covariance + out.covariance.transpose())).eval();
  out.covariance += covariance_floor * Mat2::Identity();
  out.mean = Vec2(cam.fx() * xc.x() / xc.z() + cam.cx(), cam.fy() * xc.y() / xc.z() + cam.cy());
  out.depth = xc.z();
  return out;
}

RasterPlan plan_raster(std::span<const GaussianParticle> particles, const PinholeCamera& cam,
                       const RasterConfig& config) {
  if (config.tile_size < 1) throw Error(ErrorCode::InvalidArgument, "tile size must be >= 1");
  RasterPlan plan;
  plan.width = cam.width();
  plan.height = cam.height();
  plan.tile_size = config.tile_size;
  plan.tiles_x = (plan.width + config.tile_size - 1) / config.tile_size;
  plan.tiles_y = (plan.height + config.tile_size - 1) / config.tile_size;
  plan.cutoff2 = config.cutoff_sigma * config.cutoff_sigma;
  plan.min_transmittance = config.min_transmittance;

  const auto n = static_cast<std::ptrdiff_t>(particles.size());
  std::vector<Footprint> all(particles.size());
  std::vector<std::uint8_t> keep(particles.size(), 0);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& p = particles[i];
    if (!(cam.to_camera(p.mean).z() > 1e-9)) continue;
    const ProjectedGaussian g = project_gaussian(p, cam, config.covariance_floor);
    const double det = g.covariance.determinant();
    if (!(det > 0.0)) continue;
    Footprint& f = all[i];
    f.particle = static_cast<std::uint32_t>(i);
    f.mean = g.mean;
    f.conic_xx = g.covariance(1, 1) / det;
    f.conic_xy = -g.covariance(0, 1) / det;
    f.conic_yy = g.covariance(0, 0) / det;
    f.depth = g.depth;
    f.opacity = p.opacity;
    f.color = p.color;
    const double ru = config.cutoff_sigma * std::sqrt(g.covariance(0, 0));
    const double rv = config.cutoff_sigma * std::sqrt(g.covariance(1, 1));
    const double cmin = std::max(0.0, std::ceil(g.mean.x() - ru));
    const double cmax = std::min(plan.width - 1.0, std::floor(g.mean.x() + ru));
    const double rmin = std::max(0.0, std::ceil(g.mean.y() - rv));
    const double rmax = std::min(plan.height - 1.0, std::floor(g.mean.y() + rv));
    if (cmin > cmax || rmin > rmax) continue;
    f.col_min = static_cast<int>(cmin);
    f.col_max = static_cast<int>(cmax);
    f.row_min = static_cast<int>(rmin);
    f.row_max = static_cast<int>(rmax);
    keep[i] = 1;
  }

  for (std::size_t i = 0; i < all.size(); ++i)
    if (keep[i]) plan.footprints.push_back(all[i]);
  std::sort(plan.footprints.begin(), plan.footprints.end(), [](const Footprint& a, const Footprint& b) {
    return a.depth != b.depth ? a.depth < b.depth : a.particle < b.particle;
  });

  plan.tiles.assign(static_cast<std::size_t>(plan.tiles_x) * plan.tiles_y, {});
  const int ts = plan.tile_size;
  for (std::uint32_t s = 0; s < plan.footprints.size(); ++s) {
    const auto& f = plan.footprints[s];
    for (int ty = f.row_min / ts; ty <= f.row_max / ts; ++ty)
      for (int tx = f.col_min / ts; tx <= f.col_max / ts; ++tx)
        plan.tiles[static_cast<std::size_t>(ty) * plan.tiles_x + tx].push_back(s);
  }
  return plan;
}

double trace_pixel(const RasterPlan& plan, int col, int row, std::vector<Contribution>& out) {
  out.clear();
  double transmittance = 1.0;
  for (auto s : plan.tile_at(col, row)) {
    const auto& f = plan.footprints[s];
    const double d2 = f.mahalanobis2(col, row);
    if (d2 > plan.cutoff2) continue;
    const double g = std::exp(-0.5 * d2);
    const double a = f.opacity * g;
    out.push_back({f.particle, g, a});
    transmittance *= 1.0 - a;
    if (transmittance < plan.min_transmittance) break;
  }
  return transmittance;
}

namespace {

inline void composite(const RasterPlan& plan, std::span<const std::uint32_t> order, int col, int row,
                      const Vec3& background, double* px) {
  double t = 1.0;
  double r = 0.0, g = 0.0, b = 0.0;
  for (auto s : order) {
    const auto& f = plan.footprints[s];
    const double d2 = f.mahalanobis2(col, row);
    if (d2 > plan.cutoff2) continue;
    const double a = f.opacity * std::exp(-0.5 * d2);
    const double w = t * a;
    r += w * f.color.x();
    g += w * f.color.y();
    b += w * f.color.z();
    t *= 1.0 - a;
    if (t < plan.min_transmittance) break;
  }
  px[0] = r + t * background.x();
  px[1] = g + t * background.y();
  px[2] = b + t * background.z();
  px[3] = 1.0 - t;
}

}  // namespace

RenderedImage rasterize(std::span<const GaussianParticle> particles, const PinholeCamera& cam,
                        const Vec3& background, const RasterConfig& config) {
  const RasterPlan plan = plan_raster(particles, cam, config);
  RenderedImage image(plan.width, plan.height, 4);
  const int ntiles = plan.tiles_x * plan.tiles_y;

#pragma omp parallel for schedule(dynamic, 4)
  for (int t = 0; t < ntiles; ++t) {
    const int tx = t % plan.tiles_x, ty = t / plan.tiles_x;
    const auto& list = plan.tiles[t];
    const int c0 = tx * plan.tile_size, r0 = ty * plan.tile_size;
    const int c1 = std::min(c0 + plan.tile_size, plan.width);
    const int r1 = std::min(r0 + plan.tile_size, plan.height);
    for (int row = r0; row < r1; ++row)
      for (int col = c0; col < c1; ++col) composite(plan, list, col, row, background, image.pixel(col, row));
  }
  return image;
}

namespace reference {

RenderedImage rasterize(std::span<const GaussianParticle> particles, const PinholeCamera& cam,
                        const Vec3& background, const RasterConfig& config) {
  const RasterPlan plan = plan_raster(particles, cam, config);
  std::vector<std::uint32_t> all(plan.footprints.size());
  std::iota(all.begin(), all.end(), 0u);
  RenderedImage image(plan.width, plan.height, 4);
  for (int row = 0; row < plan.height; ++row)
    for (int col = 0; col < plan.width; ++col) composite(plan, all, col, row, background, image.pixel(col, row));
  return image;
}

}  // namespace reference

void write_particles(const std::filesystem::path& path, std::span<const GaussianParticle> particles) {
  std::string bytes;
  bytes.reserve(4 + 56 * particles.size());
  io::append_u32(bytes, static_cast<std::uint32_t>(particles.size()));
  for (const auto& p : particles) {
    for (int a = 0; a < 3; ++a) io::append_f32(bytes, static_cast<float>(p.mean[a]));
    for (int a = 0; a < 3; ++a) io::append_f32(bytes, static_cast<float>(p.log_scale[a]));
    io::append_f32(bytes, static_cast<float>(p.rotation.w()));
    io::append_f32(bytes, static_cast<float>(p.rotation.x()));
    io::append_f32(bytes, static_cast<float>(p.rotation.y()));
    io::append_f32(bytes, static_cast<float>(p.rotation.z()));
    for (int a = 0; a < 3; ++a) io::append_f32(bytes, static_cast<float>(p.color[a]));
    io::append_f32(bytes, static_cast<float>(p.opacity));
  }
  io::write_atomic(path, bytes);
}

std::vector<GaussianParticle> read_particles(const std::filesystem::path& path) {
  const std::string bytes = io::read_file(path);
  std::size_t off = 0;
  const std::uint32_t count = io::read_u32(bytes, off);
  if (bytes.size() != 4 + 56ull * count)
    throw Error(ErrorCode::FormatError, "particle file size does not match its count header");
  std::vector<GaussianParticle> out(count);
  for (auto& p : out) {
    for (int a = 0; a < 3; ++a) p.mean[a] = io::read_f32(bytes, off);
    for (int a = 0; a < 3; ++a) p.log_scale[a] = io::read_f32(bytes, off);
    const double w = io::read_f32(bytes, off);
    const double x = io::read_f32(bytes, off);
    const double y = io::read_f32(bytes, off);
    const double z = io::read_f32(bytes, off);
    p.rotation = Eigen::Quaterniond(w, x, y, z).normalized();
    for (int a = 0; a < 3; ++a) p.color[a] = io::read_f32(bytes, off);
    p.opacity = io::read_f32(bytes, off);
  }
  return out;
}

}  // namespace splatcarve
