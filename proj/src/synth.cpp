#include "splatcarve/synth.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <numbers>

#include "splatcarve/error.hpp"

namespace splatcarve {

int SceneRng::integer(int lo, int hi) {
  if (hi < lo) throw Error(ErrorCode::InvalidArgument, "empty integer range");
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(uniform() * static_cast<double>(span));
}

void SceneSpec::validate() const {
  if (ellipsoids.empty()) throw Error(ErrorCode::InvalidArgument, "scene needs at least one ellipsoid");
  for (const auto& e : ellipsoids)
    if (!(e.semi_axes.minCoeff() > 0.0)) throw Error(ErrorCode::InvalidArgument, "semi-axes must be > 0");
  if (rig.count < 4) throw Error(ErrorCode::InvalidArgument, "ring rig needs at least 4 cameras");
  if (!(rig.radius > 0.0) || !(rig.focal > 0.0) || rig.width < 1 || rig.height_px < 1)
    throw Error(ErrorCode::InvalidArgument, "ring rig geometry must be positive");
  if (!(particle_spacing > 0.0) || !(particle_sigma > 0.0))
    throw Error(ErrorCode::InvalidArgument, "particle spacing and scale must be > 0");
  if (!(particle_opacity > 0.0 && particle_opacity <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "particle opacity must be in (0, 1]");
}

CameraRig make_ring_rig(const RingRig& rig) {
  std::vector<PinholeCamera> cams;
  for (int c = 0; c < rig.count; ++c) {
    const double a = 2.0 * std::numbers::pi * c / rig.count;
    const Vec3 pos = rig.target + Vec3(rig.radius * std::cos(a), rig.radius * std::sin(a), rig.height);
    cams.push_back(look_at(pos, rig.target, rig.focal, 0.5 * (rig.width - 1), 0.5 * (rig.height_px - 1),
                           rig.width, rig.height_px, "cam" + std::to_string(c)));
  }
  return CameraRig(std::move(cams));
}

namespace {

Mat3 rot_z(double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); }

// Knud Thomsen's approximation, within ~1% for any axes.
double ellipsoid_area(const Vec3& a) {
  constexpr double p = 1.6075;
  const double ab = std::pow(a.x() * a.y(), p), ac = std::pow(a.x() * a.z(), p), bc = std::pow(a.y() * a.z(), p);
  return 4.0 * std::numbers::pi * std::pow((ab + ac + bc) / 3.0, 1.0 / p);
}

}  // namespace

std::vector<GaussianParticle> scene_particles(const SceneSpec& spec, int frame) {
  spec.validate();
  const Mat3 r = rot_z(spec.motion.heading(frame));
  const Vec3 t = spec.motion.translation(frame);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  const double log_sigma = std::log(spec.particle_sigma * spec.particle_spacing);
  const Eigen::Quaterniond q(r);

  std::vector<GaussianParticle> out;
  for (const auto& e : spec.ellipsoids) {
    const auto n = static_cast<int>(std::ceil(ellipsoid_area(e.semi_axes) / (spec.particle_spacing * spec.particle_spacing)));
    for (int i = 0; i < n; ++i) {
      const double z = 1.0 - 2.0 * (i + 0.5) / n;
      const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden * i;
      const Vec3 u(rho * std::cos(phi), rho * std::sin(phi), z);
      GaussianParticle p;
      p.mean = t + r * (e.center + e.semi_axes.cwiseProduct(u));
      p.log_scale = Vec3::Constant(log_sigma);
      p.rotation = q;
      p.color = e.color;
      p.opacity = spec.particle_opacity;
      out.push_back(p);
    }
  }
  return out;
}

SyntheticFrame generate_scene(const SceneSpec& spec, int frame) {
  SyntheticFrame s;
  s.particles = scene_particles(spec, frame);
  s.rig = make_ring_rig(spec.rig);
  s.frame.index = frame;
  for (const auto& cam : s.rig) {
    const RenderedImage img = rasterize(s.particles, cam, spec.background);
    Image rgb(cam.width(), cam.height(), 3);
    Mask mask(cam.width(), cam.height());
    for (int row = 0; row < cam.height(); ++row)
      for (int col = 0; col < cam.width(); ++col) {
        for (int ch = 0; ch < 3; ++ch) rgb.at(col, row, ch) = img.at(col, row, ch);
        mask.at(col, row) = img.at(col, row, 3) >= 0.5;
      }
    s.frame.images.push_back(std::move(rgb));
    s.frame.masks.push_back(std::move(mask));
  }
  return s;
}

std::vector<std::uint8_t> hull_oracle(const SceneSpec& spec, const GridSpec& grid, int frame) {
  spec.validate();
  grid.validate();
  const CameraRig rig = make_ring_rig(spec.rig);
  const Mat3 r = rot_z(spec.motion.heading(frame));
  const Vec3 t = spec.motion.translation(frame);

  // camera centers in the body frame
  std::vector<Vec3> origins;
  for (const auto& cam : rig) origins.push_back(r.transpose() * (cam.center() - t));

  const auto n = static_cast<std::ptrdiff_t>(grid.voxel_count());
  std::vector<std::uint8_t> out(static_cast<std::size_t>(n), 0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t idx = 0; idx < n; ++idx) {
    const Vec3 x = grid.voxel_center(static_cast<std::size_t>(idx));
    const Vec3 xb = r.transpose() * (x - t);
    bool inside_all = true;
    for (std::size_t c = 0; c < rig.size() && inside_all; ++c) {
      const PinholeCamera& cam = rig[c];
      const Vec3 xc = cam.to_camera(x);
      if (!(xc.z() > 0.0)) {
        inside_all = false;
        break;
      }
      int col = 0, row = 0;
      if (!cam.pixel_index({cam.fx() * xc.x() / xc.z() + cam.cx(), cam.fy() * xc.y() / xc.z() + cam.cy()}, col, row)) {
        inside_all = false;
        break;
      }
      const Vec3 d = xb - origins[c];
      bool hit = false;
      for (const auto& e : spec.ellipsoids) {
        const Vec3 o = (origins[c] - e.center).cwiseQuotient(e.semi_axes);
        const Vec3 v = d.cwiseQuotient(e.semi_axes);
        const double a = v.squaredNorm(), b = o.dot(v), cc = o.squaredNorm() - 1.0;
        const double disc = b * b - a * cc;
        if (disc >= 0.0 && (-b + std::sqrt(disc)) / a > 0.0) {
          hit = true;
          break;
        }
      }
      inside_all = hit;
    }
    out[static_cast<std::size_t>(idx)] = inside_all;
  }
  return out;
}

SceneSpec random_scene(std::uint64_t seed) {
  SceneRng rng(seed);
  SceneSpec spec;
  const int count = rng.integer(1, 3);
  for (int i = 0; i < count; ++i) {
    Ellipsoid e;
    e.semi_axes = Vec3(rng.uniform(0.3, 0.6), rng.uniform(0.3, 0.6), rng.uniform(0.3, 0.6));
    const double reach = 1.0 - e.semi_axes.maxCoeff();
    e.center = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)) * (reach / std::sqrt(3.0));
    e.color = Vec3(rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9));
    spec.ellipsoids.push_back(e);
  }
  return spec;
}

SceneSpec sphere_scene(const Vec3& color) {
  SceneSpec spec;
  spec.ellipsoids.push_back({Vec3::Zero(), Vec3::Ones(), color});
  return spec;
}

double body_radius(const SceneSpec& spec) {
  double r = 0.0;
  for (const auto& e : spec.ellipsoids) r = std::max(r, e.center.norm() + e.semi_axes.maxCoeff());
  return r;
}

}  // namespace splatcarve
