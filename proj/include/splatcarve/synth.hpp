#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "splatcarve/camera.hpp"
#include "splatcarve/carve.hpp"
#include "splatcarve/dataset.hpp"
#include "splatcarve/splat.hpp"

namespace splatcarve {

// Portable seeded generator. std::mt19937_64 output is fixed by the
// standard; the conversion to double is done here because the standard
// distributions are implementation-defined.
class SceneRng {
 public:
  explicit SceneRng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int integer(int lo, int hi);  // inclusive bounds

 private:
  std::mt19937_64 engine_;
};

struct Ellipsoid {
  Vec3 center = Vec3::Zero();  // body frame
  Vec3 semi_axes = Vec3::Ones();
  Vec3 color = Vec3::Constant(0.5);
};

// C cameras evenly spaced on a horizontal circle, all looking at `target`.
struct RingRig {
  int count = 6;
  double radius = 3.2;
  double height = 1.2;
  Vec3 target = Vec3::Zero();
  int width = 384;
  int height_px = 384;
  double focal = 400.0;
};

// Rigid motion: body point b maps to translation(f) + Rz(azimuth(f)) b.
struct Trajectory {
  Vec3 start = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();  // per frame
  double azimuth = 0.0;
  double azimuth_rate = 0.0;  // radians per frame

  Vec3 translation(int frame) const { return start + frame * velocity; }
  double heading(int frame) const { return azimuth + frame * azimuth_rate; }
};

struct SceneSpec {
  std::vector<Ellipsoid> ellipsoids;
  RingRig rig;
  Trajectory motion;
  double particle_spacing = 0.01;  // surface sampling distance
  double particle_sigma = 0.5;     // particle scale as a fraction of the spacing
  double particle_opacity = 0.95;
  Vec3 background = Vec3::Constant(0.3);

  void validate() const;
};

CameraRig make_ring_rig(const RingRig& rig);

// Surface particles of the posed body: a Fibonacci lattice on each
// ellipsoid, sized to the requested spacing.
std::vector<GaussianParticle> scene_particles(const SceneSpec& spec, int frame);

struct SyntheticFrame {
  std::vector<GaussianParticle> particles;
  FrameSet frame;
  CameraRig rig;
};

// Images are rendered by the project rasterizer over the scene background;
// masks are coverage >= 0.5.
SyntheticFrame generate_scene(const SceneSpec& spec, int frame);

// Brute-force visual hull of the analytic body: a voxel is occupied when
// its center lies inside the image of every camera and the ray from that
// camera through it meets one of the posed ellipsoids.
std::vector<std::uint8_t> hull_oracle(const SceneSpec& spec, const GridSpec& grid, int frame = 0);

// 1 to 3 ellipsoids within a unit-radius region about the origin, random
// colors, default ring rig.
SceneSpec random_scene(std::uint64_t seed);

// Single sphere of radius 1 at the origin.
SceneSpec sphere_scene(const Vec3& color = Vec3(0.85, 0.55, 0.35));

// Radius about the body origin that encloses every ellipsoid.
double body_radius(const SceneSpec& spec);

}  // namespace splatcarve
