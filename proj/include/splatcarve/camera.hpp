#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace splatcarve {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

// Continuous pixel coordinates. The origin is the center of the top-left
// pixel, so pixel (col, row) covers [col-0.5, col+0.5) x [row-0.5, row+0.5).
struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

struct Projection {
  Pixel pixel;
  double depth = 0.0;  // camera-frame z
};

// Ideal pinhole camera. Extrinsics map world to camera: x_cam = R x + t.
class PinholeCamera {
 public:
  PinholeCamera(double fx, double fy, double cx, double cy, const Mat3& rotation,
                const Vec3& translation, int width, int height, std::string name = {});

  double fx() const { return fx_; }
  double fy() const { return fy_; }
  double cx() const { return cx_; }
  double cy() const { return cy_; }
  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  int width() const { return width_; }
  int height() const { return height_; }
  const std::string& name() const { return name_; }

  Vec3 to_camera(const Vec3& x_world) const { return rotation_ * x_world + translation_; }
  Vec3 center() const { return -rotation_.transpose() * translation_; }

  // Nearest pixel index for a continuous coordinate, or false when outside.
  bool pixel_index(const Pixel& p, int& col, int& row) const;

  PinholeCamera with_principal_point(double cx, double cy) const;

 private:
  double fx_, fy_, cx_, cy_;
  Mat3 rotation_;
  Vec3 translation_;
  int width_, height_;
  std::string name_;
};

class CameraRig {
 public:
  CameraRig() = default;
  explicit CameraRig(std::vector<PinholeCamera> cameras) : cameras_(std::move(cameras)) {}

  std::size_t size() const { return cameras_.size(); }
  const PinholeCamera& operator[](std::size_t i) const { return cameras_[i]; }
  PinholeCamera& operator[](std::size_t i) { return cameras_[i]; }
  std::span<const PinholeCamera> cameras() const { return cameras_; }
  auto begin() const { return cameras_.begin(); }
  auto end() const { return cameras_.end(); }

  CameraRig subset(std::span<const std::size_t> indices) const;

 private:
  std::vector<PinholeCamera> cameras_;
};

// Throws PointBehindCamera when the camera-frame depth is not positive.
Projection project(const PinholeCamera& cam, const Vec3& x_world);

// World point on the ray through `p` at camera-frame depth `depth`.
Vec3 backproject(const PinholeCamera& cam, const Pixel& p, double depth);

struct Observation {
  std::size_t camera = 0;
  Pixel pixel;
};

struct TriangulationOptions {
  double huber_delta = 2.0;  // pixels
  int max_iterations = 50;
  double step_tolerance = 1e-8;
  double max_condition = 1e12;
};

// Linear DLT initialization followed by Huber IRLS on reprojection error.
Vec3 triangulate_robust(std::span<const Observation> observations, const CameraRig& rig,
                        const TriangulationOptions& options = {});

// Plain linear least squares on the normalized ray constraints. Exposed for
// comparison against the robust estimator.
Vec3 triangulate_linear(std::span<const Observation> observations, const CameraRig& rig,
                        double max_condition = 1e12);

// Camera at `position` with its optical axis toward `target` and image up
// along world z projected orthogonal to the axis. Throws InvalidCamera when
// the axis is vertical.
PinholeCamera look_at(const Vec3& position, const Vec3& target, double focal, double cx, double cy,
                      int width, int height, std::string name = {});

// Shifts (cx, cy) so that x_world reprojects exactly onto `target`.
PinholeCamera recenter_intrinsics(const PinholeCamera& cam, const Vec3& x_world,
                                  const Pixel& target);

CameraRig read_rig(const std::filesystem::path& path);
void write_rig(const std::filesystem::path& path, const CameraRig& rig);

}  // namespace splatcarve
