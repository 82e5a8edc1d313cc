#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "splatcarve/camera.hpp"
#include "splatcarve/carve.hpp"

namespace splatcarve {

// Moment-matched Gaussian summary of a carved volume.
struct BodyGaussian {
  Vec3 mean = Vec3::Zero();
  Mat3 covariance = Mat3::Identity();
};

// Per-frame body pose: center, signed principal axis, heading.
struct BodyFrame {
  int index = 0;
  Vec3 center = Vec3::Zero();
  Mat3 covariance = Mat3::Identity();
  Vec3 axis = Vec3::UnitX();
  double azimuth = 0.0;  // radians in [0, 2pi)
};

// Occupancy-weighted mean and covariance of voxel centers, plus the
// uniform-cell term edge^2 / 12 on the diagonal.
BodyGaussian moment_gaussian(const VoxelGrid& grid);

struct PrincipalAxis {
  Vec3 axis = Vec3::UnitX();
  bool degenerate = false;  // top two eigenvalues within 1e-9 relative
};

// Unit eigenvector of the largest eigenvalue with a non-negative first
// nonzero component. In a degenerate top eigenspace the first coordinate
// axis with a nonzero projection onto it is used.
PrincipalAxis principal_axis(const Mat3& covariance);

// Closed-form Wasserstein-2 map between N(mean1, cov1) and N(mean2, cov2).
struct GaussianTransport {
  Vec3 mean1, mean2;
  Mat3 linear;  // A with A cov1 A^T = cov2

  // Written as a correction to x so that the identity map returns x exactly.
  Vec3 operator()(const Vec3& x) const {
    return x + (mean2 - mean1) + (linear - Mat3::Identity()) * (x - mean1);
  }
};

GaussianTransport gaussian_transport(const Vec3& mean1, const Mat3& cov1, const Vec3& mean2,
                                     const Mat3& cov2);
Vec3 ot_transport(const Vec3& mean1, const Mat3& cov1, const Vec3& mean2, const Mat3& cov2,
                  const Vec3& x);

struct AxisSample {
  Vec3 mean;
  Mat3 covariance;
  Vec3 axis;  // either sign
};

// Temporal sign consistency: the tip mean_t + axis_t is carried to t+1 by
// the Gaussian transport map, and axis_{t+1} takes the sign whose tip lands
// nearer. The first axis is canonicalized so the result does not depend on
// input signs.
std::vector<Vec3> sign_consistency(std::span<const AxisSample> sequence);

// Negates every axis when sum_t (mean_{t+1} - mean_t) . axis_t < 0.
std::vector<Vec3> global_flip(std::span<const Vec3> means, std::span<const Vec3> axes);

// atan2(v_y, v_x) wrapped to [0, 2pi). Throws VerticalAxis.
double azimuth(const Vec3& axis);

// Body-frame track: CSV with header
//   frame,mu_x,mu_y,mu_z,v_x,v_y,v_z,phi
void write_track(const std::filesystem::path& path, std::span<const BodyFrame> frames);
std::vector<BodyFrame> read_track(const std::filesystem::path& path);

}  // namespace splatcarve
