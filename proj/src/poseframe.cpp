#include "splatcarve/poseframe.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "splatcarve/error.hpp"
#include "splatcarve/io.hpp"

namespace splatcarve {

BodyGaussian moment_gaussian(const VoxelGrid& grid) {
  const auto& spec = grid.spec;
  double mass = 0.0;
  Vec3 first = Vec3::Zero();
  for (std::size_t v = 0; v < grid.occupancy.size(); ++v) {
    const double w = grid.occupancy[v];
    if (w <= 0.0) continue;
    mass += w;
    first += w * spec.voxel_center(v);
  }
  if (!(mass > 0.0)) throw Error(ErrorCode::EmptyVolume, "volume has no occupied voxels");

  BodyGaussian g;
  g.mean = first / mass;
  Mat3 second = Mat3::Zero();
  for (std::size_t v = 0; v < grid.occupancy.size(); ++v) {
    const double w = grid.occupancy[v];
    if (w <= 0.0) continue;
    const Vec3 d = spec.voxel_center(v) - g.mean;
    second += w * d * d.transpose();
  }
  g.covariance = second / mass + (spec.edge * spec.edge / 12.0) * Mat3::Identity();
  return g;
}

namespace {

Vec3 canonical_sign(Vec3 v) {
  for (int a = 0; a < 3; ++a) {
    if (std::abs(v[a]) > 1e-12) {
      if (v[a] < 0.0) v = -v;
      break;
    }
  }
  return v;
}

Eigen::SelfAdjointEigenSolver<Mat3> spd_eigen(const Mat3& m) {
  const double scale = m.cwiseAbs().maxCoeff();
  if (!m.allFinite() || !(scale > 0.0) || (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw Error(ErrorCode::NotSPD, "matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat3> eig(m);
  if (!(eig.eigenvalues()(0) > 0.0)) throw Error(ErrorCode::NotSPD, "matrix is not positive definite");
  return eig;
}

Mat3 spd_power(const Eigen::SelfAdjointEigenSolver<Mat3>& eig, double exponent) {
  const Vec3 d = eig.eigenvalues().array().pow(exponent);
  return eig.eigenvectors() * d.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

PrincipalAxis principal_axis(const Mat3& covariance) {
  const auto eig = spd_eigen(covariance);
  const Vec3& lambda = eig.eigenvalues();
  const double tol = 1e-9 * std::abs(lambda(2));

  PrincipalAxis out;
  out.degenerate = (lambda(2) - lambda(1)) < tol;
  if (!out.degenerate) {
    out.axis = canonical_sign(eig.eigenvectors().col(2).normalized());
    return out;
  }

  // Project the coordinate axes onto the top eigenspace and keep the one
  // with the largest projection, lowest index first.
  Eigen::Matrix<double, 3, Eigen::Dynamic> basis(3, 0);
  for (int c = 2; c >= 0 && lambda(2) - lambda(c) < tol; --c) {
    basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
    basis.col(basis.cols() - 1) = eig.eigenvectors().col(c);
  }
  Vec3 best = Vec3::Zero();
  double best_norm = -1.0;
  for (int a = 0; a < 3; ++a) {
    const Vec3 p = basis * (basis.transpose() * Vec3::Unit(a));
    if (p.norm() > best_norm + 1e-12) {
      best_norm = p.norm();
      best = p;
    }
  }
  out.axis = canonical_sign(best.normalized());
  return out;
}

GaussianTransport gaussian_transport(const Vec3& mean1, const Mat3& cov1, const Vec3& mean2,
                                     const Mat3& cov2) {
  const auto eig1 = spd_eigen(cov1);
  spd_eigen(cov2);
  if (cov1 == cov2) return {mean1, mean2, Mat3::Identity()};
  const Mat3 root1 = spd_power(eig1, 0.5);
  const Mat3 inv_root1 = spd_power(eig1, -0.5);
  Mat3 middle = root1 * cov2 * root1;
  middle = (0.5 * (middle + middle.transpose())).eval();
  const Mat3 middle_root = spd_power(Eigen::SelfAdjointEigenSolver<Mat3>(middle), 0.5);
  Mat3 a = inv_root1 * middle_root * inv_root1;
  a = (0.5 * (a + a.transpose())).eval();
  return {mean1, mean2, a};
}

Vec3 ot_transport(const Vec3& mean1, const Mat3& cov1, const Vec3& mean2, const Mat3& cov2,
                  const Vec3& x) {
  return gaussian_transport(mean1, cov1, mean2, cov2)(x);
}

std::vector<Vec3> sign_consistency(std::span<const AxisSample> sequence) {
  std::vector<Vec3> out;
  if (sequence.empty()) return out;
  out.reserve(sequence.size());
  out.push_back(canonical_sign(sequence[0].axis.normalized()));
  for (std::size_t t = 0; t + 1 < sequence.size(); ++t) {
    const auto& cur = sequence[t];
    const auto& next = sequence[t + 1];
    const auto map = gaussian_transport(cur.mean, cur.covariance, next.mean, next.covariance);
    const Vec3 carried = map(cur.mean + out.back());
    const Vec3 v = next.axis.normalized();
    const double keep = (next.mean + v - carried).norm();
    const double flip = (next.mean - v - carried).norm();
    out.push_back(flip < keep - 1e-12 ? Vec3(-v) : v);
  }
  return out;
}

std::vector<Vec3> global_flip(std::span<const Vec3> means, std::span<const Vec3> axes) {
  if (means.size() != axes.size())
    throw Error(ErrorCode::DimensionMismatch, "means and axes must have equal length");
  double s = 0.0;
  for (std::size_t t = 0; t + 1 < means.size(); ++t) s += (means[t + 1] - means[t]).dot(axes[t]);
  std::vector<Vec3> out(axes.begin(), axes.end());
  if (s < 0.0)
    for (auto& v : out) v = -v;
  return out;
}

double azimuth(const Vec3& axis) {
  if (std::hypot(axis.x(), axis.y()) <= 1e-9)
    throw Error(ErrorCode::VerticalAxis, "axis is vertical; azimuth undefined");
  double phi = std::atan2(axis.y(), axis.x());
  if (phi < 0.0) phi += 2.0 * std::numbers::pi;
  if (phi >= 2.0 * std::numbers::pi) phi -= 2.0 * std::numbers::pi;
  return phi;
}

void write_track(const std::filesystem::path& path, std::span<const BodyFrame> frames) {
  std::string out = "frame,mu_x,mu_y,mu_z,v_x,v_y,v_z,phi\n";
  for (const auto& f : frames) {
    out += std::to_string(f.index);
    for (int a = 0; a < 3; ++a) out += "," + io::format_double(f.center[a]);
    for (int a = 0; a < 3; ++a) out += "," + io::format_double(f.axis[a]);
    out += "," + io::format_double(f.azimuth) + "\n";
  }
  io::write_atomic(path, out);
}

std::vector<BodyFrame> read_track(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path));
  std::string line;
  std::getline(in, line);
  std::vector<BodyFrame> frames;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto vals = io::parse_csv_row(line);
    if (vals.size() != 8) throw Error(ErrorCode::FormatError, "track row needs 8 fields: " + line);
    BodyFrame f;
    f.index = static_cast<int>(vals[0]);
    f.center = Vec3(vals[1], vals[2], vals[3]);
    f.axis = Vec3(vals[4], vals[5], vals[6]);
    f.azimuth = vals[7];
    frames.push_back(f);
  }
  return frames;
}

}  // namespace splatcarve
