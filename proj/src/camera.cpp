#include "splatcarve/camera.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <nlohmann/json.hpp>

#include "splatcarve/error.hpp"
#include "splatcarve/io.hpp"

namespace splatcarve {

namespace {

constexpr double kRotationTolerance = 1e-9;

bool is_rotation(const Mat3& r, double tol) {
  return (r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(r.determinant() - 1.0) <= tol;
}

}  // namespace

PinholeCamera::PinholeCamera(double fx, double fy, double cx, double cy, const Mat3& rotation,
                             const Vec3& translation, int width, int height, std::string name)
    : fx_(fx),
      fy_(fy),
      cx_(cx),
      cy_(cy),
      rotation_(rotation),
      translation_(translation),
      width_(width),
      height_(height),
      name_(std::move(name)) {
  if (!(fx > 0.0) || !(fy > 0.0)) throw Error(ErrorCode::InvalidCamera, "focal lengths must be positive");
  if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidCamera, "image size must be positive");
  if (!is_rotation(rotation, kRotationTolerance))
    throw Error(ErrorCode::InvalidCamera, "rotation is not orthonormal with det +1");
}

bool PinholeCamera::pixel_index(const Pixel& p, int& col, int& row) const {
  const double c = std::floor(p.u + 0.5);
  const double r = std::floor(p.v + 0.5);
  if (!(c >= 0.0 && c < width_ && r >= 0.0 && r < height_)) return false;
  col = static_cast<int>(c);
  row = static_cast<int>(r);
  return true;
}

PinholeCamera PinholeCamera::with_principal_point(double cx, double cy) const {
  PinholeCamera out = *this;
  out.cx_ = cx;
  out.cy_ = cy;
  return out;
}

CameraRig CameraRig::subset(std::span<const std::size_t> indices) const {
  std::vector<PinholeCamera> picked;
  picked.reserve(indices.size());
  for (auto i : indices) picked.push_back(cameras_.at(i));
  return CameraRig(std::move(picked));
}

Projection project(const PinholeCamera& cam, const Vec3& x_world) {
  const Vec3 xc = cam.to_camera(x_world);
  if (!(xc.z() > 0.0)) throw Error(ErrorCode::PointBehindCamera, "point is behind the camera");
  return {{cam.fx() * (xc.x() / xc.z()) + cam.cx(), cam.fy() * (xc.y() / xc.z()) + cam.cy()},
          xc.z()};
}

Vec3 backproject(const PinholeCamera& cam, const Pixel& p, double depth) {
  const Vec3 xc((p.u - cam.cx()) / cam.fx() * depth, (p.v - cam.cy()) / cam.fy() * depth, depth);
  return cam.rotation().transpose() * (xc - cam.translation());
}

Vec3 triangulate_linear(std::span<const Observation> observations, const CameraRig& rig,
                        double max_condition) {
  if (observations.size() < 2)
    throw Error(ErrorCode::DegenerateGeometry, "triangulation needs at least two observations");

  // Each observation contributes two rows (r1 - x r3).X = x t3 - t1 in
  // normalized image coordinates.
  Mat3 normal = Mat3::Zero();
  Vec3 rhs = Vec3::Zero();
  for (const auto& obs : observations) {
    const auto& cam = rig[obs.camera];
    const Mat3& r = cam.rotation();
    const Vec3& t = cam.translation();
    const double xn = (obs.pixel.u - cam.cx()) / cam.fx();
    const double yn = (obs.pixel.v - cam.cy()) / cam.fy();
    const Vec3 row_x = r.row(0).transpose() - xn * r.row(2).transpose();
    const Vec3 row_y = r.row(1).transpose() - yn * r.row(2).transpose();
    const double bx = xn * t.z() - t.x();
    const double by = yn * t.z() - t.y();
    normal += row_x * row_x.transpose() + row_y * row_y.transpose();
    rhs += row_x * bx + row_y * by;
  }

  Eigen::SelfAdjointEigenSolver<Mat3> eig(normal);
  const double lo = eig.eigenvalues()(0);
  const double hi = eig.eigenvalues()(2);
  if (!(lo > 0.0) || hi / lo > max_condition)
    throw Error(ErrorCode::DegenerateGeometry, "triangulation normal system is rank-deficient");
  return eig.eigenvectors() *
         (eig.eigenvectors().transpose() * rhs).cwiseQuotient(eig.eigenvalues());
}

Vec3 triangulate_robust(std::span<const Observation> observations, const CameraRig& rig,
                        const TriangulationOptions& options) {
  Vec3 x = triangulate_linear(observations, rig, options.max_condition);

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    Mat3 hessian = Mat3::Zero();
    Vec3 gradient = Vec3::Zero();
    for (const auto& obs : observations) {
      const auto& cam = rig[obs.camera];
      const Vec3 xc = cam.to_camera(x);
      if (!(xc.z() > 0.0)) continue;
      const double iz = 1.0 / xc.z();
      const Vec2 residual(cam.fx() * xc.x() * iz + cam.cx() - obs.pixel.u,
                          cam.fy() * xc.y() * iz + cam.cy() - obs.pixel.v);
      Eigen::Matrix<double, 2, 3> jac;
      jac << cam.fx() * iz, 0.0, -cam.fx() * xc.x() * iz * iz,  //
          0.0, cam.fy() * iz, -cam.fy() * xc.y() * iz * iz;
      jac = jac * cam.rotation();
      const double norm = residual.norm();
      const double weight = norm <= options.huber_delta ? 1.0 : options.huber_delta / norm;
      hessian += weight * jac.transpose() * jac;
      gradient += weight * jac.transpose() * residual;
    }
    const Vec3 step = -hessian.ldlt().solve(gradient);
    if (!step.allFinite()) break;
    x += step;
    if (step.norm() < options.step_tolerance) break;
  }
  return x;
}

PinholeCamera look_at(const Vec3& position, const Vec3& target, double focal, double cx, double cy,
                      int width, int height, std::string name) {
  const Vec3 axis = target - position;
  if (!(axis.norm() > 0.0)) throw Error(ErrorCode::InvalidCamera, "camera position equals its target");
  const Vec3 forward = axis.normalized();
  const Vec3 up_raw = Vec3::UnitZ() - forward.z() * forward;
  if (up_raw.norm() < 1e-12) throw Error(ErrorCode::InvalidCamera, "optical axis is vertical");
  const Vec3 y_c = -up_raw.normalized();  // image rows grow downward
  const Vec3 x_c = y_c.cross(forward);
  Mat3 r;
  r.row(0) = x_c;
  r.row(1) = y_c;
  r.row(2) = forward;
  return PinholeCamera(focal, focal, cx, cy, r, -r * position, width, height, std::move(name));
}

PinholeCamera recenter_intrinsics(const PinholeCamera& cam, const Vec3& x_world,
                                  const Pixel& target) {
  const Vec3 xc = cam.to_camera(x_world);
  if (!(xc.z() > 0.0)) throw Error(ErrorCode::PointBehindCamera, "point is behind the camera");
  return cam.with_principal_point(target.u - cam.fx() * (xc.x() / xc.z()),
                                  target.v - cam.fy() * (xc.y() / xc.z()));
}

namespace {

Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return r;
}

double number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number())
    throw Error(ErrorCode::FormatError, std::string("rig file: missing numeric field '") + key + "'");
  return j.at(key).get<double>();
}

}  // namespace

CameraRig read_rig(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw Error(ErrorCode::MissingFile, "rig file not found: " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, "rig file: " + std::string(e.what()));
  }
  if (!doc.contains("cameras") || !doc["cameras"].is_array())
    throw Error(ErrorCode::FormatError, "rig file: expected a 'cameras' array");

  std::vector<PinholeCamera> cams;
  for (std::size_t i = 0; i < doc["cameras"].size(); ++i) {
    const auto& c = doc["cameras"][i];
    const auto& rot = c.at("rotation");
    const auto& tr = c.at("translation");
    if (rot.size() != 9 || tr.size() != 3)
      throw Error(ErrorCode::FormatError, "rig file: rotation needs 9 and translation 3 entries");
    Mat3 r;
    for (int k = 0; k < 9; ++k) r(k / 3, k % 3) = rot[k].get<double>();
    if (!is_rotation(r, 1e-6))
      throw Error(ErrorCode::InvalidCamera, "rig file: camera " + std::to_string(i) + " rotation is not a rotation");
    if (!is_rotation(r, kRotationTolerance)) r = nearest_rotation(r);
    const Vec3 t(tr[0].get<double>(), tr[1].get<double>(), tr[2].get<double>());
    std::string name = c.value("name", "cam" + std::to_string(i));
    cams.emplace_back(number(c, "fx"), number(c, "fy"), number(c, "cx"), number(c, "cy"), r, t,
                      static_cast<int>(number(c, "width")), static_cast<int>(number(c, "height")),
                      std::move(name));
  }
  return CameraRig(std::move(cams));
}

void write_rig(const std::filesystem::path& path, const CameraRig& rig) {
  nlohmann::json doc;
  doc["cameras"] = nlohmann::json::array();
  for (const auto& cam : rig) {
    nlohmann::json c;
    c["name"] = cam.name();
    c["fx"] = cam.fx();
    c["fy"] = cam.fy();
    c["cx"] = cam.cx();
    c["cy"] = cam.cy();
    std::vector<double> r(9);
    for (int k = 0; k < 9; ++k) r[k] = cam.rotation()(k / 3, k % 3);
    c["rotation"] = r;
    c["translation"] = {cam.translation().x(), cam.translation().y(), cam.translation().z()};
    c["width"] = cam.width();
    c["height"] = cam.height();
    doc["cameras"].push_back(std::move(c));
  }
  io::write_atomic(path, doc.dump(2) + "\n");
}

}  // namespace splatcarve
