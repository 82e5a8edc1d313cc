// One PASS/FAIL line per acceptance criterion. Exit status is non-zero when
// any criterion fails.
#include <Eigen/Geometry>
#include <chrono>
#include <cstdio>
#include <functional>
#include <omp.h>
#include <random>
#include <string>

#include "oracles/oracles.hpp"
#include "splatcarve/camera.hpp"
#include "splatcarve/carve.hpp"
#include "splatcarve/embed.hpp"
#include "splatcarve/error.hpp"
#include "splatcarve/loss_metrics.hpp"
#include "splatcarve/poseframe.hpp"
#include "splatcarve/refine.hpp"
#include "splatcarve/splat.hpp"
#include "splatcarve/synth.hpp"

using namespace splatcarve;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

void note(Outcome& o, bool ok, const std::string& what) {
  o.pass = o.pass && ok;
  if (!o.detail.empty()) o.detail += "; ";
  o.detail += what + (ok ? "" : " [miss]");
}

using Clock = std::chrono::steady_clock;
double ms_since(Clock::time_point t) { return std::chrono::duration<double, std::milli>(Clock::now() - t).count(); }

GridSpec cube_grid(int n, double half, const Vec3& center = Vec3::Zero()) {
  GridSpec g;
  g.base_resolution = n;
  g.dims = {n, n, n};
  g.edge = 2.0 * half / n;
  g.center = center;
  return g;
}

Image random_image(std::mt19937_64& rng, int w, int h, int ch) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(w, h, ch);
  for (double& v : img.data()) v = u(rng);
  return img;
}

Mask random_mask(std::mt19937_64& rng, int w, int h, double p = 0.5) {
  std::bernoulli_distribution b(p);
  Mask m(w, h);
  for (auto& v : m.data()) v = b(rng);
  return m;
}

std::vector<GaussianParticle> random_particles(std::mt19937_64& rng, int n, double reach, double smin,
                                               double srange, bool rotate) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), p(0.0, 1.0);
  std::vector<GaussianParticle> out(n);
  for (auto& g : out) {
    g.mean = reach * Vec3(u(rng), u(rng), u(rng));
    g.log_scale = Vec3(std::log(smin + srange * p(rng)), std::log(smin + srange * p(rng)),
                       std::log(smin + srange * p(rng)));
    if (rotate) g.rotation = Eigen::Quaterniond(u(rng), u(rng), u(rng), u(rng)).normalized();
    g.color = Vec3(p(rng), p(rng), p(rng));
    g.opacity = p(rng);
  }
  return out;
}

double max_abs_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
  return m;
}

// Training targets rendered from `truth` over white with coverage masks.
FrameSet render_targets(std::span<const GaussianParticle> truth, const CameraRig& rig, std::mt19937_64& rng,
                        double jitter) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  FrameSet f;
  for (const auto& cam : rig) {
    const Image img = rasterize(truth, cam, Vec3::Ones());
    Image rgb(cam.width(), cam.height(), 3);
    Mask m(cam.width(), cam.height());
    for (int y = 0; y < cam.height(); ++y)
      for (int x = 0; x < cam.width(); ++x) {
        for (int c = 0; c < 3; ++c) rgb.at(x, y, c) = img.at(x, y, c) + jitter * u(rng);
        m.at(x, y) = img.at(x, y, 3) >= 0.5;
      }
    f.images.push_back(rgb);
    f.masks.push_back(m);
  }
  return f;
}

CameraRig two_views(int size) {
  const double c = (size - 1) / 2.0;
  return CameraRig({look_at({0.0, -3.0, 0.3}, Vec3::Zero(), 1.2 * size, c, c, size, size, "a"),
                    look_at({3.0, 0.2, 0.5}, Vec3::Zero(), 1.2 * size, c, c, size, size, "b")});
}

Outcome visual_hull() {
  Outcome o;
  double worst = 1.0, slowest = 0.0;
  const GridSpec grid = cube_grid(112, 1.5);
  for (int s = 0; s < 20; ++s) {
    const SceneSpec spec = random_scene(1000 + s);
    const SyntheticFrame frame = generate_scene(spec, 0);
    const auto t0 = Clock::now();
    const auto occ = carve_occupancy(frame.frame.masks, frame.rig, grid, static_cast<int>(frame.rig.size()));
    slowest = std::max(slowest, ms_since(t0));
    const auto hull = hull_oracle(spec, grid, 0);
    std::size_t agree = 0;
    for (std::size_t v = 0; v < occ.size(); ++v) agree += occ[v] == hull[v];
    worst = std::min(worst, static_cast<double>(agree) / occ.size());
  }
  note(o, worst >= 0.995, fmt("min agreement %.5f", worst));
  note(o, slowest < 150.0, fmt("max carve %.1f ms", slowest) + " at " + std::to_string(omp_get_max_threads()) + " threads");
  return o;
}

Outcome dual_threshold() {
  Outcome o;
  std::mt19937_64 rng(2);
  std::vector<PinholeCamera> cams;
  for (int c = 0; c < 6; ++c) {
    const double a = 2.0 * M_PI * c / 6;
    cams.push_back(look_at({3.0 * std::cos(a), 3.0 * std::sin(a), 0.8}, Vec3::Zero(), 40.0, 15.5, 15.5, 32, 32));
  }
  const CameraRig rig(cams);
  const GridSpec grid = cube_grid(16, 0.8);
  // Blocky masks so every count between 0 and 6 occurs.
  std::bernoulli_distribution b(0.8);
  std::vector<Mask> masks;
  for (int c = 0; c < 6; ++c) {
    Mask m(32, 32);
    for (int by = 0; by < 8; ++by)
      for (int bx = 0; bx < 8; ++bx) {
        const bool on = b(rng);
        for (int y = 0; y < 4; ++y)
          for (int x = 0; x < 4; ++x) m.at(4 * bx + x, 4 * by + y) = on;
      }
    masks.push_back(m);
  }
  const auto dual = carve_dual(masks, rig, grid);
  const auto all = carve_occupancy(masks, rig, grid, 6), most = carve_occupancy(masks, rig, grid, 5);
  std::size_t bad_value = 0, bad_mean = 0, seen[3] = {0, 0, 0};
  for (std::size_t v = 0; v < dual.size(); ++v) {
    const float d = dual[v];
    if (d == 0.0f) ++seen[0];
    else if (d == 0.5f) ++seen[1];
    else if (d == 1.0f) ++seen[2];
    else ++bad_value;
    bad_mean += d != 0.5f * (all[v] + most[v]);
  }
  note(o, bad_value == 0, std::to_string(bad_value) + " values outside {0, 0.5, 1}");
  note(o, bad_mean == 0, std::to_string(bad_mean) + " voxels differ from the mean of N=C and N=C-1");
  note(o, seen[0] && seen[1] && seen[2], "levels seen " + std::to_string(seen[0]) + "/" + std::to_string(seen[1]) + "/" +
                                              std::to_string(seen[2]) + " of " + std::to_string(dual.size()));
  return o;
}

Outcome rasterizer() {
  Outcome o;
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> count(1, 10);
  const auto cam = look_at({0.0, -3.0, 0.4}, Vec3::Zero(), 12.0, 7.5, 7.5, 16, 16);
  const int saved = omp_get_max_threads();
  double worst = 0.0;
  int nondeterministic = 0;
  for (int t = 0; t < 100; ++t) {
    const auto ps = random_particles(rng, count(rng), 0.5, 0.05, 0.2, true);
    const Vec3 bg(0.1, 0.5, 0.9);
    omp_set_num_threads(1);
    const Image base = rasterize(ps, cam, bg);
    worst = std::max(worst, max_abs_diff(base, oracle::brute_composite(ps, cam, bg)));
    for (int threads : {4, 8}) {
      omp_set_num_threads(threads);
      nondeterministic += !(rasterize(ps, cam, bg) == base);
    }
  }
  // A larger scene so that tiles are actually shared between threads.
  const auto big_cam = look_at({0.0, -3.0, 0.4}, Vec3::Zero(), 90.0, 63.5, 47.5, 128, 96);
  const auto big = random_particles(rng, 2000, 0.8, 0.02, 0.1, true);
  omp_set_num_threads(1);
  const Image base = rasterize(big, big_cam, Vec3::Ones());
  for (int threads : {4, 8}) {
    omp_set_num_threads(threads);
    nondeterministic += !(rasterize(big, big_cam, Vec3::Ones()) == base);
  }
  omp_set_num_threads(saved);
  note(o, worst <= 1.1e-4, fmt("max deviation from brute force %.3g", worst));
  note(o, nondeterministic == 0, std::to_string(nondeterministic) + " renders differ across 1/4/8 threads");
  return o;
}

Outcome projection() {
  Outcome o;
  std::mt19937_64 rng(4);
  const auto cam = look_at({0.4, -3.0, 0.7}, Vec3::Zero(), 300.0, 160.0, 120.0, 320, 240);
  double jac_err = 0.0, cov_err = 0.0;
  for (const auto& p : random_particles(rng, 1000, 0.8, 0.02, 0.3, true)) {
    const Vec3 xc = cam.to_camera(p.mean);
    const Eigen::Matrix<double, 2, 3> fd = oracle::fd_jacobian(cam, xc);
    jac_err = std::max(jac_err, (pinhole_jacobian(cam, xc) - fd).cwiseAbs().maxCoeff());
    const Eigen::Matrix<double, 2, 3> jw = fd * cam.rotation();
    const Mat2 want = jw * p.covariance() * jw.transpose();
    const Mat2 got = project_gaussian(p, cam, 0.0).covariance;
    cov_err = std::max(cov_err, (got - want).cwiseAbs().maxCoeff() / want.cwiseAbs().maxCoeff());
  }
  note(o, jac_err <= 1e-6, fmt("max Jacobian error vs finite differences %.3g", jac_err));
  note(o, cov_err <= 1e-6, fmt("max relative covariance error %.3g", cov_err));
  return o;
}

struct SkimageCase {
  int w, h;
  double p[4];
  double ssim, psnr;
};

const SkimageCase kSkimage[] = {
#include "oracles/ssim_reference.inc"
};

Image pattern(int w, int h, const double* p) {
  Image img(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = 0.5 + 0.4 * std::sin(p[0] * x + p[1] * y + p[2] * c);
  return img;
}

Image perturbed(const Image& a, const double* p) {
  Image b = a;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x)
      for (int c = 0; c < 3; ++c)
        b.at(x, y, c) = std::clamp(a.at(x, y, c) + p[3] * std::cos(0.5 * x - 0.3 * y + 2.0 * c), 0.0, 1.0);
  return b;
}

Outcome losses() {
  Outcome o;
  std::mt19937_64 rng(5);
  double loss_err = 0.0, psnr_err = 0.0, ssim_err = 0.0;
  for (int t = 0; t < 50; ++t) {
    const Image pred = random_image(rng, 24, 20, 4), gt = random_image(rng, 24, 20, 3);
    const Mask m = random_mask(rng, 24, 20);
    const double l1 = oracle::l1(pred, gt, m), iou = oracle::soft_iou_loss(pred, 3, m);
    loss_err = std::max({loss_err, std::fabs(l1_color_loss(pred, gt, m) - l1), std::fabs(iou_loss(pred, 3, m) - iou),
                         std::fabs(total_loss(pred, gt, m) - (iou + 0.5 * l1))});
    const Image a = random_image(rng, 24, 20, 3);
    Image b = a;
    std::normal_distribution<double> noise(0.0, 0.1);
    for (double& v : b.data()) v = std::clamp(v + noise(rng), 0.0, 1.0);
    psnr_err = std::max(psnr_err, std::fabs(psnr(a, b) - oracle::psnr(a, b)));
    ssim_err = std::max(ssim_err, std::fabs(ssim(a, b) - oracle::ssim(a, b)));
  }
  double sk_psnr = 0.0, sk_ssim = 0.0;
  for (const auto& c : kSkimage) {
    const Image a = pattern(c.w, c.h, c.p), b = perturbed(a, c.p);
    sk_psnr = std::max(sk_psnr, std::fabs(psnr(a, b) - c.psnr));
    sk_ssim = std::max(sk_ssim, std::fabs(ssim(a, b) - c.ssim));
  }
  note(o, LossConfig{}.lambda_color == 0.5, "lambda_color 0.5");
  note(o, loss_err <= 1e-10, fmt("max loss error %.3g", loss_err));
  note(o, psnr_err <= 1e-6 && sk_psnr <= 1e-6, fmt("max PSNR error %.3g", std::max(psnr_err, sk_psnr)));
  note(o, ssim_err <= 1e-3 && sk_ssim <= 1e-3, fmt("max SSIM error %.3g", std::max(ssim_err, sk_ssim)));
  return o;
}

Outcome refinement() {
  Outcome o;
  std::mt19937_64 rng(6);
  {
    const CameraRig rig = two_views(16);
    RefineConfig cfg;
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
      const FrameSet f = render_targets(random_particles(rng, 5, 0.35, 0.12, 0.15, false), rig, rng, 1e-3);
      auto ps = random_particles(rng, 5, 0.35, 0.12, 0.15, false);
      for (auto& p : ps) p.opacity = 0.2 + 0.6 * p.opacity;
      const auto g = loss_and_gradient(ps, f, rig, cfg);
      for (std::size_t i = 0; i < ps.size(); ++i) {
        auto hi = ps, lo = ps;
        hi[i].opacity += 1e-4;
        lo[i].opacity -= 1e-4;
        const double fd = (refinement_loss(hi, f, rig, cfg) - refinement_loss(lo, f, rig, cfg)) / 2e-4;
        worst = std::max(worst, std::fabs(g.opacity[i] - fd) / std::max(std::fabs(fd), 1e-6));
      }
    }
    note(o, worst <= 1e-3, fmt("max relative gradient error %.3g", worst));
  }
  {
    const CameraRig rig = two_views(24);
    std::vector<GaussianParticle> truth(2);
    truth[0].mean = Vec3(-0.1, 0.0, 0.05);
    truth[1].mean = Vec3(0.12, 0.1, -0.05);
    for (auto& p : truth) {
      p.log_scale = Vec3::Constant(std::log(0.3));
      p.opacity = 0.6;
    }
    truth[0].color = Vec3(0.9, 0.2, 0.4);
    truth[1].color = Vec3(0.1, 0.7, 0.3);
    const FrameSet f = render_targets(truth, rig, rng, 0.0);
    auto start = truth;
    for (auto& p : start) p.color = Vec3::Constant(0.5);
    const auto fit = fit_colors_least_squares(start, f, rig);
    double err = 0.0;
    for (int i = 0; i < 2; ++i) err = std::max(err, (fit.particles[i].color - truth[i].color).cwiseAbs().maxCoeff());
    note(o, err <= 1e-4, fmt("LS color error %.3g", err));
  }
  {
    // Sphere fixture: the default sphere with the ring pulled back to twice
    // the distance and 192 px images; carve and fit on cameras 0-4, score 5.
    SceneSpec spec = sphere_scene();
    spec.rig.width = spec.rig.height_px = 192;
    spec.rig.radius *= 2.0;
    spec.rig.height *= 2.0;
    spec.particle_spacing = 0.02;
    const SyntheticFrame sf = generate_scene(spec, 0);
    const std::vector<std::size_t> train{0, 1, 2, 3, 4};
    const CameraRig trig = sf.rig.subset(train);
    FrameSet tf;
    for (auto i : train) {
      tf.images.push_back(sf.frame.images[i]);
      tf.masks.push_back(sf.frame.masks[i]);
    }
    const VoxelGrid vol = carve_volume(tf.masks, tf.images, trig, cube_grid(64, 1.2));
    SplatDefaults sd;
    sd.render_threshold = 0.75;
    sd.size_factor = 0.5;
    const auto particles = voxels_to_gaussians(vol, sd);
    RefineConfig cfg;
    cfg.learning_rate = 1e5;
    cfg.opacity_steps = 10;
    const auto colors = fit_colors_least_squares(particles, tf, trig, cfg);
    const auto fitted = refine_opacity(colors.particles, tf, trig, cfg);
    const Metrics m = evaluate_holdout(fitted.particles, sf.frame, sf.rig, 5);
    note(o, m.iou >= 0.90, fmt("held-out IoU %.4f", m.iou));
    note(o, m.psnr >= 25.0, fmt("held-out PSNR %.2f", m.psnr));
  }
  return o;
}

Outcome orientation() {
  Outcome o;
  const double step = 5.0 * M_PI / 180.0, psi0 = 0.3;
  const GridSpec grid = cube_grid(48, 1.5);
  std::vector<AxisSample> seq;
  std::vector<Vec3> means;
  Vec3 pos = Vec3::Zero();
  std::vector<double> truth;
  for (int t = 0; t < 72; ++t) {
    const double psi = psi0 + step * t;
    truth.push_back(psi);
    // Walks forward along its heading, tracing a circle of radius ~0.23.
    pos += 0.02 * Vec3(std::cos(psi), std::sin(psi), 0.0);
    const Vec3 c = pos - Vec3(0.23 * std::sin(psi0), -0.23 * std::cos(psi0), 0.0);
    const Mat3 r = Eigen::AngleAxisd(psi, Vec3::UnitZ()).toRotationMatrix();
    VoxelGrid g;
    g.spec = grid;
    g.occupancy.assign(grid.voxel_count(), 0.0f);
    for (std::size_t v = 0; v < g.occupancy.size(); ++v) {
      const Vec3 b = r.transpose() * (grid.voxel_center(v) - c);
      if (std::pow(b.x() / 0.8, 2) + std::pow(b.y() / 0.4, 2) + std::pow(b.z() / 0.3, 2) <= 1.0) g.occupancy[v] = 1.0f;
    }
    const auto m = moment_gaussian(g);
    seq.push_back({m.mean, m.covariance, principal_axis(m.covariance).axis});
    means.push_back(m.mean);
  }
  const auto track = [&](const std::vector<AxisSample>& s) { return global_flip(means, sign_consistency(s)); };
  const auto axes = track(seq);
  int bad_dot = 0;
  for (std::size_t t = 0; t + 1 < axes.size(); ++t) bad_dot += !(axes[t].dot(axes[t + 1]) > 0.0);
  double worst = 0.0;
  for (std::size_t t = 0; t < axes.size(); ++t) {
    const double d = std::remainder(azimuth(axes[t]) - truth[t], 2.0 * M_PI);
    worst = std::max(worst, std::fabs(d));
  }
  std::mt19937_64 rng(7);
  std::bernoulli_distribution coin(0.5);
  int variant = 0;
  for (int trial = 0; trial < 20; ++trial) {
    auto flipped = seq;
    for (auto& s : flipped)
      if (coin(rng)) s.axis = -s.axis;
    variant += track(flipped) != axes;
  }
  note(o, bad_dot == 0, std::to_string(bad_dot) + " non-positive consecutive dots");
  note(o, worst <= 2.0 * M_PI / 180.0, fmt("max azimuth error %.3f deg", worst * 180.0 / M_PI));
  note(o, variant == 0, std::to_string(variant) + "/20 flip patterns change the output");
  return o;
}

Outcome transport() {
  Outcome o;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  double worst = 0.0;
  int not_identity = 0;
  for (int t = 0; t < 100; ++t) {
    const Mat3 s1 = oracle::random_spd(rng), s2 = oracle::random_spd(rng);
    const auto map = gaussian_transport(Vec3(n(rng), n(rng), n(rng)), s1, Vec3(n(rng), n(rng), n(rng)), s2);
    worst = std::max(worst, (map.linear * s1 * map.linear.transpose() - s2).cwiseAbs().maxCoeff() / s2.cwiseAbs().maxCoeff());
    const Vec3 m(n(rng), n(rng), n(rng)), x(n(rng), n(rng), n(rng));
    not_identity += !(ot_transport(m, s1, m, s1, x) == x);
  }
  note(o, worst <= 1e-8, fmt("max pushforward error %.3g", worst));
  note(o, not_identity == 0, std::to_string(not_identity) + "/100 identity maps inexact");
  return o;
}

Outcome embedding_invariance() {
  Outcome o;
  const SphereGrid grid = make_sphere_grid();
  double ortho = 0.0;
  for (int l = 0; l <= 3; ++l)
    for (int m = -l; m <= l; ++m)
      for (int l2 = 0; l2 <= 3; ++l2)
        for (int m2 = -l2; m2 <= l2; ++m2) {
          std::complex<double> s = 0.0;
          for (std::size_t k = 0; k < grid.node_count(); ++k) {
            const double th = grid.theta[k / grid.phi.size()], ph = grid.phi[k % grid.phi.size()];
            s += grid.weight[k] * spherical_harmonic(l, m, th, ph) * std::conj(spherical_harmonic(l2, m2, th, ph));
          }
          ortho = std::max(ortho, std::abs(s - (l == l2 && m == m2 ? 1.0 : 0.0)));
        }
  note(o, ortho <= 1e-10, fmt("max orthonormality error %.3g", ortho));

  const HandcraftedExtractor extractor;
  double exact = 0.0, arbitrary = 0.0;
  std::size_t length = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const SceneSpec spec = random_scene(seed);
    SphereCameraConfig cams;
    cams.bounding_radius = body_radius(spec);
    const auto features = [&](double heading) {
      SceneSpec s = spec;
      s.motion.azimuth = heading;
      return frame_power_features(scene_particles(s, 0), Vec3::Zero(), grid, cams, extractor);
    };
    const Eigen::VectorXd base = features(0.0);
    length = static_cast<std::size_t>(base.size());
    exact = std::max(exact, (features(2.0 * M_PI / 8) - base).norm() / base.norm());
    for (double a : {0.39, 1.9}) arbitrary = std::max(arbitrary, (features(a) - base).norm() / base.norm());
  }
  note(o, exact <= 1e-6, fmt("grid-step rotation change %.3g", exact));
  note(o, arbitrary <= 0.01, fmt("arbitrary rotation change %.4f", arbitrary));
  note(o, length == 8192, "length " + std::to_string(length));
  return o;
}

Outcome adversarial() {
  Outcome o;
  std::mt19937_64 rng(10);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 2.0 * M_PI);
  const int frames = 400, d = 30;
  std::vector<double> phi(frames);
  for (double& p : phi) p = u(rng);
  const Eigen::MatrixXd y = azimuth_concomitants(phi);
  Eigen::MatrixXd x(frames, d);
  for (int i = 0; i < frames; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = n(rng) * (3.0 / (1.0 + j));
  // Plant a noisy sin/cos leak across the leading coordinates.
  for (int i = 0; i < frames; ++i)
    for (int j = 0; j < 4; ++j) x(i, j) += 4.0 * (j % 2 ? y(i, 1) : y(i, 0)) * (1.0 - 0.2 * j);
  const double leak0 = mean_r2(adversarial_pca(x, y, 5, 0.0).embeddings, y);
  const MuSelection sel = select_mu(x, y, 5);
  note(o, sel.r2 < kLeakR2, fmt("mu %.0e", sel.mu) + fmt(" gives R^2 %.4f", sel.r2) + fmt(" (mu=0: %.3f)", leak0));
  const double angle = oracle::principal_angle(adversarial_pca(x, y, 5, 0.0).basis, pca_fit(x, 5).components);
  note(o, angle <= 1e-6, fmt("mu=0 principal angle to PCA %.3g", angle));
  return o;
}

Outcome retrieval() {
  Outcome o;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  const int count = 10000;
  Eigen::MatrixXd e(count, 50);
  for (int i = 0; i < count; ++i)
    for (int j = 0; j < 50; ++j) e(i, j) = n(rng);
  std::vector<int> frames(count);
  for (int i = 0; i < count; ++i) frames[i] = i;
  // Near-duplicates of the query inside and just outside the window.
  e.row(4300) = e.row(4000) + 1e-3 * e.row(1);
  e.row(4501) = e.row(4000) + 2e-3 * e.row(2);
  int mismatched = 0;
  std::uniform_int_distribution<int> pick(0, count - 1);
  std::vector<int> queries{0, 4000, count - 1};
  for (int q = 0; q < 17; ++q) queries.push_back(pick(rng));
  for (int q : queries) mismatched += knn_query(e, frames, q, 10) != oracle::knn(e, frames, q, 10, 500);
  const auto near = knn_query(e, frames, 4000, 1);
  note(o, mismatched == 0, std::to_string(mismatched) + "/" + std::to_string(queries.size()) + " queries differ from brute force");
  note(o, near.size() == 1 && near[0] == 4501, "window excludes the in-window duplicate");
  return o;
}

Outcome recentering() {
  Outcome o;
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    // Four cameras spread over a wide baseline with mask centroids that are
    // not exact projections of any single point.
    std::vector<PinholeCamera> cams;
    for (int c = 0; c < 4; ++c) {
      const double a = 2.0 * M_PI * c / 4 + 0.4 * u(rng);
      const Vec3 pos(6.0 * std::cos(a), 6.0 * std::sin(a), 2.0 + u(rng));
      cams.push_back(look_at(pos, Vec3(u(rng), u(rng), 0.0), 900.0 + 200.0 * u(rng), 640.0 + 30.0 * u(rng),
                             360.0 + 30.0 * u(rng), 1280, 720));
    }
    const CameraRig rig(cams);
    const Vec3 animal(0.5 * u(rng), 0.5 * u(rng), 0.3 * u(rng));
    std::vector<Observation> obs;
    for (std::size_t c = 0; c < rig.size(); ++c) {
      Pixel p = project(rig[c], animal).pixel;
      p.u += 15.0 * u(rng);
      p.v += 15.0 * u(rng);
      obs.push_back({c, p});
    }
    const Vec3 center = triangulate_robust(obs, rig);
    for (const auto& ob : obs) {
      const PinholeCamera fixed = recenter_intrinsics(rig[ob.camera], center, ob.pixel);
      const Pixel p = project(fixed, center).pixel;
      worst = std::max({worst, std::fabs(p.u - ob.pixel.u), std::fabs(p.v - ob.pixel.v)});
    }
  }
  note(o, worst <= 1e-12, fmt("max residual %.3g px", worst));
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"visual hull vs oracle", visual_hull},
      {"dual-threshold semantics", dual_threshold},
      {"rasterizer vs brute force", rasterizer},
      {"projected covariance", projection},
      {"losses and metrics", losses},
      {"refinement", refinement},
      {"orientation tracking", orientation},
      {"Gaussian transport map", transport},
      {"embedding invariance", embedding_invariance},
      {"adversarial PCA", adversarial},
      {"kNN retrieval", retrieval},
      {"intrinsic re-centering", recentering},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %2zu %s: %s (%s) [%.1f s]\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                o.detail.c_str(), ms_since(t0) / 1000.0);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
