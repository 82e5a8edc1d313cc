#include "splatcarve/refine.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "splatcarve/error.hpp"

namespace splatcarve {

void RefineConfig::validate() const {
  if (opacity_steps < 0) throw Error(ErrorCode::InvalidArgument, "opacity steps must be >= 0");
  if (opacity_steps > 0 && !(learning_rate > 0.0))
    throw Error(ErrorCode::InvalidArgument, "learning rate must be positive");
  if (loss.lambda_color < 0.0) throw Error(ErrorCode::InvalidArgument, "lambda_color must be >= 0");
  if (!(min_opacity >= 0.0 && min_opacity <= max_opacity && max_opacity <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "opacity bounds must satisfy 0 <= min <= max <= 1");
}

namespace {

std::vector<std::size_t> selected_views(const RefineConfig& cfg, const CameraRig& rig) {
  std::vector<std::size_t> views = cfg.views;
  if (views.empty()) {
    views.resize(rig.size());
    std::iota(views.begin(), views.end(), std::size_t{0});
  }
  for (auto v : views)
    if (v >= rig.size()) throw Error(ErrorCode::InvalidArgument, "view index out of range");
  return views;
}

void check_frame(const FrameSet& frame, const CameraRig& rig) {
  if (frame.images.size() != rig.size() || frame.masks.size() != rig.size())
    throw Error(ErrorCode::DimensionMismatch, "frame must hold one image and mask per camera");
}

struct Triplet {
  std::uint32_t row, col;
  double value;
};

}  // namespace

ColorFit fit_colors_least_squares(std::span<const GaussianParticle> particles, const FrameSet& frame,
                                  const CameraRig& rig, const RefineConfig& cfg) {
  cfg.validate();
  check_frame(frame, rig);
  const auto views = selected_views(cfg, rig);
  const std::size_t n = particles.size();

  // Per image row, the triplets of sum w w^T and the right-hand sides are
  // gathered independently and merged in row order.
  std::vector<Triplet> triplets;
  std::vector<Vec3> rhs(n, Vec3::Zero());
  std::vector<double> weight_sum(n, 0.0);

  for (auto view : views) {
    const auto& cam = rig[view];
    const auto& image = frame.images[view];
    const auto& mask = frame.masks[view];
    const RasterPlan plan = plan_raster(particles, cam, cfg.raster);
    const int h = cam.height(), w = cam.width();

    struct RowData {
      std::vector<Triplet> triplets;
      std::vector<std::pair<std::uint32_t, Vec3>> rhs;
      std::vector<std::pair<std::uint32_t, double>> weight;
    };
    std::vector<RowData> rows(h);

#pragma omp parallel for schedule(dynamic, 8)
    for (int row = 0; row < h; ++row) {
      std::vector<Contribution> contrib;
      std::vector<double> weights;
      auto& rd = rows[row];
      for (int col = 0; col < w; ++col) {
        if (!mask.at(col, row)) continue;
        const double t_final = trace_pixel(plan, col, row, contrib);
        if (contrib.empty()) continue;
        weights.resize(contrib.size());
        double t = 1.0;
        for (std::size_t i = 0; i < contrib.size(); ++i) {
          weights[i] = t * contrib[i].alpha;
          t *= 1.0 - contrib[i].alpha;
        }
        Vec3 target;
        for (int ch = 0; ch < 3; ++ch) target[ch] = image.at(col, row, ch) - t_final * cfg.background[ch];
        for (std::size_t i = 0; i < contrib.size(); ++i) {
          const auto pi = contrib[i].particle;
          rd.rhs.emplace_back(pi, weights[i] * target);
          rd.weight.emplace_back(pi, weights[i]);
          for (std::size_t j = 0; j < contrib.size(); ++j)
            rd.triplets.push_back({pi, contrib[j].particle, weights[i] * weights[j]});
        }
      }
    }
    for (auto& rd : rows) {
      triplets.insert(triplets.end(), rd.triplets.begin(), rd.triplets.end());
      for (const auto& [pi, v] : rd.rhs) rhs[pi] += v;
      for (const auto& [pi, v] : rd.weight) weight_sum[pi] += v;
    }
  }

  ColorFit out;
  out.particles.assign(particles.begin(), particles.end());
  std::vector<std::int64_t> unknown(n, -1);
  std::vector<std::size_t> covered;
  for (std::size_t i = 0; i < n; ++i) {
    if (weight_sum[i] > 0.0) {
      unknown[i] = static_cast<std::int64_t>(covered.size());
      covered.push_back(i);
    } else {
      out.uncovered.push_back(i);
    }
  }
  if (covered.empty()) return out;

  const auto m = static_cast<Eigen::Index>(covered.size());
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(triplets.size() + covered.size());
  for (const auto& t : triplets) entries.emplace_back(unknown[t.row], unknown[t.col], t.value);
  for (Eigen::Index i = 0; i < m; ++i) entries.emplace_back(i, i, cfg.ridge);
  Eigen::SparseMatrix<double> normal(m, m);
  normal.setFromTriplets(entries.begin(), entries.end());

  Eigen::MatrixXd b(m, 3);
  for (Eigen::Index i = 0; i < m; ++i) b.row(i) = rhs[covered[i]].transpose();

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(normal);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorCode::DegenerateGeometry, "color normal equations could not be factorized");
  const Eigen::MatrixXd colors = solver.solve(b);
  for (Eigen::Index i = 0; i < m; ++i)
    out.particles[covered[i]].color = colors.row(i).transpose().cwiseMax(0.0).cwiseMin(1.0);
  return out;
}

namespace {

struct PixelGrad {
  std::uint32_t particle;
  double opacity;
  Vec3 color;
};

// Forward pass of one view: the loss and, when `grads` is given, the
// per-particle gradient contributions in deterministic row order.
double view_loss(std::span<const GaussianParticle> particles, const PinholeCamera& cam,
                 const Image& image, const Mask& mask, const RefineConfig& cfg,
                 std::vector<std::vector<PixelGrad>>* grads) {
  const RasterPlan plan = plan_raster(particles, cam, cfg.raster);
  const int h = cam.height(), w = cam.width();
  const double area = static_cast<double>(mask.count());
  if (area == 0.0) throw Error(ErrorCode::EmptyMask, "view " + cam.name() + " has an empty mask");

  std::vector<double> row_inter(h, 0.0), row_union(h, 0.0), row_l1(h, 0.0);
  Image rendered(w, h, 4);

#pragma omp parallel for schedule(dynamic, 8)
  for (int row = 0; row < h; ++row) {
    std::vector<Contribution> contrib;
    for (int col = 0; col < w; ++col) {
      const double t_final = trace_pixel(plan, col, row, contrib);
      Vec3 c = t_final * cfg.background;
      double t = 1.0;
      for (const auto& k : contrib) {
        c += t * k.alpha * particles[k.particle].color;
        t *= 1.0 - k.alpha;
      }
      double* px = rendered.pixel(col, row);
      px[0] = c.x();
      px[1] = c.y();
      px[2] = c.z();
      px[3] = 1.0 - t_final;
      const double m = mask.at(col, row);
      row_inter[row] += px[3] * m;
      row_union[row] += px[3] + m - px[3] * m;
      for (int ch = 0; ch < 3; ++ch) row_l1[row] += std::abs(px[ch] - (m > 0.0 ? image.at(col, row, ch) : 1.0));
    }
  }
  const double inter = std::accumulate(row_inter.begin(), row_inter.end(), 0.0);
  const double uni = std::accumulate(row_union.begin(), row_union.end(), 0.0);
  const double l1 = std::accumulate(row_l1.begin(), row_l1.end(), 0.0);
  if (!(uni > 0.0)) throw Error(ErrorCode::BothEmpty, "coverage and mask are both empty");
  const double loss = (1.0 - inter / uni) + cfg.loss.lambda_color * l1 / (3.0 * area);
  if (!grads) return loss;

  grads->assign(h, {});
  const double color_scale = cfg.loss.lambda_color / (3.0 * area);

#pragma omp parallel for schedule(dynamic, 8)
  for (int row = 0; row < h; ++row) {
    std::vector<Contribution> contrib;
    std::vector<double> trans;
    auto& out = (*grads)[row];
    for (int col = 0; col < w; ++col) {
      trace_pixel(plan, col, row, contrib);
      if (contrib.empty()) continue;
      const double m = mask.at(col, row);
      const double* px = rendered.pixel(col, row);
      Vec3 dl_dc;
      for (int ch = 0; ch < 3; ++ch) {
        const double diff = px[ch] - (m > 0.0 ? image.at(col, row, ch) : 1.0);
        dl_dc[ch] = color_scale * (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0));
      }
      const double dl_dm = -(m * uni - inter * (1.0 - m)) / (uni * uni);

      trans.resize(contrib.size());
      double t = 1.0;
      for (std::size_t i = 0; i < contrib.size(); ++i) {
        trans[i] = t;
        t *= 1.0 - contrib[i].alpha;
      }
      // Back to front: `behind` is the normalized composite of everything
      // after k including the background, `clear` the transmittance after k.
      Vec3 behind = cfg.background;
      double clear = 1.0;
      for (std::size_t r = contrib.size(); r-- > 0;) {
        const auto& k = contrib[r];
        const Vec3& ck = particles[k.particle].color;
        const double da = trans[r] * (ck - behind).dot(dl_dc) + trans[r] * clear * dl_dm;
        out.push_back({k.particle, da * k.gaussian, trans[r] * k.alpha * dl_dc});
        behind = k.alpha * ck + (1.0 - k.alpha) * behind;
        clear *= 1.0 - k.alpha;
      }
    }
  }
  return loss;
}

}  // namespace

LossGradient loss_and_gradient(std::span<const GaussianParticle> particles, const FrameSet& frame,
                               const CameraRig& rig, const RefineConfig& cfg) {
  cfg.validate();
  check_frame(frame, rig);
  const auto views = selected_views(cfg, rig);
  LossGradient out;
  out.opacity.assign(particles.size(), 0.0);
  out.color.assign(particles.size(), Vec3::Zero());
  const double inv_views = 1.0 / static_cast<double>(views.size());
  std::vector<std::vector<PixelGrad>> grads;
  for (auto v : views) {
    out.loss += inv_views * view_loss(particles, rig[v], frame.images[v], frame.masks[v], cfg, &grads);
    for (const auto& row : grads)
      for (const auto& g : row) {
        out.opacity[g.particle] += inv_views * g.opacity;
        out.color[g.particle] += inv_views * g.color;
      }
  }
  return out;
}

double refinement_loss(std::span<const GaussianParticle> particles, const FrameSet& frame,
                       const CameraRig& rig, const RefineConfig& cfg) {
  cfg.validate();
  check_frame(frame, rig);
  const auto views = selected_views(cfg, rig);
  double loss = 0.0;
  for (auto v : views) loss += view_loss(particles, rig[v], frame.images[v], frame.masks[v], cfg, nullptr);
  return loss / static_cast<double>(views.size());
}

OpacityFit refine_opacity(std::span<const GaussianParticle> particles, const FrameSet& frame,
                          const CameraRig& rig, const RefineConfig& cfg) {
  cfg.validate();
  OpacityFit out;
  out.particles.assign(particles.begin(), particles.end());
  for (auto& p : out.particles) p.opacity = std::clamp(p.opacity, cfg.min_opacity, cfg.max_opacity);
  for (int step = 0; step < cfg.opacity_steps; ++step) {
    const LossGradient g = loss_and_gradient(out.particles, frame, rig, cfg);
    out.loss_trace.push_back(g.loss);
    for (std::size_t i = 0; i < out.particles.size(); ++i) {
      auto& p = out.particles[i];
      p.opacity = std::clamp(p.opacity - cfg.learning_rate * g.opacity[i], cfg.min_opacity, cfg.max_opacity);
      if (cfg.color_mode == ColorMode::Gradient)
        p.color = (p.color - cfg.learning_rate * g.color[i]).cwiseMax(0.0).cwiseMin(1.0);
    }
  }
  out.loss_trace.push_back(refinement_loss(out.particles, frame, rig, cfg));
  return out;
}

Metrics evaluate_holdout(std::span<const GaussianParticle> particles, const FrameSet& frame,
                         const CameraRig& rig, std::size_t view, const RasterConfig& raster) {
  check_frame(frame, rig);
  if (view >= rig.size()) throw Error(ErrorCode::InvalidArgument, "view index out of range");
  const RenderedImage image = rasterize(particles, rig[view], Vec3::Ones(), raster);
  return metric_suite(image, frame.images[view], frame.masks[view]);
}

}  // namespace splatcarve
