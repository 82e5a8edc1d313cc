#pragma once

#include <cstddef>
#include <vector>

#include "splatcarve/camera.hpp"
#include "splatcarve/dataset.hpp"
#include "splatcarve/loss_metrics.hpp"
#include "splatcarve/splat.hpp"

namespace splatcarve {

enum class ColorMode { LeastSquares, Gradient };

struct RefineConfig {
  ColorMode color_mode = ColorMode::LeastSquares;
  int opacity_steps = 20;
  double learning_rate = 1e-2;
  std::vector<std::size_t> views;  // empty means every camera
  LossConfig loss;
  double ridge = 1e-6;
  double min_opacity = 0.01;
  double max_opacity = 1.0;
  Vec3 background = Vec3::Ones();  // rendering background; targets are whitened
  RasterConfig raster;

  void validate() const;
};

struct ColorFit {
  std::vector<GaussianParticle> particles;
  std::vector<std::size_t> uncovered;  // particles with zero weight, colors unchanged
};

// Solves the ridge-regularized normal equations of the masked squared color
// error over the selected views. The composited color is linear in the
// particle colors once opacities and geometry are fixed.
ColorFit fit_colors_least_squares(std::span<const GaussianParticle> particles, const FrameSet& frame,
                                  const CameraRig& rig, const RefineConfig& cfg = {});

struct LossGradient {
  double loss = 0.0;
  std::vector<double> opacity;  // dL / d opacity
  std::vector<Vec3> color;      // dL / d color
};

// Mean total loss over the selected views with analytic gradients through
// the compositing chain.
LossGradient loss_and_gradient(std::span<const GaussianParticle> particles, const FrameSet& frame,
                               const CameraRig& rig, const RefineConfig& cfg);
double refinement_loss(std::span<const GaussianParticle> particles, const FrameSet& frame,
                       const CameraRig& rig, const RefineConfig& cfg);

struct OpacityFit {
  std::vector<GaussianParticle> particles;
  std::vector<double> loss_trace;  // loss before each step, then the final loss
};

// Projected gradient descent on opacities (and colors in Gradient mode).
OpacityFit refine_opacity(std::span<const GaussianParticle> particles, const FrameSet& frame,
                          const CameraRig& rig, const RefineConfig& cfg);

// Renders camera `view` over white and scores it against that view's target.
Metrics evaluate_holdout(std::span<const GaussianParticle> particles, const FrameSet& frame,
                         const CameraRig& rig, std::size_t view, const RasterConfig& raster = {});

}  // namespace splatcarve
