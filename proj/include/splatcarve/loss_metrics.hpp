#pragma once

#include <span>

#include "splatcarve/image.hpp"

namespace splatcarve {

struct LossConfig {
  double lambda_color = 0.5;
};

// Ground truth with every pixel outside the mask replaced by white.
Image whiten_background(const Image& gt, const Mask& mask);

// sum |pred - whitened gt| over all pixels and RGB channels / (3 * mask area).
// `pred` may carry a fourth channel, which is ignored.
double l1_color_loss(const Image& pred, const Image& gt, const Mask& mask);

// 1 - sum(pm) / sum(p + m - pm) for soft coverage p and binary mask m.
double iou_loss(const Image& coverage_source, int coverage_channel, const Mask& mask);
double iou_loss(std::span<const double> coverage, const Mask& mask);

// iou_loss(coverage channel 3) + lambda_color * l1_color_loss for RGBA input.
double total_loss(const Image& pred_rgba, const Image& gt, const Mask& mask, const LossConfig& cfg = {});

struct Metrics {
  double iou = 0.0;
  double l1 = 0.0;    // L1 color loss x 100
  double psnr = 0.0;  // dB, peak 1.0; identical images give kPsnrIdentical
  double ssim = 0.0;
};

constexpr double kPsnrIdentical = 99.0;

double psnr(const Image& a, const Image& b);  // over the first three channels
// Mean SSIM over "valid" 11x11 Gaussian windows (sigma 1.5, K1 0.01, K2 0.03,
// data range 1), averaged over the first three channels.
double ssim(const Image& a, const Image& b);

// IoU on coverage >= 0.5; the color metrics compare against the whitened ground truth.
Metrics metric_suite(const Image& pred_rgba, const Image& gt, const Mask& mask);

}  // namespace splatcarve
