#include "splatcarve/loss_metrics.hpp"

#include <array>
#include <cmath>
#include <vector>

#include "splatcarve/error.hpp"

namespace splatcarve {

namespace {

void check_same(const Image& a, const Image& b, const Mask& m) {
  if (a.width() != b.width() || a.height() != b.height() || a.width() != m.width() ||
      a.height() != m.height() || a.channels() < 3 || b.channels() < 3)
    throw Error(ErrorCode::DimensionMismatch, "prediction, ground truth and mask sizes differ");
}

}  // namespace

Image whiten_background(const Image& gt, const Mask& mask) {
  Image out(gt.width(), gt.height(), 3);
  for (int row = 0; row < gt.height(); ++row)
    for (int col = 0; col < gt.width(); ++col)
      for (int ch = 0; ch < 3; ++ch) out.at(col, row, ch) = mask.at(col, row) ? gt.at(col, row, ch) : 1.0;
  return out;
}

double l1_color_loss(const Image& pred, const Image& gt, const Mask& mask) {
  check_same(pred, gt, mask);
  const std::size_t area = mask.count();
  if (area == 0) throw Error(ErrorCode::EmptyMask, "L1 color loss needs a non-empty mask");
  double sum = 0.0;
  for (int row = 0; row < gt.height(); ++row)
    for (int col = 0; col < gt.width(); ++col) {
      const bool in = mask.at(col, row) != 0;
      for (int ch = 0; ch < 3; ++ch)
        sum += std::abs(pred.at(col, row, ch) - (in ? gt.at(col, row, ch) : 1.0));
    }
  return sum / (3.0 * static_cast<double>(area));
}

double iou_loss(std::span<const double> coverage, const Mask& mask) {
  if (coverage.size() != mask.pixel_count())
    throw Error(ErrorCode::DimensionMismatch, "coverage and mask sizes differ");
  double inter = 0.0, uni = 0.0;
  for (std::size_t i = 0; i < coverage.size(); ++i) {
    const double p = coverage[i];
    const double m = mask.data()[i];
    inter += p * m;
    uni += p + m - p * m;
  }
  if (!(uni > 0.0)) throw Error(ErrorCode::BothEmpty, "IoU undefined: coverage and mask are both empty");
  return 1.0 - inter / uni;
}

double iou_loss(const Image& coverage_source, int coverage_channel, const Mask& mask) {
  std::vector<double> cov(coverage_source.pixel_count());
  for (std::size_t i = 0; i < cov.size(); ++i)
    cov[i] = coverage_source.data()[i * coverage_source.channels() + coverage_channel];
  return iou_loss(cov, mask);
}

double total_loss(const Image& pred_rgba, const Image& gt, const Mask& mask, const LossConfig& cfg) {
  if (pred_rgba.channels() != 4) throw Error(ErrorCode::BadDimensions, "total loss needs an RGBA prediction");
  if (cfg.lambda_color < 0.0) throw Error(ErrorCode::InvalidArgument, "lambda_color must be >= 0");
  return iou_loss(pred_rgba, 3, mask) + cfg.lambda_color * l1_color_loss(pred_rgba, gt, mask);
}

double psnr(const Image& a, const Image& b) {
  if (a.width() != b.width() || a.height() != b.height())
    throw Error(ErrorCode::DimensionMismatch, "PSNR inputs differ in size");
  double se = 0.0;
  for (int row = 0; row < a.height(); ++row)
    for (int col = 0; col < a.width(); ++col)
      for (int ch = 0; ch < 3; ++ch) {
        const double d = a.at(col, row, ch) - b.at(col, row, ch);
        se += d * d;
      }
  const double mse = se / (3.0 * static_cast<double>(a.pixel_count()));
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(1.0 / mse);
}

namespace {

constexpr int kSsimRadius = 5;
constexpr int kSsimWindow = 2 * kSsimRadius + 1;

std::array<double, kSsimWindow> ssim_kernel() {
  std::array<double, kSsimWindow> k{};
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double x = i - kSsimRadius;
    k[i] = std::exp(-x * x / (2.0 * 1.5 * 1.5));
    sum += k[i];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Separable "valid" filtering of a single-channel plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int w, int h,
                                 const std::array<double, kSsimWindow>& k) {
  const int ow = w - 2 * kSsimRadius, oh = h - 2 * kSsimRadius;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
  for (int row = 0; row < h; ++row)
    for (int col = 0; col < ow; ++col) {
      double s = 0.0;
      for (int t = 0; t < kSsimWindow; ++t) s += k[t] * plane[static_cast<std::size_t>(row) * w + col + t];
      tmp[static_cast<std::size_t>(row) * ow + col] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int row = 0; row < oh; ++row)
    for (int col = 0; col < ow; ++col) {
      double s = 0.0;
      for (int t = 0; t < kSsimWindow; ++t) s += k[t] * tmp[static_cast<std::size_t>(row + t) * ow + col];
      out[static_cast<std::size_t>(row) * ow + col] = s;
    }
  return out;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
  if (a.width() != b.width() || a.height() != b.height())
    throw Error(ErrorCode::DimensionMismatch, "SSIM inputs differ in size");
  if (a.width() < kSsimWindow || a.height() < kSsimWindow)
    throw Error(ErrorCode::BadDimensions, "SSIM needs images of at least 11x11");
  const int w = a.width(), h = a.height();
  const auto k = ssim_kernel();
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;

  double total = 0.0;
  std::vector<double> x(a.pixel_count()), y(a.pixel_count()), xx(x.size()), yy(x.size()), xy(x.size());
  for (int ch = 0; ch < 3; ++ch) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = a.data()[i * a.channels() + ch];
      y[i] = b.data()[i * b.channels() + ch];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, w, h, k), my = filter_valid(y, w, h, k);
    const auto sxx = filter_valid(xx, w, h, k), syy = filter_valid(yy, w, h, k);
    const auto sxy = filter_valid(xy, w, h, k);
    double sum = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cxy = sxy[i] - mx[i] * my[i];
      sum += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cxy + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += sum / static_cast<double>(mx.size());
  }
  return total / 3.0;
}

Metrics metric_suite(const Image& pred_rgba, const Image& gt, const Mask& mask) {
  check_same(pred_rgba, gt, mask);
  if (pred_rgba.channels() != 4) throw Error(ErrorCode::BadDimensions, "metrics need an RGBA prediction");
  Metrics m;
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < mask.pixel_count(); ++i) {
    const bool p = pred_rgba.data()[4 * i + 3] >= 0.5;
    const bool g = mask.data()[i] != 0;
    inter += p && g;
    uni += p || g;
  }
  m.iou = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  m.l1 = 100.0 * l1_color_loss(pred_rgba, gt, mask);
  const Image white = whiten_background(gt, mask);
  m.psnr = psnr(pred_rgba, white);
  m.ssim = ssim(pred_rgba, white);
  return m;
}

}  // namespace splatcarve
