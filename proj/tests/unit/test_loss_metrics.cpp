#include <gtest/gtest.h>

#include <random>

#include "oracles/oracles.hpp"
#include "splatcarve/error.hpp"
#include "splatcarve/loss_metrics.hpp"

using namespace splatcarve;

namespace {

struct SkimageCase {
  int w, h;
  double p[4];
  double ssim, psnr;
};

// Frozen output of tests/oracles/ssim_reference.py (scikit-image 0.25).
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

}  // namespace

TEST(L1, Examples) {
  std::mt19937_64 rng(1);
  const Image gt = random_image(rng, 9, 7, 3);
  const Mask m = random_mask(rng, 9, 7);
  EXPECT_EQ(l1_color_loss(whiten_background(gt, m), gt, m), 0.0);
  EXPECT_DOUBLE_EQ(l1_color_loss(Image(9, 7, 3, 0.0), Image(9, 7, 3, 1.0), Mask(9, 7, 1)), 1.0);
  try {
    l1_color_loss(gt, gt, Mask(9, 7, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyMask);
  }
}

TEST(L1, RandomMatchesScalarLoop) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    const Image pred = random_image(rng, 13, 11, 4), gt = random_image(rng, 13, 11, 3);
    const Mask m = random_mask(rng, 13, 11, 0.6);
    EXPECT_NEAR(l1_color_loss(pred, gt, m), oracle::l1(pred, gt, m), 1e-10);
  }
}

TEST(IoU, Examples) {
  std::mt19937_64 rng(3);
  const Mask m = random_mask(rng, 10, 10);
  Image cov(10, 10, 1);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) cov.at(x, y, 0) = m.at(x, y);
  EXPECT_EQ(iou_loss(cov, 0, m), 0.0);

  Image inv(10, 10, 1);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) inv.at(x, y, 0) = 1 - m.at(x, y);
  EXPECT_EQ(iou_loss(inv, 0, m), 1.0);

  EXPECT_DOUBLE_EQ(iou_loss(Image(10, 10, 1, 0.5), 0, Mask(10, 10, 1)), 0.5);
  try {
    iou_loss(Image(10, 10, 1, 0.0), 0, Mask(10, 10, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BothEmpty);
  }
}

TEST(IoU, RandomAndBinarySymmetry) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    const Image pred = random_image(rng, 12, 9, 4);
    const Mask m = random_mask(rng, 12, 9);
    EXPECT_NEAR(iou_loss(pred, 3, m), oracle::soft_iou_loss(pred, 3, m), 1e-10);
    const Mask a = random_mask(rng, 12, 9), b = random_mask(rng, 12, 9);
    Image ca(12, 9, 1);
    Image cb(12, 9, 1);
    for (int y = 0; y < 9; ++y)
      for (int x = 0; x < 12; ++x) {
        ca.at(x, y, 0) = a.at(x, y);
        cb.at(x, y, 0) = b.at(x, y);
      }
    EXPECT_NEAR(iou_loss(ca, 0, b), iou_loss(cb, 0, a), 1e-15);
  }
}

TEST(TotalLoss, Composition) {
  std::mt19937_64 rng(5);
  const Image gt = random_image(rng, 8, 8, 3);
  const Mask m = random_mask(rng, 8, 8);
  Image perfect(8, 8, 4);
  const Image white = whiten_background(gt, m);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      for (int c = 0; c < 3; ++c) perfect.at(x, y, c) = white.at(x, y, c);
      perfect.at(x, y, 3) = m.at(x, y);
    }
  EXPECT_EQ(total_loss(perfect, gt, m), 0.0);

  for (int t = 0; t < 50; ++t) {
    const Image pred = random_image(rng, 8, 8, 4);
    const double iou = oracle::soft_iou_loss(pred, 3, m), l1 = oracle::l1(pred, gt, m);
    EXPECT_NEAR(total_loss(pred, gt, m), iou + 0.5 * l1, 1e-10);
    EXPECT_NEAR(total_loss(pred, gt, m, {0.0}), iou, 1e-10);
    EXPECT_GE(total_loss(pred, gt, m), 0.0);
  }
  EXPECT_EQ(LossConfig{}.lambda_color, 0.5);
}

TEST(Psnr, ReferenceValues) {
  for (const auto& c : kSkimage) {
    const Image a = pattern(c.w, c.h, c.p), b = perturbed(a, c.p);
    EXPECT_NEAR(psnr(a, b), c.psnr, 1e-6);
    EXPECT_NEAR(oracle::psnr(a, b), c.psnr, 1e-6);
  }
  std::mt19937_64 rng(6);
  const Image a = random_image(rng, 5, 5, 3);
  EXPECT_EQ(psnr(a, a), kPsnrIdentical);
}

TEST(Ssim, ReferenceValues) {
  for (const auto& c : kSkimage) {
    const Image a = pattern(c.w, c.h, c.p), b = perturbed(a, c.p);
    EXPECT_NEAR(ssim(a, b), c.ssim, 1e-6) << c.w << "x" << c.h;
    EXPECT_NEAR(oracle::ssim(a, b), c.ssim, 1e-6);
  }
}

TEST(Ssim, RandomMatchesDirectWindows) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 20; ++t) {
    const Image a = random_image(rng, 23, 17, 3), b = random_image(rng, 23, 17, 3);
    EXPECT_NEAR(ssim(a, b), oracle::ssim(a, b), 1e-9);
  }
  EXPECT_NEAR(ssim(Image(12, 12, 3, 0.3), Image(12, 12, 3, 0.3)), 1.0, 1e-15);
  EXPECT_THROW(ssim(Image(10, 12, 3), Image(10, 12, 3)), Error);
}

TEST(MetricSuite, IdenticalAndInverted) {
  std::mt19937_64 rng(8);
  const Image gt = random_image(rng, 16, 16, 3);
  const Mask m = random_mask(rng, 16, 16);
  Image pred(16, 16, 4);
  const Image white = whiten_background(gt, m);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      for (int c = 0; c < 3; ++c) pred.at(x, y, c) = white.at(x, y, c);
      pred.at(x, y, 3) = m.at(x, y);
    }
  const Metrics same = metric_suite(pred, gt, m);
  EXPECT_EQ(same.iou, 1.0);
  EXPECT_EQ(same.l1, 0.0);
  EXPECT_EQ(same.psnr, 99.0);
  EXPECT_NEAR(same.ssim, 1.0, 1e-12);

  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) pred.at(x, y, 3) = 1 - m.at(x, y);
  EXPECT_EQ(metric_suite(pred, gt, m).iou, 0.0);

  const Image noisy = random_image(rng, 16, 16, 4);
  const Metrics r = metric_suite(noisy, gt, m);
  EXPECT_NEAR(r.l1, 100.0 * oracle::l1(noisy, gt, m), 1e-9);
  Image rgb(16, 16, 3);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      for (int c = 0; c < 3; ++c) rgb.at(x, y, c) = noisy.at(x, y, c);
  EXPECT_NEAR(r.psnr, oracle::psnr(rgb, white), 1e-9);
}
