#pragma once

#include <Eigen/Core>
#include <complex>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "splatcarve/camera.hpp"
#include "splatcarve/image.hpp"
#include "splatcarve/splat.hpp"

namespace splatcarve {

// Gauss-Legendre nodes x_j in (-1, 1) and weights (sum 2), ascending in x.
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

// Product quadrature on the sphere: Gauss-Legendre in cos(theta) times a
// uniform azimuth grid. Nodes are ordered theta-major (theta ascending),
// then phi_i = 2 pi i / n_phi.
struct SphereGrid {
  int bandwidth = 3;
  std::vector<double> theta;   // n_theta polar angles, strictly inside (0, pi)
  std::vector<double> phi;     // n_phi azimuths
  std::vector<double> weight;  // n_theta * n_phi combined weights, sum 4 pi

  std::size_t node_count() const { return theta.size() * phi.size(); }
  int coefficient_count() const { return (bandwidth + 1) * (bandwidth + 1); }
};

SphereGrid make_sphere_grid(int bandwidth = 3, int n_theta = 4, int n_phi = 8);

// Orthonormal complex harmonic Y_lm with the Condon-Shortley phase.
std::complex<double> spherical_harmonic(int l, int m, double theta, double phi);

// Column index of (l, m) in coefficient matrices: l^2 + (m + l).
constexpr int sh_index(int l, int m) { return l * l + m + l; }

struct SphereCameraConfig {
  double radius = 0.0;           // 0 selects 2 x bounding_radius
  double bounding_radius = 1.0;  // sphere that must fill `fill` of the frame
  int image_size = 224;
  double fill = 0.9;
};

// One inward-looking camera per grid node, up vector = world z projected
// orthogonal to the optical axis. The center projects to (size/2, size/2).
std::vector<PinholeCamera> sphere_cameras(const Vec3& center, const SphereGrid& grid,
                                          const SphereCameraConfig& config);

// Per-view encoder producing a fixed-length descriptor from an RGB render.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual int dim() const = 0;
  virtual std::vector<double> extract(const Image& image) const = 0;
};

// Deterministic 512-dimensional appearance descriptor of a 224x224 render on
// a white background:
//   [0, 192)   8x8 cells x mean RGB over the cell
//   [192, 256) 8x8 cells x foreground fraction
//   [256, 304) 16-bin histograms of R, G, B over the foreground
//   [304, 496) 8x8 cells x per-channel standard deviation over the cell
//   [496, 512) foreground fraction of 16 concentric rings about the center
// A pixel is foreground when any channel is below 1 - 0.5/255.
class HandcraftedExtractor final : public FeatureExtractor {
 public:
  static constexpr int kSize = 224;
  static constexpr int kDim = 512;
  int dim() const override { return kDim; }
  std::vector<double> extract(const Image& image) const override;
};

std::vector<double> extract_features(const Image& image);

// Renders the particles from every sphere camera over white and stacks the
// per-view features: rows follow the grid node order.
Eigen::MatrixXd view_features(std::span<const GaussianParticle> particles,
                              std::span<const PinholeCamera> cameras, const FeatureExtractor& extractor,
                              const RasterConfig& raster = {});

// f_hat(k, lm) = sum_nodes w f_k Y*_lm. Samples are node x feature.
Eigen::MatrixXcd sh_coefficients(const Eigen::MatrixXd& samples, const SphereGrid& grid);

// |f_hat|^2 flattened with feature index major, then l, then m = -l..l.
Eigen::VectorXd power_features(const Eigen::MatrixXcd& coefficients);

struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;  // D x k, orthonormal columns
  Eigen::VectorXd variances;   // descending, sample covariance eigenvalues
  bool truncated = false;      // requested dimension exceeded the data rank

  Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const;
};

// Rows of `x` are samples. Components are sign-canonical (largest-magnitude
// entry positive). Target dimension is clamped to the numerical rank.
PcaModel pca_fit(const Eigen::MatrixXd& x, int target_dim);

struct AdversarialPca {
  Eigen::MatrixXd basis;       // d x k, orthonormal columns
  Eigen::MatrixXd embeddings;  // n x k
  Eigen::VectorXd eigenvalues;
  double mu = 0.0;
};

// Top eigenvectors of C_X - mu * C_XY C_YY^-1 C_YX, with C the sample
// covariances. Both X and Y are centered internally, so centered input is
// passed through unchanged.
AdversarialPca adversarial_pca(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, int out_dim, double mu);

// Mean in-sample R^2 over the columns of `y` of ordinary least squares with
// intercept from `z`.
double mean_r2(const Eigen::MatrixXd& z, const Eigen::MatrixXd& y);

struct MuSelection {
  double mu = 1.0;
  double r2 = 0.0;
  AdversarialPca fit;
};

constexpr double kLeakR2 = 0.05;

// Smallest mu in {1, 10, ..., 10^max_exponent} whose embeddings give
// mean R^2 < 0.05 predicting y.
MuSelection select_mu(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, int out_dim, int max_exponent = 12);

// Concomitant matrix (sin phi, cos phi) per frame.
Eigen::MatrixXd azimuth_concomitants(std::span<const double> azimuths);

// k nearest rows by Euclidean distance among frames more than `window`
// frames away from the query frame; ties go to the smaller frame index.
std::vector<int> knn_query(const Eigen::MatrixXd& embeddings, std::span<const int> frames,
                           int query_frame, int k, int window = 500);

// The 512 * (L+1)^2 power feature vector of one particle set seen from
// sphere cameras about `center`.
Eigen::VectorXd frame_power_features(std::span<const GaussianParticle> particles, const Vec3& center,
                                     const SphereGrid& grid, const SphereCameraConfig& cameras,
                                     const FeatureExtractor& extractor, const RasterConfig& raster = {});

struct EmbeddingConfig {
  int pca_dim = 2000;  // clamped to n - 1
  int out_dim = 50;    // clamped to the PCA dimension minus the concomitant count
  int max_mu_exponent = 12;
};

struct Embedding {
  PcaModel pca;
  MuSelection selection;
};

// PCA of the stacked power features, then adversarial PCA against the
// (sin, cos) azimuth concomitants with mu picked by select_mu.
Embedding embed_dataset(const Eigen::MatrixXd& power, std::span<const double> azimuths,
                        const EmbeddingConfig& config = {});

// Feature import file: uint32 record count, uint32 views, uint32 dim, then
// per record a uint32 frame index followed by views x dim float32 values in
// grid node order. All little-endian.
struct FrameFeatures {
  int frame = 0;
  Eigen::MatrixXd samples;  // views x dim
};
void write_feature_file(const std::filesystem::path& path, std::span<const FrameFeatures> records);
std::vector<FrameFeatures> read_feature_file(const std::filesystem::path& path);

// CSV, one row per frame: frame index then the embedding values.
void write_embedding_csv(const std::filesystem::path& path, std::span<const int> frames,
                         const Eigen::MatrixXd& embeddings);

}  // namespace splatcarve
