#include "splatcarve/embed.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "splatcarve/error.hpp"
#include "splatcarve/io.hpp"

namespace splatcarve {

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "Gauss-Legendre order must be >= 1");
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // refresh the derivative at the converged root
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    nodes[i] = x;
    weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return nodes[a] < nodes[b]; });
  std::vector<double> xs(n), ws(n);
  for (int i = 0; i < n; ++i) {
    xs[i] = nodes[order[i]];
    ws[i] = weights[order[i]];
  }
  nodes = std::move(xs);
  weights = std::move(ws);
}

SphereGrid make_sphere_grid(int bandwidth, int n_theta, int n_phi) {
  if (bandwidth < 0) throw Error(ErrorCode::InvalidArgument, "bandwidth must be >= 0");
  if (n_theta < bandwidth + 1) throw Error(ErrorCode::InvalidArgument, "n_theta must be >= L + 1");
  if (n_phi < 2 * bandwidth + 1) throw Error(ErrorCode::InvalidArgument, "n_phi must be >= 2L + 1");
  std::vector<double> x, w;
  gauss_legendre(n_theta, x, w);
  SphereGrid g;
  g.bandwidth = bandwidth;
  // x ascending means theta descending, so walk backwards
  for (int j = n_theta - 1; j >= 0; --j) g.theta.push_back(std::acos(x[j]));
  for (int i = 0; i < n_phi; ++i) g.phi.push_back(2.0 * std::numbers::pi * i / n_phi);
  for (int j = n_theta - 1; j >= 0; --j)
    for (int i = 0; i < n_phi; ++i) g.weight.push_back(w[j] * 2.0 * std::numbers::pi / n_phi);
  return g;
}

std::complex<double> spherical_harmonic(int l, int m, double theta, double phi) {
  if (l < 0 || std::abs(m) > l) throw Error(ErrorCode::InvalidArgument, "harmonic degree/order out of range");
  const int am = std::abs(m);
  const double p = std::sph_legendre(static_cast<unsigned>(l), static_cast<unsigned>(am), theta);
  const std::complex<double> y = std::polar(p, am * phi);
  if (m >= 0) return y;
  return (am % 2 ? -1.0 : 1.0) * std::conj(y);
}

std::vector<PinholeCamera> sphere_cameras(const Vec3& center, const SphereGrid& grid,
                                          const SphereCameraConfig& config) {
  if (!(config.bounding_radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "bounding radius must be > 0");
  if (config.image_size < 1) throw Error(ErrorCode::InvalidArgument, "image size must be >= 1");
  if (!(config.fill > 0.0 && config.fill <= 1.0)) throw Error(ErrorCode::InvalidArgument, "fill must be in (0, 1]");
  const double radius = config.radius > 0.0 ? config.radius : 2.0 * config.bounding_radius;
  if (config.radius < 0.0) throw Error(ErrorCode::InvalidArgument, "camera radius must be > 0");
  if (radius <= config.bounding_radius)
    throw Error(ErrorCode::InvalidArgument, "camera radius must exceed the bounding radius");

  const double half = 0.5 * config.image_size;
  const double sin_beta = config.bounding_radius / radius;
  const double tan_beta = sin_beta / std::sqrt(1.0 - sin_beta * sin_beta);
  const double focal = config.fill * half / tan_beta;

  std::vector<PinholeCamera> cams;
  cams.reserve(grid.node_count());
  int n = 0;
  for (double theta : grid.theta)
    for (double phi : grid.phi) {
      const Vec3 dir(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta));
      cams.push_back(look_at(center + radius * dir, center, focal, half, half, config.image_size,
                             config.image_size, "sphere_" + std::to_string(n++)));
    }
  return cams;
}

namespace {

constexpr double kForegroundLevel = 1.0 - 0.5 / 255.0;
constexpr int kCells = 8;
constexpr int kBins = 16;
constexpr int kRings = 16;

bool is_foreground(const double* px) { return std::min({px[0], px[1], px[2]}) < kForegroundLevel; }

}  // namespace

std::vector<double> HandcraftedExtractor::extract(const Image& image) const {
  if (image.width() != kSize || image.height() != kSize || image.channels() < 3)
    throw Error(ErrorCode::BadDimensions, "feature extractor expects a 224x224 RGB image");
  constexpr int cell = kSize / kCells;
  std::vector<double> f(kDim, 0.0);
  double* mean_rgb = f.data();
  double* coverage = f.data() + 192;
  double* hist = f.data() + 256;
  double* stdev = f.data() + 304;
  double* rings = f.data() + 496;

  // Cell color statistics run over every pixel so that they vary
  // continuously as the silhouette crosses cell boundaries.
  constexpr double area = cell * cell;
  std::size_t fg_total = 0;
  for (int cy = 0; cy < kCells; ++cy)
    for (int cx = 0; cx < kCells; ++cx) {
      const int c = cy * kCells + cx;
      std::size_t n = 0;
      double sum[3] = {0, 0, 0};
      for (int row = cy * cell; row < (cy + 1) * cell; ++row)
        for (int col = cx * cell; col < (cx + 1) * cell; ++col) {
          const double* px = image.pixel(col, row);
          for (int ch = 0; ch < 3; ++ch) sum[ch] += px[ch];
          if (!is_foreground(px)) continue;
          ++n;
          for (int ch = 0; ch < 3; ++ch) {
            const int bin = std::clamp(static_cast<int>(std::floor(px[ch] * kBins)), 0, kBins - 1);
            hist[ch * kBins + bin] += 1.0;
          }
        }
      fg_total += n;
      coverage[c] = static_cast<double>(n) / area;
      double mean[3];
      for (int ch = 0; ch < 3; ++ch) mean_rgb[3 * c + ch] = mean[ch] = sum[ch] / area;
      double sq[3] = {0, 0, 0};
      for (int row = cy * cell; row < (cy + 1) * cell; ++row)
        for (int col = cx * cell; col < (cx + 1) * cell; ++col) {
          const double* px = image.pixel(col, row);
          for (int ch = 0; ch < 3; ++ch) sq[ch] += (px[ch] - mean[ch]) * (px[ch] - mean[ch]);
        }
      for (int ch = 0; ch < 3; ++ch) stdev[3 * c + ch] = std::sqrt(sq[ch] / area);
    }
  if (fg_total > 0)
    for (int b = 0; b < 3 * kBins; ++b) hist[b] /= static_cast<double>(fg_total);

  // rings of width size/(2*16) about the principal point
  const double center = 0.5 * kSize;
  const double width = center / kRings;
  double ring_fg[kRings] = {}, ring_all[kRings] = {};
  for (int row = 0; row < kSize; ++row)
    for (int col = 0; col < kSize; ++col) {
      const double d = std::hypot(col - center, row - center);
      const int k = static_cast<int>(std::floor(d / width));
      if (k >= kRings) continue;
      ring_all[k] += 1.0;
      if (is_foreground(image.pixel(col, row))) ring_fg[k] += 1.0;
    }
  for (int k = 0; k < kRings; ++k) rings[k] = ring_all[k] > 0 ? ring_fg[k] / ring_all[k] : 0.0;
  return f;
}

std::vector<double> extract_features(const Image& image) { return HandcraftedExtractor{}.extract(image); }

Eigen::MatrixXd view_features(std::span<const GaussianParticle> particles,
                              std::span<const PinholeCamera> cameras, const FeatureExtractor& extractor,
                              const RasterConfig& raster) {
  const int n = static_cast<int>(cameras.size());
  Eigen::MatrixXd out(n, extractor.dim());
  std::vector<std::vector<double>> rows(n);
#pragma omp parallel for schedule(dynamic)
  for (int v = 0; v < n; ++v) {
    const RenderedImage img = rasterize(particles, cameras[v], Vec3::Ones(), raster);
    rows[v] = extractor.extract(img);
  }
  for (int v = 0; v < n; ++v) {
    if (static_cast<int>(rows[v].size()) != extractor.dim())
      throw Error(ErrorCode::DimensionMismatch, "extractor returned a vector of the wrong length");
    out.row(v) = Eigen::Map<const Eigen::RowVectorXd>(rows[v].data(), extractor.dim());
  }
  return out;
}

Eigen::MatrixXcd sh_coefficients(const Eigen::MatrixXd& samples, const SphereGrid& grid) {
  const auto nodes = static_cast<Eigen::Index>(grid.node_count());
  if (samples.rows() != nodes) throw Error(ErrorCode::DimensionMismatch, "need one sample row per grid node");
  const int nc = grid.coefficient_count();
  Eigen::MatrixXcd basis(nodes, nc);
  const auto n_phi = grid.phi.size();
  for (Eigen::Index n = 0; n < nodes; ++n) {
    const double theta = grid.theta[n / n_phi], phi = grid.phi[n % n_phi];
    for (int l = 0; l <= grid.bandwidth; ++l)
      for (int m = -l; m <= l; ++m)
        basis(n, sh_index(l, m)) = grid.weight[n] * std::conj(spherical_harmonic(l, m, theta, phi));
  }
  return samples.transpose().cast<std::complex<double>>() * basis;
}

Eigen::VectorXd power_features(const Eigen::MatrixXcd& coefficients) {
  Eigen::VectorXd out(coefficients.size());
  Eigen::Index i = 0;
  for (Eigen::Index k = 0; k < coefficients.rows(); ++k)
    for (Eigen::Index c = 0; c < coefficients.cols(); ++c) out[i++] = std::norm(coefficients(k, c));
  return out;
}

Eigen::VectorXd frame_power_features(std::span<const GaussianParticle> particles, const Vec3& center,
                                     const SphereGrid& grid, const SphereCameraConfig& cameras,
                                     const FeatureExtractor& extractor, const RasterConfig& raster) {
  const auto cams = sphere_cameras(center, grid, cameras);
  return power_features(sh_coefficients(view_features(particles, cams, extractor, raster), grid));
}

namespace {

void canonical_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  if (v[best] < 0.0) v = -v;
}

Eigen::MatrixXd centered(const Eigen::MatrixXd& x) { return x.rowwise() - x.colwise().mean(); }

}  // namespace

Eigen::MatrixXd PcaModel::transform(const Eigen::MatrixXd& x) const {
  if (x.cols() != mean.size()) throw Error(ErrorCode::DimensionMismatch, "PCA input width differs from the fit");
  return (x.rowwise() - mean.transpose()) * components;
}

PcaModel pca_fit(const Eigen::MatrixXd& x, int target_dim) {
  const Eigen::Index n = x.rows(), d = x.cols();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "PCA needs at least two samples");
  if (target_dim < 1) throw Error(ErrorCode::InvalidArgument, "PCA target dimension must be >= 1");
  PcaModel model;
  model.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd xc = centered(x);
  const double denom = static_cast<double>(n - 1);

  Eigen::VectorXd evals;  // descending
  Eigen::MatrixXd evecs;  // D x r
  if (n < d) {
    // Gram route: eigenvectors of Xc Xc^T map to covariance eigenvectors
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(xc * xc.transpose() / denom);
    evals = es.eigenvalues().reverse();
    const Eigen::MatrixXd u = es.eigenvectors().rowwise().reverse();
    evecs = xc.transpose() * u;
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(xc.transpose() * xc / denom);
    evals = es.eigenvalues().reverse();
    evecs = es.eigenvectors().rowwise().reverse();
  }
  const double top = std::max(evals.size() ? evals[0] : 0.0, 0.0);
  const double tol = top * 1e-12 * static_cast<double>(std::max(n, d));
  Eigen::Index rank = 0;
  while (rank < evals.size() && evals[rank] > tol && evals[rank] > 0.0) ++rank;
  if (rank == 0) throw Error(ErrorCode::RankDeficient, "data has zero variance");
  const Eigen::Index k = std::min<Eigen::Index>(target_dim, rank);
  model.truncated = k < target_dim;
  model.components.resize(d, k);
  model.variances.resize(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::VectorXd v = evecs.col(c);
    v.normalize();
    canonical_sign(v);
    model.components.col(c) = v;
    model.variances[c] = evals[c];
  }
  return model;
}

AdversarialPca adversarial_pca(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, int out_dim, double mu) {
  const Eigen::Index n = x.rows(), d = x.cols();
  if (y.rows() != n) throw Error(ErrorCode::DimensionMismatch, "X and Y sample counts differ");
  if (y.cols() < 1) throw Error(ErrorCode::InvalidArgument, "Y needs at least one column");
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "adversarial PCA needs at least two samples");
  if (!(mu >= 0.0)) throw Error(ErrorCode::InvalidArgument, "mu must be >= 0");
  if (out_dim < 1 || out_dim > d) throw Error(ErrorCode::InvalidArgument, "output dimension out of range");

  const double denom = static_cast<double>(n - 1);
  const Eigen::MatrixXd xc = centered(x), yc = centered(y);
  const Eigen::MatrixXd cyy = yc.transpose() * yc / denom;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ey(cyy);
  const double ymax = ey.eigenvalues().maxCoeff(), ymin = ey.eigenvalues().minCoeff();
  if (!(ymax > 0.0) || ymin <= 1e-12 * ymax)
    throw Error(ErrorCode::SingularConcomitant, "concomitant covariance is singular");
  const Eigen::MatrixXd cxy = xc.transpose() * yc / denom;
  const Eigen::MatrixXd s_pred = cxy * cyy.ldlt().solve(cxy.transpose());
  Eigen::MatrixXd target = xc.transpose() * xc / denom - mu * s_pred;
  target = (0.5 * (target + target.transpose())).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(target);

  AdversarialPca out;
  out.mu = mu;
  out.basis.resize(d, out_dim);
  out.eigenvalues.resize(out_dim);
  for (int c = 0; c < out_dim; ++c) {
    Eigen::VectorXd v = es.eigenvectors().col(d - 1 - c);
    canonical_sign(v);
    out.basis.col(c) = v;
    out.eigenvalues[c] = es.eigenvalues()[d - 1 - c];
  }
  out.embeddings = xc * out.basis;
  return out;
}

double mean_r2(const Eigen::MatrixXd& z, const Eigen::MatrixXd& y) {
  if (z.rows() != y.rows()) throw Error(ErrorCode::DimensionMismatch, "regressor and target rows differ");
  Eigen::MatrixXd design(z.rows(), z.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(z.cols()) = z;
  const Eigen::MatrixXd beta = design.colPivHouseholderQr().solve(y);
  const Eigen::MatrixXd resid = y - design * beta;
  const Eigen::MatrixXd yc = centered(y);
  double sum = 0.0;
  for (Eigen::Index c = 0; c < y.cols(); ++c) {
    const double tot = yc.col(c).squaredNorm();
    sum += tot > 0.0 ? 1.0 - resid.col(c).squaredNorm() / tot : 0.0;
  }
  return sum / static_cast<double>(y.cols());
}

MuSelection select_mu(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, int out_dim, int max_exponent) {
  for (int e = 0; e <= max_exponent; ++e) {
    MuSelection s;
    s.mu = std::pow(10.0, e);
    s.fit = adversarial_pca(x, y, out_dim, s.mu);
    s.r2 = mean_r2(s.fit.embeddings, y);
    if (s.r2 < kLeakR2) return s;
  }
  throw Error(ErrorCode::NoFeasibleMu,
              "no mu up to 1e" + std::to_string(max_exponent) + " brings the azimuth R^2 below 0.05");
}

Eigen::MatrixXd azimuth_concomitants(std::span<const double> azimuths) {
  Eigen::MatrixXd y(static_cast<Eigen::Index>(azimuths.size()), 2);
  for (std::size_t i = 0; i < azimuths.size(); ++i) {
    y(i, 0) = std::sin(azimuths[i]);
    y(i, 1) = std::cos(azimuths[i]);
  }
  return y;
}

Embedding embed_dataset(const Eigen::MatrixXd& power, std::span<const double> azimuths,
                        const EmbeddingConfig& config) {
  if (static_cast<std::size_t>(power.rows()) != azimuths.size())
    throw Error(ErrorCode::DimensionMismatch, "one azimuth per frame required");
  if (config.pca_dim < 1 || config.out_dim < 1)
    throw Error(ErrorCode::InvalidArgument, "embedding dimensions must be >= 1");
  Embedding e;
  const int pca_target = static_cast<int>(std::min<Eigen::Index>(config.pca_dim, power.rows() - 1));
  e.pca = pca_fit(power, pca_target);
  const Eigen::MatrixXd projected = e.pca.transform(power);
  const Eigen::MatrixXd y = azimuth_concomitants(azimuths);
  const int room = static_cast<int>(projected.cols() - y.cols());
  const int out_dim = std::min(config.out_dim, std::max(room, 1));
  e.selection = select_mu(projected, y, out_dim, config.max_mu_exponent);
  return e;
}

std::vector<int> knn_query(const Eigen::MatrixXd& embeddings, std::span<const int> frames, int query_frame,
                           int k, int window) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  if (window < 0) throw Error(ErrorCode::InvalidArgument, "exclusion window must be >= 0");
  if (static_cast<std::size_t>(embeddings.rows()) != frames.size())
    throw Error(ErrorCode::DimensionMismatch, "one frame index per embedding row required");
  const auto q = std::find(frames.begin(), frames.end(), query_frame);
  if (q == frames.end()) throw Error(ErrorCode::InvalidArgument, "query frame not present");
  const Eigen::RowVectorXd query = embeddings.row(q - frames.begin());

  std::vector<std::pair<double, int>> cand;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (std::abs(static_cast<long long>(frames[i]) - query_frame) <= window) continue;
    cand.emplace_back((embeddings.row(static_cast<Eigen::Index>(i)) - query).squaredNorm(), frames[i]);
  }
  if (cand.size() < static_cast<std::size_t>(k))
    throw Error(ErrorCode::InsufficientCandidates,
                "only " + std::to_string(cand.size()) + " frames outside the exclusion window");
  std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
  std::vector<int> out(k);
  for (int i = 0; i < k; ++i) out[i] = cand[i].second;
  return out;
}

void write_feature_file(const std::filesystem::path& path, std::span<const FrameFeatures> records) {
  std::string out;
  const Eigen::Index views = records.empty() ? 0 : records[0].samples.rows();
  const Eigen::Index dim = records.empty() ? 0 : records[0].samples.cols();
  io::append_u32(out, static_cast<std::uint32_t>(records.size()));
  io::append_u32(out, static_cast<std::uint32_t>(views));
  io::append_u32(out, static_cast<std::uint32_t>(dim));
  for (const auto& r : records) {
    if (r.samples.rows() != views || r.samples.cols() != dim)
      throw Error(ErrorCode::DimensionMismatch, "feature records differ in shape");
    io::append_u32(out, static_cast<std::uint32_t>(r.frame));
    for (Eigen::Index v = 0; v < views; ++v)
      for (Eigen::Index c = 0; c < dim; ++c) io::append_f32(out, static_cast<float>(r.samples(v, c)));
  }
  io::write_atomic(path, out);
}

std::vector<FrameFeatures> read_feature_file(const std::filesystem::path& path) {
  const std::string bytes = io::read_file(path);
  std::size_t off = 0;
  if (bytes.size() < 12) throw Error(ErrorCode::FormatError, "feature file header truncated: " + path.string());
  const std::uint32_t count = io::read_u32(bytes, off);
  const std::uint32_t views = io::read_u32(bytes, off);
  const std::uint32_t dim = io::read_u32(bytes, off);
  const std::size_t record = 4 + 4ull * views * dim;
  if (bytes.size() != 12 + record * count)
    throw Error(ErrorCode::FormatError, "feature file size does not match its header: " + path.string());
  std::vector<FrameFeatures> out(count);
  for (auto& r : out) {
    r.frame = static_cast<int>(io::read_u32(bytes, off));
    r.samples.resize(views, dim);
    for (std::uint32_t v = 0; v < views; ++v)
      for (std::uint32_t c = 0; c < dim; ++c) r.samples(v, c) = io::read_f32(bytes, off);
  }
  return out;
}

void write_embedding_csv(const std::filesystem::path& path, std::span<const int> frames,
                         const Eigen::MatrixXd& embeddings) {
  if (static_cast<std::size_t>(embeddings.rows()) != frames.size())
    throw Error(ErrorCode::DimensionMismatch, "one frame index per embedding row required");
  std::ostringstream os;
  os << "frame";
  for (Eigen::Index c = 0; c < embeddings.cols(); ++c) os << ",e" << c;
  os << '\n';
  for (std::size_t i = 0; i < frames.size(); ++i) {
    os << frames[i];
    for (Eigen::Index c = 0; c < embeddings.cols(); ++c)
      os << ',' << io::format_double(embeddings(static_cast<Eigen::Index>(i), c));
    os << '\n';
  }
  io::write_atomic(path, os.str());
}

}  // namespace splatcarve
