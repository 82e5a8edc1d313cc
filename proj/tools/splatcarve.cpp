// Command-line driver: synth, carve, frame, render, fit, embed, metrics.
#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <omp.h>
#include <optional>
#include <sstream>
#include <string>

#include "splatcarve/camera.hpp"
#include "splatcarve/carve.hpp"
#include "splatcarve/dataset.hpp"
#include "splatcarve/embed.hpp"
#include "splatcarve/error.hpp"
#include "splatcarve/io.hpp"
#include "splatcarve/loss_metrics.hpp"
#include "splatcarve/poseframe.hpp"
#include "splatcarve/refine.hpp"
#include "splatcarve/splat.hpp"
#include "splatcarve/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace splatcarve;

namespace {

constexpr const char* kThreadsEnv = "SPLATCARVE_THREADS";

struct FrameRange {
  int begin = 0, end = 0;
};

FrameRange parse_range(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw Error(ErrorCode::ConfigInvalid, "frame range must look like a:b");
  try {
    FrameRange r{std::stoi(text.substr(0, colon)), std::stoi(text.substr(colon + 1))};
    if (r.begin < 0 || r.end < r.begin) throw Error(ErrorCode::ConfigInvalid, "frame range must satisfy 0 <= a <= b");
    return r;
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::ConfigInvalid, "frame range must look like a:b");
  }
}

Vec3 vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::ConfigInvalid, "expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

// Defaults for every key; a config file and then flags override them.
json default_config() {
  return {
      {"dataset", "data"},
      {"rig", "data/rig.json"},
      {"output", "out"},
      {"frames", "0:1"},
      {"grid", {{"base_resolution", 112}, {"edge", 0.0}, {"scale", 1.2}}},
      {"splat", {{"render_threshold", 0.5}, {"size_factor", 0.7}, {"opacity", 0.9}}},
      {"loss", {{"lambda_color", 0.5}}},
      {"refine",
       {{"color_mode", "least_squares"}, {"opacity_steps", 20}, {"learning_rate", 1e-2}, {"views", json::array()}}},
      {"embed",
       {{"bandwidth", 3},
        {"n_theta", 4},
        {"n_phi", 8},
        {"radius", 0.0},
        {"extractor", "handcrafted"},
        {"features", ""},
        {"pca_dim", 2000},
        {"apca_dims", 50}}},
      {"synth",
       {{"ellipsoids", json::array({{{"center", {0.0, 0.0, 0.0}}, {"semi_axes", {1.0, 0.6, 0.5}}, {"color", {0.8, 0.5, 0.3}}}})},
        {"rig", {{"count", 6}, {"radius", 3.2}, {"height", 1.2}, {"width", 192}, {"height_px", 192}, {"focal", 200.0}}},
        {"motion", {{"start", {0.0, 0.0, 0.0}}, {"velocity", {0.0, 0.0, 0.0}}, {"azimuth", 0.0}, {"azimuth_rate", 0.0}}},
        {"particle_spacing", 0.02},
        {"particle_sigma", 0.5},
        {"particle_opacity", 0.95},
        {"background", {0.3, 0.3, 0.3}}}},
  };
}

struct Context {
  json config;
  fs::path dataset, rig_path, output;
  FrameRange frames;

  fs::path volume_path(int f) const { return output / "volumes" / ("volume_" + index_name(f) + ".bin"); }
  fs::path particle_path(const std::string& stage, int f) const {
    return output / stage / ("particles_" + index_name(f) + ".bin");
  }
  fs::path track_path() const { return output / "track.csv"; }

  static std::string index_name(int f) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%06d", f);
    return buf;
  }
};

template <class F>
void for_frames(const Context& ctx, F&& body) {
  for (int f = ctx.frames.begin; f < ctx.frames.end; ++f) {
    const auto t0 = std::chrono::steady_clock::now();
    body(f);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    std::fprintf(stderr, "frame=%d ms=%.1f\n", f, ms);
  }
}

CameraRig load_rig(const Context& ctx) {
  if (!fs::exists(ctx.rig_path))
    throw Error(ErrorCode::ConfigPathMissing, "rig file not found: " + ctx.rig_path.string());
  return read_rig(ctx.rig_path);
}

SceneSpec scene_from_config(const json& s) {
  SceneSpec spec;
  for (const auto& e : s.at("ellipsoids"))
    spec.ellipsoids.push_back({vec3(e.at("center")), vec3(e.at("semi_axes")), vec3(e.at("color"))});
  const auto& r = s.at("rig");
  spec.rig.count = r.at("count");
  spec.rig.radius = r.at("radius");
  spec.rig.height = r.at("height");
  spec.rig.width = r.at("width");
  spec.rig.height_px = r.at("height_px");
  spec.rig.focal = r.at("focal");
  const auto& m = s.at("motion");
  spec.motion.start = vec3(m.at("start"));
  spec.motion.velocity = vec3(m.at("velocity"));
  spec.motion.azimuth = m.at("azimuth");
  spec.motion.azimuth_rate = m.at("azimuth_rate");
  spec.particle_spacing = s.at("particle_spacing");
  spec.particle_sigma = s.at("particle_sigma");
  spec.particle_opacity = s.at("particle_opacity");
  spec.background = vec3(s.at("background"));
  spec.validate();
  return spec;
}

SplatDefaults splat_from_config(const json& s) {
  SplatDefaults d;
  d.render_threshold = s.at("render_threshold");
  d.size_factor = s.at("size_factor");
  d.opacity = s.at("opacity");
  if (!(d.render_threshold > 0.0 && d.render_threshold <= 1.0))
    throw Error(ErrorCode::ConfigInvalid, "splat.render_threshold must lie in (0, 1]");
  if (!(d.size_factor > 0.0)) throw Error(ErrorCode::ConfigInvalid, "splat.size_factor must be > 0");
  if (!(d.opacity > 0.0 && d.opacity <= 1.0)) throw Error(ErrorCode::ConfigInvalid, "splat.opacity must lie in (0, 1]");
  return d;
}

RefineConfig refine_from_config(const json& c) {
  RefineConfig cfg;
  const std::string mode = c.at("refine").at("color_mode");
  if (mode == "least_squares")
    cfg.color_mode = ColorMode::LeastSquares;
  else if (mode == "gradient")
    cfg.color_mode = ColorMode::Gradient;
  else
    throw Error(ErrorCode::ConfigInvalid, "refine.color_mode must be least_squares or gradient");
  cfg.opacity_steps = c.at("refine").at("opacity_steps");
  cfg.learning_rate = c.at("refine").at("learning_rate");
  for (const auto& v : c.at("refine").at("views")) cfg.views.push_back(v.get<std::size_t>());
  cfg.loss.lambda_color = c.at("loss").at("lambda_color");
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigInvalid, e.what());
  }
  return cfg;
}

// Centroid of each non-empty mask, triangulated robustly.
std::optional<Vec3> triangulate_center(const FrameSet& frame, const CameraRig& rig) {
  std::vector<Observation> obs;
  for (std::size_t c = 0; c < rig.size(); ++c)
    if (auto p = mask_centroid(frame.masks[c])) obs.push_back({c, *p});
  if (obs.size() < 2) return std::nullopt;
  return triangulate_robust(obs, rig);
}

double grid_edge(const Context& ctx, const CameraRig& rig, std::span<const Vec3> centers) {
  const auto& g = ctx.config.at("grid");
  const double edge = g.at("edge");
  if (edge > 0.0) return edge;
  (void)rig;
  return edge_from_center_history(centers, g.at("base_resolution"), g.at("scale"));
}

GridSpec grid_at(const Context& ctx, double edge, const Vec3& center, double azimuth) {
  GridSpec spec;
  const int base = ctx.config.at("grid").at("base_resolution");
  spec.base_resolution = base;
  spec.dims = {base, base, base};
  spec.edge = edge;
  spec.center = center;
  spec.azimuth = azimuth;
  spec.validate();
  return spec;
}

// Per-frame centers for the requested range, triangulated from masks.
std::vector<std::pair<int, Vec3>> frame_centers(const Context& ctx, const CameraRig& rig) {
  std::vector<std::pair<int, Vec3>> out;
  for (int f = ctx.frames.begin; f < ctx.frames.end; ++f) {
    const FrameSet frame = load_frame(ctx.dataset, f, rig);
    if (auto c = triangulate_center(frame, rig)) out.emplace_back(f, *c);
  }
  return out;
}

// ---------------------------------------------------------------- subcommands

void run_synth(const Context& ctx) {
  const SceneSpec spec = scene_from_config(ctx.config.at("synth"));
  const CameraRig rig = make_ring_rig(spec.rig);
  write_rig(ctx.rig_path, rig);
  for_frames(ctx, [&](int f) {
    const SyntheticFrame s = generate_scene(spec, f);
    write_frame(ctx.dataset, s.frame, rig);
    write_particles(ctx.dataset / "truth" / ("particles_" + Context::index_name(f) + ".bin"), s.particles);
  });
}

void run_frame(const Context& ctx) {
  const CameraRig rig = load_rig(ctx);
  const auto centers = frame_centers(ctx, rig);
  std::vector<Vec3> pts;
  for (const auto& [f, c] : centers) pts.push_back(c);
  std::vector<BodyFrame> frames;
  std::vector<AxisSample> samples;
  if (!centers.empty()) {
    const double edge = grid_edge(ctx, rig, pts);
    std::size_t i = 0;
    for_frames(ctx, [&](int f) {
      if (i >= centers.size() || centers[i].first != f) return;  // no usable masks
      const FrameSet frame = load_frame(ctx.dataset, f, rig);
      const GridSpec spec = grid_at(ctx, edge, centers[i].second, 0.0);
      VoxelGrid grid;
      grid.spec = spec;
      grid.occupancy = carve_dual(frame.masks, rig, spec);
      grid.color.assign(3 * spec.voxel_count(), 0.0f);
      const BodyGaussian g = moment_gaussian(grid);
      BodyFrame b;
      b.index = f;
      b.center = g.mean;
      b.covariance = g.covariance;
      frames.push_back(b);
      samples.push_back({g.mean, g.covariance, principal_axis(g.covariance).axis});
      ++i;
    });
  }
  if (!frames.empty()) {
    const auto consistent = sign_consistency(samples);
    std::vector<Vec3> means;
    for (const auto& s : samples) means.push_back(s.mean);
    const auto flipped = global_flip(means, consistent);
    for (std::size_t i = 0; i < frames.size(); ++i) {
      frames[i].axis = flipped[i];
      frames[i].azimuth = azimuth(flipped[i]);
    }
  }
  write_track(ctx.track_path(), frames);
}

void run_carve(const Context& ctx) {
  const CameraRig rig = load_rig(ctx);
  std::vector<BodyFrame> track;
  if (fs::exists(ctx.track_path())) track = read_track(ctx.track_path());
  auto pose_of = [&](int f) -> std::optional<std::pair<Vec3, double>> {
    for (const auto& b : track)
      if (b.index == f) return std::make_pair(b.center, b.azimuth);
    return std::nullopt;
  };

  std::vector<std::pair<int, Vec3>> centers = frame_centers(ctx, rig);
  std::vector<Vec3> pts;
  for (const auto& t : track) pts.push_back(t.center);
  if (pts.empty())
    for (const auto& [f, c] : centers) pts.push_back(c);
  if (centers.empty()) return;
  const double edge = grid_edge(ctx, rig, pts);

  for_frames(ctx, [&](int f) {
    Vec3 center;
    double az = 0.0;
    if (auto p = pose_of(f)) {
      center = p->first;
      az = p->second;
    } else {
      auto it = std::find_if(centers.begin(), centers.end(), [f](const auto& c) { return c.first == f; });
      if (it == centers.end()) throw Error(ErrorCode::EmptyMask, "frame " + std::to_string(f) + " has too few masks");
      center = it->second;
    }
    const FrameSet frame = load_frame(ctx.dataset, f, rig);
    write_volume(ctx.volume_path(f), carve_volume(frame.masks, frame.images, rig, grid_at(ctx, edge, center, az)));
  });
}

void run_render(const Context& ctx) {
  const CameraRig rig = load_rig(ctx);
  const SplatDefaults defaults = splat_from_config(ctx.config.at("splat"));
  for_frames(ctx, [&](int f) {
    const VoxelGrid grid = read_volume(ctx.volume_path(f));
    const auto particles = voxels_to_gaussians(grid, defaults);
    write_particles(ctx.particle_path("render", f), particles);
    for (const auto& cam : rig) {
      const RenderedImage img = rasterize(particles, cam, Vec3::Ones());
      write_png(ctx.output / "renders" / cam.name() / ("render_" + Context::index_name(f) + ".png"), img);
    }
  });
}

void run_fit(const Context& ctx) {
  const CameraRig rig = load_rig(ctx);
  const RefineConfig cfg = refine_from_config(ctx.config);
  for_frames(ctx, [&](int f) {
    const auto particles = read_particles(ctx.particle_path("render", f));
    const FrameSet frame = load_frame(ctx.dataset, f, rig);
    std::vector<GaussianParticle> fitted = particles;
    if (cfg.color_mode == ColorMode::LeastSquares)
      fitted = fit_colors_least_squares(particles, frame, rig, cfg).particles;
    const OpacityFit fit = refine_opacity(fitted, frame, rig, cfg);
    write_particles(ctx.particle_path("fit", f), fit.particles);
    std::ostringstream os;
    os << "step,loss\n";
    for (std::size_t i = 0; i < fit.loss_trace.size(); ++i) os << i << ',' << io::format_double(fit.loss_trace[i]) << '\n';
    io::write_atomic(ctx.output / "fit" / ("loss_" + Context::index_name(f) + ".csv"), os.str());
  });
}

std::vector<GaussianParticle> latest_particles(const Context& ctx, int f) {
  const fs::path fit = ctx.particle_path("fit", f);
  return read_particles(fs::exists(fit) ? fit : ctx.particle_path("render", f));
}

void run_metrics(const Context& ctx) {
  const CameraRig rig = load_rig(ctx);
  std::ostringstream os;
  os << "frame,cam,iou,l1,psnr,ssim\n";
  for_frames(ctx, [&](int f) {
    const auto particles = latest_particles(ctx, f);
    const FrameSet frame = load_frame(ctx.dataset, f, rig);
    for (std::size_t c = 0; c < rig.size(); ++c) {
      const Metrics m = evaluate_holdout(particles, frame, rig, c);
      os << f << ',' << rig[c].name() << ',' << io::format_double(m.iou) << ',' << io::format_double(m.l1) << ','
         << io::format_double(m.psnr) << ',' << io::format_double(m.ssim) << '\n';
    }
  });
  io::write_atomic(ctx.output / "metrics.csv", os.str());
}

void run_embed(const Context& ctx) {
  const auto& e = ctx.config.at("embed");
  const SphereGrid grid = make_sphere_grid(e.at("bandwidth"), e.at("n_theta"), e.at("n_phi"));
  std::vector<BodyFrame> track;
  if (fs::exists(ctx.track_path())) track = read_track(ctx.track_path());

  std::vector<int> frames;
  std::vector<double> azimuths;
  std::vector<Eigen::VectorXd> rows;
  const std::string extractor = e.at("extractor");
  if (extractor == "import") {
    const fs::path path = e.at("features").get<std::string>();
    if (!fs::exists(path)) throw Error(ErrorCode::ConfigPathMissing, "feature file not found: " + path.string());
    for (const auto& r : read_feature_file(path)) {
      if (r.frame < ctx.frames.begin || r.frame >= ctx.frames.end) continue;
      frames.push_back(r.frame);
      rows.push_back(power_features(sh_coefficients(r.samples, grid)));
    }
  } else if (extractor == "handcrafted") {
    const HandcraftedExtractor ex;
    for_frames(ctx, [&](int f) {
      const auto particles = latest_particles(ctx, f);
      Vec3 center = Vec3::Zero();
      for (const auto& p : particles) center += p.mean;
      if (!particles.empty()) center /= static_cast<double>(particles.size());
      double rho = 0.0;
      for (const auto& p : particles) rho = std::max(rho, (p.mean - center).norm());
      SphereCameraConfig cams;
      cams.radius = e.at("radius");
      cams.bounding_radius = rho > 0.0 ? rho : 1.0;
      frames.push_back(f);
      rows.push_back(frame_power_features(particles, center, grid, cams, ex));
    });
  } else {
    throw Error(ErrorCode::ConfigInvalid, "embed.extractor must be handcrafted or import");
  }
  for (int f : frames) {
    double az = 0.0;
    for (const auto& b : track)
      if (b.index == f) az = b.azimuth;
    azimuths.push_back(az);
  }
  if (frames.empty()) {
    write_embedding_csv(ctx.output / "embedding.csv", frames, Eigen::MatrixXd(0, 0));
    return;
  }
  Eigen::MatrixXd power(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) power.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  EmbeddingConfig cfg;
  cfg.pca_dim = e.at("pca_dim");
  cfg.out_dim = e.at("apca_dims");
  const Embedding emb = embed_dataset(power, azimuths, cfg);
  write_embedding_csv(ctx.output / "embedding.csv", frames, emb.selection.fit.embeddings);
  std::fprintf(stderr, "mu=%g r2=%g\n", emb.selection.mu, emb.selection.r2);
}

void merge(json& base, const json& patch) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (it->is_object() && base.contains(it.key()) && base[it.key()].is_object())
      merge(base[it.key()], *it);
    else
      base[it.key()] = *it;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view carving, splatting and pose embedding"};
  app.require_subcommand(1);

  std::string config_path, frames_text, dataset, rig, output;
  int threads = 0;
  app.add_option("--config", config_path, "JSON pipeline config");
  app.add_option("--frames", frames_text, "Half-open frame range a:b");
  app.add_option("--data", dataset, "Dataset root");
  app.add_option("--rig", rig, "Rig JSON file");
  app.add_option("--out", output, "Output directory");
  app.add_option("--threads", threads, std::string("Worker threads (default: $") + kThreadsEnv + ")");

  const std::vector<std::pair<std::string, void (*)(const Context&)>> commands = {
      {"synth", run_synth}, {"carve", run_carve}, {"frame", run_frame}, {"render", run_render},
      {"fit", run_fit},     {"embed", run_embed}, {"metrics", run_metrics}};
  for (const auto& [name, fn] : commands) app.add_subcommand(name, name + " stage")->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    Context ctx;
    ctx.config = default_config();
    if (!config_path.empty()) {
      if (!fs::exists(config_path)) throw Error(ErrorCode::ConfigPathMissing, "config not found: " + config_path);
      try {
        merge(ctx.config, json::parse(io::read_file(config_path)));
      } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigInvalid, std::string("config: ") + e.what());
      }
    }
    if (!frames_text.empty()) ctx.config["frames"] = frames_text;
    if (!dataset.empty()) ctx.config["dataset"] = dataset;
    if (!rig.empty()) ctx.config["rig"] = rig;
    if (!output.empty()) ctx.config["output"] = output;

    if (threads <= 0)
      if (const char* env = std::getenv(kThreadsEnv)) threads = std::atoi(env);
    if (threads > 0) omp_set_num_threads(threads);

    ctx.dataset = ctx.config.at("dataset").get<std::string>();
    ctx.rig_path = ctx.config.at("rig").get<std::string>();
    ctx.output = ctx.config.at("output").get<std::string>();
    ctx.frames = parse_range(ctx.config.at("frames").get<std::string>());

    const std::string name = app.get_subcommands().front()->get_name();
    if (name != "synth") {
      if (!fs::exists(ctx.rig_path))
        throw Error(ErrorCode::ConfigPathMissing, "rig file not found: " + ctx.rig_path.string());
      if (!fs::exists(ctx.dataset))
        throw Error(ErrorCode::ConfigPathMissing, "dataset root not found: " + ctx.dataset.string());
    }
    fs::create_directories(ctx.output);
    io::write_atomic(ctx.output / ("effective_config_" + name + ".json"), ctx.config.dump(2) + "\n");
    for (const auto& [n, fn] : commands)
      if (n == name) fn(ctx);
    return 0;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", std::string(to_string(e.code())).c_str(), e.what());
  } catch (const json::exception& e) {
    std::fprintf(stderr, "error: ConfigInvalid: %s\n", e.what());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: IoError: %s\n", e.what());
  }
  return 1;
}
