// Serial reference kernels against the OpenMP versions on one synthetic frame.
// Thread count follows OMP_NUM_THREADS.
#include <benchmark/benchmark.h>

#include "splatcarve/carve.hpp"
#include "splatcarve/splat.hpp"
#include "splatcarve/synth.hpp"

using namespace splatcarve;

namespace {

struct Fixture {
  SyntheticFrame frame;
  GridSpec grid;
  VoxelGrid volume;
  std::vector<std::vector<std::uint8_t>> visible;
  std::vector<GaussianParticle> particles;

  Fixture() : frame(generate_scene(random_scene(7), 0)) {
    grid.base_resolution = 112;
    grid.dims = {112, 112, 112};
    grid.edge = 3.0 / 112;
    volume = carve_volume(frame.frame.masks, frame.frame.images, frame.rig, grid);
    for (std::size_t c = 0; c < frame.rig.size(); ++c)
      visible.push_back(visibility(volume.occupancy, frame.rig, grid, c));
    SplatDefaults d;
    d.render_threshold = 0.75;
    // Every 16th particle: the untiled reference scans every footprint per pixel.
    const auto all = voxels_to_gaussians(volume, d);
    for (std::size_t i = 0; i < all.size(); i += 16) particles.push_back(all[i]);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_MaskCountsReference(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(reference::mask_counts(f.frame.frame.masks, f.frame.rig, f.grid));
}

void BM_MaskCountsParallel(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(mask_counts(f.frame.frame.masks, f.frame.rig, f.grid));
}

void BM_AssignColorsReference(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(
        reference::assign_colors(f.volume.occupancy, f.grid, f.frame.frame.images, f.frame.rig, f.visible));
}

void BM_AssignColorsParallel(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(assign_colors(f.volume.occupancy, f.grid, f.frame.frame.images, f.frame.rig, f.visible));
}

void BM_RasterizeReference(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(reference::rasterize(f.particles, f.frame.rig[0], Vec3::Ones()));
  state.counters["particles"] = static_cast<double>(f.particles.size());
}

void BM_RasterizeTiled(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(rasterize(f.particles, f.frame.rig[0], Vec3::Ones()));
  state.counters["particles"] = static_cast<double>(f.particles.size());
}

}  // namespace

BENCHMARK(BM_MaskCountsReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MaskCountsParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AssignColorsReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AssignColorsParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RasterizeReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RasterizeTiled)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
