#include <nlohmann/json.hpp>

#include "splatcarve/carve.hpp"
#include "splatcarve/error.hpp"
#include "splatcarve/io.hpp"

namespace splatcarve {

namespace {

std::filesystem::path header_path(const std::filesystem::path& bin_path) {
  auto p = bin_path;
  p.replace_extension(".json");
  return p;
}

}  // namespace

void write_volume(const std::filesystem::path& bin_path, const VoxelGrid& grid) {
  const auto& s = grid.spec;
  const std::size_t n = s.voxel_count();
  if (grid.occupancy.size() != n || grid.color.size() != 3 * n)
    throw Error(ErrorCode::DimensionMismatch, "voxel grid channels do not match its spec");

  std::string bytes;
  bytes.reserve(16 * n);
  for (std::size_t v = 0; v < n; ++v) {
    io::append_f32(bytes, grid.occupancy[v]);
    for (int ch = 0; ch < 3; ++ch) io::append_f32(bytes, grid.color[3 * v + ch]);
  }

  nlohmann::ordered_json h;
  h["format"] = "float32-le";
  h["order"] = "x,y,z,channel";
  h["channels"] = {"occupancy", "r", "g", "b"};
  h["dims"] = s.dims;
  h["offset"] = s.offset;
  h["base_resolution"] = s.base_resolution;
  h["edge"] = s.edge;
  h["center"] = {s.center.x(), s.center.y(), s.center.z()};
  h["azimuth"] = s.azimuth;
  io::write_atomic(bin_path, bytes);
  io::write_atomic(header_path(bin_path), h.dump(2) + "\n");
}

VoxelGrid read_volume(const std::filesystem::path& bin_path) {
  const auto hpath = header_path(bin_path);
  if (!std::filesystem::exists(hpath)) throw Error(ErrorCode::MissingFile, "missing volume header " + hpath.string());
  VoxelGrid grid;
  try {
    const auto h = nlohmann::json::parse(io::read_file(hpath));
    auto& s = grid.spec;
    s.dims = h.at("dims").get<std::array<int, 3>>();
    s.offset = h.value("offset", std::array<int, 3>{0, 0, 0});
    s.base_resolution = h.at("base_resolution").get<int>();
    s.edge = h.at("edge").get<double>();
    const auto c = h.at("center").get<std::array<double, 3>>();
    s.center = Vec3(c[0], c[1], c[2]);
    s.azimuth = h.at("azimuth").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, "volume header " + hpath.string() + ": " + e.what());
  }
  grid.spec.validate();

  const std::string bytes = io::read_file(bin_path);
  const std::size_t n = grid.spec.voxel_count();
  if (bytes.size() != 16 * n)
    throw Error(ErrorCode::FormatError, "volume payload size does not match its header");
  grid.occupancy.resize(n);
  grid.color.resize(3 * n);
  std::size_t off = 0;
  for (std::size_t v = 0; v < n; ++v) {
    grid.occupancy[v] = io::read_f32(bytes, off);
    for (int ch = 0; ch < 3; ++ch) grid.color[3 * v + ch] = io::read_f32(bytes, off);
  }
  return grid;
}

}  // namespace splatcarve
