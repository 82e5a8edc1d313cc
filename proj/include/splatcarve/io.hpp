#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace splatcarve::io {

// Writes to a sibling temporary file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

// Little-endian encoders used by every binary artifact.
void append_u32(std::string& out, std::uint32_t value);
void append_f32(std::string& out, float value);
std::uint32_t read_u32(std::string_view bytes, std::size_t& offset);
float read_f32(std::string_view bytes, std::size_t& offset);

// Shortest round-trip text form of a double, independent of locale.
std::string format_double(double value);
double parse_double(std::string_view text);

// Comma-separated fields of one line, parsed as doubles.
std::vector<double> parse_csv_row(std::string_view line);

}  // namespace splatcarve::io
