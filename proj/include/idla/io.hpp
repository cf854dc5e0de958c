#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "idla/geometry.hpp"

namespace idla {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvariantError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// FNV-1a 64-bit content hash, hex encoded.
std::uint64_t fnv1a64(const char* data, std::size_t n);
std::string fnv1a64_hex(const char* data, std::size_t n);
std::string fnv1a64_hex(const std::string& s);

std::string read_text_file(const std::string& path);
// Writes via a temp file and rename, creating parent directories.
void write_text_file(const std::string& path, const std::string& content);
void ensure_directory(const std::string& path);
bool file_exists(const std::string& path);

// Deterministic shortest-roundtrip formatting for CSV/JSON artifacts.
std::string format_double(double v);

// P5 raster of the occupancy grid (255 occupied, 0 empty).
std::string to_pgm(const SiteSet& s);
// Compact row run-length encoding: {"bbox": [...], "count": n, "rows": [...]}.
std::string to_runlength_json(const SiteSet& s, Resolution m);

}  // namespace idla
