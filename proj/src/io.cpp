#include "idla/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace idla {

std::uint64_t fnv1a64(const char* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= std::uint8_t(data[i]);
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string fnv1a64_hex(const char* data, std::size_t n) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(data, n)));
  return buf;
}

std::string fnv1a64_hex(const std::string& s) { return fnv1a64_hex(s.data(), s.size()); }

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void ensure_directory(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw IoError("cannot create directory " + path + ": " + ec.message());
}

bool file_exists(const std::string& path) {
  std::error_code ec;
  return std::filesystem::exists(path, ec);
}

void write_text_file(const std::string& path, const std::string& content) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + p.parent_path().string());
  }
  std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp);
    f.write(content.data(), std::streamsize(content.size()));
    if (!f) throw IoError("write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp + " to " + path + ": " + ec.message());
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string to_pgm(const SiteSet& s) {
  const Box& b = s.box();
  std::string out = "P5\n" + std::to_string(b.width()) + " " + std::to_string(b.height()) + "\n255\n";
  out.reserve(out.size() + b.cells());
  // Top row = largest y, the usual raster orientation.
  for (int y = b.y1; y >= b.y0; --y)
    for (int x = b.x0; x <= b.x1; ++x) out.push_back(s.contains(x, y) ? char(255) : char(0));
  return out;
}

std::string to_runlength_json(const SiteSet& s, Resolution m) {
  const Box& b = s.box();
  nlohmann::json rows = nlohmann::json::array();
  for (int y = b.y0; y <= b.y1; ++y) {
    nlohmann::json runs = nlohmann::json::array();
    int x = b.x0;
    while (x <= b.x1) {
      if (!s.contains(x, y)) {
        ++x;
        continue;
      }
      int start = x;
      while (x <= b.x1 && s.contains(x, y)) ++x;
      runs.push_back({start, x - start});
    }
    if (!runs.empty()) rows.push_back({{"y", y}, {"runs", runs}});
  }
  nlohmann::json j{{"m", m.m},
                   {"bbox", {b.x0, b.y0, b.x1, b.y1}},
                   {"count", s.count()},
                   {"rows", rows}};
  return j.dump();
}

}  // namespace idla
