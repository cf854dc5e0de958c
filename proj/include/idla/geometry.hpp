#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace idla {

// Lattice resolution: sites of (1/m)Z^2, spacing 1/m.
struct Resolution {
  int m = 1;
  explicit Resolution(int m_) : m(m_) {
    if (m < 1) throw std::invalid_argument("Resolution: m must be >= 1");
  }
  double spacing() const { return 1.0 / m; }
};

// Integer lattice site; real position is (x/m, y/m) under an ambient Resolution.
struct Site {
  int x = 0;
  int y = 0;
  friend bool operator==(const Site&, const Site&) = default;
  friend bool operator<(const Site& a, const Site& b) {
    return a.x != b.x ? a.x < b.x : a.y < b.y;
  }
};

struct SiteHash {
  std::size_t operator()(const Site& s) const noexcept {
    return std::hash<std::uint64_t>{}((std::uint64_t(std::uint32_t(s.x)) << 32) | std::uint32_t(s.y));
  }
};

struct Vec2 {
  double x = 0, y = 0;
};
inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double c, Vec2 a) { return {c * a.x, c * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm2(Vec2 a) { return a.x * a.x + a.y * a.y; }
double norm(Vec2 a);

inline Vec2 position(Site s, Resolution m) {
  return {static_cast<double>(s.x) / m.m, static_cast<double>(s.y) / m.m};
}

// Inclusive integer rectangle.
struct Box {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;  // empty by default
  bool empty() const { return x1 < x0 || y1 < y0; }
  int width() const { return empty() ? 0 : x1 - x0 + 1; }
  int height() const { return empty() ? 0 : y1 - y0 + 1; }
  std::size_t cells() const { return std::size_t(width()) * std::size_t(height()); }
  bool contains(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
  bool contains(Site s) const { return contains(s.x, s.y); }
  Box inflated(int k) const { return empty() ? *this : Box{x0 - k, y0 - k, x1 + k, y1 + k}; }
  static Box hull(const Box& a, const Box& b);
  friend bool operator==(const Box&, const Box&) = default;
};

// The four lattice neighbors of z, in the fixed order +x, -x, +y, -y.
inline std::array<Site, 4> neighbors(Site z) {
  return {Site{z.x + 1, z.y}, Site{z.x - 1, z.y}, Site{z.x, z.y + 1}, Site{z.x, z.y - 1}};
}

// Dense occupancy set over a bounding box. Single writer; any number of
// concurrent readers while no writer is active.
class SiteSet {
 public:
  SiteSet() = default;
  explicit SiteSet(Box b) : box_(b), grid_(b.cells(), 0) {}

  const Box& box() const { return box_; }
  std::size_t count() const { return count_; }
  bool empty() const { return count_ == 0; }

  bool contains(int x, int y) const {
    return box_.contains(x, y) && grid_[index(x, y)] != 0;
  }
  bool contains(Site s) const { return contains(s.x, s.y); }

  // Inserts s, growing the bounding box geometrically if needed.
  void insert(Site s) {
    if (!box_.contains(s)) grow_to(s);
    auto& cell = grid_[index(s.x, s.y)];
    if (!cell) {
      cell = 1;
      ++count_;
    }
  }

  void erase(Site s) {
    if (!box_.contains(s)) return;
    auto& cell = grid_[index(s.x, s.y)];
    if (cell) {
      cell = 0;
      --count_;
    }
  }

  void reserve_box(Box b);

  template <typename F>
  void for_each(F&& f) const {
    for (int y = box_.y0; y <= box_.y1; ++y) {
      const std::uint8_t* row = grid_.data() + std::size_t(y - box_.y0) * box_.width();
      for (int x = box_.x0; x <= box_.x1; ++x)
        if (row[x - box_.x0]) f(Site{x, y});
    }
  }

  std::vector<Site> sites() const;

  // Raw row pointer for hot loops; valid while no writer grows the box.
  const std::uint8_t* row(int y) const {
    return grid_.data() + std::size_t(y - box_.y0) * box_.width();
  }

  friend bool operator==(const SiteSet& a, const SiteSet& b);

 private:
  std::size_t index(int x, int y) const {
    return std::size_t(y - box_.y0) * box_.width() + (x - box_.x0);
  }
  void grow_to(Site s);

  Box box_;
  std::vector<std::uint8_t> grid_;
  std::size_t count_ = 0;
};

// Sites of A with at least one 4-neighbor outside A.
SiteSet boundary(const SiteSet& a);

// Sites not in A adjacent to a site of A.
SiteSet exterior_ring(const SiteSet& a);

// Exact squared Euclidean distance transform (Felzenszwalb/Huttenlocher) to
// the sites of `src`, sampled on `work` (which should contain src's box).
class DistanceField {
 public:
  DistanceField(const SiteSet& src, Box work);
  const Box& box() const { return box_; }
  // Squared distance in lattice units; +inf if src was empty.
  double d2(int x, int y) const {
    if (!box_.contains(x, y)) throw std::out_of_range("DistanceField::d2");
    return d2_[std::size_t(y - box_.y0) * box_.width() + (x - box_.x0)];
  }
  double d2(Site s) const { return d2(s.x, s.y); }

 private:
  Box box_;
  std::vector<double> d2_;
};

// Standard symmetric Hausdorff distance between two nonempty site sets, in
// scaled (1/m) coordinates. Exact: lattice-point distances via exact EDT.
double hausdorff(const SiteSet& a, const SiteSet& b, Resolution m);

// Symmetric Hausdorff distance between a nonempty site set and a nonempty
// point cloud (both in scaled coordinates under m for the sites).
double hausdorff(const SiteSet& a, const std::vector<Vec2>& pts, Resolution m);

}  // namespace idla
