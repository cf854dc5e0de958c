#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "idla/geometry.hpp"

#include <nlohmann/json_fwd.hpp>

namespace idla {

struct Rect {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

// Immutable plane region built from disks, simple polygons, unions and
// differences, plus outer/inner offset wrappers for eps-neighborhoods.
// Membership is closed for base shapes and set operations; the offset
// wrappers use the strict inequalities of their definitions.
class Region {
 public:
  Region() = default;

  static Region disk(Vec2 center, double radius);
  static Region polygon(std::vector<Vec2> vertices);
  static Region union_of(std::vector<Region> parts);
  static Region difference(Region a, Region b);
  // Outer eps-neighborhood {z : d(z, R) < eps} and inner eps-neighborhood
  // {z in R : d(z, R^c) > eps}; requires eps >= 0.
  static Region outer_nbhd(Region r, double eps);
  static Region inner_nbhd(Region r, double eps);

  bool valid() const { return root_ != nullptr; }
  bool member(Vec2 p) const;
  // Distance to the region (0 on members). Exact for disks, polygons and
  // unions; a conservative CSG bound for differences.
  double distance_to(Vec2 p) const;
  // Distance to the complement (0 outside). Conservative (never larger than
  // the true depth) for overlapping unions and differences.
  double interior_depth(Vec2 p) const;
  // Signed distance: negative inside. Same exactness caveats.
  double signed_distance(Vec2 p) const;

  Rect bounding_rect() const;
  std::optional<double> area() const;
  // (center, radius) when the region is a single disk.
  std::optional<std::pair<Vec2, double>> as_disk() const;
  // Points along the boundary at arc-length spacing <= `spacing`.
  std::vector<Vec2> boundary_points(double spacing) const;

  nlohmann::json to_json() const;
  static Region from_json(const nlohmann::json& j);

  struct Node;

 private:
  explicit Region(std::shared_ptr<const Node> n) : root_(std::move(n)) {}
  std::shared_ptr<const Node> root_;
};

// (outer, inner) eps-neighborhoods as membership regions usable by sites_in.
std::pair<Region, Region> eps_neighborhoods(const Region& r, double eps);

// All sites z with (x/m, y/m) in the region.
SiteSet sites_in(const Region& region, Resolution m);

}  // namespace idla
