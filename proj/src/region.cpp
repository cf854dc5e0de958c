#include "idla/region.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace idla {

namespace {
constexpr double kSnap = 1e-12;  // membership tolerance on exact boundaries
constexpr double kPi = 3.14159265358979323846;
}  // namespace

struct Region::Node {
  enum class Kind { Disk, Polygon, Union, Difference, Outer, Inner } kind;
  // Disk
  Vec2 center{};
  double radius = 0;
  // Polygon
  std::vector<Vec2> verts;
  // Children (Union: all; Difference: [a, b]; Outer/Inner: [child])
  std::vector<std::shared_ptr<const Node>> kids;
  double eps = 0;
};

using Node = Region::Node;

Region Region::disk(Vec2 center, double radius) {
  if (!(radius > 0)) throw std::invalid_argument("Region::disk: radius must be positive");
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Disk;
  n->center = center;
  n->radius = radius;
  return Region(std::move(n));
}

Region Region::polygon(std::vector<Vec2> vertices) {
  if (vertices.size() < 3) throw std::invalid_argument("Region::polygon: need >= 3 vertices");
  double a2 = 0;
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    const Vec2& p = vertices[i];
    const Vec2& q = vertices[(i + 1) % vertices.size()];
    a2 += p.x * q.y - q.x * p.y;
    if (norm2(q - p) < kSnap * kSnap)
      throw std::invalid_argument("Region::polygon: repeated consecutive vertices");
  }
  if (std::abs(a2) < kSnap) throw std::invalid_argument("Region::polygon: degenerate area");
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Polygon;
  n->verts = std::move(vertices);
  return Region(std::move(n));
}

Region Region::union_of(std::vector<Region> parts) {
  if (parts.empty()) throw std::invalid_argument("Region::union_of: empty");
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Union;
  for (auto& p : parts) {
    if (!p.valid()) throw std::invalid_argument("Region::union_of: invalid part");
    n->kids.push_back(p.root_);
  }
  return Region(std::move(n));
}

Region Region::difference(Region a, Region b) {
  if (!a.valid() || !b.valid()) throw std::invalid_argument("Region::difference: invalid operand");
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Difference;
  n->kids = {a.root_, b.root_};
  return Region(std::move(n));
}

Region Region::outer_nbhd(Region r, double eps) {
  if (!r.valid()) throw std::invalid_argument("Region::outer_nbhd: invalid region");
  if (eps < 0) throw std::invalid_argument("Region::outer_nbhd: eps must be >= 0");
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Outer;
  n->kids = {r.root_};
  n->eps = eps;
  return Region(std::move(n));
}

Region Region::inner_nbhd(Region r, double eps) {
  if (!r.valid()) throw std::invalid_argument("Region::inner_nbhd: invalid region");
  if (eps < 0) throw std::invalid_argument("Region::inner_nbhd: eps must be >= 0");
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Inner;
  n->kids = {r.root_};
  n->eps = eps;
  return Region(std::move(n));
}

namespace {

double seg_dist(Vec2 p, Vec2 a, Vec2 b) {
  Vec2 ab = b - a;
  double t = norm2(ab) > 0 ? dot(p - a, ab) / norm2(ab) : 0;
  t = std::clamp(t, 0.0, 1.0);
  return norm(p - (a + t * ab));
}

double poly_boundary_dist(const std::vector<Vec2>& v, Vec2 p) {
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v.size(); ++i)
    d = std::min(d, seg_dist(p, v[i], v[(i + 1) % v.size()]));
  return d;
}

bool poly_inside(const std::vector<Vec2>& v, Vec2 p) {
  // Crossing parity; boundary points are handled by the caller via distance.
  bool in = false;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    if ((v[i].y > p.y) != (v[j].y > p.y)) {
      double xcross = v[j].x + (p.y - v[j].y) / (v[i].y - v[j].y) * (v[i].x - v[j].x);
      if (p.x < xcross) in = !in;
    }
  }
  return in;
}

bool node_member(const Node& n, Vec2 p);
double node_dist(const Node& n, Vec2 p);
double node_depth(const Node& n, Vec2 p);

bool node_member(const Node& n, Vec2 p) {
  switch (n.kind) {
    case Node::Kind::Disk:
      return norm2(p - n.center) <= n.radius * n.radius + kSnap;
    case Node::Kind::Polygon:
      return poly_inside(n.verts, p) || poly_boundary_dist(n.verts, p) <= kSnap;
    case Node::Kind::Union:
      for (const auto& k : n.kids)
        if (node_member(*k, p)) return true;
      return false;
    case Node::Kind::Difference:
      // Closed difference: keep points of a up to and including b's boundary.
      return node_member(*n.kids[0], p) &&
             (!node_member(*n.kids[1], p) || node_depth(*n.kids[1], p) <= kSnap);
    case Node::Kind::Outer:
      return node_dist(*n.kids[0], p) < n.eps || node_member(*n.kids[0], p);
    case Node::Kind::Inner:
      return node_member(*n.kids[0], p) && node_depth(*n.kids[0], p) > n.eps;
  }
  return false;
}

double node_dist(const Node& n, Vec2 p) {
  switch (n.kind) {
    case Node::Kind::Disk:
      return std::max(0.0, norm(p - n.center) - n.radius);
    case Node::Kind::Polygon:
      return poly_inside(n.verts, p) ? 0.0 : poly_boundary_dist(n.verts, p);
    case Node::Kind::Union: {
      double d = std::numeric_limits<double>::infinity();
      for (const auto& k : n.kids) d = std::min(d, node_dist(*k, p));
      return d;
    }
    case Node::Kind::Difference:
      if (node_member(n, p)) return 0.0;
      // Conservative: true distance is at least this.
      return std::max(node_dist(*n.kids[0], p),
                      node_member(*n.kids[1], p) ? node_depth(*n.kids[1], p) : 0.0);
    case Node::Kind::Outer:
      return std::max(0.0, node_dist(*n.kids[0], p) - n.eps);
    case Node::Kind::Inner: {
      if (node_member(n, p)) return 0.0;
      // 1-Lipschitz lower bounds; exact for disks.
      if (node_member(*n.kids[0], p)) return n.eps - node_depth(*n.kids[0], p);
      return node_dist(*n.kids[0], p) + n.eps;
    }
  }
  return 0;
}

double node_depth(const Node& n, Vec2 p) {
  switch (n.kind) {
    case Node::Kind::Disk:
      return std::max(0.0, n.radius - norm(p - n.center));
    case Node::Kind::Polygon:
      return poly_inside(n.verts, p) ? poly_boundary_dist(n.verts, p) : 0.0;
    case Node::Kind::Union: {
      // Lower bound on the depth; exact for separated parts.
      double d = 0;
      for (const auto& k : n.kids) d = std::max(d, node_depth(*k, p));
      return d;
    }
    case Node::Kind::Difference:
      if (!node_member(n, p)) return 0.0;
      return std::min(node_depth(*n.kids[0], p), node_dist(*n.kids[1], p));
    case Node::Kind::Outer: {
      if (node_member(*n.kids[0], p)) return node_depth(*n.kids[0], p) + n.eps;
      double d = node_dist(*n.kids[0], p);
      return d < n.eps ? n.eps - d : 0.0;
    }
    case Node::Kind::Inner:
      return std::max(0.0, node_depth(*n.kids[0], p) - n.eps);
  }
  return 0;
}

Rect node_rect(const Node& n) {
  switch (n.kind) {
    case Node::Kind::Disk:
      return {n.center.x - n.radius, n.center.y - n.radius, n.center.x + n.radius,
              n.center.y + n.radius};
    case Node::Kind::Polygon: {
      Rect r{n.verts[0].x, n.verts[0].y, n.verts[0].x, n.verts[0].y};
      for (const Vec2& v : n.verts) {
        r.x0 = std::min(r.x0, v.x);
        r.y0 = std::min(r.y0, v.y);
        r.x1 = std::max(r.x1, v.x);
        r.y1 = std::max(r.y1, v.y);
      }
      return r;
    }
    case Node::Kind::Union: {
      Rect r = node_rect(*n.kids[0]);
      for (std::size_t i = 1; i < n.kids.size(); ++i) {
        Rect s = node_rect(*n.kids[i]);
        r.x0 = std::min(r.x0, s.x0);
        r.y0 = std::min(r.y0, s.y0);
        r.x1 = std::max(r.x1, s.x1);
        r.y1 = std::max(r.y1, s.y1);
      }
      return r;
    }
    case Node::Kind::Difference:
      return node_rect(*n.kids[0]);
    case Node::Kind::Outer: {
      Rect r = node_rect(*n.kids[0]);
      return {r.x0 - n.eps, r.y0 - n.eps, r.x1 + n.eps, r.y1 + n.eps};
    }
    case Node::Kind::Inner:
      return node_rect(*n.kids[0]);
  }
  return {};
}

}  // namespace

bool Region::member(Vec2 p) const {
  if (!root_) throw std::logic_error("Region: empty");
  return node_member(*root_, p);
}

double Region::distance_to(Vec2 p) const {
  if (!root_) throw std::logic_error("Region: empty");
  return node_dist(*root_, p);
}

double Region::interior_depth(Vec2 p) const {
  if (!root_) throw std::logic_error("Region: empty");
  return node_depth(*root_, p);
}

double Region::signed_distance(Vec2 p) const {
  double d = distance_to(p);
  return d > 0 ? d : -interior_depth(p);
}

Rect Region::bounding_rect() const {
  if (!root_) throw std::logic_error("Region: empty");
  return node_rect(*root_);
}

std::optional<std::pair<Vec2, double>> Region::as_disk() const {
  if (!root_) throw std::logic_error("Region: empty");
  if (root_->kind != Node::Kind::Disk) return std::nullopt;
  return std::make_pair(root_->center, root_->radius);
}

std::optional<double> Region::area() const {
  if (!root_) throw std::logic_error("Region: empty");
  switch (root_->kind) {
    case Node::Kind::Disk:
      return kPi * root_->radius * root_->radius;
    case Node::Kind::Polygon: {
      double a2 = 0;
      const auto& v = root_->verts;
      for (std::size_t i = 0; i < v.size(); ++i) {
        const Vec2& p = v[i];
        const Vec2& q = v[(i + 1) % v.size()];
        a2 += p.x * q.y - q.x * p.y;
      }
      return std::abs(a2) / 2;
    }
    default:
      return std::nullopt;
  }
}

std::vector<Vec2> Region::boundary_points(double spacing) const {
  if (!root_) throw std::logic_error("Region: empty");
  if (!(spacing > 0)) throw std::invalid_argument("boundary_points: spacing must be > 0");
  std::vector<Vec2> out;
  switch (root_->kind) {
    case Node::Kind::Disk: {
      double circ = 2 * kPi * root_->radius;
      int n = std::max(8, int(std::ceil(circ / spacing)));
      out.reserve(n);
      for (int i = 0; i < n; ++i) {
        double t = 2 * kPi * i / n;
        out.push_back(root_->center + Vec2{root_->radius * std::cos(t), root_->radius * std::sin(t)});
      }
      return out;
    }
    case Node::Kind::Polygon: {
      const auto& v = root_->verts;
      for (std::size_t i = 0; i < v.size(); ++i) {
        Vec2 a = v[i], b = v[(i + 1) % v.size()];
        int n = std::max(1, int(std::ceil(norm(b - a) / spacing)));
        for (int k = 0; k < n; ++k) out.push_back(a + (double(k) / n) * (b - a));
      }
      return out;
    }
    case Node::Kind::Union: {
      for (const auto& k : root_->kids) {
        auto part = Region(k).boundary_points(spacing);
        // Keep only points actually on the union boundary.
        for (const Vec2& p : part)
          if (interior_depth(p) <= spacing / 4) out.push_back(p);
      }
      return out;
    }
    default:
      throw std::invalid_argument("boundary_points: unsupported region kind");
  }
}

nlohmann::json Region::to_json() const {
  if (!root_) throw std::logic_error("Region: empty");
  nlohmann::json j;
  switch (root_->kind) {
    case Node::Kind::Disk:
      j["disk"] = {{"center", {root_->center.x, root_->center.y}}, {"radius", root_->radius}};
      break;
    case Node::Kind::Polygon: {
      nlohmann::json verts = nlohmann::json::array();
      for (const Vec2& v : root_->verts) verts.push_back({v.x, v.y});
      j["polygon"] = verts;
      break;
    }
    case Node::Kind::Union: {
      nlohmann::json parts = nlohmann::json::array();
      for (const auto& k : root_->kids) parts.push_back(Region(k).to_json());
      j["union"] = parts;
      break;
    }
    case Node::Kind::Difference:
      j["difference"] = {Region(root_->kids[0]).to_json(), Region(root_->kids[1]).to_json()};
      break;
    default:
      throw std::invalid_argument("Region::to_json: offset regions are not serializable");
  }
  return j;
}

Region Region::from_json(const nlohmann::json& j) {
  if (j.contains("disk")) {
    const auto& d = j.at("disk");
    auto c = d.at("center");
    return disk({c.at(0).get<double>(), c.at(1).get<double>()}, d.at("radius").get<double>());
  }
  if (j.contains("polygon")) {
    std::vector<Vec2> verts;
    for (const auto& v : j.at("polygon")) verts.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
    return polygon(std::move(verts));
  }
  if (j.contains("union")) {
    std::vector<Region> parts;
    for (const auto& p : j.at("union")) parts.push_back(from_json(p));
    return union_of(std::move(parts));
  }
  if (j.contains("difference")) {
    const auto& d = j.at("difference");
    return difference(from_json(d.at(0)), from_json(d.at(1)));
  }
  throw std::invalid_argument("Region::from_json: unknown region kind");
}

std::pair<Region, Region> eps_neighborhoods(const Region& r, double eps) {
  if (eps < 0) throw std::invalid_argument("eps_neighborhoods: eps must be >= 0");
  return {Region::outer_nbhd(r, eps), Region::inner_nbhd(r, eps)};
}

SiteSet sites_in(const Region& region, Resolution m) {
  Rect r = region.bounding_rect();
  if (!std::isfinite(r.x0) || !std::isfinite(r.x1) || !std::isfinite(r.y0) || !std::isfinite(r.y1))
    throw std::invalid_argument("sites_in: unbounded region");
  int x0 = int(std::ceil(r.x0 * m.m - kSnap));
  int x1 = int(std::floor(r.x1 * m.m + kSnap));
  int y0 = int(std::ceil(r.y0 * m.m - kSnap));
  int y1 = int(std::floor(r.y1 * m.m + kSnap));
  SiteSet out(Box{x0, y0, std::max(x0 - 1, x1), std::max(y0 - 1, y1)});
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (region.member({double(x) / m.m, double(y) / m.m})) out.insert({x, y});
  return out;
}

}  // namespace idla
