#include "idla/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace idla {

double norm(Vec2 a) { return std::hypot(a.x, a.y); }

Box Box::hull(const Box& a, const Box& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  return Box{std::min(a.x0, b.x0), std::min(a.y0, b.y0), std::max(a.x1, b.x1), std::max(a.y1, b.y1)};
}

void SiteSet::reserve_box(Box b) {
  if (box_.empty()) {
    box_ = b;
    grid_.assign(box_.cells(), 0);
    return;
  }
  Box nb = Box::hull(box_, b);
  if (nb == box_) return;
  std::vector<std::uint8_t> ng(nb.cells(), 0);
  for (int y = box_.y0; y <= box_.y1; ++y) {
    const std::uint8_t* src = grid_.data() + std::size_t(y - box_.y0) * box_.width();
    std::uint8_t* dst = ng.data() + std::size_t(y - nb.y0) * nb.width() + (box_.x0 - nb.x0);
    std::copy(src, src + box_.width(), dst);
  }
  box_ = nb;
  grid_ = std::move(ng);
}

void SiteSet::grow_to(Site s) {
  // Geometric margin keeps amortized growth cheap.
  int margin = std::max({8, box_.width() / 4, box_.height() / 4});
  Box want{std::min(s.x, box_.empty() ? s.x : box_.x0) - margin,
           std::min(s.y, box_.empty() ? s.y : box_.y0) - margin,
           std::max(s.x, box_.empty() ? s.x : box_.x1) + margin,
           std::max(s.y, box_.empty() ? s.y : box_.y1) + margin};
  reserve_box(want);
}

std::vector<Site> SiteSet::sites() const {
  std::vector<Site> out;
  out.reserve(count_);
  for_each([&](Site s) { out.push_back(s); });
  return out;
}

bool operator==(const SiteSet& a, const SiteSet& b) {
  if (a.count_ != b.count_) return false;
  bool eq = true;
  a.for_each([&](Site s) { eq = eq && b.contains(s); });
  return eq;
}

SiteSet boundary(const SiteSet& a) {
  SiteSet out(a.box());
  a.for_each([&](Site s) {
    for (Site n : neighbors(s))
      if (!a.contains(n)) {
        out.insert(s);
        break;
      }
  });
  return out;
}

SiteSet exterior_ring(const SiteSet& a) {
  SiteSet out(a.box().inflated(1));
  a.for_each([&](Site s) {
    for (Site n : neighbors(s))
      if (!a.contains(n)) out.insert(n);
  });
  return out;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1-D squared distance transform (lower envelope of parabolas). Entries with
// f == +inf carry no parabola.
void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
            std::vector<double>& z, int n) {
  int first = 0;
  while (first < n && f[first] == kInf) ++first;
  if (first == n) {
    std::fill(d.begin(), d.begin() + n, kInf);
    return;
  }
  int k = 0;
  v[0] = first;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = first + 1; q < n; ++q) {
    if (f[q] == kInf) continue;
    double s = ((f[q] + q * double(q)) - (f[v[k]] + v[k] * double(v[k]))) / (2.0 * q - 2.0 * v[k]);
    while (k > 0 && s <= z[k]) {
      --k;
      s = ((f[q] + q * double(q)) - (f[v[k]] + v[k] * double(v[k]))) / (2.0 * q - 2.0 * v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    d[q] = (q - v[k]) * double(q - v[k]) + f[v[k]];
  }
}

}  // namespace

DistanceField::DistanceField(const SiteSet& src, Box work) : box_(work) {
  const int w = box_.width(), h = box_.height();
  d2_.assign(box_.cells(), kInf);
  if (w == 0 || h == 0) return;
  // Column pass over the indicator, then row pass over column distances.
  std::vector<double> f(std::max(w, h)), d(std::max(w, h)), z(std::max(w, h) + 1);
  std::vector<int> v(std::max(w, h));
  std::vector<double> tmp(box_.cells(), kInf);
  for (int x = box_.x0; x <= box_.x1; ++x) {
    for (int y = box_.y0; y <= box_.y1; ++y) f[y - box_.y0] = src.contains(x, y) ? 0.0 : kInf;
    edt_1d(f, d, v, z, h);
    for (int y = 0; y < h; ++y) tmp[std::size_t(y) * w + (x - box_.x0)] = d[y];
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[x] = tmp[std::size_t(y) * w + x];
    edt_1d(f, d, v, z, w);
    for (int x = 0; x < w; ++x) d2_[std::size_t(y) * w + x] = d[x];
  }
}

double hausdorff(const SiteSet& a, const SiteSet& b, Resolution m) {
  if (a.empty() || b.empty()) throw std::invalid_argument("hausdorff: empty input");
  Box work = Box::hull(a.box(), b.box());
  DistanceField db(b, work), da(a, work);
  double worst2 = 0;
  a.for_each([&](Site s) { worst2 = std::max(worst2, db.d2(s)); });
  b.for_each([&](Site s) { worst2 = std::max(worst2, da.d2(s)); });
  return std::sqrt(worst2) / m.m;
}

double hausdorff(const SiteSet& a, const std::vector<Vec2>& pts, Resolution m) {
  if (a.empty() || pts.empty()) throw std::invalid_argument("hausdorff: empty input");
  // Bucket the point cloud on the lattice for nearest-neighbor queries.
  const double inv = double(m.m);
  Box bb = a.box();
  for (const Vec2& p : pts) {
    Box pb{int(std::floor(p.x * inv)), int(std::floor(p.y * inv)), int(std::ceil(p.x * inv)),
           int(std::ceil(p.y * inv))};
    bb = Box::hull(bb, pb);
  }
  const int w = bb.width(), h = bb.height();
  std::vector<std::vector<std::uint32_t>> buckets(std::size_t(w) * h);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    int bx = std::clamp(int(std::floor(pts[i].x * inv)) - bb.x0, 0, w - 1);
    int by = std::clamp(int(std::floor(pts[i].y * inv)) - bb.y0, 0, h - 1);
    buckets[std::size_t(by) * w + bx].push_back(std::uint32_t(i));
  }
  auto nearest2_from = [&](Vec2 q) {
    int cx = std::clamp(int(std::floor(q.x * inv)) - bb.x0, 0, w - 1);
    int cy = std::clamp(int(std::floor(q.y * inv)) - bb.y0, 0, h - 1);
    double best = kInf;
    for (int r = 0; r <= w + h; ++r) {
      // Scan the ring at radius r; stop once the ring cannot improve.
      if (best < kInf) {
        double ring_min = (r - 1) / inv;
        if (ring_min > 0 && ring_min * ring_min > best) break;
      }
      for (int by = cy - r; by <= cy + r; ++by) {
        if (by < 0 || by >= h) continue;
        for (int bx = cx - r; bx <= cx + r; ++bx) {
          if (bx < 0 || bx >= w) continue;
          if (std::max(std::abs(bx - cx), std::abs(by - cy)) != r) continue;
          for (std::uint32_t i : buckets[std::size_t(by) * w + bx])
            best = std::min(best, norm2(q - pts[i]));
        }
      }
    }
    return best;
  };
  double worst2 = 0;
  a.for_each([&](Site s) { worst2 = std::max(worst2, nearest2_from(position(s, m))); });
  // Other direction: distance from each point to the site set, via EDT where
  // possible plus exact local refinement (points are off-lattice).
  std::vector<Site> asites = a.sites();
  auto site_nearest2 = [&](Vec2 q) {
    double best = kInf;
    for (const Site& s : asites) best = std::min(best, norm2(q - position(s, m)));
    return best;
  };
  if (asites.size() * pts.size() <= 50'000'000) {
    for (const Vec2& p : pts) worst2 = std::max(worst2, site_nearest2(p));
  } else {
    // Bucket the sites instead for very large inputs.
    std::vector<std::vector<std::uint32_t>> sb(std::size_t(w) * h);
    for (std::size_t i = 0; i < asites.size(); ++i) {
      int bx = std::clamp(asites[i].x - bb.x0, 0, w - 1);
      int by = std::clamp(asites[i].y - bb.y0, 0, h - 1);
      sb[std::size_t(by) * w + bx].push_back(std::uint32_t(i));
    }
    for (const Vec2& p : pts) {
      int cx = std::clamp(int(std::floor(p.x * inv)) - bb.x0, 0, w - 1);
      int cy = std::clamp(int(std::floor(p.y * inv)) - bb.y0, 0, h - 1);
      double best = kInf;
      for (int r = 0; r <= w + h; ++r) {
        if (best < kInf) {
          double ring_min = (r - 1) / inv;
          if (ring_min > 0 && ring_min * ring_min > best) break;
        }
        for (int by = cy - r; by <= cy + r; ++by) {
          if (by < 0 || by >= h) continue;
          for (int bx = cx - r; bx <= cx + r; ++bx) {
            if (bx < 0 || bx >= w) continue;
            if (std::max(std::abs(bx - cx), std::abs(by - cy)) != r) continue;
            for (std::uint32_t i : sb[std::size_t(by) * w + bx])
              best = std::min(best, norm2(p - position(asites[i], m)));
          }
        }
      }
      worst2 = std::max(worst2, best);
    }
  }
  return std::sqrt(worst2);
}

}  // namespace idla
