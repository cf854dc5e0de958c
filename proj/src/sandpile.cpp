#include "idla/sandpile.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "idla/io.hpp"

namespace idla {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kOccupiedThreshold = 1.0 - 1e-6;
}  // namespace

double SandpileState::total() const {
  double t = 0;
  for (double v : mass) t += v;
  return t;
}

SandpileState sandpile_point_mass(double mass, Resolution m) {
  if (!(mass >= 0) || !std::isfinite(mass))
    throw std::invalid_argument("sandpile_point_mass: mass must be finite and >= 0");
  int r = int(std::ceil(std::sqrt(mass / kPi))) + 4;
  SandpileState st;
  st.m = m;
  st.box = Box{-r, -r, r, r};
  st.mass.assign(st.box.cells(), 0.0);
  st.at(0, 0) = mass;
  return st;
}

SandpileState sandpile_from_flow(const FlowSpec& spec, double s, Resolution m_ref) {
  Rect r = spec.d0().bounding_rect();
  double rad = 0.5 * std::max(r.x1 - r.x0, r.y1 - r.y0);
  double grow = std::sqrt(rad * rad + spec.total_volume() / kPi) - rad;
  int margin = int(std::ceil((grow + 0.1) * m_ref.m)) + 4;
  Box box{int(std::floor(r.x0 * m_ref.m)) - margin, int(std::floor(r.y0 * m_ref.m)) - margin,
          int(std::ceil(r.x1 * m_ref.m)) + margin, int(std::ceil(r.y1 * m_ref.m)) + margin};
  SandpileState st;
  st.m = m_ref;
  st.box = box;
  st.mass.assign(box.cells(), 0.0);
  for (int y = box.y0; y <= box.y1; ++y)
    for (int x = box.x0; x <= box.x1; ++x) {
      int v = spec.sigma(s, {double(x) / m_ref.m, double(y) / m_ref.m});
      if (v) st.at(x, y) = v;
    }
  return st;
}

namespace {

long stabilize_sweep(SandpileState& st) {
  const Box& b = st.box;
  const int w = b.width();
  long sweeps = 0;
  const long budget = 2'000'000;
  for (;;) {
    ++sweeps;
    if (sweeps > budget) throw InvariantError("sandpile sweep did not converge within budget");
    double worst = 0;
    for (int y = b.y0; y <= b.y1; ++y) {
      double* row = st.mass.data() + std::size_t(y - b.y0) * w;
      for (int x = b.x0; x <= b.x1; ++x) {
        double& c = row[x - b.x0];
        if (c > 1.0) {
          double q = (c - 1.0) * 0.25;
          c = 1.0;
          if (x > b.x0) row[x - b.x0 - 1] += q;
          if (x < b.x1) row[x - b.x0 + 1] += q;
          if (y > b.y0) st.at(x, y - 1) += q;
          if (y < b.y1) st.at(x, y + 1) += q;
          worst = std::max(worst, 4 * q);
          if ((x == b.x0 || x == b.x1 || y == b.y0 || y == b.y1))
            throw InvariantError("sandpile mass reached the grid edge; box too small");
        }
      }
    }
    if (worst <= st.tolerance) return sweeps;
  }
}

long stabilize_queue(SandpileState& st) {
  const Box& b = st.box;
  std::deque<Site> work;
  for (int y = b.y0; y <= b.y1; ++y)
    for (int x = b.x0; x <= b.x1; ++x)
      if (st.at(x, y) > 1.0 + st.tolerance) work.push_back({x, y});
  long pops = 0;
  const long budget = 400'000'000;
  auto push_if_excess = [&](int x, int y) {
    if (st.at(x, y) > 1.0 + st.tolerance) work.push_back({x, y});
  };
  while (!work.empty()) {
    if (++pops > budget) throw InvariantError("sandpile queue did not converge within budget");
    Site z = work.front();
    work.pop_front();
    double& c = st.at(z.x, z.y);
    if (c <= 1.0 + st.tolerance) continue;
    if (z.x == b.x0 || z.x == b.x1 || z.y == b.y0 || z.y == b.y1)
      throw InvariantError("sandpile mass reached the grid edge; box too small");
    double q = (c - 1.0) * 0.25;
    c = 1.0;
    st.at(z.x - 1, z.y) += q;
    st.at(z.x + 1, z.y) += q;
    st.at(z.x, z.y - 1) += q;
    st.at(z.x, z.y + 1) += q;
    push_if_excess(z.x - 1, z.y);
    push_if_excess(z.x + 1, z.y);
    push_if_excess(z.x, z.y - 1);
    push_if_excess(z.x, z.y + 1);
  }
  return pops;
}

// Projected SOR on the odometer u:  final = sigma + (avg of u at neighbors)
// - u; solve final <= 1, u >= 0, complementarity. Identical fixed point to
// toppling by the abelian property.
long stabilize_sor(SandpileState& st, long max_sweeps) {
  const Box& b = st.box;
  const int w = b.width(), h = b.height();
  std::vector<double> u(st.mass.size(), 0.0);
  const std::vector<double> sigma = st.mass;
  const double omega = 2.0 / (1.0 + std::sin(kPi / std::max(w, h)));
  long sweeps = 0;
  auto uat = [&](int ix, int iy) -> double& { return u[std::size_t(iy) * w + ix]; };
  auto materialize = [&]() {
    double excess = 0;
    for (int iy = 0; iy < h; ++iy)
      for (int ix = 0; ix < w; ++ix) {
        double nb = 0;
        nb += ix > 0 ? uat(ix - 1, iy) : 0;
        nb += ix < w - 1 ? uat(ix + 1, iy) : 0;
        nb += iy > 0 ? uat(ix, iy - 1) : 0;
        nb += iy < h - 1 ? uat(ix, iy + 1) : 0;
        double f = sigma[std::size_t(iy) * w + ix] + 0.25 * nb - uat(ix, iy);
        st.mass[std::size_t(iy) * w + ix] = f;
        excess = std::max(excess, f - 1.0);
      }
    return excess;
  };
  for (;;) {
    double worst = 0;
    do {
      ++sweeps;
      if (sweeps > max_sweeps) throw InvariantError("sandpile SOR did not converge within budget");
      worst = 0;
      for (int iy = 0; iy < h; ++iy)
        for (int ix = 0; ix < w; ++ix) {
          double nb = 0;
          nb += ix > 0 ? uat(ix - 1, iy) : 0;
          nb += ix < w - 1 ? uat(ix + 1, iy) : 0;
          nb += iy > 0 ? uat(ix, iy - 1) : 0;
          nb += iy < h - 1 ? uat(ix, iy + 1) : 0;
          double target = sigma[std::size_t(iy) * w + ix] - 1.0 + 0.25 * nb;
          double& cur = uat(ix, iy);
          double next = std::max(0.0, cur + omega * (target - cur));
          worst = std::max(worst, std::abs(next - cur));
          cur = next;
        }
    } while (worst > st.tolerance * 0.25);
    if (materialize() <= st.tolerance) break;
  }
  // Edge cells must have stayed untouched.
  for (int ix = 0; ix < w; ++ix)
    if (uat(ix, 0) != 0 || uat(ix, h - 1) != 0)
      throw InvariantError("sandpile mass reached the grid edge; box too small");
  for (int iy = 0; iy < h; ++iy)
    if (uat(0, iy) != 0 || uat(w - 1, iy) != 0)
      throw InvariantError("sandpile mass reached the grid edge; box too small");
  return sweeps;
}

}  // namespace

SandpileResult stabilize_sandpile(const SandpileState& initial, ToppleSchedule schedule,
                                  long max_sweeps) {
  SandpileResult res;
  res.state = initial;
  res.mass_before = initial.total();
  if (!std::isfinite(res.mass_before))
    throw std::invalid_argument("stabilize_sandpile: total mass must be finite");
  switch (schedule) {
    case ToppleSchedule::Sweep:
      res.sweeps = stabilize_sweep(res.state);
      break;
    case ToppleSchedule::Queue:
      res.sweeps = stabilize_queue(res.state);
      break;
    case ToppleSchedule::Sor:
      res.sweeps = stabilize_sor(res.state, max_sweeps);
      break;
  }
  res.mass_after = res.state.total();
  res.occupied = SiteSet(res.state.box);
  const Box& b = res.state.box;
  for (int y = b.y0; y <= b.y1; ++y)
    for (int x = b.x0; x <= b.x1; ++x)
      if (res.state.at(x, y) >= kOccupiedThreshold) res.occupied.insert({x, y});
  return res;
}

SiteSet reference_flow(const FlowSpec& spec, double s, Resolution m_ref) {
  if (s < -1e-12 || s > spec.total_volume() + 1e-9)
    throw std::invalid_argument("reference_flow: s outside [0, T]");
  if (spec.concentric_disks()) {
    Vec2 c = spec.d0().as_disk()->first;
    return sites_in(Region::disk(c, spec.disk_radius(s)), m_ref);
  }
  if (s <= 0) return sites_in(spec.d0(), m_ref);
  return stabilize_sandpile(sandpile_from_flow(spec, s, m_ref)).occupied;
}

const std::vector<HarmonicTestFunction>& harmonic_test_functions() {
  static const std::vector<HarmonicTestFunction> fns = {
      {"1", [](Vec2) { return 1.0; }},
      {"Re z", [](Vec2 p) { return p.x; }},
      {"Im z", [](Vec2 p) { return p.y; }},
      {"Re z^2", [](Vec2 p) { return p.x * p.x - p.y * p.y; }},
      {"Im z^2", [](Vec2 p) { return 2 * p.x * p.y; }},
      {"Re z^3", [](Vec2 p) { return p.x * p.x * p.x - 3 * p.x * p.y * p.y; }},
  };
  return fns;
}

namespace {

std::vector<double> quadrature_check_impl(const FlowSpec& spec, double s, Resolution m_ref,
                                          const std::vector<HarmonicTestFunction>& hs) {
  SiteSet ref = reference_flow(spec, s, m_ref);
  std::vector<double> lhs(hs.size(), 0.0), rhs(hs.size(), 0.0);
  ref.for_each([&](Site z) {
    Vec2 p = position(z, m_ref);
    for (std::size_t i = 0; i < hs.size(); ++i) lhs[i] += hs[i].f(p);
  });
  // sigma is supported inside D0.
  Rect r = spec.d0().bounding_rect();
  int x0 = int(std::floor(r.x0 * m_ref.m)) - 1, x1 = int(std::ceil(r.x1 * m_ref.m)) + 1;
  int y0 = int(std::floor(r.y0 * m_ref.m)) - 1, y1 = int(std::ceil(r.y1 * m_ref.m)) + 1;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      Vec2 p{double(x) / m_ref.m, double(y) / m_ref.m};
      int v = spec.sigma(s, p);
      if (!v) continue;
      for (std::size_t i = 0; i < hs.size(); ++i) rhs[i] += v * hs[i].f(p);
    }
  double inv2 = 1.0 / (double(m_ref.m) * m_ref.m);
  std::vector<double> out(hs.size());
  for (std::size_t i = 0; i < hs.size(); ++i) out[i] = std::abs(lhs[i] * inv2 - rhs[i] * inv2);
  return out;
}

}  // namespace

double quadrature_check(const FlowSpec& spec, double s, Resolution m_ref,
                        const std::function<double(Vec2)>& h) {
  return quadrature_check_impl(spec, s, m_ref, {{"h", h}})[0];
}

std::vector<double> quadrature_check_all(const FlowSpec& spec, double s, Resolution m_ref) {
  return quadrature_check_impl(spec, s, m_ref, harmonic_test_functions());
}

}  // namespace idla
