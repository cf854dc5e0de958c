#include "idla/idla.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "idla/io.hpp"

namespace idla {

namespace {
constexpr double kPi = 3.14159265358979323846;

// Steps in the fixed neighbor order (+x, -x, +y, -y).
constexpr int kDx[4] = {1, -1, 0, 0};
constexpr int kDy[4] = {0, 0, 1, -1};

Site walk_until_exit(const SiteSet& keep_walking_in, const SiteSet* absorb, Site source, Rng& rng) {
  int x = source.x, y = source.y;
  for (std::uint64_t step = 0; step < kWalkStepBudget; ++step) {
    int d = rng.direction();
    x += kDx[d];
    y += kDy[d];
    if (!keep_walking_in.contains(x, y) || (absorb && !absorb->contains(x, y)))
      return Site{x, y};
  }
  throw InvariantError("random walk exceeded the step budget; geometry is likely wrong");
}

}  // namespace

IdlaState init_idla(const FlowSpec& spec, Resolution m, std::uint64_t seed) {
  IdlaState st;
  st.m = m;
  st.run_seed = seed;
  st.occupied = sites_in(spec.d0(), m);
  // Size the grid for the fully grown deterministic set plus fluctuation
  // headroom; inserts still grow on demand if a run overshoots.
  Rect r = spec.d0().bounding_rect();
  double rad = 0.5 * std::max(r.x1 - r.x0, r.y1 - r.y0);
  double grow = std::sqrt(rad * rad + spec.total_volume() / kPi) - rad;
  int margin = int(std::ceil((grow + 0.5) * m.m)) + 8;
  st.occupied.reserve_box(st.occupied.box().inflated(margin));
  return st;
}

Site step_idla(IdlaState& state, Site source, const SiteSet* absorb) {
  ++state.t;
  if (!state.occupied.contains(source) || (absorb && !absorb->contains(source))) {
    state.occupied.insert(source);
    return source;
  }
  Rng rng(mix_seed(state.run_seed, {std::uint64_t(state.t)}));
  Site landing = walk_until_exit(state.occupied, absorb, source, rng);
  state.occupied.insert(landing);
  return landing;
}

void run_idla(IdlaState& state, const SourceSequence& seq, long t_max,
              const std::vector<WalkObserver>& observers, const SiteSet* absorb,
              std::vector<Site>* landing_log) {
  if (t_max > long(seq.size())) throw std::invalid_argument("run_idla: t_max exceeds sequence");
  while (state.t < t_max) {
    long i = state.t;  // particle index into seq
    Site source = seq[std::size_t(i)].site;
    Site landing = step_idla(state, source, absorb);
    if (landing_log) landing_log->push_back(landing);
    for (const auto& obs : observers) obs(i, source, landing, state);
  }
}

SiteSet smash_sum(const SiteSet& a, const SiteSet& b, std::uint64_t seed) {
  SiteSet c(Box::hull(a.box(), b.box()).inflated(4));
  a.for_each([&](Site s) { c.insert(s); });
  b.for_each([&](Site s) { c.insert(s); });
  std::vector<Site> collisions;
  a.for_each([&](Site s) {
    if (b.contains(s)) collisions.push_back(s);
  });
  std::sort(collisions.begin(), collisions.end());
  std::uint64_t k = 0;
  for (Site s : collisions) {
    Rng rng(mix_seed(seed, {k++}));
    Site landing = walk_until_exit(c, nullptr, s, rng);
    c.insert(landing);
  }
  return c;
}

}  // namespace idla
