#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "idla/flow.hpp"
#include "idla/geometry.hpp"
#include "idla/rng.hpp"

namespace idla {

// Mutable state of one growth run. Owned by a single executor; independent
// trials run in parallel with no shared mutable state.
struct IdlaState {
  Resolution m{1};
  SiteSet occupied;
  long t = 0;  // particles settled so far
  std::uint64_t run_seed = 0;
};

// Per-particle callback. Observers must not mutate the state; they see it
// immediately after the landing site was added.
using WalkObserver = std::function<void(long particle, Site source, Site landing, const IdlaState&)>;

inline constexpr std::uint64_t kWalkStepBudget = 1'000'000'000ull;

IdlaState init_idla(const FlowSpec& spec, Resolution m, std::uint64_t seed);

// Walks a particle from `source` until it first steps on a site outside
// `state.occupied` (or outside `absorb`, when given); adds that site and
// returns it. A source not already occupied settles immediately.
Site step_idla(IdlaState& state, Site source, const SiteSet* absorb = nullptr);

// Applies step_idla for sources seq[state.t .. t_max), invoking observers
// per particle and appending to `landing_log` when provided.
void run_idla(IdlaState& state, const SourceSequence& seq, long t_max,
              const std::vector<WalkObserver>& observers = {}, const SiteSet* absorb = nullptr,
              std::vector<Site>* landing_log = nullptr);

// Diaconis-Fulton sum: A | B with each collision point of A & B walked (in
// deterministic order) until it exits the growing set.
SiteSet smash_sum(const SiteSet& a, const SiteSet& b, std::uint64_t seed);

}  // namespace idla
