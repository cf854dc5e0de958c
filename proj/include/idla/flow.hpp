#pragma once

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "idla/geometry.hpp"
#include "idla/region.hpp"

#include <nlohmann/json_fwd.hpp>

namespace idla {

// Growth law of one source family: a nested region family Q(s) with
// area(Q(s)) = s for s in (0, T_i], and Q(0) empty.
struct DiskGrowth {
  Vec2 center;
};
struct AffinePolygonGrowth {
  // Vertex-wise interpolation between `from` (zero area) and `to`; the
  // interpolation parameter is solved so that the area equals s.
  std::vector<Vec2> from;
  std::vector<Vec2> to;
};
using GrowthLaw = std::variant<DiskGrowth, AffinePolygonGrowth>;

// How a family's private clock s_i(s) advances.
struct ProportionalRate {
  double weight = 1.0;  // must equal T_i / T, which the constraints force
};
struct SequentialRate {
  int rank = 0;  // families fill to capacity in increasing rank order
};
using RateLaw = std::variant<ProportionalRate, SequentialRate>;

struct SourceFamily {
  double total = 0;  // T_i
  GrowthLaw growth;
  RateLaw rate;
};

struct FlowValidationIssue {
  int condition = 0;  // 1: volume, 2: containment, 3: nesting, 4: rate/arclength
  std::string message;
  double worst = 0;
  double at_time = 0;
};

struct FlowValidationReport {
  bool ok = true;
  std::vector<FlowValidationIssue> issues;
  double containment_margin = 0;  // min distance of any Q_i(T_i) to the D0 boundary
};

// Empirical flow constants: arc-length bounds of the moving boundary and
// normalized flow-speed bounds.
struct FlowConstants {
  double u = 0, U = 0;  // lower/upper boundary arc length
  double v = 0, V = 0;  // lower/upper speed vs sqrt(1+s) clock
};

class FlowSpec;

// Ordered discretized sources z_{m,1..n_m} with nondecreasing release times.
class SourceSequence {
 public:
  struct Entry {
    Site site;
    double s = 0;  // release time (volume units)
  };

  SourceSequence() = default;
  SourceSequence(Resolution m, std::vector<Entry> entries);

  Resolution resolution() const { return m_; }
  std::size_t size() const { return entries_.size(); }
  const Entry& operator[](std::size_t i) const { return entries_[i]; }
  const std::vector<Entry>& entries() const { return entries_; }

  // Number of entries with release time <= s.
  std::size_t count_until(double s) const;
  // Smallest distance from any source to the given continuum point.
  double min_distance_to(Vec2 p) const;

  std::string to_csv() const;

 private:
  Resolution m_{1};
  std::vector<Entry> entries_;
};

enum class TieOrder { LexAsc, LexDesc };

// A concentrated mass distribution: initial domain D0 plus growing source
// families compactly contained in it.
class FlowSpec {
 public:
  FlowSpec(Region d0, std::vector<SourceFamily> families);

  const Region& d0() const { return d0_; }
  const std::vector<SourceFamily>& families() const { return families_; }
  double total_volume() const { return total_; }

  // Family clock value s_i(s).
  double family_clock(std::size_t i, double s) const;
  // Q_i at family-clock value a (empty for a <= 0).
  std::optional<Region> family_region(std::size_t i, double a) const;

  // Mass density sigma_s at a point: 1_{D0} + sum over families.
  int sigma(double s, Vec2 p) const;

  FlowValidationReport validate(int samples) const;

  // Entry time of a lattice site into family i (first s with membership), or
  // nullopt if the site never enters. Closed-form for disks, bisection
  // otherwise.
  std::optional<double> entry_time(std::size_t i, Vec2 p) const;

  SourceSequence discretize(Resolution m, TieOrder order = TieOrder::LexAsc) const;

  // True when D0 and all families are concentric disks (deterministic flow
  // has the closed form of radially expanding disks).
  bool concentric_disks() const;
  // Radius of the deterministic flow boundary at time s (concentric case).
  double disk_radius(double s) const;

  nlohmann::json to_json() const;
  static FlowSpec from_json(const nlohmann::json& j);

  // D0 = unit disk, N identical origin-centered disk families growing to
  // volume pi/4 each at equal rates.
  static FlowSpec example_disks(int n_families = 1);
  // Two off-center disk families inside the unit disk (no rotational
  // symmetry); used as the generic quadrature test flow.
  static FlowSpec two_family_asymmetric();

 private:
  Region d0_;
  std::vector<SourceFamily> families_;
  double total_ = 0;
  std::vector<double> seq_offset_;  // start times in the sequential schedule
  bool sequential_ = false;
  bool concentric_ = false;  // cached analytic-disk shortcut
  Vec2 center0_{0, 0};
  double r0_ = 0;
};

FlowConstants estimate_flow_constants(const FlowSpec& spec,
                                      const std::function<SiteSet(double)>& sampler,
                                      Resolution m_ref, int samples);

}  // namespace idla
