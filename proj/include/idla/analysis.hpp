#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "idla/flow.hpp"
#include "idla/geometry.hpp"
#include "idla/idla.hpp"

namespace idla {

// Boundary/depth queries against the deterministic flow set D_s: analytic
// for concentric-disk flows, sampled from the stabilized sandpile on a finer
// lattice otherwise (in which case the s values must be preregistered).
class FlowReference {
 public:
  FlowReference(const FlowSpec& spec, Resolution run_m, std::vector<double> s_grid = {});

  bool analytic() const { return analytic_; }
  Resolution run_resolution() const { return run_m_; }
  const FlowSpec& spec() const { return spec_; }

  double dist_to(double s, Vec2 p) const;   // distance to D_s, 0 inside
  double depth_in(double s, Vec2 p) const;  // distance to the complement, 0 outside
  // Boundary of D_s sampled at spacing <= 1/(4 run_m).
  std::vector<Vec2> boundary_points(double s) const;

 private:
  struct Snapshot {
    SiteSet set;
    DistanceField to_set;
    DistanceField to_complement;
  };
  const Snapshot& snapshot(double s) const;

  FlowSpec spec_;
  Resolution run_m_;
  bool analytic_ = false;
  Vec2 center_{0, 0};
  Resolution m_ref_{1};
  std::map<long long, Snapshot> snaps_;
};

struct FluctuationRecord {
  double s = 0;
  double d_boundary = 0;
  double max_early = 0;
  double max_late = 0;
};

struct EventWitness {
  bool happened = false;
  Site witness{0, 0};
  double depth = 0;
};

// eps-early / eps-late detection at particle count floor(m^2 s).
std::pair<EventWitness, EventWitness> detect_events(const IdlaState& state, double s, double eps,
                                                    const FlowReference& ref);

struct RunMeasurementOptions {
  int checkpoints = 20;
  bool keep_landing_log = false;
  TieOrder order = TieOrder::LexAsc;
};

struct RunMeasurement {
  std::vector<FluctuationRecord> records;
  double max_fluct = 0;  // max over checkpoints of d_boundary
  std::vector<Site> landing_log;
  IdlaState final_state;
};

// Runs one IDLA trial to volume T and measures fluctuation records at
// checkpoints; early/late depths are audited exactly per landing.
RunMeasurement measure_idla_run(const FlowSpec& spec, const SourceSequence& seq, Resolution m,
                                std::uint64_t seed, const FlowReference& ref,
                                const RunMeasurementOptions& opt = {});

struct TentacleStats {
  double b = 0;
  std::vector<double> r_values;
  std::vector<long> event_counts;  // per r
  long landings_audited = 0;
  long trials = 0;
};

// Counts landings at sites z with d(z, D0) >= r whose ball B(z, r) is filled
// at or below b m^2 r^2 at landing time (the landing itself included).
TentacleStats tentacle_scan(const FlowSpec& spec, Resolution m, const SiteSet& initial,
                            const std::vector<Site>& landing_log, double b,
                            const std::vector<double>& r_values);

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double rss = 0;
  std::vector<double> residuals;
};
LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y);

struct ScalingFit {
  std::vector<int> m_values;
  std::vector<double> medians;
  double beta = 0;  // negated log-log slope
  double intercept = 0;
  double ci_lo = 0, ci_hi = 0;  // bootstrap 95% interval on beta
  std::vector<double> residuals;
};

// Least-squares fit of log(median max fluctuation) against log m; confidence
// interval by resampling trials within each resolution.
ScalingFit fit_exponent(const std::vector<int>& m_values,
                        const std::vector<std::vector<double>>& per_m_maxima,
                        std::uint64_t boot_seed = 7, int boot_rounds = 2000);

struct EnvelopeCheck {
  double c_hat = 0;
  std::vector<int> violations;  // per m beyond the calibration resolution
  std::vector<int> allowed;
  bool ok = true;
};

// C calibrated at the smallest resolution; each larger m may exceed
// C m^-exponent in at most trials/20 runs.
EnvelopeCheck envelope_check(const std::vector<int>& m_values,
                             const std::vector<std::vector<double>>& per_m_maxima,
                             double exponent);

struct KsResult {
  double d = 0;
  double p_value = 1;
};
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

struct GrowthComparison {
  double aic_log = 0, aic_power = 0;
  double log_slope = 0;   // b in y = a + b log m
  double power_exp = 0;   // p in y = C m^p
  bool log_preferred = false;
};
// Compares additive-error fits y ~ a + b log m vs y ~ C m^p by AIC.
GrowthComparison compare_log_vs_power(const std::vector<double>& ms, const std::vector<double>& ys);

double median(std::vector<double> v);
double mean(const std::vector<double>& v);
double sample_sd(const std::vector<double>& v);

}  // namespace idla
