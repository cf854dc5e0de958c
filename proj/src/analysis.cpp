#include "idla/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "idla/rng.hpp"
#include "idla/sandpile.hpp"

namespace idla {

namespace {
long long quantize_s(double s) { return llround(s * 1e12); }
}  // namespace

FlowReference::FlowReference(const FlowSpec& spec, Resolution run_m, std::vector<double> s_grid)
    : spec_(spec), run_m_(run_m), m_ref_(std::max(1, 4 * run_m.m)) {
  analytic_ = spec_.concentric_disks();
  if (analytic_) {
    center_ = spec_.d0().as_disk()->first;
    return;
  }
  for (double s : s_grid) {
    long long key = quantize_s(s);
    if (snaps_.count(key)) continue;
    SiteSet set = reference_flow(spec_, s, m_ref_);
    Box work = set.box().inflated(2);
    SiteSet comp(work);
    for (int y = work.y0; y <= work.y1; ++y)
      for (int x = work.x0; x <= work.x1; ++x)
        if (!set.contains(x, y)) comp.insert({x, y});
    snaps_.emplace(key, Snapshot{set, DistanceField(set, work), DistanceField(comp, work)});
  }
}

const FlowReference::Snapshot& FlowReference::snapshot(double s) const {
  auto it = snaps_.find(quantize_s(s));
  if (it == snaps_.end())
    throw std::logic_error("FlowReference: s value was not preregistered for a sampled flow");
  return it->second;
}

double FlowReference::dist_to(double s, Vec2 p) const {
  if (analytic_) return std::max(0.0, norm(p - center_) - spec_.disk_radius(s));
  const Snapshot& sn = snapshot(s);
  Site q{int(std::lround(p.x * m_ref_.m)), int(std::lround(p.y * m_ref_.m))};
  if (!sn.to_set.box().contains(q)) {
    // Outside the sampled window: fall back to the set's bounding distance.
    double best = std::numeric_limits<double>::infinity();
    sn.set.for_each([&](Site z) { best = std::min(best, norm(position(z, m_ref_) - p)); });
    return best;
  }
  return std::sqrt(sn.to_set.d2(q)) / m_ref_.m;
}

double FlowReference::depth_in(double s, Vec2 p) const {
  if (analytic_) return std::max(0.0, spec_.disk_radius(s) - norm(p - center_));
  const Snapshot& sn = snapshot(s);
  Site q{int(std::lround(p.x * m_ref_.m)), int(std::lround(p.y * m_ref_.m))};
  if (!sn.to_complement.box().contains(q)) return 0.0;
  return std::sqrt(sn.to_complement.d2(q)) / m_ref_.m;
}

std::vector<Vec2> FlowReference::boundary_points(double s) const {
  if (analytic_) {
    double r = spec_.disk_radius(s);
    double spacing = 1.0 / (4.0 * run_m_.m);
    int n = std::max(16, int(std::ceil(2 * 3.14159265358979323846 * r / spacing)));
    std::vector<Vec2> pts(n);
    for (int i = 0; i < n; ++i) {
      double t = 2 * 3.14159265358979323846 * i / n;
      pts[i] = center_ + Vec2{r * std::cos(t), r * std::sin(t)};
    }
    return pts;
  }
  const Snapshot& sn = snapshot(s);
  std::vector<Vec2> pts;
  boundary(sn.set).for_each([&](Site z) { pts.push_back(position(z, m_ref_)); });
  return pts;
}

std::pair<EventWitness, EventWitness> detect_events(const IdlaState& state, double s, double eps,
                                                    const FlowReference& ref) {
  EventWitness early, late;
  state.occupied.for_each([&](Site z) {
    double d = ref.dist_to(s, position(z, state.m));
    if (d >= eps && d > early.depth) {
      early.happened = true;
      early.witness = z;
      early.depth = d;
    }
  });
  const Box& b = state.occupied.box();
  for (int y = b.y0; y <= b.y1; ++y)
    for (int x = b.x0; x <= b.x1; ++x) {
      if (state.occupied.contains(x, y)) continue;
      double d = ref.depth_in(s, position({x, y}, state.m));
      if (d > eps && d > late.depth) {
        late.happened = true;
        late.witness = {x, y};
        late.depth = d;
      }
    }
  return {early, late};
}

RunMeasurement measure_idla_run(const FlowSpec& spec, const SourceSequence& seq, Resolution m,
                                std::uint64_t seed, const FlowReference& ref,
                                const RunMeasurementOptions& opt) {
  if (opt.checkpoints < 1) throw std::invalid_argument("measure_idla_run: need >= 1 checkpoint");
  RunMeasurement out;
  IdlaState state = init_idla(spec, m, seed);
  const double T = spec.total_volume();
  const long n = long(seq.size());

  double running_early = 0, running_late = 0;
  std::vector<Site> log;
  long audited = 0;  // landings folded into the running maxima so far

  auto absorb_landings = [&](long t_target) {
    for (; audited < t_target; ++audited) {
      Site z = log[std::size_t(audited)];
      double s_land = double(audited + 1) / (double(m.m) * m.m);
      s_land = std::min(s_land, T);
      Vec2 p = position(z, m);
      running_early = std::max(running_early, ref.dist_to(s_land, p));
      running_late = std::max(running_late, ref.depth_in(s_land, p));
    }
  };

  for (int k = 0; k <= opt.checkpoints; ++k) {
    double s_k = T * k / opt.checkpoints;
    long t_k = std::min<long>(n, llround(std::floor(s_k * m.m * m.m)));
    if (k == opt.checkpoints) t_k = n;
    run_idla(state, seq, t_k, {}, nullptr, &log);
    absorb_landings(t_k);

    FluctuationRecord rec;
    rec.s = s_k;
    rec.d_boundary = hausdorff(boundary(state.occupied), ref.boundary_points(s_k), m);
    rec.max_early = running_early;
    // Current lateness of still-unoccupied sites, folded with the audited
    // cover-time depths.
    double open_late = 0;
    const Box& b = state.occupied.box();
    for (int y = b.y0; y <= b.y1; ++y)
      for (int x = b.x0; x <= b.x1; ++x) {
        if (state.occupied.contains(x, y)) continue;
        open_late = std::max(open_late, ref.depth_in(s_k, position({x, y}, m)));
      }
    rec.max_late = std::max(running_late, open_late);
    running_late = rec.max_late;
    out.records.push_back(rec);
    out.max_fluct = std::max(out.max_fluct, rec.d_boundary);
  }
  if (opt.keep_landing_log) out.landing_log = std::move(log);
  out.final_state = std::move(state);
  return out;
}

TentacleStats tentacle_scan(const FlowSpec& spec, Resolution m, const SiteSet& initial,
                            const std::vector<Site>& landing_log, double b,
                            const std::vector<double>& r_values) {
  TentacleStats st;
  st.b = b;
  st.r_values = r_values;
  st.event_counts.assign(r_values.size(), 0);
  st.trials = 1;
  SiteSet occ = initial;
  const Region& d0 = spec.d0();
  for (const Site& z : landing_log) {
    occ.insert(z);
    Vec2 p = position(z, m);
    double dist = d0.distance_to(p);
    for (std::size_t i = 0; i < r_values.size(); ++i) {
      double r = r_values[i];
      if (dist < r) continue;
      ++st.landings_audited;
      const double rm = r * m.m;
      const int reach = int(std::floor(rm));
      long filled = 0;
      for (int dy = -reach; dy <= reach; ++dy)
        for (int dx = -reach; dx <= reach; ++dx) {
          if (double(dx) * dx + double(dy) * dy > rm * rm) continue;
          if (occ.contains(z.x + dx, z.y + dy)) ++filled;
        }
      if (double(filled) <= b * m.m * m.m * r * r) ++st.event_counts[i];
    }
  }
  return st;
}

LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("least_squares: need matching inputs, n >= 2");
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  double denom = double(n) * sxx - sx * sx;
  if (denom == 0) throw std::invalid_argument("least_squares: degenerate x values");
  LinearFit f;
  f.slope = (double(n) * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / double(n);
  f.residuals.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    f.residuals[i] = y[i] - (f.intercept + f.slope * x[i]);
    f.rss += f.residuals[i] * f.residuals[i];
  }
  return f;
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median: empty");
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("mean: empty");
  double s = 0;
  for (double x : v) s += x;
  return s / double(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) throw std::invalid_argument("sample_sd: need n >= 2");
  double mu = mean(v), acc = 0;
  for (double x : v) acc += (x - mu) * (x - mu);
  return std::sqrt(acc / double(v.size() - 1));
}

ScalingFit fit_exponent(const std::vector<int>& m_values,
                        const std::vector<std::vector<double>>& per_m_maxima,
                        std::uint64_t boot_seed, int boot_rounds) {
  if (m_values.size() < 3)
    throw std::invalid_argument("fit_exponent: need at least 3 resolutions");
  if (per_m_maxima.size() != m_values.size())
    throw std::invalid_argument("fit_exponent: data/resolution mismatch");
  ScalingFit fit;
  fit.m_values = m_values;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < m_values.size(); ++i) {
    if (per_m_maxima[i].empty()) throw std::invalid_argument("fit_exponent: empty trial set");
    fit.medians.push_back(median(per_m_maxima[i]));
    lx.push_back(std::log(double(m_values[i])));
    ly.push_back(std::log(fit.medians.back()));
  }
  LinearFit lf = least_squares(lx, ly);
  fit.beta = -lf.slope;
  fit.intercept = lf.intercept;
  fit.residuals = lf.residuals;

  Rng rng(boot_seed);
  std::vector<double> betas;
  betas.reserve(boot_rounds);
  for (int round = 0; round < boot_rounds; ++round) {
    std::vector<double> by(m_values.size());
    for (std::size_t i = 0; i < m_values.size(); ++i) {
      const auto& trials = per_m_maxima[i];
      std::vector<double> resampled(trials.size());
      for (auto& v : resampled) v = trials[rng.below(trials.size())];
      by[i] = std::log(median(resampled));
    }
    betas.push_back(-least_squares(lx, by).slope);
  }
  std::sort(betas.begin(), betas.end());
  fit.ci_lo = betas[std::size_t(0.025 * (betas.size() - 1))];
  fit.ci_hi = betas[std::size_t(0.975 * (betas.size() - 1))];
  return fit;
}

EnvelopeCheck envelope_check(const std::vector<int>& m_values,
                             const std::vector<std::vector<double>>& per_m_maxima,
                             double exponent) {
  if (m_values.size() < 2) throw std::invalid_argument("envelope_check: need >= 2 resolutions");
  EnvelopeCheck ec;
  for (double v : per_m_maxima[0])
    ec.c_hat = std::max(ec.c_hat, v * std::pow(double(m_values[0]), exponent));
  for (std::size_t i = 1; i < m_values.size(); ++i) {
    double cap = ec.c_hat * std::pow(double(m_values[i]), -exponent);
    int bad = 0;
    for (double v : per_m_maxima[i])
      if (v > cap) ++bad;
    int allowed = int(per_m_maxima[i].size() / 20);
    ec.violations.push_back(bad);
    ec.allowed.push_back(allowed);
    if (bad > allowed) ec.ok = false;
  }
  return ec;
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  double ne = double(a.size()) * b.size() / double(a.size() + b.size());
  double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  KsResult r;
  r.d = d;
  if (lambda < 0.18) {  // the tail series degenerates; the p-value is 1 here
    r.p_value = 1.0;
    return r;
  }
  double q = 0;
  double sign = 1;
  for (int k = 1; k <= 100; ++k) {
    double term = std::exp(-2.0 * k * k * lambda * lambda);
    q += 2 * sign * term;
    sign = -sign;
    if (term < 1e-12) break;
  }
  r.p_value = std::clamp(q, 0.0, 1.0);
  return r;
}

GrowthComparison compare_log_vs_power(const std::vector<double>& ms, const std::vector<double>& ys) {
  if (ms.size() != ys.size() || ms.size() < 3)
    throw std::invalid_argument("compare_log_vs_power: need n >= 3");
  const std::size_t n = ms.size();
  GrowthComparison gc;

  std::vector<double> lx(n);
  for (std::size_t i = 0; i < n; ++i) lx[i] = std::log(ms[i]);
  LinearFit logfit = least_squares(lx, ys);
  gc.log_slope = logfit.slope;
  gc.aic_log = double(n) * std::log(logfit.rss / double(n)) + 2 * 2;

  // Power model y = C m^p: C closed-form given p, p by golden-section.
  auto rss_for = [&](double p) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double mp = std::pow(ms[i], p);
      num += ys[i] * mp;
      den += mp * mp;
    }
    double c = den > 0 ? num / den : 0;
    double rss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double r = ys[i] - c * std::pow(ms[i], p);
      rss += r * r;
    }
    return rss;
  };
  double lo = -1.0, hi = 3.0;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = rss_for(x1), f2 = rss_for(x2);
  for (int it = 0; it < 200; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = rss_for(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = rss_for(x2);
    }
  }
  gc.power_exp = 0.5 * (lo + hi);
  gc.aic_power = double(n) * std::log(rss_for(gc.power_exp) / double(n)) + 2 * 2;
  gc.log_preferred = gc.aic_log < gc.aic_power;
  return gc;
}

}  // namespace idla
