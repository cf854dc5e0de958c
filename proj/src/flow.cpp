#include "idla/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace idla {

namespace {
constexpr double kPi = 3.14159265358979323846;

double poly_area2(const std::vector<Vec2>& v) {
  double a2 = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2& p = v[i];
    const Vec2& q = v[(i + 1) % v.size()];
    a2 += p.x * q.y - q.x * p.y;
  }
  return a2;
}

std::vector<Vec2> lerp_poly(const std::vector<Vec2>& a, const std::vector<Vec2>& b, double t) {
  std::vector<Vec2> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + t * (b[i] - a[i]);
  return out;
}
}  // namespace

SourceSequence::SourceSequence(Resolution m, std::vector<Entry> entries)
    : m_(m), entries_(std::move(entries)) {
  for (std::size_t i = 1; i < entries_.size(); ++i)
    if (entries_[i].s < entries_[i - 1].s)
      throw std::logic_error("SourceSequence: release times must be nondecreasing");
}

std::size_t SourceSequence::count_until(double s) const {
  Entry probe{{0, 0}, s};
  auto it = std::upper_bound(entries_.begin(), entries_.end(), probe,
                             [](const Entry& a, const Entry& b) { return a.s < b.s; });
  return std::size_t(it - entries_.begin());
}

double SourceSequence::min_distance_to(Vec2 p) const {
  double best = std::numeric_limits<double>::infinity();
  for (const Entry& e : entries_) best = std::min(best, norm(position(e.site, m_) - p));
  return best;
}

std::string SourceSequence::to_csv() const {
  std::string out = "index,x,y,s\n";
  char buf[128];
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%d,%d,%.17g\n", i, entries_[i].site.x, entries_[i].site.y,
                  entries_[i].s);
    out += buf;
  }
  return out;
}

FlowSpec::FlowSpec(Region d0, std::vector<SourceFamily> families)
    : d0_(std::move(d0)), families_(std::move(families)) {
  if (!d0_.valid()) throw std::invalid_argument("FlowSpec: invalid D0");
  for (const auto& f : families_) {
    if (f.total < 0) throw std::invalid_argument("FlowSpec: negative family volume");
    total_ += f.total;
  }
  bool any_seq = false, any_prop = false;
  for (const auto& f : families_)
    (std::holds_alternative<SequentialRate>(f.rate) ? any_seq : any_prop) = true;
  if (any_seq && any_prop)
    throw std::invalid_argument("FlowSpec: cannot mix proportional and sequential rates");
  sequential_ = any_seq;
  if (sequential_) {
    std::vector<std::size_t> order(families_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return std::get<SequentialRate>(families_[a].rate).rank <
             std::get<SequentialRate>(families_[b].rate).rank;
    });
    seq_offset_.assign(families_.size(), 0);
    double acc = 0;
    for (std::size_t i : order) {
      seq_offset_[i] = acc;
      acc += families_[i].total;
    }
  }
  if (auto disk = d0_.as_disk()) {
    concentric_ = true;
    center0_ = disk->first;
    r0_ = disk->second;
    for (const auto& f : families_) {
      const auto* d = std::get_if<DiskGrowth>(&f.growth);
      if (!d || norm2(d->center - center0_) > 1e-24) {
        concentric_ = false;
        break;
      }
    }
  }
}

double FlowSpec::family_clock(std::size_t i, double s) const {
  const SourceFamily& f = families_.at(i);
  if (sequential_) return std::clamp(s - seq_offset_[i], 0.0, f.total);
  // Proportional: weight is forced to T_i / T by the rate constraints.
  if (total_ <= 0) return 0;
  return std::clamp(s * (f.total / total_), 0.0, f.total);
}

std::optional<Region> FlowSpec::family_region(std::size_t i, double a) const {
  const SourceFamily& f = families_.at(i);
  if (a <= 1e-10) return std::nullopt;  // zero volume: empty set
  a = std::min(a, f.total);
  if (const auto* d = std::get_if<DiskGrowth>(&f.growth))
    return Region::disk(d->center, std::sqrt(a / kPi));
  const auto& ap = std::get<AffinePolygonGrowth>(f.growth);
  // Solve |area(lerp(t))| = a on [0,1]; the area is quadratic in t and
  // increasing for valid families, so bisection is safe.
  double lo = 0, hi = 1;
  for (int it = 0; it < 60; ++it) {
    double mid = (lo + hi) / 2;
    double area = std::abs(poly_area2(lerp_poly(ap.from, ap.to, mid))) / 2;
    (area < a ? lo : hi) = mid;
  }
  return Region::polygon(lerp_poly(ap.from, ap.to, (lo + hi) / 2));
}

int FlowSpec::sigma(double s, Vec2 p) const {
  if (s < -1e-12 || s > total_ + 1e-9)
    throw std::invalid_argument("FlowSpec::sigma: s outside [0, T]");
  int v = d0_.member(p) ? 1 : 0;
  for (std::size_t i = 0; i < families_.size(); ++i) {
    auto q = family_region(i, family_clock(i, s));
    if (q && q->member(p)) ++v;
  }
  return v;
}

FlowValidationReport FlowSpec::validate(int samples) const {
  if (samples < 2) throw std::invalid_argument("FlowSpec::validate: samples must be >= 2");
  FlowValidationReport rep;
  rep.containment_margin = std::numeric_limits<double>::infinity();
  auto fail = [&](int cond, const std::string& msg, double worst, double at) {
    rep.ok = false;
    rep.issues.push_back({cond, msg, worst, at});
  };

  double tsum = 0;
  for (const auto& f : families_) tsum += f.total;
  if (std::abs(tsum - total_) > 1e-12) fail(4, "total volume mismatch", tsum - total_, 0);

  for (std::size_t i = 0; i < families_.size(); ++i) {
    const SourceFamily& f = families_[i];
    if (const auto* pr = std::get_if<ProportionalRate>(&f.rate)) {
      double forced = total_ > 0 ? f.total / total_ : 0;
      if (std::abs(pr->weight - forced) > 1e-9)
        fail(4, "proportional weight must equal T_i/T for family " + std::to_string(i),
             pr->weight - forced, 0);
    }
    // Condition 2: compact containment of the fully grown family in D0.
    auto qfull = family_region(i, f.total);
    if (qfull) {
      double margin;
      auto d0disk = d0_.as_disk();
      if (d0disk && std::holds_alternative<DiskGrowth>(f.growth)) {
        // Disk in disk: exact margin.
        Vec2 c = std::get<DiskGrowth>(f.growth).center;
        margin = d0disk->second - norm(c - d0disk->first) - std::sqrt(f.total / kPi);
      } else {
        margin = std::numeric_limits<double>::infinity();
        for (const Vec2& p : qfull->boundary_points(0.02))
          margin = std::min(margin, d0_.member(p) ? d0_.interior_depth(p) : -d0_.distance_to(p));
      }
      rep.containment_margin = std::min(rep.containment_margin, margin);
      if (!(margin > 0))
        fail(2, "family " + std::to_string(i) + " not compactly contained in D0", margin, f.total);
    }
  }

  double clock_worst = 0;
  for (int k = 0; k < samples; ++k) {
    double s = total_ * k / (samples - 1);
    double ssum = 0;
    for (std::size_t i = 0; i < families_.size(); ++i) {
      double a = family_clock(i, s);
      ssum += a;
      // Condition 1: area(Q_i(a)) == a, from the analytic shape area.
      auto q = family_region(i, a);
      double area = q ? q->area().value_or(a) : 0;
      if (std::abs(area - a) > 1e-7)
        fail(1, "family " + std::to_string(i) + " volume mismatch", area - a, s);
      // Condition 3: nesting (spot check against the slightly later region).
      if (q && k + 1 < samples) {
        double a2 = family_clock(i, total_ * (k + 1) / (samples - 1));
        auto q2 = family_region(i, a2);
        if (q2)
          for (const Vec2& p : q->boundary_points(0.05))
            if (!q2->member(p)) {
              fail(3, "family " + std::to_string(i) + " not nested", q2->distance_to(p), s);
              break;
            }
      }
    }
    clock_worst = std::max(clock_worst, std::abs(ssum - s));
  }
  if (clock_worst > 1e-9) fail(4, "family clocks do not sum to s", clock_worst, 0);
  return rep;
}

std::optional<double> FlowSpec::entry_time(std::size_t i, Vec2 p) const {
  const SourceFamily& f = families_.at(i);
  if (f.total <= 0) return std::nullopt;
  auto qfull = family_region(i, f.total);
  if (!qfull || !qfull->member(p)) return std::nullopt;
  if (const auto* d = std::get_if<DiskGrowth>(&f.growth)) {
    double need = kPi * norm2(p - d->center);  // family clock at entry
    double s;
    if (sequential_) {
      s = seq_offset_[i] + need;
    } else {
      s = total_ > 0 ? need * (total_ / f.total) : 0;
    }
    return std::min(s, total_);
  }
  // Monotone membership in s: bisect.
  double lo = 0, hi = total_;
  for (int it = 0; it < 60; ++it) {
    double mid = (lo + hi) / 2;
    auto q = family_region(i, family_clock(i, mid));
    (q && q->member(p) ? hi : lo) = mid;
  }
  return hi;
}

SourceSequence FlowSpec::discretize(Resolution m, TieOrder order) const {
  struct Pending {
    Site site;
    double release;
    std::size_t family;
  };
  std::vector<Pending> pending;
  const double h = total_ > 0 ? total_ / (4.0 * m.m * m.m) : 0;  // base partition mesh
  for (std::size_t i = 0; i < families_.size(); ++i) {
    auto qfull = family_region(i, families_[i].total);
    if (!qfull) continue;
    SiteSet candidates = sites_in(*qfull, m);
    candidates.for_each([&](Site z) {
      auto e = entry_time(i, position(z, m));
      if (!e) return;
      double release = *e;
      // Sites whose membership opens strictly after the entry infimum (the
      // family centers) are deferred to the next base partition point.
      auto at_entry = family_region(i, family_clock(i, release));
      if (!at_entry || !at_entry->member(position(z, m)))
        release = h > 0 ? h * (std::floor(release / h) + 1) : release;
      pending.push_back({z, std::min(release, total_), i});
    });
  }
  auto lex_less = [order](const Site& a, const Site& b) {
    return order == TieOrder::LexAsc ? a < b : b < a;
  };
  std::sort(pending.begin(), pending.end(), [&](const Pending& a, const Pending& b) {
    if (a.release != b.release) return a.release < b.release;
    if (!(a.site == b.site)) return lex_less(a.site, b.site);
    return a.family < b.family;
  });
  std::vector<SourceSequence::Entry> entries;
  entries.reserve(pending.size());
  for (const Pending& p : pending) entries.push_back({p.site, p.release});
  return SourceSequence(m, std::move(entries));
}

bool FlowSpec::concentric_disks() const { return concentric_; }

double FlowSpec::disk_radius(double s) const {
  if (!concentric_) throw std::logic_error("disk_radius: flow is not concentric disks");
  return std::sqrt(r0_ * r0_ + s / kPi);
}

nlohmann::json FlowSpec::to_json() const {
  nlohmann::json fams = nlohmann::json::array();
  for (const auto& f : families_) {
    nlohmann::json fj;
    fj["T"] = f.total;
    if (const auto* d = std::get_if<DiskGrowth>(&f.growth)) {
      fj["growth"] = {{"disk_centered", {d->center.x, d->center.y}}};
    } else {
      const auto& ap = std::get<AffinePolygonGrowth>(f.growth);
      nlohmann::json from = nlohmann::json::array(), to = nlohmann::json::array();
      for (const Vec2& v : ap.from) from.push_back({v.x, v.y});
      for (const Vec2& v : ap.to) to.push_back({v.x, v.y});
      fj["growth"] = {{"affine_polygons", {{"from", from}, {"to", to}}}};
    }
    if (const auto* pr = std::get_if<ProportionalRate>(&f.rate))
      fj["rate"] = {{"proportional", pr->weight}};
    else
      fj["rate"] = {{"sequential", std::get<SequentialRate>(f.rate).rank}};
    fams.push_back(fj);
  }
  return {{"D0", d0_.to_json()}, {"families", fams}};
}

FlowSpec FlowSpec::from_json(const nlohmann::json& j) {
  Region d0 = Region::from_json(j.at("D0"));
  std::vector<SourceFamily> fams;
  for (const auto& fj : j.at("families")) {
    SourceFamily f;
    f.total = fj.at("T").get<double>();
    const auto& g = fj.at("growth");
    if (g.contains("disk_centered")) {
      f.growth = DiskGrowth{{g["disk_centered"][0].get<double>(), g["disk_centered"][1].get<double>()}};
    } else if (g.contains("affine_polygons")) {
      AffinePolygonGrowth ap;
      for (const auto& v : g["affine_polygons"].at("from")) ap.from.push_back({v[0], v[1]});
      for (const auto& v : g["affine_polygons"].at("to")) ap.to.push_back({v[0], v[1]});
      if (ap.from.size() != ap.to.size() || ap.from.size() < 3)
        throw std::invalid_argument("affine_polygons: vertex lists must match, size >= 3");
      f.growth = ap;
    } else {
      throw std::invalid_argument("unknown growth law");
    }
    const auto& r = fj.at("rate");
    if (r.contains("proportional")) {
      f.rate = ProportionalRate{r["proportional"].get<double>()};
    } else if (r.contains("sequential")) {
      const auto& sq = r["sequential"];
      f.rate = SequentialRate{sq.is_array() ? sq.at(0).get<int>() : sq.get<int>()};
    } else {
      throw std::invalid_argument("unknown rate law");
    }
    fams.push_back(std::move(f));
  }
  return FlowSpec(std::move(d0), std::move(fams));
}

FlowSpec FlowSpec::example_disks(int n_families) {
  if (n_families < 1) throw std::invalid_argument("example_disks: need >= 1 family");
  std::vector<SourceFamily> fams;
  for (int i = 0; i < n_families; ++i)
    fams.push_back({kPi / 4, DiskGrowth{{0, 0}}, ProportionalRate{1.0 / n_families}});
  return FlowSpec(Region::disk({0, 0}, 1.0), std::move(fams));
}

FlowSpec FlowSpec::two_family_asymmetric() {
  std::vector<SourceFamily> fams;
  double t1 = 0.20, t2 = 0.35;
  fams.push_back({t1, DiskGrowth{{0.35, 0.10}}, ProportionalRate{t1 / (t1 + t2)}});
  fams.push_back({t2, DiskGrowth{{-0.30, -0.20}}, ProportionalRate{t2 / (t1 + t2)}});
  return FlowSpec(Region::disk({0, 0}, 1.0), std::move(fams));
}

FlowConstants estimate_flow_constants(const FlowSpec& spec,
                                      const std::function<SiteSet(double)>& sampler,
                                      Resolution m_ref, int samples) {
  if (spec.total_volume() <= 0)
    throw std::invalid_argument("estimate_flow_constants: degenerate flow (zero total volume)");
  if (samples < 2) throw std::invalid_argument("estimate_flow_constants: samples must be >= 2");
  FlowConstants fc;
  fc.u = fc.v = std::numeric_limits<double>::infinity();

  const double T = spec.total_volume();
  std::vector<double> ss(samples);
  for (int k = 0; k < samples; ++k) ss[k] = T * k / (samples - 1);

  std::vector<SiteSet> sets;
  sets.reserve(samples);
  for (double s : ss) sets.push_back(sampler(s));

  for (int k = 0; k < samples; ++k) {
    double len;
    if (spec.concentric_disks()) {
      len = 2 * 3.14159265358979323846 * spec.disk_radius(ss[k]);
    } else {
      // Tube-formula estimate: area of the +/-eps shell over 2 eps.
      const SiteSet& a = sets[k];
      double eps = 6.0 / m_ref.m;
      Box work = a.box().inflated(int(std::ceil(eps * m_ref.m)) + 2);
      DistanceField to_set(a, work);
      SiteSet comp(work);
      for (int y = work.y0; y <= work.y1; ++y)
        for (int x = work.x0; x <= work.x1; ++x)
          if (!a.contains(x, y)) comp.insert({x, y});
      DistanceField to_comp(comp, work);
      std::size_t shell = 0;
      double e2 = eps * eps * m_ref.m * m_ref.m;
      for (int y = work.y0; y <= work.y1; ++y)
        for (int x = work.x0; x <= work.x1; ++x)
          if (to_set.d2(x, y) < e2 && to_comp.d2(x, y) < e2) ++shell;
      len = double(shell) / (m_ref.m * m_ref.m) / (2 * eps);
    }
    fc.u = std::min(fc.u, len);
    fc.U = std::max(fc.U, len);
  }

  for (int k = 0; k + 1 < samples; ++k) {
    double s0 = ss[k], s1 = ss[k + 1];
    double denom = std::sqrt(1 + s1) - std::sqrt(1 + s0);
    if (denom <= 0) continue;
    double gap;
    if (spec.concentric_disks()) {
      gap = spec.disk_radius(s1) - spec.disk_radius(s0);
    } else {
      // min over D_{s0} sites of the depth inside D_{s1}.
      const SiteSet& a = sets[k];
      const SiteSet& b = sets[k + 1];
      Box work = Box::hull(a.box(), b.box()).inflated(2);
      SiteSet comp(work);
      for (int y = work.y0; y <= work.y1; ++y)
        for (int x = work.x0; x <= work.x1; ++x)
          if (!b.contains(x, y)) comp.insert({x, y});
      DistanceField to_comp(comp, work);
      double best2 = std::numeric_limits<double>::infinity();
      a.for_each([&](Site z) { best2 = std::min(best2, to_comp.d2(z)); });
      gap = std::sqrt(best2) / m_ref.m;
    }
    double ratio = gap / denom;
    fc.v = std::min(fc.v, ratio);
    fc.V = std::max(fc.V, ratio);
  }
  return fc;
}

}  // namespace idla
