#include "idla/harmonic.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "idla/io.hpp"
#include "idla/rng.hpp"

namespace idla {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

PoleContext make_pole_context(Site zeta, double tau, Vec2 normal, Resolution m, double R0,
                              double R0prime, double R1) {
  if (!(R0 > 0) || !(R0prime > 0)) throw std::invalid_argument("pole context: radii must be > 0");
  if (!(R1 > 0)) throw std::invalid_argument("pole context: sources must be away from the pole");
  PoleContext ctx;
  ctx.zeta = zeta;
  ctx.tau = tau;
  double len = norm(normal);
  ctx.normal = {normal.x / len, normal.y / len};
  ctx.fold = fold_to_ene(ctx.normal);
  Vec2 folded = ctx.fold.apply(ctx.normal);
  ctx.dir.a2 = folded.y;
  ctx.dir.a1 = folded.x - folded.y;
  ctx.m = m;
  ctx.R0 = R0;
  ctx.R0prime = R0prime;
  ctx.R1 = R1;
  return ctx;
}

double continuum_F(const PoleContext& ctx, Vec2 z) {
  Vec2 zeta = position(ctx.zeta, ctx.m);
  Vec2 d = zeta - z;
  double d2 = norm2(d);
  if (d2 == 0) throw std::invalid_argument("continuum_F: z coincides with the pole");
  // Re(n / w) = (n . w) / |w|^2 with w = m (zeta - z).
  return dot(ctx.normal, d) / (ctx.m.m * d2);
}

HarmonicField build_H(const PotentialTable& table, const PoleContext& ctx, Box box) {
  const int L = table.half_width();
  int need = 0;
  for (int cx : {box.x0, box.x1})
    for (int cy : {box.y0, box.y1})
      need = std::max({need, std::abs(cx - ctx.zeta.x) + 1, std::abs(cy - ctx.zeta.y) + 1});
  if (need > L)
    throw std::invalid_argument("build_H: potential table half-width " + std::to_string(L) +
                                " too small, need " + std::to_string(need));
  std::vector<double> vals(box.cells());
  SiteSet defined(box);
  for (int y = box.y0; y <= box.y1; ++y)
    for (int x = box.x0; x <= box.x1; ++x) {
      Site w = ctx.fold.apply(Site{x - ctx.zeta.x, y - ctx.zeta.y});
      double v = (kPi / 2) * dir_derivative(table, ctx.dir, w);
      vals[std::size_t(y - box.y0) * box.width() + (x - box.x0)] = v;
      defined.insert({x, y});
    }
  return HarmonicField(FieldKind::H, box, std::move(vals), std::move(defined), ctx.zeta);
}

std::string HarmonicField::to_csv(Resolution m) const {
  std::string out = "x,y,value\n";
  char buf[96];
  defined_.for_each([&](Site s) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", double(s.x) / m.m, double(s.y) / m.m,
                  at(s));
    out += buf;
  });
  return out;
}

std::string HarmonicField::to_pgm() const {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  defined_.for_each([&](Site s) {
    lo = std::min(lo, at(s));
    hi = std::max(hi, at(s));
  });
  if (!(hi > lo)) hi = lo + 1;
  std::string out = "P5\n" + std::to_string(box_.width()) + " " + std::to_string(box_.height()) +
                    "\n255\n";
  for (int y = box_.y1; y >= box_.y0; --y)
    for (int x = box_.x0; x <= box_.x1; ++x) {
      if (!defined({x, y})) {
        out.push_back(char(0));
        continue;
      }
      double t = (at({x, y}) - lo) / (hi - lo);
      out.push_back(char(1 + int(std::lround(t * 254))));
    }
  return out;
}

OmegaDomain build_omega(const PoleContext& ctx, const HarmonicField& h,
                        const SiteSet& d_tau_lattice) {
  OmegaDomain om;
  om.zeta = ctx.zeta;
  om.omega1 = d_tau_lattice;
  const double thresh = 1.0 / (2.0 * ctx.m.m * ctx.R0);
  Box hb = h.box();
  om.omega2 = SiteSet(hb);
  for (int y = hb.y0; y <= hb.y1; ++y)
    for (int x = hb.x0; x <= hb.x1; ++x)
      if (!(Site{x, y} == ctx.zeta) && h.at({x, y}) > thresh) om.omega2.insert({x, y});
  om.omega = SiteSet(Box::hull(om.omega1.box(), om.omega2.box()));
  om.omega1.for_each([&](Site s) { om.omega.insert(s); });
  om.omega2.for_each([&](Site s) { om.omega.insert(s); });

  om.absorbing = om.omega;
  // The pole cluster stays absorbing so that the field is five-point
  // harmonic on every transient site.
  for (Site s : pole_cluster(ctx)) om.absorbing.erase(s);

  // Boundary: adjacency is counted toward omega minus the pole, so sites
  // reachable only through zeta are not boundary.
  SiteSet omega_eff = om.omega;
  omega_eff.erase(ctx.zeta);
  om.boundary = exterior_ring(omega_eff);
  om.boundary.insert(ctx.zeta);
  return om;
}

std::array<Site, 3> pole_cluster(const PoleContext& ctx) {
  Site s1 = ctx.fold.unapply({1, 0});
  Site s2 = ctx.fold.unapply({1, 1});
  return {ctx.zeta, Site{ctx.zeta.x + s1.x, ctx.zeta.y + s1.y},
          Site{ctx.zeta.x + s2.x, ctx.zeta.y + s2.y}};
}

HarmonicField dirichlet_solve(const SiteSet& interior,
                              const std::function<double(Site)>& boundary_value,
                              SolveStats* stats) {
  if (interior.empty()) throw std::invalid_argument("dirichlet_solve: empty interior");
  const std::size_t n = interior.count();
  std::vector<Site> order = interior.sites();
  std::unordered_map<Site, int, SiteHash> index;
  index.reserve(n * 2);
  for (std::size_t i = 0; i < order.size(); ++i) index.emplace(order[i], int(i));

  const auto dim = static_cast<Eigen::Index>(n);
  Eigen::SparseMatrix<double> A(dim, dim);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(n * 5);
  SiteSet ring = exterior_ring(interior);
  for (std::size_t i = 0; i < order.size(); ++i) {
    trips.emplace_back(int(i), int(i), 4.0);
    for (Site nb : neighbors(order[i])) {
      auto it = index.find(nb);
      if (it != index.end()) {
        trips.emplace_back(int(i), it->second, -1.0);
      } else {
        rhs[Eigen::Index(i)] += boundary_value(nb);
      }
    }
  }
  A.setFromTriplets(trips.begin(), trips.end());

  Eigen::VectorXd x;
  SolveStats st;
  st.unknowns = n;
  if (n <= 100'000) {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
    if (solver.info() != Eigen::Success)
      throw InvariantError("dirichlet_solve: factorization failed (singular configuration)");
    x = solver.solve(rhs);
    st.method = "ldlt";
  } else {
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg(A);
    cg.setTolerance(1e-13);
    cg.setMaxIterations(20000);
    x = cg.solve(rhs);
    if (cg.info() != Eigen::Success)
      throw InvariantError("dirichlet_solve: conjugate gradients did not converge");
    st.iterations = long(cg.iterations());
    st.method = "cg";
  }

  Box hull = Box::hull(interior.box(), ring.box());
  std::vector<double> vals(hull.cells(), 0.0);
  SiteSet defined(hull);
  for (std::size_t i = 0; i < order.size(); ++i) {
    vals[std::size_t(order[i].y - hull.y0) * hull.width() + (order[i].x - hull.x0)] =
        x[Eigen::Index(i)];
    defined.insert(order[i]);
  }
  ring.for_each([&](Site s) {
    vals[std::size_t(s.y - hull.y0) * hull.width() + (s.x - hull.x0)] = boundary_value(s);
    defined.insert(s);
  });
  HarmonicField field(FieldKind::Dirichlet, hull, std::move(vals), std::move(defined));
  st.residual = field_harmonicity_residual(field, interior);
  if (st.residual > 1e-10)
    throw InvariantError("dirichlet_solve: residual " + format_double(st.residual) +
                         " above tolerance");
  if (stats) *stats = st;
  return field;
}

HarmonicField poisson_tilde(const PoleContext& ctx, const SiteSet& d_tau_lattice,
                            SolveStats* stats) {
  SiteSet interior = d_tau_lattice;
  interior.erase(ctx.zeta);
  bool adjacent = false;
  for (Site nb : neighbors(ctx.zeta)) adjacent = adjacent || interior.contains(nb);
  if (!adjacent) throw std::invalid_argument("poisson_tilde: pole not adjacent to the flow set");
  Site zeta = ctx.zeta;
  HarmonicField f = dirichlet_solve(
      interior, [zeta](Site s) { return s == zeta ? 1.0 : 0.0; }, stats);
  Box box = f.box();
  std::vector<double> vals(box.cells(), 0.0);
  f.domain().for_each([&](Site s) {
    vals[std::size_t(s.y - box.y0) * box.width() + (s.x - box.x0)] = f.at(s);
  });
  return HarmonicField(FieldKind::PoissonTilde, box, std::move(vals), f.domain(), ctx.zeta);
}

HarmonicField green_discrete(const PotentialTable& table, const SiteSet& interior, Site y,
                             SolveStats* stats) {
  if (!interior.contains(y)) throw std::invalid_argument("green_discrete: y must be interior");
  HarmonicField expected = dirichlet_solve(
      interior,
      [&](Site b) { return table.at(b.x - y.x, b.y - y.y); },
      stats);
  Box box = expected.box();
  std::vector<double> vals(box.cells(), 0.0);
  SiteSet defined = expected.domain();
  defined.for_each([&](Site s) {
    double g = expected.at(s) - table.at(s.x - y.x, s.y - y.y);
    vals[std::size_t(s.y - box.y0) * box.width() + (s.x - box.x0)] = g;
  });
  return HarmonicField(FieldKind::Green, box, std::move(vals), std::move(defined), y);
}

double green_disk_continuum(double R, Vec2 x, Vec2 y) {
  if (!(R > 0)) throw std::invalid_argument("green_disk_continuum: R must be > 0");
  double rx = norm(x), ry = norm(y);
  if (rx > R + 1e-12 || ry >= R - 1e-12)
    throw std::invalid_argument("green_disk_continuum: arguments outside the disk");
  Vec2 d = x - y;
  if (norm2(d) == 0) throw std::invalid_argument("green_disk_continuum: coincident arguments");
  if (ry < 1e-15) return (2 / kPi) * std::log(R / rx);
  Vec2 ystar = (R * R / norm2(y)) * y;
  return (2 / kPi) * std::log(ry * norm(x - ystar) / (R * norm(d)));
}

double poisson_kernel_disk(double R, Vec2 zeta, Vec2 z) {
  double d2 = norm2(z - zeta);
  if (d2 == 0) throw std::invalid_argument("poisson_kernel_disk: z coincides with the pole");
  return (2 / kPi) * (R * R - norm2(z)) / (R * d2);
}

double mean_value_discrepancy(const HarmonicField& field, const SiteSet& region_sites,
                              std::span<const Site> sources) {
  double lhs = 0;
  region_sites.for_each([&](Site s) { lhs += field.at(s); });
  double rhs = 0;
  for (const Site& s : sources) rhs += field.at(s);
  return std::abs(lhs - rhs);
}

double field_harmonicity_residual(const HarmonicField& field, const SiteSet& where,
                                  const SiteSet* exclude) {
  double worst = 0;
  where.for_each([&](Site s) {
    if (exclude && exclude->contains(s)) return;
    if (!field.defined(s)) return;
    double acc = 0;
    for (Site nb : neighbors(s)) {
      if (!field.defined(nb)) return;
      acc += field.at(nb);
    }
    worst = std::max(worst, std::abs(acc / 4 - field.at(s)));
  });
  return worst;
}

WalkObserver martingale_observer(const HarmonicField& field,
                                 std::shared_ptr<MartingaleTrace> trace) {
  const HarmonicField* f = &field;
  return [f, trace](long /*particle*/, Site source, Site landing, const IdlaState&) {
    if (!f->defined(landing) || !f->defined(source))
      throw InvariantError("martingale_observer: site outside the field domain "
                           "(absorb set mismatch)");
    double dm = f->at(landing) - f->at(source);
    trace->increments.push_back(dm);
    trace->value += dm;
    trace->quadratic_variation += dm * dm;
  };
}

McEstimate mc_exit_probability(const SiteSet& interior, Site start, Site target, long walks,
                               std::uint64_t seed) {
  if (!interior.contains(start))
    throw std::invalid_argument("mc_exit_probability: start must be interior");
  McEstimate est;
  est.walks = walks;
  constexpr int dx[4] = {1, -1, 0, 0};
  constexpr int dy[4] = {0, 0, 1, -1};
  for (long w = 0; w < walks; ++w) {
    Rng rng(mix_seed(seed, {std::uint64_t(w)}));
    int x = start.x, y = start.y;
    bool exited = false;
    for (std::uint64_t step = 0; step < kWalkStepBudget; ++step) {
      int d = rng.direction();
      x += dx[d];
      y += dy[d];
      if (!interior.contains(x, y)) {
        exited = true;
        break;
      }
    }
    if (!exited) throw InvariantError("mc_exit_probability: walk exceeded the step budget");
    if (x == target.x && y == target.y) ++est.hits;
  }
  est.p_hat = double(est.hits) / double(walks);
  return est;
}

}  // namespace idla
