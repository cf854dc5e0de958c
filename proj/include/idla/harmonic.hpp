#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "idla/geometry.hpp"
#include "idla/idla.hpp"
#include "idla/potential.hpp"

namespace idla {

// A pole site on the moving boundary at time tau, with its outward normal
// folded into the east-northeast half-quadrant by a lattice symmetry.
struct PoleContext {
  Site zeta;
  double tau = 0;
  Vec2 normal{1, 0};
  Direction dir;
  DihedralFold fold;
  Resolution m{1};
  double R0 = 0;       // inner tangent-disk radius for the level-set threshold
  double R0prime = 0;  // tangent-disk radius of the flow boundary
  double R1 = 0;       // min distance from any source point to zeta
};

PoleContext make_pole_context(Site zeta, double tau, Vec2 normal, Resolution m, double R0,
                              double R0prime, double R1);

// Re( n / (m (zeta - z)) ), treating the normal as a complex number.
double continuum_F(const PoleContext& ctx, Vec2 z);

enum class FieldKind { H, PoissonTilde, Green, Dirichlet };

// Real values on a set of sites (a full box for pole derivatives of the
// potential kernel, interior + boundary ring for solved fields).
class HarmonicField {
 public:
  HarmonicField() = default;
  HarmonicField(FieldKind kind, Box box, std::vector<double> values, SiteSet defined,
                Site pole = {0, 0})
      : kind_(kind), box_(box), values_(std::move(values)), defined_(std::move(defined)),
        pole_(pole) {}

  FieldKind kind() const { return kind_; }
  const Box& box() const { return box_; }
  Site pole() const { return pole_; }
  const SiteSet& domain() const { return defined_; }
  bool defined(Site s) const { return defined_.contains(s); }
  double at(Site s) const {
    if (!defined(s)) throw std::out_of_range("HarmonicField::at: site outside the field domain");
    return values_[std::size_t(s.y - box_.y0) * box_.width() + (s.x - box_.x0)];
  }

  std::string to_csv(Resolution m) const;
  // Grayscale P5 heatmap, values scaled linearly onto 0..255 (undefined
  // sites render black).
  std::string to_pgm() const;

 private:
  FieldKind kind_ = FieldKind::H;
  Box box_;
  std::vector<double> values_;
  SiteSet defined_;
  Site pole_{0, 0};
};

// (pi/2) [a1 g(w - e1) + a2 g(w - e1 - e2) - (a1 + a2) g(w)] at the folded
// displacement w = fold(z - zeta); defined on every site of `box`.
HarmonicField build_H(const PotentialTable& table, const PoleContext& ctx, Box box);

// Union domain at the pole: the lattice flow set plus the super-level lobe
// of H, with the pole and its derivative stencil kept absorbing.
struct OmegaDomain {
  SiteSet omega1;     // lattice flow set at time tau
  SiteSet omega2;     // {H > 1/(2 m R0)} minus the pole
  SiteSet omega;      // union
  SiteSet boundary;   // sites outside omega\{zeta} adjacent to it, plus zeta
  SiteSet absorbing;  // omega minus {zeta, zeta + f^-1(e1), zeta + f^-1(e1+e2)}
  Site zeta{0, 0};
};

OmegaDomain build_omega(const PoleContext& ctx, const HarmonicField& h, const SiteSet& d_tau_lattice);

// The pole and the two stencil sites of its derivative (where the field is
// not five-point harmonic); all three are kept absorbing.
std::array<Site, 3> pole_cluster(const PoleContext& ctx);

struct SolveStats {
  std::size_t unknowns = 0;
  long iterations = 0;  // 0 for the direct path
  double residual = 0;  // max five-point residual of the returned field
  std::string method;
};

// Discrete Dirichlet problem on `interior` with values on its exterior ring
// given by `boundary_value`. Direct sparse factorization up to ~1e5
// unknowns, Jacobi-preconditioned conjugate gradients above.
HarmonicField dirichlet_solve(const SiteSet& interior,
                              const std::function<double(Site)>& boundary_value,
                              SolveStats* stats = nullptr);

// Exit-at-the-pole probability field: boundary data 1 at zeta, 0 elsewhere,
// on the flow set with zeta removed (zeta is an absorbing boundary site).
HarmonicField poisson_tilde(const PoleContext& ctx, const SiteSet& d_tau_lattice,
                            SolveStats* stats = nullptr);

// Domain Green's function G(y, .) = E g(exit - y) - g(. - y); zero on the
// boundary ring, positive inside.
HarmonicField green_discrete(const PotentialTable& table, const SiteSet& interior, Site y,
                             SolveStats* stats = nullptr);

// Green's function of the disk of radius R about the origin, normalized to
// (2/pi) log; zero when x reaches the boundary circle.
double green_disk_continuum(double R, Vec2 x, Vec2 y);

// Boundary Poisson kernel of the disk under the same normalization:
// lim_{eps->0} G(zeta - eps n, z)/eps.
double poisson_kernel_disk(double R, Vec2 zeta, Vec2 z);

// | sum over region_sites of field - sum over sources of field |.
double mean_value_discrepancy(const HarmonicField& field, const SiteSet& region_sites,
                              std::span<const Site> sources);

// Max |(1/4) sum of neighbors - value| over sites of `where` whose whole
// stencil is defined, skipping `exclude`.
double field_harmonicity_residual(const HarmonicField& field, const SiteSet& where,
                                  const SiteSet* exclude = nullptr);

// Running martingale of field increments along a run.
struct MartingaleTrace {
  std::vector<double> increments;  // per particle: field(landing) - field(source)
  double value = 0;                // running sum
  double quadratic_variation = 0;  // running sum of squared increments
};

// Observer computing field(landing) - field(source) per particle; pair with
// the absorb option of step_idla on the matching OmegaDomain.
WalkObserver martingale_observer(const HarmonicField& field, std::shared_ptr<MartingaleTrace> trace);

// Monte Carlo estimate of P[walk from start exits `interior` at `target`].
struct McEstimate {
  double p_hat = 0;
  long hits = 0;
  long walks = 0;
};
McEstimate mc_exit_probability(const SiteSet& interior, Site start, Site target, long walks,
                               std::uint64_t seed);

}  // namespace idla
