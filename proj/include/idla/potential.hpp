#pragma once

#include <string>
#include <vector>

#include "idla/geometry.hpp"

namespace idla {

// Exact values of the recurrent potential kernel g on [-L, L]^2: the unique
// function with g(0,0) = 0, g(x,y) = g(|y|,|x|) symmetry, and five-point
// Laplacian residual delta at the origin, growing like (2/pi) log |z|.
class PotentialTable {
 public:
  // Builds the table by the diagonal-seeded recursion, carried out in
  // extended precision so the (exponentially unstable) fill stays exact to
  // double rounding. Validated for L up to at least 400; larger L rejected.
  static PotentialTable build(int L);

  int half_width() const { return L_; }
  double at(int x, int y) const {
    if (!inside(x, y)) throw std::out_of_range("PotentialTable::at");
    return v_[idx(x, y)];
  }
  double at(Site s) const { return at(s.x, s.y); }
  bool inside(int x, int y) const { return x >= -L_ && x <= L_ && y >= -L_ && y <= L_; }

  // (1/4) sum of neighbor values minus center; needs |x|,|y| < L.
  double laplacian(int x, int y) const;
  // Max |laplacian| over interior z != 0, and the value at 0.
  std::pair<double, double> laplacian_residuals() const;

  // Flat binary of doubles with a small JSON header next to it.
  void save(const std::string& path) const;
  static PotentialTable load(const std::string& path);

 private:
  PotentialTable(int L, std::vector<double> v) : L_(L), v_(std::move(v)) {}
  std::size_t idx(int x, int y) const {
    return std::size_t(y + L_) * (2 * L_ + 1) + (x + L_);
  }
  int L_ = 0;
  std::vector<double> v_;
};

// Fitted parameters of g(z) ~ lambda + (2/pi) log |z|.
struct AsymptoticParams {
  double lambda = 0;
  double c1 = 0;  // max over 2 <= |z| <= L of |z|^2 |g - lambda - (2/pi)log|z||
};

// lambda by least squares over the annulus L/2 <= |z| <= L; c1 over 2 <= |z| <= L.
AsymptoticParams fit_lambda(const PotentialTable& table);

// Unit direction n = a1*ex + a2*(ex+ey) in the east-northeast half-quadrant.
struct Direction {
  double a1 = 1, a2 = 0;
  static Direction from_angle(double theta);  // theta in [0, pi/4]
  Vec2 unit() const { return {a1 + a2, a2}; }
};

// One of the 8 lattice symmetries, used to fold an arbitrary unit normal
// into the east-northeast half-quadrant.
struct DihedralFold {
  bool swap = false;
  int sx = 1, sy = 1;
  Vec2 apply(Vec2 p) const {
    Vec2 q = swap ? Vec2{p.y, p.x} : p;
    return {sx * q.x, sy * q.y};
  }
  Site apply(Site s) const {
    Site q = swap ? Site{s.y, s.x} : s;
    return {sx * q.x, sy * q.y};
  }
  Site unapply(Site s) const {
    Site t{sx * s.x, sy * s.y};
    return swap ? Site{t.y, t.x} : t;
  }
};

// Folds a unit normal into the half-quadrant; apply(normal) has
// n.x >= n.y >= 0.
DihedralFold fold_to_ene(Vec2 normal);

// a1 g(z - e1) + a2 g(z - e1 - e2) - (a1 + a2) g(z); the lattice directional
// derivative of g opposite to n. Discrete harmonic away from {0, e1, e1+e2}.
double dir_derivative(const PotentialTable& table, const Direction& n, Site z);

// Largest c such that dir_derivative > 0 on every table site with
// z . n <= c and |z| <= L/2, minimized over `n_directions` sampled angles
// in [0, pi/4].
double estimate_c(const PotentialTable& table, int n_directions);

// Checks {z : dir_derivative(z) < -1/(2 m R0)} is contained in the disk of
// radius m*R0prime tangent to the origin in direction n, over the table.
struct LevelSetReport {
  bool ok = true;
  std::size_t checked = 0;
  std::vector<Site> violations;
};
LevelSetReport check_level_set_inclusion(const PotentialTable& table, const Direction& n, int m,
                                         double R0, double R0prime);

}  // namespace idla
