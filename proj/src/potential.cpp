#include "idla/potential.hpp"

#include <mpfr.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "idla/io.hpp"

namespace idla {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr int kMaxL = 400;
}  // namespace

PotentialTable PotentialTable::build(int L) {
  if (L < 2) throw std::invalid_argument("PotentialTable::build: L must be >= 2");
  if (L > kMaxL)
    throw std::invalid_argument("PotentialTable::build: L exceeds the validated range");

  // Octant 0 <= y <= x <= L, filled column by column from the exact diagonal.
  // The marching recursion amplifies rounding by up to ~(3+2*sqrt(2)) per
  // step, so carry ~2.6 bits per column of extra precision.
  const mpfr_prec_t prec = 128 + mpfr_prec_t(std::ceil(2.6 * L));
  auto oidx = [L](int x, int y) { return std::size_t(x) * (L + 1) + y; };
  std::vector<mpfr_t> oct(std::size_t(L + 1) * (L + 1));
  for (auto& t : oct) mpfr_init2(t, prec);

  mpfr_t pi, four_over_pi, diag, tmp;
  mpfr_inits2(prec, pi, four_over_pi, diag, tmp, (mpfr_ptr) nullptr);
  mpfr_const_pi(pi, MPFR_RNDN);
  mpfr_ui_div(four_over_pi, 4, pi, MPFR_RNDN);

  // g(0,0) = 0, g(1,0) = 1, diagonal g(n,n) = (4/pi) * sum 1/(2k-1).
  mpfr_set_ui(oct[oidx(0, 0)], 0, MPFR_RNDN);
  mpfr_set_ui(oct[oidx(1, 0)], 1, MPFR_RNDN);
  mpfr_set_ui(diag, 0, MPFR_RNDN);
  for (int n = 1; n <= L; ++n) {
    mpfr_set_ui(tmp, 1, MPFR_RNDN);
    mpfr_div_ui(tmp, tmp, 2 * unsigned(n) - 1, MPFR_RNDN);
    mpfr_add(diag, diag, tmp, MPFR_RNDN);
    mpfr_mul(oct[oidx(n, n)], four_over_pi, diag, MPFR_RNDN);
  }

  for (int x = 1; x < L; ++x) {
    // Above-diagonal neighbor from symmetry: g(x, x+1) = g(x+1, x).
    // Harmonicity at (x, x):  g(x+1,x) = 2 g(x,x) - g(x,x-1).
    mpfr_mul_ui(tmp, oct[oidx(x, x)], 2, MPFR_RNDN);
    mpfr_sub(oct[oidx(x + 1, x)], tmp, oct[oidx(x, x - 1)], MPFR_RNDN);
    // Harmonicity at (x, y), 1 <= y < x:
    //   g(x+1,y) = 4 g(x,y) - g(x-1,y) - g(x,y+1) - g(x,y-1).
    for (int y = x - 1; y >= 1; --y) {
      mpfr_mul_ui(tmp, oct[oidx(x, y)], 4, MPFR_RNDN);
      mpfr_sub(tmp, tmp, oct[oidx(x - 1, y)], MPFR_RNDN);
      mpfr_sub(tmp, tmp, oct[oidx(x, y + 1)], MPFR_RNDN);
      mpfr_sub(oct[oidx(x + 1, y)], tmp, oct[oidx(x, y - 1)], MPFR_RNDN);
    }
    // Harmonicity at (x, 0): g(x+1,0) = 4 g(x,0) - g(x-1,0) - 2 g(x,1).
    mpfr_mul_ui(tmp, oct[oidx(x, 0)], 4, MPFR_RNDN);
    mpfr_sub(tmp, tmp, oct[oidx(x - 1, 0)], MPFR_RNDN);
    mpfr_mul_ui(diag, oct[oidx(x, 1)], 2, MPFR_RNDN);
    mpfr_sub(oct[oidx(x + 1, 0)], tmp, diag, MPFR_RNDN);
  }

  const int W = 2 * L + 1;
  std::vector<double> full(std::size_t(W) * W);
  for (int y = -L; y <= L; ++y)
    for (int x = -L; x <= L; ++x) {
      int ax = std::abs(x), ay = std::abs(y);
      if (ay > ax) std::swap(ax, ay);
      full[std::size_t(y + L) * W + (x + L)] = mpfr_get_d(oct[oidx(ax, ay)], MPFR_RNDN);
    }

  for (auto& t : oct) mpfr_clear(t);
  mpfr_clears(pi, four_over_pi, diag, tmp, (mpfr_ptr) nullptr);
  mpfr_free_cache();
  return PotentialTable(L, std::move(full));
}

double PotentialTable::laplacian(int x, int y) const {
  if (std::abs(x) >= L_ || std::abs(y) >= L_)
    throw std::out_of_range("PotentialTable::laplacian: stencil leaves the table");
  return 0.25 * (at(x + 1, y) + at(x - 1, y) + at(x, y + 1) + at(x, y - 1)) - at(x, y);
}

std::pair<double, double> PotentialTable::laplacian_residuals() const {
  double worst = 0;
  for (int y = -(L_ - 1); y <= L_ - 1; ++y)
    for (int x = -(L_ - 1); x <= L_ - 1; ++x) {
      if (x == 0 && y == 0) continue;
      worst = std::max(worst, std::abs(laplacian(x, y)));
    }
  return {worst, laplacian(0, 0)};
}

void PotentialTable::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("PotentialTable::save: cannot open " + path);
  f.write(reinterpret_cast<const char*>(v_.data()), std::streamsize(v_.size() * sizeof(double)));
  if (!f) throw IoError("PotentialTable::save: write failed for " + path);
  f.close();
  nlohmann::json hdr{{"L", L_},
                     {"format", 1},
                     {"checksum", fnv1a64_hex(reinterpret_cast<const char*>(v_.data()),
                                              v_.size() * sizeof(double))}};
  write_text_file(path + ".json", hdr.dump(2) + "\n");
}

PotentialTable PotentialTable::load(const std::string& path) {
  nlohmann::json hdr = nlohmann::json::parse(read_text_file(path + ".json"));
  int L = hdr.at("L").get<int>();
  const std::size_t n = std::size_t(2 * L + 1) * (2 * L + 1);
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("PotentialTable::load: cannot open " + path);
  std::vector<double> v(n);
  f.read(reinterpret_cast<char*>(v.data()), std::streamsize(n * sizeof(double)));
  if (std::size_t(f.gcount()) != n * sizeof(double))
    throw IoError("PotentialTable::load: short read from " + path);
  auto sum = fnv1a64_hex(reinterpret_cast<const char*>(v.data()), n * sizeof(double));
  if (sum != hdr.at("checksum").get<std::string>())
    throw IoError("PotentialTable::load: checksum mismatch for " + path);
  return PotentialTable(L, std::move(v));
}

AsymptoticParams fit_lambda(const PotentialTable& table) {
  const int L = table.half_width();
  if (L < 50) throw std::invalid_argument("fit_lambda: table must have L >= 50");
  double sum = 0;
  std::size_t n = 0;
  const double lo2 = double(L) * L / 4.0, hi2 = double(L) * L;
  for (int y = -L; y <= L; ++y)
    for (int x = -L; x <= L; ++x) {
      double r2 = double(x) * x + double(y) * y;
      if (r2 < lo2 || r2 > hi2) continue;
      sum += table.at(x, y) - (1.0 / kPi) * std::log(r2);
      ++n;
    }
  AsymptoticParams p;
  p.lambda = sum / double(n);
  for (int y = -L; y <= L; ++y)
    for (int x = -L; x <= L; ++x) {
      double r2 = double(x) * x + double(y) * y;
      if (r2 < 4.0 || r2 > hi2) continue;
      double rem = table.at(x, y) - p.lambda - (1.0 / kPi) * std::log(r2);
      p.c1 = std::max(p.c1, r2 * std::abs(rem));
    }
  return p;
}

Direction Direction::from_angle(double theta) {
  if (theta < -1e-12 || theta > kPi / 4 + 1e-12)
    throw std::invalid_argument("Direction::from_angle: theta outside [0, pi/4]");
  theta = std::clamp(theta, 0.0, kPi / 4);
  Direction d;
  d.a2 = std::sin(theta);
  d.a1 = std::cos(theta) - std::sin(theta);
  return d;
}

DihedralFold fold_to_ene(Vec2 normal) {
  if (!(norm(normal) > 0)) throw std::invalid_argument("fold_to_ene: zero normal");
  DihedralFold f;
  f.swap = std::abs(normal.y) > std::abs(normal.x);
  Vec2 q = f.swap ? Vec2{normal.y, normal.x} : normal;
  f.sx = q.x < 0 ? -1 : 1;
  f.sy = q.y < 0 ? -1 : 1;
  return f;
}

double dir_derivative(const PotentialTable& table, const Direction& n, Site z) {
  if (!table.inside(z.x - 1, z.y - 1) || !table.inside(z.x, z.y))
    throw std::out_of_range("dir_derivative: stencil outside table");
  return n.a1 * table.at(z.x - 1, z.y) + n.a2 * table.at(z.x - 1, z.y - 1) -
         (n.a1 + n.a2) * table.at(z.x, z.y);
}

double estimate_c(const PotentialTable& table, int n_directions) {
  const int L = table.half_width();
  if (L < 100) throw std::invalid_argument("estimate_c: table must have L >= 100");
  if (n_directions < 1) throw std::invalid_argument("estimate_c: need >= 1 direction");
  const int R = L / 2;
  double c = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n_directions; ++k) {
    double theta = n_directions == 1 ? 0.0 : (kPi / 4) * k / (n_directions - 1);
    Direction n = Direction::from_angle(theta);
    Vec2 unit = n.unit();
    double cdir = std::numeric_limits<double>::infinity();
    for (int y = -R; y <= R; ++y)
      for (int x = -R; x <= R; ++x) {
        if (double(x) * x + double(y) * y > double(R) * R) continue;
        double proj = unit.x * x + unit.y * y;
        if (proj >= cdir) continue;
        if (dir_derivative(table, n, {x, y}) <= 0) cdir = proj;
      }
    c = std::min(c, cdir);
  }
  return c;
}

LevelSetReport check_level_set_inclusion(const PotentialTable& table, const Direction& n, int m,
                                         double R0, double R0prime) {
  if (m < 1 || R0 <= 0 || R0prime <= 0)
    throw std::invalid_argument("check_level_set_inclusion: bad parameters");
  LevelSetReport rep;
  const int L = table.half_width();
  Vec2 unit = n.unit();
  const double thresh = -1.0 / (2.0 * m * R0);
  const Vec2 center = (m * R0prime) * unit;
  const double rad2 = double(m) * R0prime * double(m) * R0prime;
  for (int y = -(L - 1); y <= L - 1; ++y)
    for (int x = -(L - 1); x <= L - 1; ++x) {
      if (x - 1 < -L || y - 1 < -L) continue;
      ++rep.checked;
      if (dir_derivative(table, n, {x, y}) < thresh) {
        Vec2 d = Vec2{double(x), double(y)} - center;
        if (norm2(d) > rad2) {
          rep.ok = false;
          rep.violations.push_back({x, y});
        }
      }
    }
  return rep;
}

}  // namespace idla
