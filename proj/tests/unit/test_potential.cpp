#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "idla/potential.hpp"
#include "idla/rng.hpp"

using namespace idla;

namespace {
constexpr double kPi = 3.14159265358979323846;

const PotentialTable& table150() {
  static PotentialTable t = PotentialTable::build(150);
  return t;
}
}  // namespace

TEST_SUITE("potential") {
  TEST_CASE("exact values at small arguments") {
    const auto& t = table150();
    CHECK(t.at(0, 0) == 0.0);
    CHECK(t.at(1, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(t.at(1, 1) == doctest::Approx(4 / kPi).epsilon(1e-15));
    CHECK(t.at(2, 0) == doctest::Approx(4 - 8 / kPi).epsilon(1e-14));
    CHECK(t.at(2, 1) == doctest::Approx(8 / kPi - 1).epsilon(1e-14));
    CHECK(t.at(3, 0) == doctest::Approx(17 - 48 / kPi).epsilon(1e-14));
    // Diagonal closed form (4/pi) sum 1/(2k-1).
    double acc = 0;
    for (int k = 1; k <= 40; ++k) {
      acc += 1.0 / (2 * k - 1);
      CHECK(t.at(k, k) == doctest::Approx(4 / kPi * acc).epsilon(1e-13));
    }
  }

  TEST_CASE("laplacian residuals") {
    auto [worst, at0] = table150().laplacian_residuals();
    CHECK(worst <= 1e-12);
    CHECK(at0 == doctest::Approx(1.0).epsilon(1e-13));
  }

  TEST_CASE("dihedral symmetry holds exactly") {
    const auto& t = table150();
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
      int x = int(rng.below(140)), y = int(rng.below(140));
      CHECK(t.at(x, y) == t.at(-x, y));
      CHECK(t.at(x, y) == t.at(x, -y));
      CHECK(t.at(x, y) == t.at(y, x));
    }
  }

  TEST_CASE("growth along the axis is strictly monotone") {
    const auto& t = table150();
    for (int n = 0; n < 150; ++n) CHECK(t.at(n + 1, 0) > t.at(n, 0));
  }

  TEST_CASE("asymptotic expansion with a small constant") {
    AsymptoticParams p = fit_lambda(table150());
    CHECK(p.lambda >= 1.02);
    CHECK(p.lambda <= 1.04);
    CHECK(p.lambda == doctest::Approx(1.0293737).epsilon(1e-4));
    CHECK(p.c1 <= 1.0);
    // Remainder at |z| = L/2 within the fitted bound.
    const auto& t = table150();
    double rem = std::abs(t.at(75, 0) - p.lambda - (2 / kPi) * std::log(75.0));
    CHECK(rem <= 4 * p.c1 / (150.0 * 150.0));
  }

  TEST_CASE("refit on a larger table moves lambda very little") {
    AsymptoticParams a = fit_lambda(PotentialTable::build(60));
    AsymptoticParams b = fit_lambda(PotentialTable::build(120));
    CHECK(std::abs(a.lambda - b.lambda) <= 10.0 / (60.0 * 60.0));
  }

  TEST_CASE("monte carlo walk estimate agrees with the table") {
    // Truncated visit-count estimator of sum (P_n(0) - P_n(z)) over
    // independent walks; tail after 4e4 steps is below the noise.
    const auto& t = table150();
    Rng pick(11);
    std::vector<Site> sites;
    while (sites.size() < 20) {
      Site z{int(pick.below(31)) - 15, int(pick.below(31)) - 15};
      if (z.x == 0 && z.y == 0) continue;
      sites.push_back(z);
    }
    const int walks = 1500;
    const int steps = 40000;
    std::vector<std::vector<double>> per_walk(sites.size());
    constexpr int dx[4] = {1, -1, 0, 0};
    constexpr int dy[4] = {0, 0, 1, -1};
    for (int w = 0; w < walks; ++w) {
      Rng rng(mix_seed(17, {std::uint64_t(w)}));
      int x = 0, y = 0;
      std::vector<int> v0(sites.size(), 0), vz(sites.size(), 0);
      int visits0 = 1;  // the walk starts at the origin
      for (int s = 0; s < steps; ++s) {
        int d = rng.direction();
        x += dx[d];
        y += dy[d];
        if (x == 0 && y == 0) ++visits0;
        for (std::size_t i = 0; i < sites.size(); ++i)
          if (x == sites[i].x && y == sites[i].y) ++vz[i];
      }
      for (std::size_t i = 0; i < sites.size(); ++i)
        per_walk[i].push_back(double(visits0) - double(vz[i]));
      (void)v0;
    }
    for (std::size_t i = 0; i < sites.size(); ++i) {
      double mean = 0;
      for (double v : per_walk[i]) mean += v;
      mean /= walks;
      double var = 0;
      for (double v : per_walk[i]) var += (v - mean) * (v - mean);
      double se = std::sqrt(var / (walks - 1.0) / walks);
      CHECK(std::abs(mean - t.at(sites[i].x, sites[i].y)) <= 3 * se + 0.01);
    }
  }

  TEST_CASE("directional derivative formula") {
    const auto& t = table150();
    Direction ex = Direction::from_angle(0.0);
    CHECK(dir_derivative(t, ex, {1, 0}) == doctest::Approx(-1.0));
    CHECK(dir_derivative(t, ex, {-1, 0}) ==
          doctest::Approx(t.at(2, 0) - t.at(1, 0)));
    CHECK(dir_derivative(t, ex, {-1, 0}) > 0);
    // Discrete harmonic away from {0, e1, e1+e2}.
    Direction mid = Direction::from_angle(0.5);
    for (int y = -20; y <= 20; ++y)
      for (int x = -20; x <= 20; ++x) {
        if ((x == 0 && y == 0) || (x == 1 && y == 0) || (x == 1 && y == 1)) continue;
        double lap = 0.25 * (dir_derivative(t, mid, {x + 1, y}) + dir_derivative(t, mid, {x - 1, y}) +
                             dir_derivative(t, mid, {x, y + 1}) + dir_derivative(t, mid, {x, y - 1})) -
                     dir_derivative(t, mid, {x, y});
        CHECK(std::abs(lap) <= 1e-12);
      }
    CHECK_THROWS(dir_derivative(t, ex, {-150, 0}));
  }

  TEST_CASE("estimated c is at least 0.15 and shrinks under refinement") {
    const auto& t = table150();
    double c32 = estimate_c(t, 32);
    CHECK(c32 >= 0.15);
    CHECK(c32 <= 0.5);
    // Nested angle grids: the minimum over a growing set cannot increase.
    double prev = estimate_c(t, 3);
    for (int n : {5, 9, 17, 33}) {
      double c = estimate_c(t, n);
      CHECK(c <= prev + 1e-12);
      prev = c;
    }
  }

  TEST_CASE("the east half-plane keeps a positive derivative below 0.15") {
    const auto& t = table150();
    Direction ex = Direction::from_angle(0.0);
    for (int y = -75; y <= 75; ++y)
      for (int x = -75; x <= 0; ++x) {
        if (double(x) * x + double(y) * y > 75.0 * 75.0) continue;
        if (x <= 0.15)  // z . ex <= 0.15 means x <= 0 on the lattice
          CHECK(dir_derivative(t, ex, {x, y}) > 0);
      }
  }

  TEST_CASE("level-set inclusion holds at the reference geometry") {
    const auto& t = table150();
    for (double theta : {0.0, 0.3, kPi / 4}) {
      Direction n = Direction::from_angle(theta);
      LevelSetReport rep = check_level_set_inclusion(t, n, 1, 10.0, 400.0);
      CHECK(rep.ok);
      CHECK(rep.checked > 0);
      // Sites on the positive-derivative side are never violations, so the
      // much larger disk passes as well.
      CHECK(check_level_set_inclusion(t, n, 1, 10.0, 4000.0).ok);
    }
    // Shrinking the disk far enough produces violations.
    LevelSetReport bad = check_level_set_inclusion(t, Direction::from_angle(0.0), 1, 10.0, 5.0);
    CHECK(!bad.ok);
    CHECK(!bad.violations.empty());
  }

  TEST_CASE("direction folding lands in the east-northeast half-quadrant") {
    Rng rng(21);
    for (int i = 0; i < 200; ++i) {
      double phi = rng.uniform() * 2 * kPi;
      Vec2 n{std::cos(phi), std::sin(phi)};
      DihedralFold f = fold_to_ene(n);
      Vec2 g = f.apply(n);
      CHECK(g.x >= g.y);
      CHECK(g.y >= -1e-15);
      Site s{int(rng.below(41)) - 20, int(rng.below(41)) - 20};
      CHECK(f.unapply(f.apply(s)) == s);
      CHECK(f.apply(f.unapply(s)) == s);
    }
    CHECK_THROWS(fold_to_ene({0, 0}));
  }

  TEST_CASE("table persistence round trip and corruption detection") {
    std::string path = "/tmp/idla_test_table/potential.bin";
    std::filesystem::create_directories("/tmp/idla_test_table");
    PotentialTable t = PotentialTable::build(30);
    t.save(path);
    PotentialTable r = PotentialTable::load(path);
    CHECK(r.half_width() == 30);
    for (int y = -30; y <= 30; ++y)
      for (int x = -30; x <= 30; ++x) CHECK(r.at(x, y) == t.at(x, y));
    // Flip a byte: checksum must reject the file.
    {
      std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
      f.seekp(100);
      char c = 0x5a;
      f.write(&c, 1);
    }
    CHECK_THROWS(PotentialTable::load(path));
    std::filesystem::remove_all("/tmp/idla_test_table");
  }

  TEST_CASE("build rejects out-of-range sizes") {
    CHECK_THROWS(PotentialTable::build(1));
    CHECK_THROWS(PotentialTable::build(4000));
  }
}
