#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "idla/flow.hpp"
#include "idla/geometry.hpp"

namespace idla {

// Divisible-sandpile mass grid: each site keeps at most unit mass and splits
// any excess equally among its four neighbors.
struct SandpileState {
  Resolution m{1};
  Box box;
  std::vector<double> mass;
  double tolerance = 1e-8;

  double& at(int x, int y) { return mass[std::size_t(y - box.y0) * box.width() + (x - box.x0)]; }
  double at(int x, int y) const {
    return mass[std::size_t(y - box.y0) * box.width() + (x - box.x0)];
  }
  double total() const;
};

SandpileState sandpile_point_mass(double mass, Resolution m);
// Initial density sigma_s of the flow sampled on the (1/m_ref) lattice.
SandpileState sandpile_from_flow(const FlowSpec& spec, double s, Resolution m_ref);

enum class ToppleSchedule {
  Sweep,  // Gauss-Seidel toppling sweeps
  Queue,  // FIFO worklist toppling
  Sor,    // projected SOR on the odometer; same fixed point, much faster
};

struct SandpileResult {
  SandpileState state;
  SiteSet occupied;  // sites with final mass >= 1 - 1e-6
  long sweeps = 0;
  double mass_before = 0;
  double mass_after = 0;
};

SandpileResult stabilize_sandpile(const SandpileState& initial,
                                  ToppleSchedule schedule = ToppleSchedule::Sor,
                                  long max_sweeps = 2'000'000);

// Deterministic approximation of the flow set D_s: analytic disk when the
// flow is concentric disks, otherwise the stabilized sandpile support of
// sigma_s on the reference lattice.
SiteSet reference_flow(const FlowSpec& spec, double s, Resolution m_ref);

// Harmonic test functions 1, Re z, Im z, Re z^2, Im z^2, Re z^3 (all exactly
// five-point harmonic on the lattice).
struct HarmonicTestFunction {
  std::string name;
  std::function<double(Vec2)> f;
};
const std::vector<HarmonicTestFunction>& harmonic_test_functions();

// | sum_{z in reference_flow} h(z)/m^2 - sum_z h(z) sigma_s(z)/m^2 |.
double quadrature_check(const FlowSpec& spec, double s, Resolution m_ref,
                        const std::function<double(Vec2)>& h);

// Same discrepancy for every harmonic test function, computing the
// reference set once.
std::vector<double> quadrature_check_all(const FlowSpec& spec, double s, Resolution m_ref);

}  // namespace idla
