#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "idla/analysis.hpp"
#include "idla/flow.hpp"
#include "idla/harmonic.hpp"
#include "idla/potential.hpp"

namespace idla {

struct ExperimentConfig {
  FlowSpec flow = FlowSpec::example_disks(1);
  nlohmann::json raw;  // canonical config document (hashed for manifests)
  std::string campaign = "simulate";  // simulate|kernel|harmonic-verify|scaling|sandpile
  std::vector<int> m_list{16};
  int trials = 1;
  std::uint64_t seed = 1;
  int checkpoints = 20;
  std::string out_dir = "out";
  std::string cache_dir = "cache";
  int workers = 0;  // 0: hardware concurrency

  int kernel_L = 150;
  int kernel_directions = 32;

  int poles = 8;
  std::vector<int> harmonic_m{16, 32};
  long mc_walks = 20000;

  std::string sandpile_mode = "point";  // point|flow
  double sandpile_mass = 100.0;
  double sandpile_s = -1;  // <0: full volume
  int sandpile_m = 16;

  static ExperimentConfig from_json(const nlohmann::json& j);
  std::string hash() const;
};

ExperimentConfig load_config(const std::string& path);

// Disk-cached exact potential table; `note` receives "cache-hit",
// "built", or "rebuilt (corrupt cache)".
PotentialTable load_or_build_table(const std::string& cache_dir, int L,
                                   std::string* note = nullptr);

// Table half-width needed to evaluate pole fields anywhere on the flow box
// at resolution max_m.
int required_table_half_width(const FlowSpec& spec, int max_m);

// Lattice pole sites on the moving boundary of a concentric-disk flow,
// nearest to evenly spaced target angles at mid-annulus radius.
struct PoleSelection {
  Site zeta;
  double tau = 0;
  Vec2 normal{1, 0};
  double r_tau = 0;  // boundary radius through the pole
};
std::vector<PoleSelection> select_poles(const FlowSpec& spec, Resolution m, int count);

// Everything needed to run one pole's checks and martingales.
struct PoleSetup {
  PoleContext ctx;
  HarmonicField h;
  SiteSet d_tau_lattice;
  OmegaDomain omega;
};
PoleSetup build_pole_setup(const PotentialTable& table, const FlowSpec& spec, Resolution m,
                           const PoleSelection& sel, const SourceSequence& seq, double c_const,
                           double c2_const);

// max over box sites with |z - zeta| >= 3/m of m^2 |z-zeta|^2 |H - F|.
double fit_c1(const PotentialTable& table, const FlowSpec& spec, Resolution m,
              const PoleSelection& sel);

struct MeanValueSweep {
  std::vector<int> ms;
  std::vector<double> h_disc;      // per m, mean over poles of max-over-s discrepancy
  std::vector<double> tilde_disc;  // per m, mean over poles at s = tau
  GrowthComparison h_growth;
  double tilde_exponent = 0;   // log-log slope of tilde_disc
  double tilde_envelope_c = 0; // calibrated at the smallest m for the sqrt envelope
  bool tilde_envelope_ok = true;
};
MeanValueSweep mean_value_sweep(const PotentialTable& table, const FlowSpec& spec,
                                const std::vector<int>& ms, int n_poles, double c_const);

struct GreenConvergence {
  std::vector<int> ms;
  std::vector<double> max_err;
  std::vector<double> octave_ratios;  // err(m) / err(2m)
  bool rate_ok = true;                // each ratio within a factor 3 of 4
  double alpha = 0.2;
};
GreenConvergence green_convergence_sweep(const PotentialTable& table, const std::vector<int>& ms,
                                         double R, double alpha);

struct ScalingCampaignResult {
  std::vector<int> ms;
  std::vector<std::vector<double>> maxima;  // per m, per trial
  std::vector<std::vector<std::uint64_t>> seeds;
  ScalingFit fit;
  EnvelopeCheck envelope;
};
// Runs trials x resolutions, optionally resuming from per-run manifests under
// `resume_dir` (guarded by the config hash).
ScalingCampaignResult run_scaling_campaign(const FlowSpec& spec, const std::vector<int>& ms,
                                           int trials, std::uint64_t seed, int checkpoints,
                                           int workers, const std::string& resume_dir = "",
                                           const std::string& config_hash = "",
                                           TieOrder order = TieOrder::LexAsc);

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

int cmd_simulate(const ExperimentConfig& cfg);
int cmd_kernel(const ExperimentConfig& cfg);
int cmd_harmonic_verify(const ExperimentConfig& cfg);
int cmd_scaling(const ExperimentConfig& cfg);
int cmd_sandpile(const ExperimentConfig& cfg);

}  // namespace idla
