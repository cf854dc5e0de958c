// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Runs the full desk-scale campaigns, so expect a few minutes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "idla/campaign.hpp"
#include "idla/io.hpp"
#include "idla/sandpile.hpp"

using namespace idla;

namespace {

constexpr double kPi = 3.14159265358979323846;

int g_failures = 0;

void report(int criterion, const std::string& name, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s — %s\n", ok ? "PASS" : "FAIL", criterion, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Shared {
  FlowSpec flow = FlowSpec::example_disks(1);
  std::unique_ptr<PotentialTable> table;  // sized for the m = 128 sweeps
  double c_estimate = 0;
  double c1_fit = 0;
};

// 1. Exactness of the potential kernel on an L = 150 table.
void criterion1(Shared& sh) {
  auto t0 = std::chrono::steady_clock::now();
  PotentialTable t150 = PotentialTable::build(150);
  double secs = elapsed_since(t0);
  auto [resid, at0] = t150.laplacian_residuals();
  bool ok = resid <= 1e-12 && std::abs(at0 - 1.0) <= 1e-12 &&
            std::abs(t150.at(1, 0) - 1.0) <= 1e-9 &&
            std::abs(t150.at(1, 1) - 4 / kPi) <= 1e-9 && secs < 10.0;
  report(1, "potential kernel exactness", ok,
         fmt("residual %.2e, lap(0)-1 = %.2e, g(1,0)-1 = %.2e, g(1,1)-4/pi = %.2e, %.2fs",
             resid, at0 - 1.0, t150.at(1, 0) - 1.0, t150.at(1, 1) - 4 / kPi, secs));
  (void)sh;
}

// 2. Asymptotic expansion: lambda window and bounded remainder constant.
void criterion2(Shared& sh) {
  PotentialTable t150 = PotentialTable::build(150);
  AsymptoticParams p = fit_lambda(t150);
  bool ok = p.lambda >= 1.02 && p.lambda <= 1.04 && p.c1 <= 1.0;
  report(2, "expansion constants", ok,
         fmt("lambda = %.7f in [1.02, 1.04], C1 = %.4f <= 1", p.lambda, p.c1));
  (void)sh;
}

// 3. The direction constant c over 32 sampled angles.
void criterion3(Shared& sh) {
  sh.c_estimate = estimate_c(*sh.table, 32);
  bool ok = sh.c_estimate >= 0.15 && sh.c_estimate <= 0.5;
  report(3, "constant c of the derivative half-plane", ok,
         fmt("c = %.4f (>= 0.15; lattice-site value, consistent with ~1/5)", sh.c_estimate));
}

// 4. Pole-field suite at 16 poles, m in {16, 32}.
void criterion4(Shared& sh) {
  bool ok = true;
  std::string why;
  std::map<int, double> c1_per_m;
  double hz_lo = 1e300, hz_hi = -1e300, worst_resid = 0;
  for (int mi : {16, 32}) {
    Resolution m(mi);
    SourceSequence seq = sh.flow.discretize(m);
    auto poles = select_poles(sh.flow, m, 16);
    if (poles.size() != 16) {
      ok = false;
      why = fmt("only %zu poles at m=%d", poles.size(), mi);
    }
    double c1 = 0;
    for (const auto& sel : poles) c1 = std::max(c1, fit_c1(*sh.table, sh.flow, m, sel));
    c1_per_m[mi] = c1;
    for (const auto& sel : poles) {
      PoleSetup ps = build_pole_setup(*sh.table, sh.flow, m, sel, seq, sh.c_estimate, 2 * c1);
      double hz = ps.h.at(ps.ctx.zeta);
      hz_lo = std::min(hz_lo, hz);
      hz_hi = std::max(hz_hi, hz);
      if (hz < 1.0 || hz > 2.0) ok = false;
      double resid = field_harmonicity_residual(ps.h, ps.omega.absorbing);
      worst_resid = std::max(worst_resid, resid);
      if (resid > 1e-10) ok = false;
    }
  }
  sh.c1_fit = std::max(c1_per_m[16], c1_per_m[32]);
  // One constant serves both resolutions: require m-stability and sanity.
  if (!(c1_per_m[32] <= 1.5 * c1_per_m[16] && c1_per_m[16] <= 1.5 * c1_per_m[32])) ok = false;
  if (sh.c1_fit > 5.0) ok = false;
  report(4, "pole-field suite (values, harmonicity, H-F constant)", ok,
         why.empty() ? fmt("H(zeta) in [%.3f, %.3f], residual %.1e, C1 = %.3f (m16 %.3f / m32 %.3f)",
                           hz_lo, hz_hi, worst_resid, sh.c1_fit, c1_per_m[16], c1_per_m[32])
                     : why);
}

// 5. Poisson kernel vs Monte Carlo, last-exit ratio, Green convergence.
void criterion5(Shared& sh) {
  double c2 = 2 * sh.c1_fit;
  // (a) Monte Carlo agreement at m = 32, 4 poles x 10 sites x 1e5 walks.
  int agree = 0, tested = 0;
  {
    Resolution m(32);
    SourceSequence seq = sh.flow.discretize(m);
    auto poles = select_poles(sh.flow, m, 4);
    for (std::size_t pi = 0; pi < poles.size(); ++pi) {
      PoleSetup ps = build_pole_setup(*sh.table, sh.flow, m, poles[pi], seq, sh.c_estimate, c2);
      HarmonicField tilde = poisson_tilde(ps.ctx, ps.d_tau_lattice);
      SiteSet interior = ps.d_tau_lattice;
      interior.erase(ps.ctx.zeta);
      std::vector<Site> candidates;
      interior.for_each([&](Site z) {
        if (tilde.at(z) >= 1e-3) candidates.push_back(z);
      });
      Rng pick(mix_seed(1234, {pi}));
      for (int k = 0; k < 10 && !candidates.empty(); ++k) {
        Site z = candidates[pick.below(candidates.size())];
        auto est = mc_exit_probability(interior, z, ps.ctx.zeta, 100000,
                                       mix_seed(987, {pi, std::uint64_t(k)}));
        double p = tilde.at(z);
        double se = std::sqrt(p * (1 - p) / 100000.0);
        ++tested;
        if (std::abs(est.p_hat - p) <= 3 * se) ++agree;
      }
    }
  }
  bool mc_ok = tested > 0 && agree * 100 >= tested * 95;

  // (b) Last-exit ratio constancy at m = 64, away from the pole.
  bool ratio_ok = true;
  double med_lo = 1e300, med_hi = -1e300, spread_worst = 0;
  {
    Resolution m(64);
    SourceSequence seq = sh.flow.discretize(m);
    auto poles = select_poles(sh.flow, m, 4);
    for (const auto& sel : poles) {
      PoleSetup ps = build_pole_setup(*sh.table, sh.flow, m, sel, seq, sh.c_estimate, c2);
      HarmonicField tilde = poisson_tilde(ps.ctx, ps.d_tau_lattice);
      Site off = ps.ctx.fold.unapply({1, 0});
      Site zprime{ps.ctx.zeta.x - off.x, ps.ctx.zeta.y - off.y};
      SiteSet interior = ps.d_tau_lattice;
      interior.erase(ps.ctx.zeta);
      HarmonicField green = green_discrete(*sh.table, interior, zprime);
      Vec2 zp = position(ps.ctx.zeta, m);
      std::vector<double> ratios;
      interior.for_each([&](Site z) {
        Vec2 p = position(z, m);
        if (norm(p - zp) < 0.5 * sel.r_tau) return;
        if (sel.r_tau - norm(p) < 2.0 / 64) return;
        if (green.at(z) > 1e-12) ratios.push_back(tilde.at(z) / green.at(z));
      });
      if (ratios.empty()) {
        ratio_ok = false;
        continue;
      }
      double med = median(ratios);
      med_lo = std::min(med_lo, med);
      med_hi = std::max(med_hi, med);
      for (double r : ratios) spread_worst = std::max(spread_worst, std::abs(r - med) / med);
      if (med < 1.0 / 16 || med > 1.0) ratio_ok = false;
    }
    if (spread_worst > 0.05) ratio_ok = false;
  }

  // (c) Discrete-vs-continuum Green decay across one octave pair.
  GreenConvergence gc = green_convergence_sweep(*sh.table, {16, 32, 64}, 1.0, 0.2);

  bool ok = mc_ok && ratio_ok && gc.rate_ok;
  report(5, "poisson/green suite", ok,
         fmt("MC %d/%d within 3SE; ratio medians [%.3f, %.3f] spread %.1f%% (<=5%%); "
             "green err ratios %.2f, %.2f (m^-2 within x3)",
             agree, tested, med_lo, med_hi, 100 * spread_worst, gc.octave_ratios[0],
             gc.octave_ratios[1]));
}

// 6. Mean-value discrepancy growth rates.
void criterion6(Shared& sh) {
  MeanValueSweep sw = mean_value_sweep(*sh.table, sh.flow, {16, 32, 64, 128}, 4, sh.c_estimate);
  bool h_ok = sw.h_growth.log_preferred || sw.h_growth.power_exp <= 0.1;
  bool t_ok = sw.tilde_exponent <= 0.5 && sw.tilde_envelope_ok;
  report(6, "mean-value discrepancy growth", h_ok && t_ok,
         fmt("H disc %.3f..%.3f (power exp %.2f, log %s); tilde disc %.3f..%.3f "
             "(exp %.2f <= 0.5, sqrt envelope %s)",
             sw.h_disc.front(), sw.h_disc.back(), sw.h_growth.power_exp,
             sw.h_growth.log_preferred ? "preferred" : "not preferred", sw.tilde_disc.front(),
             sw.tilde_disc.back(), sw.tilde_exponent, sw.tilde_envelope_ok ? "holds" : "broken"));
}

// 7. Martingale mean over 200 absorbed runs at each of 4 poles, m = 32.
void criterion7(Shared& sh) {
  Resolution m(32);
  SourceSequence seq = sh.flow.discretize(m);
  auto poles = select_poles(sh.flow, m, 4);
  bool ok = poles.size() == 4;
  std::string detail;
  for (std::size_t pi = 0; pi < poles.size(); ++pi) {
    PoleSetup ps = build_pole_setup(*sh.table, sh.flow, m, poles[pi], seq, sh.c_estimate,
                                    2 * sh.c1_fit);
    long t_final = std::min<long>(long(seq.size()), llround(std::floor(poles[pi].tau * 32 * 32)));
    std::vector<double> finals;
    for (int r = 0; r < 200; ++r) {
      auto trace = std::make_shared<MartingaleTrace>();
      IdlaState st = init_idla(sh.flow, m, mix_seed(31415, {pi, std::uint64_t(r)}));
      run_idla(st, seq, t_final, {martingale_observer(ps.h, trace)}, &ps.omega.absorbing);
      finals.push_back(trace->value);
    }
    double mu = mean(finals);
    double se = sample_sd(finals) / std::sqrt(200.0);
    if (std::abs(mu) > 3 * se) ok = false;
    detail += fmt("%s|mean| %.3f vs 3SE %.3f", pi ? "; " : "", std::abs(mu), 3 * se);
  }
  report(7, "martingale property over 200 runs x 4 poles", ok, detail);
}

// 8. Fluctuation exponent and envelope at desk scale.
void criterion8(Shared& sh) {
  auto t0 = std::chrono::steady_clock::now();
  ScalingCampaignResult res =
      run_scaling_campaign(sh.flow, {16, 32, 64, 128}, 20, 42, 20, 0);
  double secs = elapsed_since(t0);
  bool ok = res.fit.beta >= 0.55 && res.fit.ci_lo > 0.3 && res.envelope.ok;
  std::string viol;
  for (std::size_t i = 0; i < res.envelope.violations.size(); ++i)
    viol += fmt("%s%d/%d", i ? "," : "", res.envelope.violations[i], res.envelope.allowed[i]);
  report(8, "fluctuation exponent and envelope", ok,
         fmt("beta = %.3f (>= 0.55), 95%% CI [%.3f, %.3f] excludes 0.3; envelope C = %.3f, "
             "violations/allowed %s; %.0fs",
             res.fit.beta, res.fit.ci_lo, res.fit.ci_hi, res.envelope.c_hat, viol.c_str(), secs));
}

// 9. Quadrature identity on both flows with 1.7x decay per doubling.
void criterion9(Shared& sh) {
  auto run_flow = [&](const FlowSpec& spec, const std::vector<double>& fracs) {
    std::vector<double> w64(harmonic_test_functions().size(), 0.0), w128 = w64;
    for (double f : fracs) {
      double s = f * spec.total_volume();
      auto d64 = quadrature_check_all(spec, s, Resolution(64));
      auto d128 = quadrature_check_all(spec, s, Resolution(128));
      for (std::size_t i = 0; i < w64.size(); ++i) {
        w64[i] = std::max(w64[i], d64[i]);
        w128[i] = std::max(w128[i], d128[i]);
      }
    }
    return std::make_pair(w64, w128);
  };
  std::vector<double> fracs31;
  for (int k = 1; k <= 31; ++k) fracs31.push_back(k / 32.0);
  auto [e64, e128] = run_flow(sh.flow, fracs31);
  auto [a64, a128] =
      run_flow(FlowSpec::two_family_asymmetric(),
               {1 / 8.0, 2 / 8.0, 3 / 8.0, 4 / 8.0, 5 / 8.0, 6 / 8.0, 7 / 8.0});

  bool ok = true;
  double worst_ratio = 1e300, worst_c = 0;
  auto judge = [&](const std::vector<double>& d64, const std::vector<double>& d128) {
    for (std::size_t i = 0; i < d64.size(); ++i) {
      worst_c = std::max(worst_c, std::max(d64[i] * 64, d128[i] * 128));
      if (d128[i] <= 1e-12 && d64[i] <= 1e-12) continue;  // exact symmetry zeros
      double ratio = d64[i] / std::max(d128[i], 1e-300);
      worst_ratio = std::min(worst_ratio, ratio);
      if (ratio < 1.7) ok = false;
    }
  };
  judge(e64, e128);
  judge(a64, a128);
  report(9, "quadrature identity decay", ok,
         fmt("worst doubling ratio %.2f (>= 1.7), fitted C = %.3f (disc <= C/m_ref)",
             worst_ratio, worst_c));
}

// 10. Abelian invariance of the max-fluctuation law under source reordering.
void criterion10(Shared& sh) {
  Resolution m(32);
  std::vector<double> s_grid;
  for (int k = 0; k <= 20; ++k) s_grid.push_back(sh.flow.total_volume() * k / 20);
  FlowReference ref(sh.flow, m, s_grid);
  auto arm = [&](TieOrder order, std::uint64_t salt) {
    SourceSequence seq = sh.flow.discretize(m, order);
    std::vector<double> out;
    for (int trial = 0; trial < 200; ++trial) {
      RunMeasurementOptions opt;
      opt.order = order;
      RunMeasurement rm = measure_idla_run(sh.flow, seq, m,
                                           mix_seed(777, {salt, std::uint64_t(trial)}), ref, opt);
      out.push_back(rm.max_fluct);
    }
    return out;
  };
  std::vector<double> asc = arm(TieOrder::LexAsc, 0);
  std::vector<double> desc = arm(TieOrder::LexDesc, 1);
  KsResult ks = ks_two_sample(asc, desc);
  bool ok = ks.p_value > 0.01;
  report(10, "abelian order invariance (KS)", ok,
         fmt("KS D = %.4f, p = %.3f (> 0.01 required)", ks.d, ks.p_value));
}

// 11. Thin tentacles: zero events at b = 0.05, r = 8/m over 100 runs.
void criterion11(Shared& sh) {
  Resolution m(64);
  SourceSequence seq = sh.flow.discretize(m);
  SiteSet initial = sites_in(sh.flow.d0(), m);
  long events = 0, audited = 0;
  for (int trial = 0; trial < 100; ++trial) {
    IdlaState st = init_idla(sh.flow, m, mix_seed(2025, {std::uint64_t(trial)}));
    std::vector<Site> log;
    run_idla(st, seq, long(seq.size()), {}, nullptr, &log);
    TentacleStats ts = tentacle_scan(sh.flow, m, initial, log, 0.05, {8.0 / 64});
    events += ts.event_counts[0];
    audited += ts.landings_audited;
  }
  bool ok = events == 0;
  report(11, "thin tentacle rarity", ok,
         fmt("%ld events over 100 runs (%ld landings audited at d >= 8/m)", events, audited));
}

// 12. Byte-identical CSV artifacts for identical config and seed.
void criterion12(const std::string& cli) {
  std::string dir = "/tmp/idla_acceptance_det";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  nlohmann::json cfg{{"campaign", "simulate"}, {"flow", "example1"}, {"m", {16}},
                     {"trials", 2},           {"seed", 20240817},   {"checkpoints", 10},
                     {"cache", dir + "/cache"}};
  write_text_file(dir + "/config.json", cfg.dump(2));
  auto run = [&](const std::string& out) {
    std::string cmd = cli + " simulate --config " + dir + "/config.json --out " + dir + "/" + out +
                      " > /dev/null 2>&1";
    return std::system(cmd.c_str());
  };
  int rc1 = run("A"), rc2 = run("B");
  bool ok = rc1 == 0 && rc2 == 0;
  std::string detail = fmt("exit codes %d/%d", rc1, rc2);
  if (ok) {
    int compared = 0;
    for (int trial = 0; trial < 2; ++trial) {
      std::string rel = "/simulate/m16/trial" + std::to_string(trial) + "/fluctuations.csv";
      std::string a = read_text_file(dir + "/A" + rel);
      std::string b = read_text_file(dir + "/B" + rel);
      ++compared;
      if (a != b || a.empty()) ok = false;
    }
    std::string sa = read_text_file(dir + "/A/simulate/m16/sources.csv");
    std::string sb = read_text_file(dir + "/B/simulate/m16/sources.csv");
    if (sa != sb) ok = false;
    detail += fmt("; %d CSV pairs byte-compared", compared + 1);
  }
  report(12, "campaign determinism", ok, detail);
  std::filesystem::remove_all(dir);
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli = "./idla-lab";
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--cli") cli = argv[i + 1];

  auto t0 = std::chrono::steady_clock::now();
  Shared sh;
  sh.table = std::make_unique<PotentialTable>(
      PotentialTable::build(std::max(150, required_table_half_width(sh.flow, 128))));

  criterion1(sh);
  criterion2(sh);
  criterion3(sh);
  criterion4(sh);
  criterion5(sh);
  criterion6(sh);
  criterion7(sh);
  criterion8(sh);
  criterion9(sh);
  criterion10(sh);
  criterion11(sh);
  criterion12(cli);

  std::printf("%s: %d of 12 criteria failed (%.0fs total)\n", g_failures ? "FAILURE" : "SUCCESS",
              g_failures, elapsed_since(t0));
  return g_failures ? 1 : 0;
}
