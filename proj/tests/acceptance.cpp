// Acceptance suite: exercises the full pipeline end to end and prints one
// PASS/FAIL line per criterion. Exit code is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mtd/attack.hpp"
#include "mtd/eval.hpp"
#include "mtd/io.hpp"
#include "mtd/subspace.hpp"

using namespace mtd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int id;
  std::string name;
  bool pass;
  std::string detail;
};

std::vector<Outcome> g_outcomes;

void record(int id, const std::string& name, bool pass, const std::string& detail) {
  g_outcomes.push_back({id, name, pass, detail});
  std::printf("[%s] criterion %d (%s): %s\n", pass ? "PASS" : "FAIL", id, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
}

fs::path data_dir() { return MTD_DATA_DIR; }

Eigen::VectorXd random_box_reactance(const GridCase& g, RandomStream& rng) {
  Eigen::VectorXd x = g.default_reactances();
  const Eigen::VectorXd lo = g.reactance_lower(), hi = g.reactance_upper();
  for (int l : g.dfacts_branches()) x[l] = rng.uniform(lo[l], hi[l]);
  return x;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// ---- criterion 1 ----------------------------------------------------------

void criterion_fp_calibration(const GridCase& grid) {
  MeasurementModel model = MeasurementModel::build(grid, grid.default_reactances());
  RandomStream master(20240801);
  RandomStream calib = master.substream(1);
  RandomStream valid = master.substream(2);
  const int trials = 100000;
  const double alpha = 5e-4;
  calibrate_threshold(model, alpha, trials, calib);
  const ResidualSampler sampler(model);
  int fp = 0;
  for (int i = 0; i < trials; ++i)
    if (sampler.noise_only_residual(valid) >= model.tau()) ++fp;
  const double rate = static_cast<double>(fp) / trials;
  record(1, "false-positive calibration", rate >= 2.5e-4 && rate <= 1e-3,
         "validation FP rate " + fmt(rate) + " (band 2.5e-4..1e-3), tau " +
             fmt(model.tau()));
}

// ---- criteria 2 and 3 -----------------------------------------------------

void criterion_undetectability_and_bounds(const GridCase& grid) {
  const Eigen::MatrixXd h = measurement_matrix(grid, grid.default_reactances());
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(h.rows());
  const DispatchSolution sol =
      dispatch_lp(grid, grid.default_loads(), grid.default_reactances());
  const Eigen::VectorXd z_ref = h * sol.theta;

  RandomStream master(77);
  RandomStream pert_rng = master.substream(1);
  RandomStream atk_rng = master.substream(2);

  const int n_pairs = 1000;
  int disagreements = 0, bound_violations = 0, sin_violations = 0;
  for (int t = 0; t < n_pairs; ++t) {
    const Eigen::MatrixXd h2 = measurement_matrix(grid, random_box_reactance(grid, pert_rng));
    const AttackVector atk = generate_attack(h, z_ref, 0.08, atk_rng);
    const double a_norm = atk.a.norm();
    const double r_norm = attack_residual_component(h2, w, atk).norm();
    const bool undetectable = is_undetectable(h2, atk);
    if (undetectable != (r_norm < kRankTol * a_norm)) ++disagreements;
    if (r_norm < 0.0 || r_norm > a_norm + 1e-9) ++bound_violations;
    const double gamma = subspace_angle(h, h2).radians;
    if (r_norm > std::sin(gamma) * a_norm + 1e-9) ++sin_violations;
  }
  record(2, "undetectability exactness",
         disagreements == 0,
         "rank test vs residual component: " + std::to_string(disagreements) +
             " disagreements over " + std::to_string(n_pairs) + " pairs");

  // orthogonal-complement defender: full attack survives, eta(alpha) = 1
  const Eigen::MatrixXd perp = orthogonal_complement_basis(h, w);
  RandomStream atk2 = master.substream(3);
  int orth_violations = 0;
  for (int t = 0; t < 1000; ++t) {
    const AttackVector atk = generate_attack(h, z_ref, 0.08, atk2);
    const Eigen::VectorXd ra = attack_residual_component(perp, w, atk);
    if (std::abs(ra.norm() - atk.a.norm()) > 1e-9 * std::max(1.0, atk.a.norm()))
      ++orth_violations;
  }
  EvalConfig cfg;
  cfg.n_attacks = 1000;
  cfg.n_noise = 200;
  cfg.deltas = {cfg.alpha};
  cfg.seed = 5150;
  MeasurementModel orth_model = MeasurementModel::from_matrix(
      perp, Eigen::VectorXd::Constant(perp.rows(), cfg.noise_sigma));
  RandomStream calib = master.substream(4);
  calibrate_threshold(orth_model, cfg.alpha, cfg.calib_trials, calib);
  const double eta_alpha =
      effectiveness(orth_model, h, z_ref, cfg).by_delta.front().eta;

  record(3, "residual norm bounds",
         bound_violations == 0 && sin_violations == 0 && orth_violations == 0 &&
             eta_alpha == 1.0,
         "0<=|r_a|<=|a| violations " + std::to_string(bound_violations) +
             ", sin-gamma violations " + std::to_string(sin_violations) +
             ", orthogonal-defender norm mismatches " + std::to_string(orth_violations) +
             ", eta(alpha) " + fmt(eta_alpha));
}

// ---- criterion 4 ----------------------------------------------------------

void criterion_four_bus() {
  const GridCase g4 = load_case_file(data_dir() / "case4.grid");
  const FourBusTable t = four_bus_demo(g4);
  const bool zeros =
      t.is_zero(0, 2) && t.is_zero(0, 3) && t.is_zero(1, 0) && t.is_zero(1, 1);
  const bool nonzeros = !t.is_zero(0, 0) && !t.is_zero(0, 1) && !t.is_zero(1, 2) &&
                        !t.is_zero(1, 3) && t.residuals[0][0] > 0 &&
                        t.residuals[0][1] > 0 && t.residuals[1][2] > 0 &&
                        t.residuals[1][3] > 0;
  std::ostringstream detail;
  detail << "residuals [" << fmt(t.residuals[0][0]) << ", " << fmt(t.residuals[0][1])
         << ", " << fmt(t.residuals[0][2]) << ", " << fmt(t.residuals[0][3]) << "; "
         << fmt(t.residuals[1][0]) << ", " << fmt(t.residuals[1][1]) << ", "
         << fmt(t.residuals[1][2]) << ", " << fmt(t.residuals[1][3]) << "]";
  record(4, "4-bus residual pattern", zeros && nonzeros, detail.str());
}

// ---- criterion 5 ----------------------------------------------------------

SweepReport run_reference_sweep(const GridCase& grid) {
  EvalConfig cfg;
  cfg.n_attacks = 1000;
  cfg.n_noise = 1000;
  cfg.gammas = default_gamma_grid();
  cfg.gammas.push_back(0.44);
  cfg.restarts = 48;
  cfg.seed = 2024;
  return gamma_sweep(grid, grid.default_loads(), cfg);
}

void criterion_sweep(const GridCase& grid, const SweepReport& report) {
  bool isotonic = true;
  std::string iso_detail;
  for (std::size_t d = 0; d < report.deltas.size(); ++d) {
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
      for (std::size_t j = i + 1; j < report.rows.size(); ++j) {
        if (!report.rows[i].feasible || !report.rows[j].feasible) continue;
        const auto& ei = report.rows[i].eta[d];
        const auto& ej = report.rows[j].eta[d];
        if (ej.eta < ei.eta - 2.0 * (ei.half_width + ej.half_width)) {
          isotonic = false;
          iso_detail = " first violation at delta " + fmt(report.deltas[d]) +
                       ", gamma " + fmt(report.rows[i].gamma_target) + "->" +
                       fmt(report.rows[j].gamma_target) + " (" + fmt(ei.eta) + "->" +
                       fmt(ej.eta) + ")";
        }
      }
    }
  }

  double eta95_at_044 = -1.0;
  bool row_feasible = false;
  const auto it95 = std::find(report.deltas.begin(), report.deltas.end(), 0.95);
  for (const auto& row : report.rows) {
    if (std::abs(row.gamma_target - 0.44) < 1e-12 && it95 != report.deltas.end()) {
      row_feasible = row.feasible;
      if (row.feasible)
        eta95_at_044 =
            row.eta[static_cast<std::size_t>(it95 - report.deltas.begin())].eta;
    }
  }
  const bool anchor = row_feasible && eta95_at_044 >= 0.90;
  record(5, "effectiveness sweep",
         isotonic && anchor,
         "isotonic " + std::string(isotonic ? "yes" : "no") + iso_detail +
             "; eta(0.95) at gamma 0.44 = " + fmt(eta95_at_044) + " (need >= 0.90)");
}

// ---- criterion 6 ----------------------------------------------------------

void criterion_random_baseline(const GridCase& grid, const SweepReport& sweep) {
  EvalConfig cfg;
  cfg.n_attacks = 250;
  cfg.n_noise = 300;
  cfg.restarts = 48;
  cfg.seed = 2024;
  const RandomBaselineReport rb =
      random_perturbation_baseline(grid, grid.default_loads(), cfg, 500, 0.02);

  // the proposed method at a sufficient threshold: reuse the reference
  // sweep's gamma = 0.44 row, which carries full-count effectiveness
  double proposed_eta = -1.0;
  const auto it90 = std::find(sweep.deltas.begin(), sweep.deltas.end(), 0.9);
  for (const auto& row : sweep.rows)
    if (std::abs(row.gamma_target - 0.44) < 1e-12 && row.feasible &&
        it90 != sweep.deltas.end())
      proposed_eta = row.eta[static_cast<std::size_t>(it90 - sweep.deltas.begin())].eta;

  const bool pass = rb.fraction_meeting_target < 0.20 && proposed_eta >= 0.9;
  record(6, "random keyspace comparison", pass,
         "fraction of 500 random plans meeting eta(0.9)>=0.9: " +
             fmt(rb.fraction_meeting_target) + " (need < 0.20), IQR " +
             fmt(rb.iqr_at_target_delta) + "; proposed plan eta(0.9) " +
             fmt(proposed_eta));
}

// ---- criterion 7 ----------------------------------------------------------

void criterion_tradeoff(const GridCase& grid) {
  const LoadTrace trace = load_trace_file(data_dir() / "trace_ny_winter.csv");
  double evening = 0.0;
  for (const auto& p : trace.points)
    if (p.timestamp.find("18:00") != std::string::npos) evening = p.load_mw;
  const Eigen::VectorXd load = disaggregate_load(grid, evening);

  EvalConfig cfg;
  cfg.n_attacks = 400;
  cfg.n_noise = 400;
  cfg.deltas = {0.9};
  cfg.restarts = 48;
  cfg.seed = 4096;

  SearchOptions opts;
  opts.restarts = cfg.restarts;
  opts.seed = cfg.seed;
  const DispatchSolution baseline = baseline_opf(grid, load, opts);
  const Eigen::MatrixXd h_att = measurement_matrix(grid, baseline.x);
  const Eigen::VectorXd z_ref = h_att * baseline.theta;

  MeasurementModel probe = MeasurementModel::build(grid, baseline.x, cfg.noise_sigma);
  RandomStream calib = RandomStream(cfg.seed).substream(0xca11b0);
  calibrate_threshold(probe, cfg.alpha, cfg.calib_trials, calib);
  const double tau = probe.tau();

  SearchOptions step = opts;
  struct Probe {
    double eta = -1.0;
    double c_mtd = -1.0;
    double max_gamma = 0.0;
  };
  auto eta_at = [&](double gamma_th) {
    Probe p;
    const PerturbationPlan plan =
        mtd_opf(grid, load, h_att, Angle{gamma_th}, step, &baseline);
    p.max_gamma = plan.max_gamma_found;
    if (!plan.feasible) return p;
    step.warm_start = plan.x_prime;  // continuation between probes
    MeasurementModel defender = MeasurementModel::build(grid, plan.x_prime, cfg.noise_sigma);
    defender.set_threshold(tau, cfg.alpha);
    p.c_mtd = plan.c_mtd;
    p.eta = effectiveness(defender, h_att, z_ref, cfg).by_delta.front().eta;
    return p;
  };

  // bisect the smallest gamma_th reaching a given effectiveness target
  auto bisect = [&](double target, double* c_at) {
    double lo = 0.0, hi = 0.45;
    Probe top = eta_at(hi);
    if (top.eta < 0.0 && top.max_gamma > 0.01) {
      hi = std::min(hi, top.max_gamma - 0.005);
      top = eta_at(hi);
    }
    if (top.eta < target) {
      *c_at = -1.0;
      return -1.0;
    }
    double c_best = top.c_mtd;
    while (hi - lo > 0.01) {
      const double mid = 0.5 * (lo + hi);
      const Probe p = eta_at(mid);
      if (p.eta >= target) {
        hi = mid;
        c_best = p.c_mtd;
      } else {
        lo = mid;
      }
    }
    *c_at = c_best;
    return hi;
  };

  // smallest gamma with effectiveness distinguishable from zero
  double c_first = -1.0;
  const double gamma_first = bisect(0.05, &c_first);
  double c_08 = -1.0, c_09 = -1.0;
  const double gamma_08 = bisect(0.8, &c_08);
  const double gamma_09 = bisect(0.9, &c_09);

  const bool low_end = gamma_first >= 0.0 && c_first >= -1e-9 && c_first < 0.003;
  bool steepens = false;
  std::string ratio_txt = "n/a";
  if (gamma_08 >= 0.0 && gamma_09 >= 0.0) {
    if (c_08 <= 1e-12) {
      steepens = c_09 > 0.0;
      ratio_txt = "inf (cost ~0 at eta 0.8)";
    } else {
      const double ratio = c_09 / c_08;
      steepens = ratio >= 1.5;
      ratio_txt = fmt(ratio);
    }
  }
  record(7, "tradeoff shape", low_end && steepens,
         "c_mtd at first nonzero effectiveness " + fmt(c_first) +
             " (need < 0.003); gamma(0.8)=" + fmt(gamma_08) + " c=" + fmt(c_08) +
             ", gamma(0.9)=" + fmt(gamma_09) + " c=" + fmt(c_09) +
             ", cost ratio " + ratio_txt + " (need >= 1.5)");
}

// ---- criterion 8 ----------------------------------------------------------

void criterion_daily(const GridCase& grid) {
  const LoadTrace trace = load_trace_file(data_dir() / "trace_ny_winter.csv");
  EvalConfig cfg;
  cfg.n_attacks = 300;
  cfg.n_noise = 300;
  cfg.restarts = 24;
  cfg.seed = 777;
  const DailyReport report = daily_simulation(grid, trace, cfg);

  bool drift_ok = true;
  double max_drift = 0.0;
  bool rows_ok = true;
  int feasible_hours = 0;
  int approx_violations = 0;
  std::vector<double> costs, loads;
  for (const auto& h : report.hours) {
    max_drift = std::max(max_drift, h.gamma_att_vs_current);
    if (h.gamma_att_vs_current >= 0.05) drift_ok = false;
    if (h.feasible) {
      ++feasible_hours;
      if (h.eta_at_target < report.target_eta) rows_ok = false;
      costs.push_back(h.c_mtd);
      loads.push_back(h.load_mw);
      if (std::abs(h.gamma_att_vs_plan - h.gamma_current_vs_plan) >= 0.05)
        ++approx_violations;  // soft check, reported only
    }
  }
  double rho = 0.0;
  bool rho_ok = false;
  if (costs.size() >= 5) {
    rho = spearman(costs, loads);
    rho_ok = rho > 0.4;
  }
  record(8, "daily load trace", drift_ok && rows_ok && rho_ok,
         "max hourly knowledge drift " + fmt(max_drift) + " rad (need < 0.05); " +
             std::to_string(feasible_hours) + "/" + std::to_string(report.hours.size()) +
             " hours met eta(0.9)>=0.9; Spearman(c_mtd, load) " + fmt(rho) +
             " (need > 0.4); angle-approximation soft check violations " +
             std::to_string(approx_violations));
}

// ---- criterion 9 ----------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void criterion_determinism() {
  const fs::path base = fs::temp_directory_path() / "mtdgrid_acceptance_det";
  fs::remove_all(base);
  fs::create_directories(base);
  const std::string case_path = (data_dir() / "case14.grid").string();
  const std::string flags = std::string(MTDGRID_BIN) + " sweep --case " + case_path +
                            " --gamma-grid 0:0.2:0.4 --n-attacks 80 --n-noise 80 "
                            "--restarts 8 --seed 31 --out ";
  const fs::path d1 = base / "run1";
  const fs::path d2 = base / "run2";
  const int rc1 = std::system((flags + d1.string() + " > /dev/null 2>&1").c_str());
  const int rc2 = std::system((flags + d2.string() + " > /dev/null 2>&1").c_str());
  bool pass = rc1 == 0 && rc2 == 0;
  std::string detail;
  if (!pass) {
    detail = "sweep runs exited " + std::to_string(rc1) + "/" + std::to_string(rc2);
  } else {
    const bool eff_same = slurp(d1 / "effectiveness_vs_gamma.csv") ==
                          slurp(d2 / "effectiveness_vs_gamma.csv");
    const bool trade_same = slurp(d1 / "tradeoff.csv") == slurp(d2 / "tradeoff.csv");
    pass = eff_same && trade_same;
    detail = std::string("CSV byte equality: effectiveness ") +
             (eff_same ? "yes" : "NO") + ", tradeoff " + (trade_same ? "yes" : "NO");
  }
  record(9, "seeded determinism", pass, detail);
}

}  // namespace

int main() {
  const auto started = std::chrono::steady_clock::now();
  const GridCase grid = load_case_file(data_dir() / "case14.grid");

  try {
    criterion_fp_calibration(grid);
    criterion_undetectability_and_bounds(grid);
    criterion_four_bus();
    const SweepReport sweep = run_reference_sweep(grid);
    criterion_sweep(grid, sweep);
    criterion_random_baseline(grid, sweep);
    criterion_tradeoff(grid);
    criterion_daily(grid);
    criterion_determinism();
  } catch (const std::exception& e) {
    std::printf("[FAIL] acceptance aborted: %s\n", e.what());
    return 99;
  }

  int failures = 0;
  for (const auto& o : g_outcomes)
    if (!o.pass) ++failures;
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  std::printf("%zu criteria checked, %d failed (%.1f s)\n", g_outcomes.size(), failures,
              secs);
  return failures;
}
