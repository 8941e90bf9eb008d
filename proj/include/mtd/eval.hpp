#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "mtd/estimation.hpp"
#include "mtd/grid.hpp"
#include "mtd/opf.hpp"

namespace mtd {

// What the attacker is assumed to have learned one step earlier in the
// hourly replay: the plain OPF matrix, or the defended (post-perturbation)
// matrix of the previous hour.
enum class AttackerKnowledge { PreviousBaseline, PreviousPostMtd };

struct EvalConfig {
  int n_attacks = 1000;
  int n_noise = 1000;
  double alpha = 5e-4;
  double rel_magnitude = 0.08;
  std::vector<double> deltas{0.5, 0.7, 0.9, 0.95};
  std::vector<double> gammas;  // empty -> default_gamma_grid()
  double noise_sigma = kDefaultNoiseSigma;
  bool weighted_residual = true;
  std::uint64_t seed = 1;
  int restarts = 100;
  int calib_trials = 100000;
  int threads = 0;
  AttackerKnowledge attacker_knowledge = AttackerKnowledge::PreviousBaseline;

  void validate() const;  // throws ModelError on out-of-range values
};

// 0, 0.05, ..., 0.45 radians.
std::vector<double> default_gamma_grid();

struct EffectivenessEstimate {
  double eta = 0.0;
  double half_width = 0.0;  // 95% binomial
  int n = 0;
};

struct EffectivenessReport {
  std::vector<double> deltas;
  std::vector<EffectivenessEstimate> by_delta;
  std::vector<double> detection_probabilities;  // per sampled attack
};

// Fraction of sampled stealthy attacks whose Monte Carlo detection
// probability under the (calibrated) defender exceeds each delta.
EffectivenessReport effectiveness(const MeasurementModel& defender,
                                  const Eigen::MatrixXd& h_attacker,
                                  const Eigen::VectorXd& z_ref, const EvalConfig& cfg);

EffectivenessEstimate effectiveness_at(const MeasurementModel& defender,
                                       const Eigen::MatrixXd& h_attacker,
                                       const Eigen::VectorXd& z_ref,
                                       const EvalConfig& cfg, double delta);

struct SweepRow {
  double gamma_target = 0.0;
  bool feasible = false;
  double gamma_achieved = 0.0;    // vs the attacker matrix
  double gamma_vs_current = 0.0;  // vs the same-load undefended matrix
  double max_gamma_found = 0.0;
  double cost = 0.0;
  double c_mtd = 0.0;
  std::vector<EffectivenessEstimate> eta;  // parallel to deltas
};

struct SweepReport {
  std::vector<double> deltas;
  std::vector<SweepRow> rows;  // ascending gamma_target
  double base_cost = 0.0;
  Eigen::VectorXd attacker_x;
  double z_ref_norm1 = 0.0;
  std::uint64_t seed = 0;
};

// Solve the perturbation selection at each gamma threshold and score its
// detection effectiveness; attacks and restart seeds are shared across the
// grid so rows are comparable.
SweepReport gamma_sweep(const GridCase& grid, const Eigen::VectorXd& load,
                        const EvalConfig& cfg);

// Same computation viewed as an (effectiveness, cost) curve.
SweepReport tradeoff_curve(const GridCase& grid, const Eigen::VectorXd& load,
                           const EvalConfig& cfg);

struct RandomPlanRow {
  int plan = 0;
  double gamma = 0.0;
  std::vector<EffectivenessEstimate> eta;
};

struct RandomBaselineReport {
  std::vector<double> deltas;
  std::vector<RandomPlanRow> plans;
  double target_delta = 0.9;
  double target_eta = 0.9;
  double fraction_meeting_target = 0.0;
  double iqr_at_target_delta = 0.0;  // dispersion diagnostic
  double base_cost = 0.0;
};

// Keyspace-style defense: n_plans reactance vectors drawn uniformly within
// +-bound of the baseline-optimal reactances (D-FACTS branches only), each
// scored like a sweep row.
RandomBaselineReport random_perturbation_baseline(const GridCase& grid,
                                                  const Eigen::VectorXd& load,
                                                  const EvalConfig& cfg,
                                                  int n_plans = 500,
                                                  double bound = 0.02);

struct DailyHour {
  int hour = 0;
  std::string timestamp;
  double load_mw = 0.0;
  bool feasible = false;
  double gamma_th = 0.0;        // smallest threshold meeting the target
  double eta_at_target = 0.0;   // achieved effectiveness at target_delta
  double cost_base = 0.0;
  double cost_mtd = 0.0;
  double c_mtd = 0.0;
  double gamma_att_vs_current = 0.0;  // attacker matrix vs this hour's OPF matrix
  double gamma_current_vs_plan = 0.0;
  double gamma_att_vs_plan = 0.0;
};

struct DailyReport {
  std::vector<DailyHour> hours;
  double target_delta = 0.9;
  double target_eta = 0.9;
};

// Hourly replay: the attacker's knowledge lags one hour; gamma_th is tuned
// by bisection (bracket [0, 0.45], 0.01 rad) to the smallest value meeting
// eta(target_delta) >= target_eta.
DailyReport daily_simulation(const GridCase& grid, const LoadTrace& trace,
                             const EvalConfig& cfg, double target_delta = 0.9,
                             double target_eta = 0.9);

double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace mtd
