#pragma once

#include <Eigen/Dense>

#include "mtd/grid.hpp"
#include "mtd/rng.hpp"

namespace mtd {

// Default per-sensor measurement noise, MW.
inline constexpr double kDefaultNoiseSigma = 0.1;

// Stacked DC measurement matrix [D A^T; -D A^T; A D A^T] with the
// reference-bus column removed: (2L + N) rows by (N - 1) columns.
Eigen::MatrixXd measurement_matrix(const GridCase& grid, const Eigen::VectorXd& x);

// Linear measurement model z = H theta + n for the DC state estimator.
// Rows are stacked [forward flows; reverse flows; injections]; the
// reference-bus column is removed so H has full column rank and the
// normal equations are invertible.
class MeasurementModel {
 public:
  static MeasurementModel build(const GridCase& grid, const Eigen::VectorXd& x,
                                double noise_sigma = kDefaultNoiseSigma,
                                bool weighted_residual = true);

  // Wrap an arbitrary measurement matrix (defenders that are not derived
  // from a reactance vector, e.g. orthogonal-complement constructions).
  static MeasurementModel from_matrix(Eigen::MatrixXd h, Eigen::VectorXd sigma,
                                      bool weighted_residual = true);

  const Eigen::MatrixXd& h() const { return h_; }
  const Eigen::VectorXd& sigma() const { return sigma_; }
  Eigen::VectorXd w_diag() const { return sigma_.array().square().inverse(); }
  int rows() const { return static_cast<int>(h_.rows()); }
  int state_dim() const { return static_cast<int>(h_.cols()); }
  bool weighted_residual() const { return weighted_residual_; }

  bool calibrated() const { return tau_ > 0.0; }
  double tau() const;
  double alpha() const { return alpha_; }
  void set_threshold(double tau, double alpha);

 private:
  MeasurementModel() = default;
  Eigen::MatrixXd h_;
  Eigen::VectorXd sigma_;
  bool weighted_residual_ = true;
  double tau_ = 0.0;
  double alpha_ = 0.0;
};

// z = H theta + n, with n_i ~ N(0, sigma_i^2).
Eigen::VectorXd simulate_measurements(const MeasurementModel& model,
                                      const Eigen::VectorXd& theta, RandomStream& rng);

// Weighted least-squares state estimate (H^T W H)^{-1} H^T W z.
Eigen::VectorXd wls_estimate(const MeasurementModel& model, const Eigen::VectorXd& z);

// Detector statistic: norm of z - H theta_hat, W-weighted by default.
double residual(const MeasurementModel& model, const Eigen::VectorXd& z);

// Precomputed factor of the residual map. For the weighted convention the
// residual of z = H theta + n + a equals scale * ||v + T a|| with v standard
// normal of dimension dof() = rows - rank(H); this is an exact identity of
// the WLS pipeline, not an approximation, and keeps Monte Carlo loops cheap.
// The unweighted convention with nonuniform sigma falls back to a dense
// projector.
class ResidualSampler {
 public:
  explicit ResidualSampler(const MeasurementModel& model);

  int dof() const { return dof_; }

  // Norm of the attack residual component (I - Gamma) a in the model's
  // residual convention; the noncentrality that drives detection.
  double attack_shift_norm(const Eigen::VectorXd& a) const;

  // Residual for an explicit noise vector (measurement units).
  double residual_of(const Eigen::VectorXd& noise, const Eigen::VectorXd& a) const;

  double noise_only_residual(RandomStream& rng) const;

  // Detections (residual >= tau) among n_trials noisy draws around a fixed
  // attack; the workhorse of detection-probability estimation.
  int count_detections(const Eigen::VectorXd& a, double tau, int n_trials,
                       RandomStream& rng) const;

 private:
  bool whitened_ = true;
  int dof_ = 0;
  Eigen::MatrixXd t_;        // U_perp^T W^{1/2} (whitened mode), dof x M
  Eigen::MatrixXd p_;        // I - Gamma (dense mode), M x M
  Eigen::VectorXd sigma_;
  double unit_scale_ = 1.0;  // converts whitened residual to reported units
};

// Empirical (1 - alpha) quantile of the attack-free residual; sets the
// model threshold and returns it.
double calibrate_threshold(MeasurementModel& model, double alpha, int n_trials,
                           RandomStream& rng);

// Monte Carlo estimate of P(residual >= tau) under z = H theta + n + a.
double detection_probability(const MeasurementModel& model, const Eigen::VectorXd& a,
                             int n_trials, RandomStream& rng);

}  // namespace mtd
