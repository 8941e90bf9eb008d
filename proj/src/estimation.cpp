#include "mtd/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "mtd/subspace.hpp"

namespace mtd {

Eigen::MatrixXd measurement_matrix(const GridCase& grid, const Eigen::VectorXd& x) {
  const Susceptance s = susceptance_matrices(grid, x);
  const Eigen::MatrixXd a = incidence_matrix(grid);
  const int n = grid.n_buses();
  const int l = grid.n_branches();
  const Eigen::MatrixXd flows = s.d.asDiagonal() * a.transpose();  // L x N
  Eigen::MatrixXd full(2 * l + n, n);
  full << flows, -flows, s.b;
  // Drop the reference-bus column so the normal equations are invertible.
  const int slack = grid.ref_index();
  Eigen::MatrixXd h(full.rows(), n - 1);
  h << full.leftCols(slack), full.rightCols(n - 1 - slack);
  return h;
}

MeasurementModel MeasurementModel::build(const GridCase& grid, const Eigen::VectorXd& x,
                                         double noise_sigma, bool weighted_residual) {
  if (noise_sigma < 0.0) throw ModelError("noise sigma must be nonnegative");
  const int n = grid.n_buses();
  const int l = grid.n_branches();
  MeasurementModel m;
  m.h_ = measurement_matrix(grid, x);
  m.sigma_ = Eigen::VectorXd::Constant(2 * l + n, noise_sigma);
  m.weighted_residual_ = weighted_residual;
  if (orthonormal_basis(m.h_).rank != n - 1)
    throw ModelError("measurement matrix is rank deficient (disconnected grid?)");
  return m;
}

MeasurementModel MeasurementModel::from_matrix(Eigen::MatrixXd h, Eigen::VectorXd sigma,
                                               bool weighted_residual) {
  if (sigma.size() != h.rows()) throw ModelError("sigma size does not match rows");
  if ((sigma.array() < 0.0).any()) throw ModelError("negative noise sigma");
  MeasurementModel m;
  m.h_ = std::move(h);
  m.sigma_ = std::move(sigma);
  m.weighted_residual_ = weighted_residual;
  return m;
}

double MeasurementModel::tau() const {
  if (!calibrated()) throw ModelError("detector threshold not calibrated");
  return tau_;
}

void MeasurementModel::set_threshold(double tau, double alpha) {
  if (tau <= 0.0) throw ModelError("threshold must be positive");
  if (alpha <= 0.0 || alpha >= 1.0) throw ModelError("alpha must lie in (0, 1)");
  tau_ = tau;
  alpha_ = alpha;
}

Eigen::VectorXd simulate_measurements(const MeasurementModel& model,
                                      const Eigen::VectorXd& theta, RandomStream& rng) {
  Eigen::VectorXd z = model.h() * theta;
  for (int i = 0; i < z.size(); ++i) z[i] += model.sigma()[i] * rng.normal();
  return z;
}

Eigen::VectorXd wls_estimate(const MeasurementModel& model, const Eigen::VectorXd& z) {
  const Eigen::VectorXd w = model.w_diag();
  const Eigen::MatrixXd hw = w.asDiagonal() * model.h();
  const Eigen::MatrixXd gram = model.h().transpose() * hw;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success ||
      ldlt.vectorD().minCoeff() <= kRankTol * kRankTol * ldlt.vectorD().maxCoeff())
    throw ModelError("singular normal equations");
  return ldlt.solve(hw.transpose() * z);
}

double residual(const MeasurementModel& model, const Eigen::VectorXd& z) {
  const Eigen::VectorXd r = z - model.h() * wls_estimate(model, z);
  if (!model.weighted_residual()) return r.norm();
  return std::sqrt(r.dot(model.w_diag().asDiagonal() * r));
}

ResidualSampler::ResidualSampler(const MeasurementModel& model) : sigma_(model.sigma()) {
  const bool uniform =
      sigma_.size() > 0 && (sigma_.array() == sigma_[0]).all() && sigma_[0] > 0.0;
  if ((sigma_.array() <= 0.0).any())
    throw ModelError("residual sampler requires positive noise sigma");
  if (model.weighted_residual() || uniform) {
    whitened_ = true;
    const Eigen::VectorXd w_sqrt = sigma_.cwiseInverse();
    const Eigen::MatrixXd hw = w_sqrt.asDiagonal() * model.h();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(hw, Eigen::ComputeFullU);
    int rank = 0;
    const Eigen::VectorXd sv = svd.singularValues();
    for (int i = 0; i < sv.size(); ++i)
      if (sv[i] > kRankTol * sv[0]) ++rank;
    dof_ = model.rows() - rank;
    t_ = svd.matrixU().rightCols(dof_).transpose() * w_sqrt.asDiagonal();
    unit_scale_ = model.weighted_residual() ? 1.0 : sigma_[0];
  } else {
    whitened_ = false;
    p_ = Eigen::MatrixXd::Identity(model.rows(), model.rows()) -
         projector(model.h(), model.w_diag());
    dof_ = model.rows() - model.state_dim();
    unit_scale_ = 1.0;
  }
}

double ResidualSampler::attack_shift_norm(const Eigen::VectorXd& a) const {
  if (whitened_) return unit_scale_ * (t_ * a).norm();
  return (p_ * a).norm();
}

double ResidualSampler::residual_of(const Eigen::VectorXd& noise,
                                    const Eigen::VectorXd& a) const {
  if (whitened_) return unit_scale_ * (t_ * (noise + a)).norm();
  return (p_ * (noise + a)).norm();
}

double ResidualSampler::noise_only_residual(RandomStream& rng) const {
  const int m = static_cast<int>(sigma_.size());
  Eigen::VectorXd noise(m);
  for (int i = 0; i < m; ++i) noise[i] = sigma_[i] * rng.normal();
  if (whitened_) return unit_scale_ * (t_ * noise).norm();
  return (p_ * noise).norm();
}

int ResidualSampler::count_detections(const Eigen::VectorXd& a, double tau, int n_trials,
                                      RandomStream& rng) const {
  const int m = static_cast<int>(sigma_.size());
  int hits = 0;
  if (whitened_) {
    const Eigen::VectorXd shift = t_ * a;
    constexpr int kChunk = 128;
    Eigen::MatrixXd v(m, kChunk);
    for (int done = 0; done < n_trials;) {
      const int batch = std::min(kChunk, n_trials - done);
      for (int t = 0; t < batch; ++t)
        for (int i = 0; i < m; ++i) v(i, t) = rng.normal();
      const Eigen::MatrixXd r = t_ * (sigma_.asDiagonal() * v.leftCols(batch));
      for (int t = 0; t < batch; ++t)
        if (unit_scale_ * (r.col(t) + shift).norm() >= tau) ++hits;
      done += batch;
    }
  } else {
    Eigen::VectorXd noise(m);
    for (int t = 0; t < n_trials; ++t) {
      for (int i = 0; i < m; ++i) noise[i] = sigma_[i] * rng.normal();
      if (residual_of(noise, a) >= tau) ++hits;
    }
  }
  return hits;
}

double calibrate_threshold(MeasurementModel& model, double alpha, int n_trials,
                           RandomStream& rng) {
  if (alpha <= 0.0 || alpha >= 1.0) throw ModelError("alpha must lie in (0, 1)");
  if (n_trials < 10.0 / alpha)
    throw ModelError("too few calibration trials for requested alpha");
  const ResidualSampler sampler(model);
  std::vector<double> samples(static_cast<std::size_t>(n_trials));
  for (auto& s : samples) s = sampler.noise_only_residual(rng);
  std::sort(samples.begin(), samples.end(), std::greater<>());
  const int k = std::max(1, static_cast<int>(std::floor(alpha * n_trials)));
  const double tau = samples[static_cast<std::size_t>(k - 1)];
  model.set_threshold(tau, alpha);
  return tau;
}

double detection_probability(const MeasurementModel& model, const Eigen::VectorXd& a,
                             int n_trials, RandomStream& rng) {
  if (n_trials <= 0) throw ModelError("n_trials must be positive");
  const double tau = model.tau();
  const ResidualSampler sampler(model);
  return static_cast<double>(sampler.count_detections(a, tau, n_trials, rng)) / n_trials;
}

}  // namespace mtd
