#include "mtd/attack.hpp"

#include <cmath>

#include "mtd/estimation.hpp"

namespace mtd {

AttackVector generate_attack(const Eigen::MatrixXd& h_attacker,
                             const Eigen::VectorXd& z_ref, double target_rel,
                             RandomStream& rng, const std::string& source) {
  if (target_rel <= 0.0) throw ModelError("attack magnitude must be positive");
  const double z_norm = z_ref.lpNorm<1>();
  if (z_norm <= 0.0) throw ModelError("reference measurement vector is zero");

  constexpr int kMaxRetries = 16;
  for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
    Eigen::VectorXd c(h_attacker.cols());
    for (int i = 0; i < c.size(); ++i) c[i] = rng.normal();
    Eigen::VectorXd a = h_attacker * c;
    const double a_norm = a.lpNorm<1>();
    if (a_norm <= 1e-12 * z_norm) continue;  // degenerate draw
    const double scale = target_rel * z_norm / a_norm;
    a *= scale;
    c *= scale;
    AttackVector attack;
    attack.a = std::move(a);
    attack.c = std::move(c);
    attack.source = source;
    attack.rel_magnitude = attack.a.lpNorm<1>() / z_norm;
    return attack;
  }
  throw ModelError("attack generation degenerated repeatedly (zero injections)");
}

bool is_undetectable(const Eigen::MatrixXd& h_defender, const AttackVector& attack,
                     double tol) {
  const auto [rank_h, rank_aug] = rank_of_augmented(h_defender, attack.a, tol);
  return rank_h == rank_aug;
}

Eigen::VectorXd attack_residual_component(const Eigen::MatrixXd& h_defender,
                                          const Eigen::VectorXd& w_diag,
                                          const AttackVector& attack) {
  const Eigen::MatrixXd gamma = projector(h_defender, w_diag);
  return attack.a - gamma * attack.a;
}

FourBusTable four_bus_demo(const GridCase& grid4, double eta) {
  if (grid4.n_buses() != 4 || grid4.n_branches() != 4)
    throw ModelError("four_bus_demo requires a 4-bus, 4-branch case");
  const Eigen::VectorXd x = grid4.default_reactances();
  const MeasurementModel attacker = MeasurementModel::build(grid4, x);

  // State shifts over the non-reference buses: all three shifted, and the
  // last bus alone.
  Eigen::VectorXd c1 = Eigen::VectorXd::Ones(3);
  Eigen::VectorXd c2 = Eigen::VectorXd::Zero(3);
  c2[2] = 1.0;
  const std::array<Eigen::VectorXd, 2> attacks = {attacker.h() * c1, attacker.h() * c2};

  const Eigen::VectorXd w = Eigen::VectorXd::Ones(attacker.rows());
  FourBusTable table;
  for (int i = 0; i < 2; ++i)
    table.attack_norms[static_cast<std::size_t>(i)] =
        attacks[static_cast<std::size_t>(i)].norm();
  for (int k = 0; k < 4; ++k) {
    Eigen::VectorXd x2 = x;
    x2[k] *= (1.0 - eta);
    const MeasurementModel defender = MeasurementModel::build(grid4, x2);
    const Eigen::MatrixXd gamma = projector(defender.h(), w);
    for (int i = 0; i < 2; ++i) {
      const Eigen::VectorXd& a = attacks[static_cast<std::size_t>(i)];
      table.residuals[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] =
          (a - gamma * a).norm();
    }
  }
  return table;
}

}  // namespace mtd
