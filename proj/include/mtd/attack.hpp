#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>

#include "mtd/grid.hpp"
#include "mtd/rng.hpp"
#include "mtd/subspace.hpp"

namespace mtd {

// Stealthy injection a = H c built from the attacker's measurement matrix.
struct AttackVector {
  Eigen::VectorXd a;         // measurement-space injection
  Eigen::VectorXd c;         // generating state-shift coefficients
  std::string source;        // identifier of the matrix that generated a
  double rel_magnitude = 0.0;  // ||a||_1 / ||z_ref||_1
};

// Gaussian c rescaled so that ||a||_1 / ||z_ref||_1 equals target_rel.
AttackVector generate_attack(const Eigen::MatrixXd& h_attacker,
                             const Eigen::VectorXd& z_ref, double target_rel,
                             RandomStream& rng, const std::string& source = {});

// Rank test: a stays invisible to a defender running h_defender iff
// rank(h_defender) == rank([h_defender a]).
bool is_undetectable(const Eigen::MatrixXd& h_defender, const AttackVector& attack,
                     double tol = kRankTol);

// r_a = (I - Gamma') a, the deterministic residual component the attack
// contributes under the defender's projector.
Eigen::VectorXd attack_residual_component(const Eigen::MatrixXd& h_defender,
                                          const Eigen::VectorXd& w_diag,
                                          const AttackVector& attack);

// Noiseless residual table for the bundled 4-bus scenario: two canonical
// attacks against four single-branch reactance perturbations.
struct FourBusTable {
  std::array<std::array<double, 4>, 2> residuals{};  // [attack][perturbation]
  std::array<double, 2> attack_norms{};
  bool is_zero(int attack, int perturbation) const {
    return residuals[static_cast<std::size_t>(attack)][static_cast<std::size_t>(
               perturbation)] < 1e-9 * attack_norms[static_cast<std::size_t>(attack)];
  }
};

FourBusTable four_bus_demo(const GridCase& grid4, double eta = 0.2);

}  // namespace mtd
