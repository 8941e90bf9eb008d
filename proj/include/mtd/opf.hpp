#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>

#include "mtd/grid.hpp"
#include "mtd/subspace.hpp"

namespace mtd {

struct DispatchSolution {
  Eigen::VectorXd g;      // per-generator output, MW
  Eigen::VectorXd x;      // branch reactances used
  Eigen::VectorXd theta;  // non-reference bus angles
  Eigen::VectorXd flows;  // per-branch MW
  double cost = 0.0;
  bool feasible = false;
  int restarts_used = 0;
  long lp_solves = 0;
};

// Exact LP dispatch for fixed reactances: min sum c_i g_i subject to nodal
// balance, flow limits, and generator limits. Returns feasible=false when
// the limits cannot be met. The reported (g, theta) is the lexicographically
// smallest generator vector among cost-equal optima.
DispatchSolution dispatch_lp(const GridCase& grid, const Eigen::VectorXd& load,
                             const Eigen::VectorXd& x);

// Re-check every dispatch constraint independently of the solver.
// Returns an empty string when all hold, else a description.
std::string check_dispatch(const GridCase& grid, const Eigen::VectorXd& load,
                           const DispatchSolution& sol, double tol_mw = 1e-6);

struct SearchOptions {
  int restarts = 100;
  std::uint64_t seed = 1;
  int max_sweeps = 40;
  // A candidate replaces the incumbent only when better by this relative
  // margin; within the band the lowest restart index wins, which keeps
  // sweeps with shared seeds reproducible and continuation paths stable.
  double improve_rel = 1e-3;
  int threads = 0;
  std::optional<Eigen::VectorXd> warm_start;
};

// Joint dispatch + reactance optimization: outer multi-start coordinate
// search over the D-FACTS box, exact LP inside.
DispatchSolution baseline_opf(const GridCase& grid, const Eigen::VectorXd& load,
                              const SearchOptions& opts = {});

struct PerturbationPlan {
  Eigen::VectorXd x_prime;
  Eigen::MatrixXd h_prime;
  Angle gamma_vs_attacker;  // constraint angle, vs the attacker's matrix
  Angle gamma_vs_current;   // vs the no-defense matrix at the same load
  DispatchSolution dispatch;
  double c_mtd = 0.0;
  bool feasible = false;
  double max_gamma_found = 0.0;  // largest constraint angle seen in the search
};

// Reactance selection under a subspace-separation constraint
// angle(h_attacker, H(x')) >= gamma_th, minimizing dispatch cost. When
// baseline is null it is solved internally with the same options.
PerturbationPlan mtd_opf(const GridCase& grid, const Eigen::VectorXd& load,
                         const Eigen::MatrixXd& h_attacker, Angle gamma_th,
                         const SearchOptions& opts = {},
                         const DispatchSolution* baseline = nullptr);

// Relative cost increase (c_mtd - c_base) / c_base. Negative values are
// returned as-is; callers flag them as solver inconsistency.
double mtd_cost(double c_opf_base, double c_opf_mtd);

}  // namespace mtd
