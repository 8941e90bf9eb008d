#include "mtd/opf.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <vector>

#include "mtd/estimation.hpp"
#include "mtd/linprog.hpp"
#include "mtd/parallel.hpp"
#include "mtd/rng.hpp"

namespace mtd {
namespace {

constexpr double kGammaFeasTol = 1e-6;
constexpr std::uint64_t kRestartTag = 0x0f5a11;

struct LpSetup {
  LinearProgram lp;
  Eigen::MatrixXd flow_map;  // L x (N-1), D A^T with slack column removed
};

LpSetup build_dispatch_lp(const GridCase& grid, const Eigen::VectorXd& load,
                          const Eigen::VectorXd& x) {
  const int n = grid.n_buses();
  const int l = grid.n_branches();
  const int g = grid.n_generators();
  const int nv = g + n - 1;
  if (load.size() != n) throw ModelError("load vector length mismatch");

  const Susceptance s = susceptance_matrices(grid, x);
  const Eigen::MatrixXd a = incidence_matrix(grid);
  const int slack = grid.ref_index();
  auto drop_slack_col = [&](const Eigen::MatrixXd& m) {
    Eigen::MatrixXd out(m.rows(), n - 1);
    out << m.leftCols(slack), m.rightCols(n - 1 - slack);
    return out;
  };
  const Eigen::MatrixXd b_red = drop_slack_col(s.b);
  const Eigen::MatrixXd flow_map = drop_slack_col(s.d.asDiagonal() * a.transpose());

  LpSetup setup;
  setup.flow_map = flow_map;
  LinearProgram& lp = setup.lp;
  lp.objective = Eigen::VectorXd::Zero(nv);
  for (int k = 0; k < g; ++k) lp.objective[k] = grid.generators()[k].cost_per_mwh;

  lp.eq_lhs = Eigen::MatrixXd::Zero(n, nv);
  lp.eq_rhs = load;
  for (int k = 0; k < g; ++k)
    lp.eq_lhs(grid.bus_index(grid.generators()[k].bus), k) = 1.0;
  lp.eq_lhs.rightCols(n - 1) = -b_red;

  lp.ub_lhs = Eigen::MatrixXd::Zero(2 * l, nv);
  lp.ub_lhs.block(0, g, l, n - 1) = flow_map;
  lp.ub_lhs.block(l, g, l, n - 1) = -flow_map;
  lp.ub_rhs.resize(2 * l);
  lp.ub_rhs.head(l) = grid.flow_limits();
  lp.ub_rhs.tail(l) = grid.flow_limits();

  lp.lower = Eigen::VectorXd::Constant(nv, -kLpInf);
  lp.upper = Eigen::VectorXd::Constant(nv, kLpInf);
  for (int k = 0; k < g; ++k) {
    lp.lower[k] = grid.generators()[k].min_mw;
    lp.upper[k] = grid.generators()[k].max_mw;
  }
  return setup;
}

DispatchSolution extract_solution(const GridCase& grid, const Eigen::VectorXd& x,
                                  const LpSetup& setup, const LpResult& res) {
  DispatchSolution sol;
  sol.x = x;
  sol.lp_solves = 1;
  if (res.status != LpStatus::Optimal) return sol;
  const int g = grid.n_generators();
  sol.g = res.x.head(g);
  sol.theta = res.x.tail(grid.n_buses() - 1);
  sol.flows = setup.flow_map * sol.theta;
  sol.cost = res.objective;
  sol.feasible = true;
  return sol;
}

// Cost-only solve used inside the reactance search.
bool lp_cost(const GridCase& grid, const Eigen::VectorXd& load,
             const Eigen::VectorXd& x, double* cost) {
  const LpSetup setup = build_dispatch_lp(grid, load, x);
  const LpResult res = solve_lp(setup.lp);
  if (res.status != LpStatus::Optimal) return false;
  *cost = res.objective;
  return true;
}

// ---- reactance search -----------------------------------------------------

struct SearchProblem {
  const GridCase* grid = nullptr;
  const Eigen::VectorXd* load = nullptr;
  const Eigen::MatrixXd* q_attacker = nullptr;  // orthonormal basis or null
  double gamma_th = 0.0;
  Eigen::VectorXd lo, hi;
  std::vector<int> free_coords;
  std::atomic<long>* lp_solves = nullptr;
};

struct Candidate {
  Eigen::VectorXd x;
  double cost = kLpInf;
  double gamma = 0.0;
  bool lp_ok = false;
  double max_gamma_seen = 0.0;
  bool gamma_feasible() const { return lp_ok && gamma >= 0.0; }
};

double fast_gamma(const Eigen::MatrixXd& q_att, const Eigen::MatrixXd& h) {
  // H(x) of a connected grid has full column rank, so thin QR spans Col(H).
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(h);
  const Eigen::MatrixXd q =
      qr.householderQ() * Eigen::MatrixXd::Identity(h.rows(), h.cols());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(q_att.transpose() * q);
  const auto& sv = svd.singularValues();
  const double c = std::clamp(sv[sv.size() - 1], 0.0, 1.0);
  return std::acos(c);
}

struct Scored {
  double score = kLpInf;
  double cost = kLpInf;
  double gamma = 0.0;
  bool lp_ok = false;
};

Scored evaluate(const SearchProblem& prob, const Eigen::VectorXd& x) {
  Scored s;
  prob.lp_solves->fetch_add(1, std::memory_order_relaxed);
  if (!lp_cost(*prob.grid, *prob.load, x, &s.cost)) return s;
  s.lp_ok = true;
  if (prob.q_attacker) {
    s.gamma = fast_gamma(*prob.q_attacker, measurement_matrix(*prob.grid, x));
    // One-sided penalty keeps refinement moving toward the constraint
    // boundary from the infeasible side.
    constexpr double kPenalty = 1e9;
    s.score = s.cost + kPenalty * std::max(0.0, prob.gamma_th - s.gamma);
  } else {
    s.score = s.cost;
  }
  return s;
}

Candidate refine(const SearchProblem& prob, Eigen::VectorXd x, int max_sweeps) {
  static constexpr double kSteps[] = {0.35, 0.15, 0.06, 0.024, 0.01};
  Scored cur = evaluate(prob, x);
  double max_gamma = cur.lp_ok ? cur.gamma : 0.0;

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool improved = false;
    for (int l : prob.free_coords) {
      const double width = prob.hi[l] - prob.lo[l];
      for (double dir : {1.0, -1.0}) {
        for (double frac : kSteps) {
          for (;;) {
            Eigen::VectorXd x2 = x;
            x2[l] = std::clamp(x2[l] + dir * frac * width, prob.lo[l], prob.hi[l]);
            if (x2[l] == x[l]) break;
            const Scored next = evaluate(prob, x2);
            if (next.lp_ok) max_gamma = std::max(max_gamma, next.gamma);
            if (next.score < cur.score - 1e-9) {
              x = std::move(x2);
              cur = next;
              improved = true;
            } else {
              break;
            }
          }
        }
      }
    }
    if (!improved) break;
  }
  Candidate cand;
  cand.x = std::move(x);
  cand.cost = cur.cost;
  cand.gamma = cur.gamma;
  cand.lp_ok = cur.lp_ok;
  cand.max_gamma_seen = max_gamma;
  return cand;
}

struct SearchOutcome {
  Candidate best;         // best gamma-feasible candidate, if any
  bool have_feasible = false;
  double max_gamma_seen = 0.0;
  int restarts = 0;
  long lp_solves = 0;
};

SearchOutcome reactance_search(const GridCase& grid, const Eigen::VectorXd& load,
                               const Eigen::MatrixXd* q_attacker, double gamma_th,
                               const SearchOptions& opts) {
  SearchProblem prob;
  prob.grid = &grid;
  prob.load = &load;
  prob.q_attacker = q_attacker;
  prob.gamma_th = gamma_th;
  prob.lo = grid.reactance_lower();
  prob.hi = grid.reactance_upper();
  prob.free_coords = grid.dfacts_branches();
  std::atomic<long> lp_count{0};
  prob.lp_solves = &lp_count;

  const Eigen::VectorXd x_default =
      grid.default_reactances().cwiseMax(prob.lo).cwiseMin(prob.hi);

  std::vector<Eigen::VectorXd> starts;
  if (opts.warm_start) {
    starts.push_back(opts.warm_start->cwiseMax(prob.lo).cwiseMin(prob.hi));
  }
  starts.push_back(x_default);
  RandomStream master(opts.seed);
  RandomStream restart_rng = master.substream(kRestartTag);
  int random_index = 0;
  const int total = std::max<int>(1, opts.restarts);
  while (static_cast<int>(starts.size()) < total) {
    RandomStream rs = restart_rng.substream(static_cast<std::uint64_t>(random_index++));
    Eigen::VectorXd x = x_default;
    for (int l : prob.free_coords) x[l] = rs.uniform(prob.lo[l], prob.hi[l]);
    starts.push_back(std::move(x));
  }

  // With no adjustable branches every start collapses to the default point.
  const int n_runs = prob.free_coords.empty() ? 1 : static_cast<int>(starts.size());
  std::vector<Candidate> results(static_cast<std::size_t>(n_runs));
  parallel_for(n_runs, opts.threads, [&](int r) {
    results[static_cast<std::size_t>(r)] =
        refine(prob, starts[static_cast<std::size_t>(r)], opts.max_sweeps);
  });

  SearchOutcome out;
  out.restarts = n_runs;
  Candidate best_infeasible;
  for (const auto& cand : results) {
    out.max_gamma_seen = std::max(out.max_gamma_seen, cand.max_gamma_seen);
    if (!cand.lp_ok) continue;
    const bool feas = cand.gamma >= gamma_th - kGammaFeasTol;
    if (feas) {
      if (!out.have_feasible ||
          cand.cost < out.best.cost - std::abs(out.best.cost) * opts.improve_rel) {
        out.best = cand;
        out.have_feasible = true;
      }
    } else if (!out.have_feasible) {
      if (!best_infeasible.lp_ok || cand.gamma > best_infeasible.gamma + 1e-9)
        best_infeasible = cand;
    }
  }
  if (!out.have_feasible) out.best = best_infeasible;
  out.lp_solves = lp_count.load();
  return out;
}

}  // namespace

DispatchSolution dispatch_lp(const GridCase& grid, const Eigen::VectorXd& load,
                             const Eigen::VectorXd& x) {
  LpSetup setup = build_dispatch_lp(grid, load, x);
  const LpResult first = solve_lp(setup.lp);
  DispatchSolution sol = extract_solution(grid, x, setup, first);
  if (!sol.feasible) return sol;

  // Lexicographic tie-break: among cost-equal optima, make each generator in
  // turn as small as possible. Keeps degenerate dispatches reproducible.
  const int g = grid.n_generators();
  const int nv = static_cast<int>(setup.lp.objective.size());
  LinearProgram pinned = setup.lp;
  const double cost_slack = 1e-9 * std::max(1.0, std::abs(first.objective));
  Eigen::MatrixXd extra = Eigen::MatrixXd::Zero(1, nv);
  extra.row(0).head(g) = setup.lp.objective.head(g).transpose();
  pinned.ub_lhs.conservativeResize(pinned.ub_lhs.rows() + 1, Eigen::NoChange);
  pinned.ub_lhs.bottomRows(1) = extra;
  pinned.ub_rhs.conservativeResize(pinned.ub_rhs.size() + 1);
  pinned.ub_rhs[pinned.ub_rhs.size() - 1] = first.objective + cost_slack;

  LpResult refined = first;
  bool ok = true;
  for (int k = 0; k < g && ok; ++k) {
    LinearProgram step = pinned;
    step.objective = Eigen::VectorXd::Zero(nv);
    step.objective[k] = 1.0;
    const LpResult res = solve_lp(step);
    sol.lp_solves++;
    if (res.status != LpStatus::Optimal) {
      ok = false;
      break;
    }
    refined = res;
    pinned.upper[k] = std::max(res.x[k] + 1e-9 * std::max(1.0, std::abs(res.x[k])),
                               pinned.lower[k]);
  }
  if (ok) {
    DispatchSolution out = extract_solution(grid, x, setup, refined);
    out.cost = setup.lp.objective.dot(refined.x);
    out.lp_solves = sol.lp_solves;
    return out;
  }
  return sol;  // fall back to the plain optimum on refinement trouble
}

std::string check_dispatch(const GridCase& grid, const Eigen::VectorXd& load,
                           const DispatchSolution& sol, double tol_mw) {
  std::ostringstream out;
  if (!sol.feasible) return "solution marked infeasible";
  const Susceptance s = susceptance_matrices(grid, sol.x);
  const int slack = grid.ref_index();
  Eigen::VectorXd theta_full = Eigen::VectorXd::Zero(grid.n_buses());
  int idx = 0;
  for (int i = 0; i < grid.n_buses(); ++i)
    if (i != slack) theta_full[i] = sol.theta[idx++];
  const Eigen::VectorXd injections = s.b * theta_full;
  Eigen::VectorXd net = -load;
  for (int k = 0; k < grid.n_generators(); ++k) {
    net[grid.bus_index(grid.generators()[k].bus)] += sol.g[k];
    const auto& gen = grid.generators()[k];
    if (sol.g[k] < gen.min_mw - tol_mw || sol.g[k] > gen.max_mw + tol_mw)
      out << "generator " << k << " violates limits; ";
  }
  if ((injections - net).lpNorm<Eigen::Infinity>() > tol_mw)
    out << "nodal balance violated by "
        << (injections - net).lpNorm<Eigen::Infinity>() << " MW; ";
  const Eigen::VectorXd fmax = grid.flow_limits();
  for (int l = 0; l < grid.n_branches(); ++l)
    if (std::abs(sol.flows[l]) > fmax[l] + tol_mw) out << "flow limit on branch " << l
                                                       << " violated; ";
  const Eigen::MatrixXd a = incidence_matrix(grid);
  const Eigen::VectorXd f2 = s.d.asDiagonal() * a.transpose() * theta_full;
  if ((f2 - sol.flows).lpNorm<Eigen::Infinity>() > tol_mw)
    out << "flow vector inconsistent with angles; ";
  return out.str();
}

DispatchSolution baseline_opf(const GridCase& grid, const Eigen::VectorXd& load,
                              const SearchOptions& opts) {
  const SearchOutcome outcome =
      reactance_search(grid, load, nullptr, 0.0, opts);
  if (!outcome.best.lp_ok) {
    DispatchSolution sol;
    sol.x = grid.default_reactances();
    sol.restarts_used = outcome.restarts;
    sol.lp_solves = outcome.lp_solves;
    return sol;  // infeasible at every sampled reactance
  }
  DispatchSolution sol = dispatch_lp(grid, load, outcome.best.x);
  sol.restarts_used = outcome.restarts;
  sol.lp_solves += outcome.lp_solves;
  return sol;
}

PerturbationPlan mtd_opf(const GridCase& grid, const Eigen::VectorXd& load,
                         const Eigen::MatrixXd& h_attacker, Angle gamma_th,
                         const SearchOptions& opts, const DispatchSolution* baseline) {
  if (gamma_th.radians < 0.0 || gamma_th.radians > 1.5707963267948966)
    throw ModelError("gamma threshold must lie in [0, pi/2]");
  DispatchSolution base_local;
  if (!baseline) {
    SearchOptions base_opts = opts;
    base_opts.warm_start.reset();
    base_local = baseline_opf(grid, load, base_opts);
    baseline = &base_local;
  }
  if (!baseline->feasible) throw ModelError("baseline dispatch infeasible");

  const OrthonormalBasis q_att = orthonormal_basis(h_attacker);
  const SearchOutcome outcome =
      reactance_search(grid, load, &q_att.q, gamma_th.radians, opts);

  PerturbationPlan plan;
  plan.max_gamma_found = outcome.max_gamma_seen;
  if (!outcome.best.lp_ok) {
    plan.x_prime = grid.default_reactances();
    return plan;  // no dispatchable point found at all
  }
  plan.feasible = outcome.have_feasible;
  plan.x_prime = outcome.best.x;
  plan.h_prime = measurement_matrix(grid, plan.x_prime);
  plan.gamma_vs_attacker = Angle{outcome.best.gamma};
  plan.gamma_vs_current =
      subspace_angle(measurement_matrix(grid, baseline->x), plan.h_prime);
  plan.dispatch = dispatch_lp(grid, load, plan.x_prime);
  plan.dispatch.restarts_used = outcome.restarts;
  plan.dispatch.lp_solves += outcome.lp_solves;
  plan.c_mtd = mtd_cost(baseline->cost, plan.dispatch.cost);
  return plan;
}

double mtd_cost(double c_opf_base, double c_opf_mtd) {
  if (c_opf_base <= 0.0) throw ModelError("baseline cost must be positive");
  return (c_opf_mtd - c_opf_base) / c_opf_base;
}

}  // namespace mtd
