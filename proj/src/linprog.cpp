#include "mtd/linprog.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace mtd {
namespace {

constexpr double kPivotTol = 1e-10;
constexpr double kCostTol = 1e-9;
constexpr double kFeasTol = 1e-7;

// Standard-form problem: min c^T y, A y = b, y >= 0, built by translating
// bounded/free variables. Column j of the original maps to one or two
// standard columns plus an optional range row (for two-sided bounds).
struct StandardForm {
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  // original x = offset + sign * plus_col - minus_col (minus_col < 0 if absent)
  std::vector<double> x_offset;
  std::vector<double> x_sign;
  std::vector<int> plus_col;
  std::vector<int> minus_col;
};

StandardForm to_standard(const LinearProgram& lp) {
  const int n = static_cast<int>(lp.objective.size());
  const int m_eq = static_cast<int>(lp.eq_rhs.size());
  const int m_ub = static_cast<int>(lp.ub_rhs.size());

  // Count extra columns and range rows.
  int cols = 0, range_rows = 0;
  std::vector<int> plus(n), minus(n, -1);
  std::vector<double> offset(n, 0.0), sign(n, 1.0);
  for (int j = 0; j < n; ++j) {
    const double lo = lp.lower.size() ? lp.lower[j] : -kLpInf;
    const double hi = lp.upper.size() ? lp.upper[j] : kLpInf;
    if (lo > hi) throw std::invalid_argument("lower bound exceeds upper bound");
    if (std::isfinite(lo)) {
      offset[j] = lo;
      sign[j] = 1.0;
      plus[j] = cols++;
      if (std::isfinite(hi)) ++range_rows;
    } else if (std::isfinite(hi)) {
      offset[j] = hi;
      sign[j] = -1.0;  // x = hi - y
      plus[j] = cols++;
    } else {
      plus[j] = cols++;
      minus[j] = cols++;
    }
  }
  const int slack_cols = m_ub + range_rows;
  const int rows = m_eq + m_ub + range_rows;
  StandardForm sf;
  sf.a = Eigen::MatrixXd::Zero(rows, cols + slack_cols);
  sf.b = Eigen::VectorXd::Zero(rows);
  sf.c = Eigen::VectorXd::Zero(cols + slack_cols);
  sf.x_offset = offset;
  sf.x_sign = sign;
  sf.plus_col = plus;
  sf.minus_col = minus;

  auto emit = [&](int row, int j, double coef) {
    sf.a(row, plus[j]) += coef * sign[j];
    if (minus[j] >= 0) sf.a(row, minus[j]) -= coef;
  };

  for (int j = 0; j < n; ++j) {
    const double cj = lp.objective[j];
    sf.c[plus[j]] += cj * sign[j];
    if (minus[j] >= 0) sf.c[minus[j]] -= cj;
  }
  for (int i = 0; i < m_eq; ++i) {
    double rhs = lp.eq_rhs[i];
    for (int j = 0; j < n; ++j) {
      const double coef = lp.eq_lhs(i, j);
      if (coef == 0.0) continue;
      emit(i, j, coef);
      rhs -= coef * offset[j];
    }
    sf.b[i] = rhs;
  }
  int slack = cols;
  for (int i = 0; i < m_ub; ++i) {
    const int row = m_eq + i;
    double rhs = lp.ub_rhs[i];
    for (int j = 0; j < n; ++j) {
      const double coef = lp.ub_lhs(i, j);
      if (coef == 0.0) continue;
      emit(row, j, coef);
      rhs -= coef * offset[j];
    }
    sf.a(row, slack) = 1.0;
    sf.b[row] = rhs;
    ++slack;
  }
  int row = m_eq + m_ub;
  for (int j = 0; j < n; ++j) {
    const double lo = lp.lower.size() ? lp.lower[j] : -kLpInf;
    const double hi = lp.upper.size() ? lp.upper[j] : kLpInf;
    if (std::isfinite(lo) && std::isfinite(hi)) {
      sf.a(row, plus[j]) = 1.0;
      sf.a(row, slack) = 1.0;
      sf.b[row] = hi - lo;
      ++slack;
      ++row;
    }
  }
  return sf;
}

// Tableau simplex over [A | I_art | b]; returns false on iteration blowup
// (should not happen with Bland's rule).
class Tableau {
 public:
  Tableau(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
    const int m = static_cast<int>(a.rows());
    const int n = static_cast<int>(a.cols());
    m_ = m;
    n_ = n;
    t_ = Eigen::MatrixXd::Zero(m, n + m + 1);
    t_.leftCols(n) = a;
    basis_.resize(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
      double rhs = b[i];
      if (rhs < 0.0) {
        t_.row(i).leftCols(n) *= -1.0;
        rhs = -rhs;
      }
      t_(i, n + i) = 1.0;
      t_(i, n + m) = rhs;
      basis_[static_cast<std::size_t>(i)] = n + i;
    }
  }

  int rows() const { return m_; }
  int struct_cols() const { return n_; }
  int art_begin() const { return n_; }
  double rhs(int i) const { return t_(i, n_ + m_); }
  int basis(int i) const { return basis_[static_cast<std::size_t>(i)]; }

  // Minimize c over the current feasible basis; artificial columns are
  // eligible only when allow_art is true (phase 1).
  bool minimize(const Eigen::VectorXd& c, bool allow_art, double* objective,
                int* iterations) {
    const int total = n_ + m_;
    const long max_iter = 200L * (m_ + total);
    Eigen::VectorXd cost = Eigen::VectorXd::Zero(total);
    if (allow_art)
      cost.tail(m_).setOnes();  // phase 1: drive artificials to zero
    else
      cost.head(n_) = c;

    long iter = 0;
    for (; iter < max_iter; ++iter) {
      // Reduced costs via the basic cost vector: r = c - c_B^T B^{-1} A,
      // read off the maintained tableau.
      Eigen::RowVectorXd cb(m_);
      for (int i = 0; i < m_; ++i) cb[i] = cost[basis_[static_cast<std::size_t>(i)]];
      // Bland: entering = lowest-index column with negative reduced cost.
      int enter = -1;
      for (int j = 0; j < total; ++j) {
        if (!allow_art && j >= n_) break;
        if (is_basic(j)) continue;
        const double rc = cost[j] - cb * t_.col(j);
        if (rc < -kCostTol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) break;  // optimal
      int leave = -1;
      double best_ratio = 0.0;
      for (int i = 0; i < m_; ++i) {
        const double aij = t_(i, enter);
        if (aij > kPivotTol) {
          const double ratio = rhs(i) / aij;
          if (leave < 0 || ratio < best_ratio - kPivotTol ||
              (std::abs(ratio - best_ratio) <= kPivotTol &&
               basis_[static_cast<std::size_t>(i)] <
                   basis_[static_cast<std::size_t>(leave)])) {
            leave = i;
            best_ratio = ratio;
          }
        }
      }
      if (leave < 0) return false;  // unbounded direction
      pivot(leave, enter);
    }
    if (iterations) *iterations += static_cast<int>(iter);
    if (objective) {
      double obj = 0.0;
      for (int i = 0; i < m_; ++i) obj += cost[basis_[static_cast<std::size_t>(i)]] * rhs(i);
      *objective = obj;
    }
    return true;
  }

  // After phase 1: pivot artificial variables out of the basis when a
  // structural column is available; rows that stay artificial are redundant
  // and harmless (rhs ~ 0).
  void expel_artificials() {
    for (int i = 0; i < m_; ++i) {
      if (basis_[static_cast<std::size_t>(i)] < n_) continue;
      for (int j = 0; j < n_; ++j) {
        if (std::abs(t_(i, j)) > 1e-7 && !is_basic(j)) {
          pivot(i, j);
          break;
        }
      }
    }
  }

  Eigen::VectorXd solution() const {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(n_);
    for (int i = 0; i < m_; ++i) {
      const int j = basis_[static_cast<std::size_t>(i)];
      if (j < n_) y[j] = rhs(i);
    }
    return y;
  }

 private:
  bool is_basic(int col) const {
    for (int b : basis_)
      if (b == col) return true;
    return false;
  }

  void pivot(int row, int col) {
    t_.row(row) /= t_(row, col);
    for (int i = 0; i < m_; ++i) {
      if (i == row) continue;
      const double f = t_(i, col);
      if (f != 0.0) t_.row(i) -= f * t_.row(row);
    }
    basis_[static_cast<std::size_t>(row)] = col;
  }

  int m_ = 0, n_ = 0;
  Eigen::MatrixXd t_;
  std::vector<int> basis_;
};

}  // namespace

LpResult solve_lp(const LinearProgram& lp) {
  const StandardForm sf = to_standard(lp);
  Tableau tab(sf.a, sf.b);
  LpResult result;

  double phase1 = 0.0;
  if (!tab.minimize(sf.c, /*allow_art=*/true, &phase1, &result.iterations)) {
    result.status = LpStatus::Infeasible;  // unbounded phase 1 cannot occur
    return result;
  }
  if (phase1 > kFeasTol) {
    result.status = LpStatus::Infeasible;
    return result;
  }
  tab.expel_artificials();

  double phase2 = 0.0;
  if (!tab.minimize(sf.c, /*allow_art=*/false, &phase2, &result.iterations)) {
    result.status = LpStatus::Unbounded;
    return result;
  }

  const Eigen::VectorXd y = tab.solution();
  const int n = static_cast<int>(lp.objective.size());
  result.x.resize(n);
  for (int j = 0; j < n; ++j) {
    double v = sf.x_offset[static_cast<std::size_t>(j)] +
               sf.x_sign[static_cast<std::size_t>(j)] *
                   y[sf.plus_col[static_cast<std::size_t>(j)]];
    if (sf.minus_col[static_cast<std::size_t>(j)] >= 0)
      v -= y[sf.minus_col[static_cast<std::size_t>(j)]];
    result.x[j] = v;
  }
  result.objective = lp.objective.dot(result.x);
  result.status = LpStatus::Optimal;
  return result;
}

}  // namespace mtd
