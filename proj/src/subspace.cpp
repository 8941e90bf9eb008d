#include "mtd/subspace.hpp"

#include <algorithm>
#include <cmath>

#include "mtd/grid.hpp"  // ModelError

namespace mtd {
namespace {

int rank_from_singular_values(const Eigen::VectorXd& sv, double tol) {
  if (sv.size() == 0) return 0;
  const double cutoff = tol * sv[0];
  int r = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > cutoff) ++r;
  return r;
}

}  // namespace

OrthonormalBasis orthonormal_basis(const Eigen::MatrixXd& m, double tol) {
  if (m.size() == 0 || m.norm() == 0.0)
    throw ModelError("orthonormal_basis: zero matrix");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU);
  const int rank = rank_from_singular_values(svd.singularValues(), tol);
  OrthonormalBasis basis;
  basis.rank = rank;
  basis.q = svd.matrixU().leftCols(rank);
  return basis;
}

Angle subspace_angle(const Eigen::MatrixXd& h1, const Eigen::MatrixXd& h2, double tol) {
  const OrthonormalBasis b1 = orthonormal_basis(h1, tol);
  const OrthonormalBasis b2 = orthonormal_basis(h2, tol);
  const Eigen::MatrixXd overlap = b1.q.transpose() * b2.q;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(overlap);
  const Eigen::VectorXd sv = svd.singularValues();
  const int k = std::min(b1.rank, b2.rank);
  // k cosines of principal angles, sorted descending; the smallest cosine
  // belongs to the largest angle.
  double c = sv[k - 1];
  c = std::clamp(c, 0.0, 1.0);
  return Angle{std::acos(c)};
}

Eigen::MatrixXd projector(const Eigen::MatrixXd& h, const Eigen::VectorXd& w_diag) {
  if (w_diag.size() != h.rows())
    throw ModelError("projector: weight size does not match row count");
  if ((w_diag.array() <= 0.0).any())
    throw ModelError("projector: weights must be positive");
  const Eigen::MatrixXd hw = w_diag.asDiagonal() * h;
  const Eigen::MatrixXd gram = h.transpose() * hw;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= kRankTol * kRankTol * ldlt.vectorD().maxCoeff())
    throw ModelError("projector: rank-deficient matrix");
  return h * ldlt.solve(hw.transpose());
}

std::pair<int, int> rank_of_augmented(const Eigen::MatrixXd& h,
                                      const Eigen::VectorXd& a, double tol) {
  if (a.size() != h.rows())
    throw ModelError("rank_of_augmented: dimension mismatch");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd_h(h);
  Eigen::MatrixXd aug(h.rows(), h.cols() + 1);
  aug << h, a;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd_aug(aug);
  return {rank_from_singular_values(svd_h.singularValues(), tol),
          rank_from_singular_values(svd_aug.singularValues(), tol)};
}

Eigen::MatrixXd orthogonal_complement_basis(const Eigen::MatrixXd& h,
                                            const Eigen::VectorXd& w_diag) {
  if (w_diag.size() != h.rows())
    throw ModelError("orthogonal_complement_basis: weight size mismatch");
  const Eigen::VectorXd w_sqrt = w_diag.cwiseSqrt();
  const Eigen::MatrixXd hw = w_sqrt.asDiagonal() * h;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(hw, Eigen::ComputeFullU);
  const int rank = rank_from_singular_values(svd.singularValues(), kRankTol);
  const Eigen::MatrixXd u_perp = svd.matrixU().rightCols(h.rows() - rank);
  // Map back from whitened coordinates so that h^T W (result) = 0.
  return w_sqrt.cwiseInverse().asDiagonal() * u_perp;
}

}  // namespace mtd
