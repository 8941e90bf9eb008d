#pragma once

#include <Eigen/Dense>
#include <utility>

namespace mtd {

// Singular values below kRankTol * (largest singular value) count as zero.
inline constexpr double kRankTol = 1e-8;

struct OrthonormalBasis {
  Eigen::MatrixXd q;  // M x rank, orthonormal columns
  int rank = 0;
};

// Orthonormal basis of the column space of m, rank decided at tolerance tol.
// Throws ModelError on an all-zero matrix.
OrthonormalBasis orthonormal_basis(const Eigen::MatrixXd& m, double tol = kRankTol);

struct Angle {
  double radians = 0.0;
};

// Separation between the column spaces of h1 and h2: the largest principal
// angle, arccos of the smallest singular value of Q1^T Q2. Zero iff one
// space contains the other; pi/2 iff some direction of one space is
// orthogonal to all of the other. Symmetric and scale-invariant.
Angle subspace_angle(const Eigen::MatrixXd& h1, const Eigen::MatrixXd& h2,
                     double tol = kRankTol);

// Oblique projector onto Col(h) along the W-orthogonal complement:
// Gamma = H (H^T W H)^{-1} H^T W. Requires full column rank.
Eigen::MatrixXd projector(const Eigen::MatrixXd& h, const Eigen::VectorXd& w_diag);

// (rank(h), rank([h a])). The ranks are equal iff a lies in Col(h) at
// tolerance tol.
std::pair<int, int> rank_of_augmented(const Eigen::MatrixXd& h,
                                      const Eigen::VectorXd& a, double tol = kRankTol);

// Basis of the W-orthogonal complement of Col(h) in R^M, returned so that
// h^T W Q = 0. With uniform W this is the plain orthogonal complement.
Eigen::MatrixXd orthogonal_complement_basis(const Eigen::MatrixXd& h,
                                            const Eigen::VectorXd& w_diag);

}  // namespace mtd
