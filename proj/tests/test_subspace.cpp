#include <doctest.h>

#include "mtd/estimation.hpp"
#include "mtd/grid.hpp"
#include "mtd/rng.hpp"
#include "mtd/subspace.hpp"
#include "test_util.hpp"

using namespace mtd;
using mtd_test::load_case;

namespace {

// Independent rank oracle: Gaussian elimination with partial pivoting.
int row_reduction_rank(Eigen::MatrixXd m, double tol = 1e-9) {
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0;
  int rank = 0;
  const int rows = static_cast<int>(m.rows());
  const int cols = static_cast<int>(m.cols());
  for (int col = 0; col < cols && rank < rows; ++col) {
    int pivot = rank;
    for (int r = rank + 1; r < rows; ++r)
      if (std::abs(m(r, col)) > std::abs(m(pivot, col))) pivot = r;
    if (std::abs(m(pivot, col)) < tol * scale) continue;
    m.row(rank).swap(m.row(pivot));
    for (int r = rank + 1; r < rows; ++r)
      m.row(r) -= (m(r, col) / m(rank, col)) * m.row(rank);
    ++rank;
  }
  return rank;
}

Eigen::MatrixXd random_matrix(int rows, int cols, RandomStream& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("orthonormal basis") {
  const OrthonormalBasis id3 = orthonormal_basis(Eigen::MatrixXd::Identity(3, 3));
  CHECK(id3.rank == 3);
  CHECK((id3.q.transpose() * id3.q - Eigen::MatrixXd::Identity(3, 3))
            .lpNorm<Eigen::Infinity>() < 1e-10);

  Eigen::MatrixXd dup(3, 2);
  dup << 1, 2, 2, 4, -1, -2;  // second column doubles the first
  CHECK(orthonormal_basis(dup).rank == 1);

  CHECK_THROWS_AS(orthonormal_basis(Eigen::MatrixXd::Zero(3, 3)), ModelError);
}

TEST_CASE("14-bus measurement matrix rank via row-reduction oracle") {
  const GridCase g = load_case("case14.grid");
  const Eigen::MatrixXd h = measurement_matrix(g, g.default_reactances());
  CHECK(orthonormal_basis(h).rank == 13);
  CHECK(row_reduction_rank(h) == 13);
}

TEST_CASE("subspace angle definitional cases") {
  const GridCase g = load_case("case14.grid");
  const Eigen::MatrixXd h = measurement_matrix(g, g.default_reactances());
  CHECK(subspace_angle(h, h).radians <= 1e-7);
  CHECK(subspace_angle(h, 1.3 * h).radians <= 1e-7);

  const Eigen::VectorXd w = Eigen::VectorXd::Ones(h.rows());
  const Eigen::MatrixXd perp = orthogonal_complement_basis(h, w);
  CHECK(subspace_angle(h, perp).radians == doctest::Approx(1.5707963268).epsilon(1e-9));
}

TEST_CASE("subspace angle symmetry and scale invariance") {
  RandomStream rng(42);
  const Eigen::MatrixXd m1 = random_matrix(20, 4, rng);
  const Eigen::MatrixXd m2 = random_matrix(20, 6, rng);
  const double g12 = subspace_angle(m1, m2).radians;
  const double g21 = subspace_angle(m2, m1).radians;
  CHECK(g12 == doctest::Approx(g21).epsilon(1e-12));
  CHECK(subspace_angle(-2.5 * m1, m2).radians == doctest::Approx(g12).epsilon(1e-12));
  CHECK(g12 >= 0.0);
  CHECK(g12 <= 1.5707963268);
}

TEST_CASE("projector contract") {
  // single coordinate column
  Eigen::MatrixXd e1 = Eigen::MatrixXd::Zero(4, 1);
  e1(0, 0) = 1.0;
  const Eigen::MatrixXd gamma = projector(e1, Eigen::VectorXd::Ones(4));
  Eigen::MatrixXd want = Eigen::MatrixXd::Zero(4, 4);
  want(0, 0) = 1.0;
  CHECK((gamma - want).lpNorm<Eigen::Infinity>() < 1e-12);

  const GridCase g = load_case("case14.grid");
  const Eigen::MatrixXd h = measurement_matrix(g, g.default_reactances());
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(h.rows());
  const Eigen::MatrixXd gh = projector(h, w);

  // idempotency and reproduction of the column space
  CHECK((gh * gh - gh).lpNorm<Eigen::Infinity>() < 1e-9);
  RandomStream rng(3);
  for (int t = 0; t < 10; ++t) {
    Eigen::VectorXd c(h.cols());
    for (int i = 0; i < c.size(); ++i) c[i] = rng.normal();
    CHECK(((Eigen::MatrixXd::Identity(h.rows(), h.rows()) - gh) * (h * c))
              .lpNorm<Eigen::Infinity>() < 1e-8);
  }

  // unit-norm projection bound, W = I
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd a(h.rows());
    for (int i = 0; i < a.size(); ++i) a[i] = rng.normal();
    CHECK((a - gh * a).norm() <= a.norm() * (1.0 + 1e-12));
  }

  // W-weighted bound for a nonuniform weight
  Eigen::VectorXd w2(h.rows());
  for (int i = 0; i < w2.size(); ++i) w2[i] = 0.5 + rng.uniform();
  const Eigen::MatrixXd gw = projector(h, w2);
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd a(h.rows());
    for (int i = 0; i < a.size(); ++i) a[i] = rng.normal();
    const Eigen::VectorXd r = a - gw * a;
    const double rn = std::sqrt(r.dot(w2.asDiagonal() * r));
    const double an = std::sqrt(a.dot(w2.asDiagonal() * a));
    CHECK(rn <= an * (1.0 + 1e-12));
  }

  // rank-deficient input is rejected
  Eigen::MatrixXd sing(4, 2);
  sing << 1, 2, 2, 4, 3, 6, 4, 8;
  CHECK_THROWS_AS(projector(sing, Eigen::VectorXd::Ones(4)), ModelError);
}

TEST_CASE("rank of augmented matrix") {
  const GridCase g = load_case("case14.grid");
  const Eigen::MatrixXd h = measurement_matrix(g, g.default_reactances());
  RandomStream rng(11);

  Eigen::VectorXd c(h.cols());
  for (int i = 0; i < c.size(); ++i) c[i] = rng.normal();
  const auto [r1, r2] = rank_of_augmented(h, h * c);
  CHECK(r1 == 13);
  CHECK(r2 == 13);

  const Eigen::VectorXd w = Eigen::VectorXd::Ones(h.rows());
  const Eigen::MatrixXd perp = orthogonal_complement_basis(h, w);
  const auto [r3, r4] = rank_of_augmented(h, perp.col(0));
  CHECK(r4 == r3 + 1);

  // random vectors vs a least-squares membership oracle
  for (int t = 0; t < 25; ++t) {
    Eigen::VectorXd a(h.rows());
    for (int i = 0; i < a.size(); ++i) a[i] = rng.normal();
    const Eigen::VectorXd fit = h.colPivHouseholderQr().solve(a);
    const bool member = (a - h * fit).norm() < 1e-8 * a.norm();
    const auto [ra, rb] = rank_of_augmented(h, a);
    CHECK((ra == rb) == member);
  }

  CHECK_THROWS_AS(rank_of_augmented(h, Eigen::VectorXd::Ones(3)), ModelError);
}

TEST_CASE("orthogonal complement basis is W-orthogonal to the column space") {
  const GridCase g = load_case("case14.grid");
  const Eigen::MatrixXd h = measurement_matrix(g, g.default_reactances());
  RandomStream rng(5);
  Eigen::VectorXd w(h.rows());
  for (int i = 0; i < w.size(); ++i) w[i] = 0.25 + rng.uniform();
  const Eigen::MatrixXd q = orthogonal_complement_basis(h, w);
  CHECK(q.cols() == h.rows() - 13);
  CHECK((h.transpose() * w.asDiagonal() * q).lpNorm<Eigen::Infinity>() < 1e-8);
}
