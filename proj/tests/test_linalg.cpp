#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <numbers>

#include "helpers.hpp"
#include "matcomp/errors.hpp"
#include "matcomp/linalg.hpp"
#include "oracles.hpp"

using namespace matcomp;
using testing::gaussian;
using testing::max_abs;

namespace {

DenseMatrix diag3(double a, double b, double c) {
  DenseMatrix m = DenseMatrix::Zero(3, 3);
  m(0, 0) = a;
  m(1, 1) = b;
  m(2, 2) = c;
  return m;
}

DenseMatrix random_symmetric(Eigen::Index n, Seed seed) {
  const DenseMatrix g = gaussian(n, n, seed);
  return 0.5 * (g + g.transpose());
}

DenseMatrix rotation(Eigen::Index n, Seed seed) { return orthonormalize(gaussian(n, n, seed)).basis(); }

}  // namespace

TEST_CASE("Subspace rejects non-orthonormal or malformed bases") {
  DenseMatrix b = DenseMatrix::Identity(4, 2);
  CHECK_NOTHROW(Subspace{b});
  b(0, 0) = 1.0 + 1e-6;
  CHECK_THROWS_AS(Subspace{b}, InvalidInputError);
  CHECK_THROWS_AS(Subspace{DenseMatrix::Identity(2, 3)}, InvalidInputError);
  DenseMatrix nan = DenseMatrix::Identity(3, 1);
  nan(1, 0) = std::nan("");
  CHECK_THROWS_AS(Subspace{nan}, InvalidInputError);
}

TEST_CASE("Projector of a subspace is symmetric, idempotent, trace = dim") {
  for (Seed seed = 1; seed <= 5; ++seed) {
    const Subspace s = orthonormalize(gaussian(9, 4, seed));
    const DenseMatrix p = s.projector().matrix();
    CHECK(max_abs(p - p.transpose()) == 0.0);
    CHECK((p * p - p).norm() <= 1e-8);
    CHECK(std::abs(s.projector().trace() - 4.0) <= 1e-8);
    CHECK(s.projector().rank() == 4);
  }
}

TEST_CASE("Projector validation rejects non-idempotent matrices") {
  CHECK_THROWS_AS(Projector(2.0 * DenseMatrix::Identity(3, 3)), InvalidInputError);
  DenseMatrix asym = DenseMatrix::Zero(2, 2);
  asym(0, 1) = 1.0;
  CHECK_THROWS_AS(Projector{asym}, InvalidInputError);
}

TEST_CASE("thin_svd on a diagonal matrix") {
  const SvdResult r = thin_svd(diag3(3, 2, 1), 2);
  CHECK(r.singular_values(0) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(r.singular_values(1) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(max_abs(r.u.cwiseAbs() - DenseMatrix::Identity(3, 2)) <= 1e-12);
  CHECK(max_abs(r.v.cwiseAbs() - DenseMatrix::Identity(3, 2)) <= 1e-12);
}

TEST_CASE("thin_svd on a rank-one matrix recovers the factors up to sign") {
  Vector a = gaussian(5, 1, 11).col(0).normalized();
  Vector b = gaussian(4, 1, 12).col(0).normalized();
  const SvdResult r = thin_svd(a * b.transpose(), 1);
  CHECK(r.singular_values(0) == doctest::Approx(1.0).epsilon(1e-12));
  const double s = r.u.col(0).dot(a) > 0 ? 1.0 : -1.0;
  CHECK((r.u.col(0) - s * a).norm() <= 1e-12);
  CHECK((r.v.col(0) - s * b).norm() <= 1e-12);
}

TEST_CASE("thin_svd matches a one-sided Jacobi SVD oracle") {
  for (Seed seed : {21u, 22u, 23u}) {
    const DenseMatrix m = gaussian(6, 5, seed);
    const SvdResult r = thin_svd(m, 3);
    const oracle::Svd o = oracle::jacobi_svd(m);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(r.singular_values(k) - o.s(k)) <= 1e-8);
    const DenseMatrix trunc =
        o.u.leftCols(3) * o.s.head(3).asDiagonal() * o.v.leftCols(3).transpose();
    CHECK(max_abs(r.reconstruct() - trunc) <= 1e-8);
    CHECK(max_abs(r.u * r.u.transpose() - oracle::top_projector(o.u, 3)) <= 1e-8);
    CHECK(max_abs(r.v * r.v.transpose() - oracle::top_projector(o.v, 3)) <= 1e-8);
  }
}

TEST_CASE("thin_svd sign convention and validation") {
  const SvdResult r = thin_svd(gaussian(7, 4, 5), 4);
  for (Eigen::Index k = 0; k < 4; ++k) {
    Eigen::Index idx;
    r.u.col(k).cwiseAbs().maxCoeff(&idx);
    CHECK(r.u(idx, k) > 0.0);
  }
  CHECK_THROWS_AS(thin_svd(gaussian(3, 3, 1), 0), InvalidInputError);
  CHECK_THROWS_AS(thin_svd(gaussian(3, 3, 1), 4), InvalidInputError);
  DenseMatrix bad = gaussian(3, 3, 1);
  bad(2, 2) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(thin_svd(bad, 1), InvalidInputError);
}

TEST_CASE("thin_svd reconstruction error is non-increasing in k") {
  const DenseMatrix m = gaussian(8, 6, 77);
  double previous = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 1; k <= 6; ++k) {
    const double err = (m - thin_svd(m, k).reconstruct()).norm();
    CHECK(err <= previous + 1e-12);
    previous = err;
  }
  CHECK(previous <= 1e-10);
}

TEST_CASE("top_eigvecs_sym on diagonal and projector inputs") {
  const Subspace s = top_eigvecs_sym(diag3(5, 4, 1), 2);
  CHECK(max_abs(s.projector().matrix() - oracle::top_projector(DenseMatrix::Identity(3, 3), 2)) <=
        1e-12);

  const Subspace planted = orthonormalize(gaussian(4, 2, 9));
  const DenseMatrix p = planted.projector().matrix();
  CHECK((top_eigvecs_sym(p, 2).projector().matrix() - p).norm() <= 1e-8);
}

TEST_CASE("sym_eigen_desc matches a cyclic Jacobi oracle") {
  const DenseMatrix m = random_symmetric(5, 31);
  const SymEigen e = sym_eigen_desc(m);
  Vector values;
  DenseMatrix vectors;
  oracle::jacobi_eigen(m, values, vectors);
  for (int k = 0; k < 5; ++k) CHECK(std::abs(e.values(k) - values(k)) <= 1e-8);
  for (Eigen::Index k = 0; k < 5; ++k) {
    CHECK(std::abs(std::abs(e.vectors.col(k).dot(vectors.col(k))) - 1.0) <= 1e-8);
  }
  const Subspace top = top_eigvecs_sym(m, 3);
  CHECK(max_abs(top.projector().matrix() - oracle::top_projector(vectors, 3)) <= 1e-8);
}

TEST_CASE("top_eigvecs_sym rejects asymmetric input") {
  DenseMatrix m = random_symmetric(4, 3);
  m(0, 1) += 1e-6;
  CHECK_THROWS_AS(top_eigvecs_sym(m, 2), InvalidInputError);
}

TEST_CASE("top_eigvecs_sym is invariant under orthogonal similarity") {
  for (Seed seed = 40; seed < 45; ++seed) {
    const DenseMatrix m = random_symmetric(6, seed);
    const DenseMatrix q = rotation(6, seed + 100);
    const DenseMatrix p1 = top_eigvecs_sym(m, 2).projector().matrix();
    const DenseMatrix p2 = top_eigvecs_sym(q * m * q.transpose(), 2).projector().matrix();
    CHECK(max_abs(q * p1 * q.transpose() - p2) <= 1e-8);
  }
}

TEST_CASE("alignment closed forms") {
  const Subspace s = orthonormalize(gaussian(6, 3, 8));
  CHECK(alignment(s.projector(), s.projector()) == doctest::Approx(3.0).epsilon(1e-12));

  const Subspace e1 = Subspace::identity(2, 1);
  DenseMatrix e2(2, 1);
  e2 << 0.0, 1.0;
  CHECK(std::abs(alignment(e1.projector(), Subspace(e2).projector())) <= 1e-15);

  const double theta = std::numbers::pi / 3.0;
  DenseMatrix dir(2, 1);
  dir << std::cos(theta), std::sin(theta);
  CHECK(alignment(Subspace(dir).projector(), e1.projector()) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(alignment(Subspace(dir), e1) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("alignment with the orthogonal complement sums to the rank") {
  const DenseMatrix q = rotation(7, 61);
  const Subspace s(q.leftCols(3));
  const Subspace comp(q.rightCols(4));
  const double total = alignment(s.projector(), comp.projector()) +
                       alignment(s.projector(), s.projector());
  CHECK(total == doctest::Approx(3.0).epsilon(1e-10));
}

TEST_CASE("alignment rejects mismatched ambient dimensions") {
  CHECK_THROWS_AS(alignment(Subspace::identity(3, 1), Subspace::identity(4, 1)),
                  DimensionMismatchError);
}

TEST_CASE("orthonormalize spans the input columns") {
  const Subspace id = orthonormalize(DenseMatrix::Identity(4, 2));
  CHECK(max_abs(id.basis() - DenseMatrix::Identity(4, 2)) <= 1e-14);

  DenseMatrix m(2, 2);
  m << 1, 1, 1, -1;
  const Subspace s = orthonormalize(m);
  CHECK(max_abs(s.basis().transpose() * s.basis() - DenseMatrix::Identity(2, 2)) <= 1e-12);

  for (Seed seed = 70; seed < 75; ++seed) {
    const DenseMatrix g = gaussian(8, 3, seed);
    CHECK(max_abs(orthonormalize(g).projector().matrix() - oracle::span_projector(g)) <= 1e-8);
  }
}

TEST_CASE("orthonormalize rejects rank-deficient input") {
  DenseMatrix m = gaussian(5, 2, 3);
  m.col(1) = 2.0 * m.col(0);
  CHECK_THROWS_AS(orthonormalize(m), DegenerateInputError);
}
