#pragma once

#include <cmath>

#include "matcomp/completion.hpp"
#include "matcomp/linalg.hpp"
#include "matcomp/rng.hpp"
#include "matcomp/simulation.hpp"
#include "matcomp/subspace.hpp"

namespace testing {

inline matcomp::DenseMatrix gaussian(Eigen::Index rows, Eigen::Index cols, matcomp::Rng& rng) {
  matcomp::DenseMatrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  return m;
}

inline matcomp::DenseMatrix gaussian(Eigen::Index rows, Eigen::Index cols, matcomp::Seed seed) {
  matcomp::Rng rng(seed);
  return gaussian(rows, cols, rng);
}

// Rank-r matrix with prescribed singular values and random singular vectors.
inline matcomp::DenseMatrix low_rank(Eigen::Index p, Eigen::Index q,
                                     const matcomp::Vector& sv, matcomp::Seed seed) {
  matcomp::Rng rng(seed);
  const auto r = sv.size();
  const auto u = matcomp::orthonormalize(gaussian(p, r, rng));
  const auto v = matcomp::orthonormalize(gaussian(q, r, rng));
  return u.basis() * sv.asDiagonal() * v.basis().transpose();
}

// Every cell observed exactly once, row-major order.
inline matcomp::ObservationSet one_pass(const matcomp::DenseMatrix& theta) {
  matcomp::ObservationSet obs{theta.rows(), theta.cols(), {}};
  for (Eigen::Index a = 0; a < theta.rows(); ++a)
    for (Eigen::Index b = 0; b < theta.cols(); ++b) obs.samples.push_back({a, b, theta(a, b)});
  return obs;
}

// Six 2-d subspaces of R^50 within d_k <= 0.05 of a common plane, named
// good0..good5, followed by three Haar-random ones named noise0..noise2.
inline std::vector<matcomp::SourceSubspaces> planted_selection(matcomp::Seed seed) {
  using namespace matcomp;
  Rng rng(seed);
  const DenseMatrix frame = sample_haar_subspace(50, 2, rng).basis();
  std::vector<SourceSubspaces> out;
  for (int k = 0; k < 6; ++k) {
    // Principal angles with sin^2 summing to d_k.
    const double d = rng.uniform(0.0, 0.05);
    const double split = rng.uniform(0.0, 1.0);
    const double s1 = std::sqrt(d * split), s2 = std::sqrt(d * (1.0 - split));
    const DenseMatrix g = gaussian(50, 2, rng);
    const DenseMatrix w =
        orthonormalize(g - frame.leftCols(2) * (frame.leftCols(2).transpose() * g)).basis();
    DenseMatrix b(50, 2);
    b.col(0) = std::sqrt(1.0 - s1 * s1) * frame.col(0) + s1 * w.col(0);
    b.col(1) = std::sqrt(1.0 - s2 * s2) * frame.col(1) + s2 * w.col(1);
    const Subspace sub = orthonormalize(b);
    out.emplace_back("good" + std::to_string(k), 100, sub, sub);
  }
  for (int k = 0; k < 3; ++k) {
    const Subspace sub = sample_haar_subspace(50, 2, rng);
    out.emplace_back("noise" + std::to_string(k), 100, sub, sub);
  }
  return out;
}

inline double max_abs(const matcomp::DenseMatrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace testing
