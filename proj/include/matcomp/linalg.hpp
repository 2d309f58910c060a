#pragma once

#include <Eigen/Dense>

namespace matcomp {

using DenseMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kOrthonormalTol = 1e-10;
inline constexpr double kProjectorTol = 1e-8;

class Projector;

// Column-orthonormal basis of a subspace of R^ambient_dim.
class Subspace {
 public:
  // Throws InvalidInputError unless basis^T basis = I to kOrthonormalTol.
  explicit Subspace(DenseMatrix basis);

  static Subspace identity(Eigen::Index ambient, Eigen::Index dim);

  Eigen::Index ambient_dim() const { return basis_.rows(); }
  Eigen::Index dim() const { return basis_.cols(); }
  const DenseMatrix& basis() const { return basis_; }

  Projector projector() const;

 private:
  DenseMatrix basis_;
};

// Orthogonal projector P = P^T = P^2. Only ever built from a Subspace or a
// matrix that passes the symmetric/idempotent check.
class Projector {
 public:
  explicit Projector(DenseMatrix m);

  const DenseMatrix& matrix() const { return m_; }
  Eigen::Index ambient_dim() const { return m_.rows(); }
  // trace(P), which equals the rank for a true projector.
  double trace() const { return m_.trace(); }
  Eigen::Index rank() const;

 private:
  friend class Subspace;
  struct Trusted {};
  Projector(DenseMatrix m, Trusted) : m_(std::move(m)) {}

  DenseMatrix m_;
};

struct SvdResult {
  DenseMatrix u;
  Vector singular_values;  // non-increasing
  DenseMatrix v;

  DenseMatrix reconstruct() const {
    return u * singular_values.asDiagonal() * v.transpose();
  }
};

struct SymEigen {
  Vector values;        // non-increasing
  DenseMatrix vectors;  // columns match values
};

bool all_finite(const DenseMatrix& m);

// Top-k singular triplets. Each left singular vector has its largest-magnitude
// coordinate made positive; the right vector is flipped with it.
SvdResult thin_svd(const DenseMatrix& m, Eigen::Index k);

// Full eigendecomposition of a symmetric matrix, largest eigenvalue first,
// with the same sign rule as thin_svd.
SymEigen sym_eigen_desc(const DenseMatrix& m);

// Span of the k leading eigenvectors of a symmetric matrix.
Subspace top_eigvecs_sym(const DenseMatrix& m, Eigen::Index k);

// trace(P1 P2) = sum of squared cosines of the principal angles.
double alignment(const Projector& p1, const Projector& p2);
double alignment(const Subspace& s1, const Subspace& s2);

Subspace orthonormalize(const DenseMatrix& m);

// Flips columns so that each one's largest-magnitude entry is positive.
// Returns the applied signs.
Vector canonicalize_signs(DenseMatrix& columns);

}  // namespace matcomp
