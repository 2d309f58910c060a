#include "matcomp/linalg.hpp"

#include <cmath>
#include <string>

#include "matcomp/errors.hpp"

namespace matcomp {

bool all_finite(const DenseMatrix& m) { return m.allFinite(); }

Subspace::Subspace(DenseMatrix basis) : basis_(std::move(basis)) {
  if (basis_.rows() < 1 || basis_.cols() < 1) {
    throw InvalidInputError("subspace basis must be non-empty");
  }
  if (basis_.cols() > basis_.rows()) {
    throw InvalidInputError("subspace dimension exceeds ambient dimension");
  }
  if (!basis_.allFinite()) {
    throw InvalidInputError("subspace basis has non-finite entries");
  }
  const DenseMatrix gram = basis_.transpose() * basis_;
  const double err =
      (gram - DenseMatrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
  if (err > kOrthonormalTol) {
    throw InvalidInputError("subspace basis is not column-orthonormal (max |B^T B - I| = " +
                            std::to_string(err) + ")");
  }
}

Subspace Subspace::identity(Eigen::Index ambient, Eigen::Index dim) {
  return Subspace(DenseMatrix::Identity(ambient, dim));
}

Projector Subspace::projector() const {
  DenseMatrix p = basis_ * basis_.transpose();
  // Exact symmetry regardless of the product's rounding.
  p = 0.5 * (p + p.transpose()).eval();
  return Projector(std::move(p), Projector::Trusted{});
}

Projector::Projector(DenseMatrix m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols() || m_.rows() < 1) {
    throw InvalidInputError("projector must be a non-empty square matrix");
  }
  if (!m_.allFinite()) {
    throw InvalidInputError("projector has non-finite entries");
  }
  if ((m_ - m_.transpose()).cwiseAbs().maxCoeff() > kProjectorTol) {
    throw InvalidInputError("projector is not symmetric");
  }
  if ((m_ * m_ - m_).norm() > kProjectorTol) {
    throw InvalidInputError("projector is not idempotent");
  }
}

Eigen::Index Projector::rank() const { return static_cast<Eigen::Index>(std::lround(trace())); }

Vector canonicalize_signs(DenseMatrix& columns) {
  Vector signs = Vector::Ones(columns.cols());
  for (Eigen::Index j = 0; j < columns.cols(); ++j) {
    Eigen::Index arg = 0;
    columns.col(j).cwiseAbs().maxCoeff(&arg);
    if (columns(arg, j) < 0.0) {
      columns.col(j) *= -1.0;
      signs(j) = -1.0;
    }
  }
  return signs;
}

SvdResult thin_svd(const DenseMatrix& m, Eigen::Index k) {
  if (!m.allFinite()) {
    throw InvalidInputError("thin_svd: matrix has non-finite entries");
  }
  const Eigen::Index kmax = std::min(m.rows(), m.cols());
  if (k < 1 || k > kmax) {
    throw InvalidInputError("thin_svd: k=" + std::to_string(k) + " outside [1, " +
                            std::to_string(kmax) + "]");
  }
  Eigen::BDCSVD<DenseMatrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdResult out;
  out.u = svd.matrixU().leftCols(k);
  out.v = svd.matrixV().leftCols(k);
  out.singular_values = svd.singularValues().head(k);
  const Vector signs = canonicalize_signs(out.u);
  out.v *= signs.asDiagonal();
  return out;
}

SymEigen sym_eigen_desc(const DenseMatrix& m) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw InvalidInputError("symmetric eigensolver needs a non-empty square matrix");
  }
  if (!m.allFinite()) {
    throw InvalidInputError("symmetric eigensolver: non-finite entries");
  }
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > kProjectorTol) {
    throw InvalidInputError("symmetric eigensolver: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(m);
  if (es.info() != Eigen::Success) {
    throw NumericFailureError("symmetric eigensolver did not converge", 0);
  }
  SymEigen out;
  out.values = es.eigenvalues().reverse();
  out.vectors = es.eigenvectors().rowwise().reverse();
  canonicalize_signs(out.vectors);
  return out;
}

Subspace top_eigvecs_sym(const DenseMatrix& m, Eigen::Index k) {
  if (k < 1 || k > m.rows()) {
    throw InvalidInputError("top_eigvecs_sym: k=" + std::to_string(k) + " outside [1, " +
                            std::to_string(m.rows()) + "]");
  }
  SymEigen eig = sym_eigen_desc(m);
  return Subspace(eig.vectors.leftCols(k));
}

double alignment(const Projector& p1, const Projector& p2) {
  if (p1.ambient_dim() != p2.ambient_dim()) {
    throw DimensionMismatchError("alignment: projectors act on different ambient dimensions");
  }
  // Both are symmetric, so trace(P1 P2) is the elementwise inner product.
  return p1.matrix().cwiseProduct(p2.matrix()).sum();
}

double alignment(const Subspace& s1, const Subspace& s2) {
  if (s1.ambient_dim() != s2.ambient_dim()) {
    throw DimensionMismatchError("alignment: subspaces live in different ambient dimensions");
  }
  return (s1.basis().transpose() * s2.basis()).squaredNorm();
}

Subspace orthonormalize(const DenseMatrix& m) {
  if (m.cols() < 1 || m.cols() > m.rows()) {
    throw DegenerateInputError("orthonormalize: need 1 <= cols <= rows");
  }
  if (!m.allFinite()) {
    throw InvalidInputError("orthonormalize: non-finite entries");
  }
  Eigen::HouseholderQR<DenseMatrix> qr(m);
  const DenseMatrix& packed = qr.matrixQR();
  const double scale = m.norm();
  DenseMatrix q = qr.householderQ() * DenseMatrix::Identity(m.rows(), m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const double rjj = packed(j, j);
    if (!(std::abs(rjj) > 1e-10 * scale)) {
      throw DegenerateInputError("orthonormalize: columns are linearly dependent");
    }
    if (rjj < 0.0) q.col(j) *= -1.0;
  }
  return Subspace(std::move(q));
}

}  // namespace matcomp
