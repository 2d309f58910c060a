#pragma once

#include <optional>
#include <string>
#include <vector>

#include "matcomp/completion.hpp"
#include "matcomp/linalg.hpp"

namespace matcomp {

enum class Side { Left, Right };

// Leading singular subspaces of one debiased source.
struct SourceSubspaces {
  std::string source_id;
  std::size_t n = 0;
  Eigen::Index r = 0;
  Subspace left;
  Subspace right;
  Projector left_projector;
  Projector right_projector;

  SourceSubspaces(std::string id, std::size_t n_samples, Subspace u, Subspace v);

  const Projector& projector(Side side) const {
    return side == Side::Left ? left_projector : right_projector;
  }
  const Subspace& basis(Side side) const { return side == Side::Left ? left : right; }
};

struct SelectionConfig {
  double tau = 0.5;
  int max_iters = 100;
  // nullopt: start from the all-sources barycenter.
  std::optional<Subspace> init;
};

struct IntegrationResult {
  std::optional<Subspace> subspace;  // absent when nothing was selected
  std::vector<std::string> selected;
  int iterations = 0;
  double objective = 0.0;
  std::vector<double> objective_trace;
  std::vector<std::string> warnings;

  bool empty() const { return !subspace.has_value(); }
};

SourceSubspaces extract_subspaces(const DebiasedMatrix& theta);

// Weighted projector average (1/N) sum_k n_k P_k on one side.
DenseMatrix weighted_projector_mean(const std::vector<SourceSubspaces>& sources, Side side);

// Leading cut_dim eigenvectors of the weighted projector mean.
IntegrationResult barycenter(const std::vector<SourceSubspaces>& sources, Side side,
                             Eigen::Index cut_dim);

// (1/N) sum_k n_k max{tr(P_k P), r_k - tau}
double rectified_objective(const std::vector<SourceSubspaces>& sources, Side side,
                           const Projector& p, double tau);

// Alternates between selecting {k : tr(P_k P) >= r_k - tau} and re-averaging
// over the selection until the selected set repeats.
IntegrationResult rectified_kmeans(const std::vector<SourceSubspaces>& sources, Side side,
                                   Eigen::Index cut_dim, const SelectionConfig& cfg);

// Eigenvalue-ratio heuristic: argmax_{1<=j<=max_dim} lambda_j / lambda_{j+1}
// of the weighted projector mean, smaller j on ties.
Eigen::Index select_cut_dim(const std::vector<SourceSubspaces>& sources, Side side,
                            Eigen::Index max_dim);

}  // namespace matcomp
