#pragma once

#include <optional>
#include <string>
#include <vector>

#include "matcomp/linalg.hpp"
#include "matcomp/rng.hpp"

namespace matcomp {

// One uniform entry sample: y = Theta[a, b] + noise.
struct Sample {
  Eigen::Index a = 0;
  Eigen::Index b = 0;
  double y = 0.0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

// Samples of a single p x q matrix. Duplicate cells are distinct samples.
struct ObservationSet {
  Eigen::Index p = 0;
  Eigen::Index q = 0;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }

  // Throws InvalidInputError on out-of-range indices or non-finite y.
  void validate() const;

  friend bool operator==(const ObservationSet&, const ObservationSet&) = default;
};

// (pq/n) * sum_i y_i e_{a_i} e_{b_i}^T, the inverse-propensity fill-in.
DenseMatrix fill_in(const ObservationSet& obs);

// sum_i (y_i - Theta[a_i, b_i])^2
double residual_sum_squares(const ObservationSet& obs, const DenseMatrix& theta);

struct CrudeSolverConfig {
  Eigen::Index rank = 1;
  int max_iters = 500;
  std::optional<double> step_size;  // nullopt = auto, 0.25 / lambda_1(fill-in)
  double rel_tol = 1e-6;
  double balance_weight = 0.125;
  // Alternating least-squares sweeps between the spectral initializer and
  // gradient descent; 0 runs plain gradient descent from the initializer.
  int als_sweeps = 30;
  // Factor ridge, as a multiple of the (rank+1)-th singular value of the
  // fill-in. 0 gives the unpenalized loss.
  double ridge = 0.1;

  void validate() const;
};

struct CrudeFit {
  DenseMatrix estimate;  // A B^T
  DenseMatrix left;      // A, p x rank
  DenseMatrix right;     // B, q x rank
  int iterations = 0;
  int accepted_steps = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double ridge = 0.0;  // rho actually used
  bool converged = false;
  std::vector<double> loss_trace;  // loss after each accepted step, init first
  std::vector<std::string> warnings;
};

struct DebiasedMatrix {
  DenseMatrix estimate;
  std::size_t n = 0;
  Eigen::Index rank = 1;
  std::string source_id;
};

struct FoldSplit {
  ObservationSet train;
  ObservationSet holdout;
};

// Best rank-`rank` approximation of fill_in(obs).
DenseMatrix spectral_init(const ObservationSet& obs, Eigen::Index rank);

// Balanced factorized gradient descent on
//   (pq/n) sum_i (<A B^T, X_i> - y_i)^2 + w ||A^T A - B^T B||_F^2
//     + rho (||A||_F^2 + ||B||_F^2),   rho = cfg.ridge * lambda_{rank+1}(fill-in)
// started from the spectral initializer refined by cfg.als_sweeps
// alternating least-squares sweeps (kept only if they lower the loss). A step that would raise the loss is
// rejected and the step size halved, so the accepted losses never increase.
CrudeFit crude_complete(const ObservationSet& obs, const CrudeSolverConfig& cfg);

// Partition of sample indices into J holdout folds after a seeded shuffle.
// Fold sizes differ by at most one; the first n mod J folds are larger.
std::vector<FoldSplit> kfold_split(const ObservationSet& obs, int folds, Seed seed);

// crude + (J p q / n_total) * sum_{holdout} (y_i - crude[a_i, b_i]) e_{a_i} e_{b_i}^T
DenseMatrix debias_fold(const DenseMatrix& crude, const ObservationSet& holdout, int folds,
                        std::size_t n_total);

// Average of the J cross-fitted debiased fold estimates.
DebiasedMatrix debiased_estimate(const ObservationSet& obs, const CrudeSolverConfig& cfg,
                                 int folds, Seed seed, std::string source_id = {});

}  // namespace matcomp
