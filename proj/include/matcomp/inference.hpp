#pragma once

#include "matcomp/completion.hpp"
#include "matcomp/linalg.hpp"
#include "matcomp/transfer.hpp"

namespace matcomp {

struct BilinearQuery {
  Vector u;
  Vector v;
  double level = 0.95;
};

struct InferenceResult {
  double point = 0.0;
  double sigma_l = 0.0;
  double z = 0.0;
  double half_width = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

// Standard normal quantile. Acklam's rational approximation followed by one
// Halley step against erfc; absolute error well below 1e-9 on (0, 1).
double normal_quantile(double prob);

// (pq/n0) * sum_i (y_i - Theta_hat[a_i, b_i])^2 * ||U^T u||^2 * ||V^T v||^2
// Throws DegenerateQueryError when either projected norm vanishes.
double sigma_l_sq(const TransferModel& model, const ObservationSet& obs, const Vector& u,
                  const Vector& v);

// point +- z_{1 - alpha/2} * sigma_L / sqrt(n0)
InferenceResult bilinear_ci(const TransferModel& model, const ObservationSet& obs,
                            const BilinearQuery& query);

}  // namespace matcomp
