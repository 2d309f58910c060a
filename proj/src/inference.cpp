#include "matcomp/inference.hpp"

#include <cmath>
#include <numbers>

#include "matcomp/errors.hpp"

namespace matcomp {

double normal_quantile(double prob) {
  if (!(prob > 0.0 && prob < 1.0)) {
    throw InvalidInputError("normal_quantile: probability must lie in (0, 1)");
  }
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double low = 0.02425;
  constexpr double high = 1.0 - low;

  double x;
  if (prob < low) {
    const double t = std::sqrt(-2.0 * std::log(prob));
    x = (((((c[0] * t + c[1]) * t + c[2]) * t + c[3]) * t + c[4]) * t + c[5]) /
        ((((d[0] * t + d[1]) * t + d[2]) * t + d[3]) * t + 1.0);
  } else if (prob <= high) {
    const double t = prob - 0.5;
    const double s = t * t;
    x = (((((a[0] * s + a[1]) * s + a[2]) * s + a[3]) * s + a[4]) * s + a[5]) * t /
        (((((b[0] * s + b[1]) * s + b[2]) * s + b[3]) * s + b[4]) * s + 1.0);
  } else {
    const double t = std::sqrt(-2.0 * std::log1p(-prob));
    x = -(((((c[0] * t + c[1]) * t + c[2]) * t + c[3]) * t + c[4]) * t + c[5]) /
        ((((d[0] * t + d[1]) * t + d[2]) * t + d[3]) * t + 1.0);
  }

  // Halley refinement.
  const double err = 0.5 * std::erfc(-x / std::numbers::sqrt2) - prob;
  const double u = err * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double sigma_l_sq(const TransferModel& model, const ObservationSet& obs, const Vector& u,
                  const Vector& v) {
  if (obs.p != model.p() || obs.q != model.q()) {
    throw DimensionMismatchError("sigma_l_sq: observations do not match the model dims");
  }
  if (u.size() != model.p() || v.size() != model.q()) {
    throw DimensionMismatchError("sigma_l_sq: query vectors do not match the model dims");
  }
  if (!u.allFinite() || !v.allFinite()) {
    throw InvalidInputError("sigma_l_sq: query vectors must be finite");
  }
  if (obs.samples.empty()) throw InvalidInputError("sigma_l_sq: no observations");
  const double pu = (model.u_hat.basis().transpose() * u).squaredNorm();
  const double pv = (model.v_hat.basis().transpose() * v).squaredNorm();
  // Relative cutoff: a projection at rounding level counts as zero.
  const bool zero_u = !(std::sqrt(pu) > 1e-12 * u.norm());
  const bool zero_v = !(std::sqrt(pv) > 1e-12 * v.norm());
  if (zero_u || zero_v) {
    throw DegenerateQueryError(
        "query is orthogonal to the fitted subspace on the " +
        std::string(zero_u ? "row (u)" : "column (v)") +
        " side; the functional is estimated as 0 with zero variance");
  }
  const double n0 = static_cast<double>(obs.samples.size());
  const double scale = static_cast<double>(obs.p * obs.q) / n0;
  return scale * residual_sum_squares(obs, model.theta_hat) * pu * pv;
}

InferenceResult bilinear_ci(const TransferModel& model, const ObservationSet& obs,
                            const BilinearQuery& query) {
  if (!(query.level > 0.0 && query.level < 1.0)) {
    throw InvalidInputError("bilinear_ci: level must lie in (0, 1)");
  }
  InferenceResult out;
  out.sigma_l = std::sqrt(sigma_l_sq(model, obs, query.u, query.v));
  out.point = query.u.dot(model.theta_hat * query.v);
  out.z = normal_quantile(0.5 + 0.5 * query.level);
  out.half_width = out.z * out.sigma_l / std::sqrt(static_cast<double>(obs.samples.size()));
  out.ci_lo = out.point - out.half_width;
  out.ci_hi = out.point + out.half_width;
  return out;
}

}  // namespace matcomp
