#include "matcomp/completion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "matcomp/errors.hpp"

namespace matcomp {

void ObservationSet::validate() const {
  if (p < 1 || q < 1) {
    throw InvalidInputError("observation set dimensions must be positive");
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    if (s.a < 0 || s.a >= p || s.b < 0 || s.b >= q) {
      throw InvalidInputError("sample " + std::to_string(i) + " index (" + std::to_string(s.a) +
                              "," + std::to_string(s.b) + ") outside " + std::to_string(p) +
                              "x" + std::to_string(q));
    }
    if (!std::isfinite(s.y)) {
      throw InvalidInputError("sample " + std::to_string(i) + " has a non-finite response");
    }
  }
}

DenseMatrix fill_in(const ObservationSet& obs) {
  DenseMatrix m = DenseMatrix::Zero(obs.p, obs.q);
  if (obs.samples.empty()) return m;
  for (const Sample& s : obs.samples) m(s.a, s.b) += s.y;
  m *= static_cast<double>(obs.p * obs.q) / static_cast<double>(obs.samples.size());
  return m;
}

double residual_sum_squares(const ObservationSet& obs, const DenseMatrix& theta) {
  if (theta.rows() != obs.p || theta.cols() != obs.q) {
    throw DimensionMismatchError("residual_sum_squares: matrix does not match observation dims");
  }
  double ss = 0.0;
  for (const Sample& s : obs.samples) {
    const double r = s.y - theta(s.a, s.b);
    ss += r * r;
  }
  return ss;
}

void CrudeSolverConfig::validate() const {
  if (rank < 1) throw InvalidInputError("crude solver rank must be >= 1");
  if (!(rel_tol > 0.0)) throw InvalidInputError("crude solver rel_tol must be > 0");
  if (max_iters < 0) throw InvalidInputError("crude solver max_iters must be >= 0");
  if (step_size && !(*step_size > 0.0)) {
    throw InvalidInputError("crude solver step_size must be > 0");
  }
  if (!(balance_weight >= 0.0)) {
    throw InvalidInputError("crude solver balance_weight must be >= 0");
  }
  if (als_sweeps < 0) throw InvalidInputError("crude solver als_sweeps must be >= 0");
  if (!(ridge >= 0.0)) throw InvalidInputError("crude solver ridge must be >= 0");
}

namespace {

void require_samples(const ObservationSet& obs, const char* who) {
  obs.validate();
  if (obs.samples.empty()) {
    throw InvalidInputError(std::string(who) + ": need at least one observation");
  }
}

// Top `rank` singular triplets of the fill-in; `extra` more are computed
// when available.
SvdResult spectral_factors(const ObservationSet& obs, Eigen::Index rank, Eigen::Index extra = 0) {
  require_samples(obs, "spectral_init");
  if (rank < 1 || rank > std::min(obs.p, obs.q)) {
    throw InvalidInputError("spectral_init: rank " + std::to_string(rank) +
                            " exceeds min(p, q) = " + std::to_string(std::min(obs.p, obs.q)));
  }
  return thin_svd(fill_in(obs), std::min(rank + extra, std::min(obs.p, obs.q)));
}

// One least-squares pass over the rows of `x` with `y` held fixed. Rows
// without samples are left untouched.
void als_update(DenseMatrix& x, const DenseMatrix& y,
                const std::vector<std::vector<std::pair<Eigen::Index, double>>>& lists,
                double ridge) {
  const Eigen::Index r = x.cols();
  DenseMatrix gram(r, r);
  Vector rhs(r);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto& list = lists[static_cast<std::size_t>(i)];
    if (list.empty()) continue;
    gram.setZero();
    rhs.setZero();
    for (const auto& [j, value] : list) {
      gram.noalias() += y.row(j).transpose() * y.row(j);
      rhs.noalias() += value * y.row(j).transpose();
    }
    // The tiny extra term keeps rank-deficient rows solvable.
    gram.diagonal().array() += ridge + 1e-10 * std::max(gram.trace(), 1e-300);
    const Vector sol = gram.ldlt().solve(rhs);
    if (sol.allFinite()) x.row(i) = sol.transpose();
  }
}

// Alternating ridge least squares on sum (y - <AB^T, X>)^2 + ridge (|A|^2 + |B|^2),
// then rebalanced so that A^T A = B^T B.
void als_refine(const ObservationSet& obs, int sweeps, double ridge, DenseMatrix& a,
                DenseMatrix& b) {
  std::vector<std::vector<std::pair<Eigen::Index, double>>> rows(obs.p), cols(obs.q);
  for (const Sample& s : obs.samples) {
    rows[static_cast<std::size_t>(s.a)].emplace_back(s.b, s.y);
    cols[static_cast<std::size_t>(s.b)].emplace_back(s.a, s.y);
  }
  for (int t = 0; t < sweeps; ++t) {
    als_update(a, b, rows, ridge);
    als_update(b, a, cols, ridge);
  }
  const SvdResult svd = thin_svd(a * b.transpose(), a.cols());
  const Vector root = svd.singular_values.cwiseSqrt();
  a = svd.u * root.asDiagonal();
  b = svd.v * root.asDiagonal();
}

class FactorLoss {
 public:
  FactorLoss(const ObservationSet& obs, double balance_weight, double ridge)
      : obs_(obs),
        scale_(static_cast<double>(obs.p * obs.q) / static_cast<double>(obs.samples.size())),
        weight_(balance_weight),
        ridge_(ridge),
        resid_(obs.samples.size()) {}

  double scale() const { return scale_; }

  // Loss at (a, b); keeps the residuals for a following gradient() call.
  double evaluate(const DenseMatrix& a, const DenseMatrix& b) {
    double data = 0.0;
    for (std::size_t i = 0; i < obs_.samples.size(); ++i) {
      const Sample& s = obs_.samples[i];
      const double r = a.row(s.a).dot(b.row(s.b)) - s.y;
      resid_[i] = r;
      data += r * r;
    }
    gap_ = a.transpose() * a - b.transpose() * b;
    return scale_ * data + weight_ * gap_.squaredNorm() +
           ridge_ * (a.squaredNorm() + b.squaredNorm());
  }

  void gradient(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& ga,
                DenseMatrix& gb) const {
    ga.setZero(a.rows(), a.cols());
    gb.setZero(b.rows(), b.cols());
    const double c = 2.0 * scale_;
    for (std::size_t i = 0; i < obs_.samples.size(); ++i) {
      const Sample& s = obs_.samples[i];
      const double w = c * resid_[i];
      ga.row(s.a).noalias() += w * b.row(s.b);
      gb.row(s.b).noalias() += w * a.row(s.a);
    }
    ga.noalias() += 4.0 * weight_ * a * gap_;
    gb.noalias() -= 4.0 * weight_ * b * gap_;
    if (ridge_ > 0.0) {
      ga.noalias() += 2.0 * ridge_ * a;
      gb.noalias() += 2.0 * ridge_ * b;
    }
  }

 private:
  const ObservationSet& obs_;
  double scale_;
  double weight_;
  double ridge_;
  std::vector<double> resid_;
  DenseMatrix gap_;
};

}  // namespace

DenseMatrix spectral_init(const ObservationSet& obs, Eigen::Index rank) {
  return spectral_factors(obs, rank).reconstruct();
}

CrudeFit crude_complete(const ObservationSet& obs, const CrudeSolverConfig& cfg) {
  cfg.validate();
  const SvdResult init = spectral_factors(obs, cfg.rank, 1);
  const Eigen::Index r = cfg.rank;

  CrudeFit fit;
  const auto n = static_cast<Eigen::Index>(obs.samples.size());
  if (n < cfg.rank * (obs.p + obs.q)) {
    fit.warnings.push_back("crude_complete: n=" + std::to_string(n) + " is below rank*(p+q)=" +
                           std::to_string(cfg.rank * (obs.p + obs.q)));
  }

  const Vector root = init.singular_values.head(r).cwiseSqrt();
  DenseMatrix a = init.u.leftCols(r) * root.asDiagonal();
  DenseMatrix b = init.v.leftCols(r) * root.asDiagonal();
  fit.ridge = init.singular_values.size() > r ? cfg.ridge * init.singular_values(r) : 0.0;

  FactorLoss loss(obs, cfg.balance_weight, fit.ridge);
  double current = loss.evaluate(a, b);
  if (!std::isfinite(current)) {
    throw NumericFailureError("crude_complete: non-finite loss at initialization", 0);
  }
  fit.initial_loss = current;
  fit.loss_trace.push_back(current);

  if (cfg.als_sweeps > 0 && current > 0.0) {
    DenseMatrix a_als = a, b_als = b;
    als_refine(obs, cfg.als_sweeps, fit.ridge / loss.scale(), a_als, b_als);
    const double refined = loss.evaluate(a_als, b_als);
    if (std::isfinite(refined) && refined <= current) {
      a.swap(a_als);
      b.swap(b_als);
      current = refined;
      fit.loss_trace.push_back(current);
    } else {
      loss.evaluate(a, b);
    }
  }

  const double lambda1 = init.singular_values(0);  // of the fill-in
  double step = cfg.step_size ? *cfg.step_size : (lambda1 > 0.0 ? 0.25 / lambda1 : 0.0);
  const double min_step = step * 1e-30;

  if (step > 0.0 && current > 0.0) {
    DenseMatrix ga, gb, a_try, b_try;
    loss.gradient(a, b, ga, gb);
    for (int it = 1; it <= cfg.max_iters; ++it) {
      fit.iterations = it;
      a_try = a - step * ga;
      b_try = b - step * gb;
      const double trial = loss.evaluate(a_try, b_try);
      if (std::isfinite(trial) && trial <= current) {
        const double decrease = (current - trial) / std::max(current, 1e-300);
        a.swap(a_try);
        b.swap(b_try);
        current = trial;
        ++fit.accepted_steps;
        fit.loss_trace.push_back(current);
        if (decrease < cfg.rel_tol || current == 0.0) {
          fit.converged = true;
          break;
        }
        loss.gradient(a, b, ga, gb);
      } else {
        step *= 0.5;
        if (step < min_step) {
          if (!std::isfinite(trial) && fit.accepted_steps == 0) {
            throw NumericFailureError("crude_complete: loss diverged", it);
          }
          // No descent direction left at machine precision.
          fit.converged = true;
          // Restore residual cache for the accepted point.
          loss.evaluate(a, b);
          break;
        }
      }
    }
  } else {
    fit.converged = true;
  }

  fit.final_loss = current;
  fit.estimate = a * b.transpose();
  fit.left = std::move(a);
  fit.right = std::move(b);
  if (!fit.estimate.allFinite()) {
    throw NumericFailureError("crude_complete: non-finite estimate", fit.iterations);
  }
  return fit;
}

std::vector<FoldSplit> kfold_split(const ObservationSet& obs, int folds, Seed seed) {
  obs.validate();
  const std::size_t n = obs.samples.size();
  if (folds < 2) throw InvalidInputError("kfold_split: need J >= 2 folds");
  if (static_cast<std::size_t>(folds) > n) {
    throw InvalidInputError("kfold_split: J=" + std::to_string(folds) +
                            " exceeds the number of samples n=" + std::to_string(n));
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(perm[i - 1], perm[rng.index(i)]);
  }

  // fold_of[i] = holdout fold of sample i.
  std::vector<int> fold_of(n);
  const std::size_t base = n / static_cast<std::size_t>(folds);
  const std::size_t extra = n % static_cast<std::size_t>(folds);
  std::size_t offset = 0;
  for (int j = 0; j < folds; ++j) {
    const std::size_t len = base + (static_cast<std::size_t>(j) < extra ? 1 : 0);
    for (std::size_t t = 0; t < len; ++t) fold_of[perm[offset + t]] = j;
    offset += len;
  }

  std::vector<FoldSplit> out(static_cast<std::size_t>(folds));
  for (auto& f : out) {
    f.train.p = f.holdout.p = obs.p;
    f.train.q = f.holdout.q = obs.q;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < folds; ++j) {
      auto& dst = (fold_of[i] == j) ? out[j].holdout : out[j].train;
      dst.samples.push_back(obs.samples[i]);
    }
  }
  return out;
}

DenseMatrix debias_fold(const DenseMatrix& crude, const ObservationSet& holdout, int folds,
                        std::size_t n_total) {
  if (n_total == 0) throw InvalidInputError("debias_fold: n_total must be positive");
  if (crude.rows() != holdout.p || crude.cols() != holdout.q) {
    throw DimensionMismatchError("debias_fold: crude estimate does not match holdout dims");
  }
  holdout.validate();
  const double c = static_cast<double>(folds) * static_cast<double>(holdout.p * holdout.q) /
                   static_cast<double>(n_total);
  DenseMatrix out = crude;
  for (const Sample& s : holdout.samples) {
    out(s.a, s.b) += c * (s.y - crude(s.a, s.b));
  }
  return out;
}

DebiasedMatrix debiased_estimate(const ObservationSet& obs, const CrudeSolverConfig& cfg,
                                 int folds, Seed seed, std::string source_id) {
  cfg.validate();
  const auto splits = kfold_split(obs, folds, seed);
  DenseMatrix sum = DenseMatrix::Zero(obs.p, obs.q);
  for (const FoldSplit& f : splits) {
    const CrudeFit crude = crude_complete(f.train, cfg);
    sum += debias_fold(crude.estimate, f.holdout, folds, obs.samples.size());
  }
  DebiasedMatrix out;
  out.estimate = sum / static_cast<double>(folds);
  out.n = obs.samples.size();
  out.rank = cfg.rank;
  out.source_id = std::move(source_id);
  return out;
}

}  // namespace matcomp
