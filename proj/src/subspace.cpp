#include "matcomp/subspace.hpp"

#include <algorithm>
#include <cmath>

#include "matcomp/errors.hpp"

namespace matcomp {

namespace {

constexpr double kSelectSlack = 1e-12;

void check_sources(const std::vector<SourceSubspaces>& sources, Side side, const char* who) {
  if (sources.empty()) {
    throw InvalidInputError(std::string(who) + ": source list is empty");
  }
  const Eigen::Index ambient = sources.front().basis(side).ambient_dim();
  for (const auto& s : sources) {
    if (s.basis(side).ambient_dim() != ambient) {
      throw DimensionMismatchError(std::string(who) + ": sources differ in ambient dimension");
    }
  }
}

double total_weight(const std::vector<SourceSubspaces>& sources) {
  double total = 0.0;
  for (const auto& s : sources) total += static_cast<double>(s.n);
  return total;
}

std::vector<SourceSubspaces> pick(const std::vector<SourceSubspaces>& sources,
                                  const std::vector<std::size_t>& idx) {
  std::vector<SourceSubspaces> out;
  out.reserve(idx.size());
  for (std::size_t k : idx) out.push_back(sources[k]);
  return out;
}

}  // namespace

SourceSubspaces::SourceSubspaces(std::string id, std::size_t n_samples, Subspace u, Subspace v)
    : source_id(std::move(id)),
      n(n_samples),
      r(u.dim()),
      left(std::move(u)),
      right(std::move(v)),
      left_projector(left.projector()),
      right_projector(right.projector()) {
  if (left.dim() != right.dim()) {
    throw InvalidInputError("source subspaces: left and right ranks differ");
  }
  if (n == 0) throw InvalidInputError("source subspaces: sample size must be positive");
}

SourceSubspaces extract_subspaces(const DebiasedMatrix& theta) {
  const SvdResult svd = thin_svd(theta.estimate, theta.rank);
  return SourceSubspaces(theta.source_id, theta.n, Subspace(svd.u), Subspace(svd.v));
}

DenseMatrix weighted_projector_mean(const std::vector<SourceSubspaces>& sources, Side side) {
  check_sources(sources, side, "weighted_projector_mean");
  const double total = total_weight(sources);
  const Eigen::Index dim = sources.front().basis(side).ambient_dim();
  DenseMatrix sigma = DenseMatrix::Zero(dim, dim);
  for (const auto& s : sources) {
    sigma.noalias() += (static_cast<double>(s.n) / total) * s.projector(side).matrix();
  }
  return sigma;
}

IntegrationResult barycenter(const std::vector<SourceSubspaces>& sources, Side side,
                             Eigen::Index cut_dim) {
  check_sources(sources, side, "barycenter");
  IntegrationResult out;
  Eigen::Index max_rank = 0;
  for (const auto& s : sources) max_rank = std::max(max_rank, s.r);
  if (cut_dim < max_rank) {
    out.warnings.push_back("barycenter: cut_dim " + std::to_string(cut_dim) +
                           " is below the largest source rank " + std::to_string(max_rank));
  }
  Subspace result = top_eigvecs_sym(weighted_projector_mean(sources, side), cut_dim);
  const Projector p = result.projector();
  const double total = total_weight(sources);
  for (const auto& s : sources) {
    out.objective += static_cast<double>(s.n) / total * alignment(s.projector(side), p);
    out.selected.push_back(s.source_id);
  }
  out.subspace = std::move(result);
  out.iterations = 1;
  out.objective_trace.push_back(out.objective);
  return out;
}

double rectified_objective(const std::vector<SourceSubspaces>& sources, Side side,
                           const Projector& p, double tau) {
  check_sources(sources, side, "rectified_objective");
  const double total = total_weight(sources);
  double value = 0.0;
  for (const auto& s : sources) {
    const double floor = static_cast<double>(s.r) - tau;
    value += static_cast<double>(s.n) / total * std::max(alignment(s.projector(side), p), floor);
  }
  return value;
}

IntegrationResult rectified_kmeans(const std::vector<SourceSubspaces>& sources, Side side,
                                   Eigen::Index cut_dim, const SelectionConfig& cfg) {
  check_sources(sources, side, "rectified_kmeans");
  const Eigen::Index ambient = sources.front().basis(side).ambient_dim();
  if (cut_dim < 1 || cut_dim > ambient) {
    throw InvalidInputError("rectified_kmeans: cut_dim outside [1, ambient]");
  }
  if (!(cfg.tau >= 0.0) || cfg.tau > static_cast<double>(cut_dim)) {
    throw InvalidInputError("rectified_kmeans: tau must lie in [0, cut_dim]");
  }
  if (cfg.max_iters < 1) throw InvalidInputError("rectified_kmeans: max_iters must be >= 1");

  IntegrationResult out;
  const double total = total_weight(sources);

  // tau = 0 makes every term equal r_k: the objective is constant, nothing is
  // informative.
  if (cfg.tau == 0.0) {
    for (const auto& s : sources) out.objective += static_cast<double>(s.n) / total * s.r;
    out.objective_trace.push_back(out.objective);
    return out;
  }

  std::vector<std::size_t> all(sources.size());
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;

  std::optional<std::vector<std::size_t>> previous;
  std::optional<Subspace> current;
  if (cfg.init) {
    if (cfg.init->ambient_dim() != ambient) {
      throw DimensionMismatchError("rectified_kmeans: initial subspace has wrong ambient dim");
    }
    current = *cfg.init;
  } else {
    IntegrationResult start = barycenter(sources, side, cut_dim);
    out.warnings = std::move(start.warnings);
    current = std::move(start.subspace);
    previous = all;
  }
  Projector p = current->projector();
  out.objective_trace.push_back(rectified_objective(sources, side, p, cfg.tau));

  std::vector<std::size_t> selected;
  for (int t = 1; t <= cfg.max_iters; ++t) {
    out.iterations = t;
    selected.clear();
    for (std::size_t k = 0; k < sources.size(); ++k) {
      const double floor = static_cast<double>(sources[k].r) - cfg.tau;
      if (alignment(sources[k].projector(side), p) >= floor - kSelectSlack) {
        selected.push_back(k);
      }
    }
    if (selected.empty()) {
      out.objective = rectified_objective(sources, side, p, cfg.tau);
      return out;
    }
    if (previous && *previous == selected) break;
    IntegrationResult step = barycenter(pick(sources, selected), side, cut_dim);
    current = std::move(step.subspace);
    p = current->projector();
    out.objective_trace.push_back(rectified_objective(sources, side, p, cfg.tau));
    previous = selected;
  }

  out.subspace = std::move(current);
  for (std::size_t k : selected) out.selected.push_back(sources[k].source_id);
  out.objective = rectified_objective(sources, side, p, cfg.tau);
  return out;
}

Eigen::Index select_cut_dim(const std::vector<SourceSubspaces>& sources, Side side,
                            Eigen::Index max_dim) {
  check_sources(sources, side, "select_cut_dim");
  const Eigen::Index ambient = sources.front().basis(side).ambient_dim();
  if (max_dim < 1 || max_dim >= ambient) {
    throw InvalidInputError("select_cut_dim: max_dim must lie in [1, ambient - 1]");
  }
  const SymEigen eig = sym_eigen_desc(weighted_projector_mean(sources, side));
  constexpr double kFloor = 1e-12;
  if (eig.values(0) < kFloor) {
    throw DegenerateInputError("select_cut_dim: all eigenvalues are numerically zero");
  }
  Eigen::Index best = 1;
  double best_ratio = -1.0;
  for (Eigen::Index j = 1; j <= max_dim; ++j) {
    const double ratio =
        std::max(eig.values(j - 1), kFloor) / std::max(eig.values(j), kFloor);
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best = j;
    }
  }
  return best;
}

}  // namespace matcomp
