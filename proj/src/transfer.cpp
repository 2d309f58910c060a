#include "matcomp/transfer.hpp"

#include <string>

#include "matcomp/errors.hpp"

namespace matcomp {

void GateConfig::validate() const {
  const double r0 = static_cast<double>(target_rank);
  if (target_rank < 1) throw InvalidInputError("gate: target rank must be >= 1");
  if (!(delta_u >= 0.0 && delta_u <= r0) || !(delta_v >= 0.0 && delta_v <= r0)) {
    throw InvalidInputError("gate: delta_u and delta_v must lie in [0, r0]");
  }
}

TransferModel::TransferModel(Subspace u, Subspace v, DenseMatrix g)
    : u_hat(std::move(u)), v_hat(std::move(v)), gamma(std::move(g)) {
  if (gamma.rows() != u_hat.dim() || gamma.cols() != v_hat.dim()) {
    throw DimensionMismatchError("transfer model: gamma shape does not match the subspaces");
  }
  theta_hat = u_hat.basis() * gamma * v_hat.basis().transpose();
}

DenseMatrix target_ols(const ObservationSet& obs, const Subspace& u, const Subspace& v) {
  obs.validate();
  if (obs.samples.empty()) throw InvalidInputError("target_ols: need at least one observation");
  if (u.ambient_dim() != obs.p || v.ambient_dim() != obs.q) {
    throw DimensionMismatchError("target_ols: subspaces do not match the observation dims");
  }
  const Eigen::Index d1 = u.dim();
  const Eigen::Index d2 = v.dim();
  const auto n = static_cast<Eigen::Index>(obs.samples.size());

  // Row i is vec(u^T e_a e_b^T v) = kron(u.row(a), v.row(b)).
  DenseMatrix design(n, d1 * d2);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Sample& s = obs.samples[static_cast<std::size_t>(i)];
    for (Eigen::Index r = 0; r < d1; ++r) {
      design.row(i).segment(r * d2, d2) = u.basis()(s.a, r) * v.basis().row(s.b);
    }
    y(i) = s.y;
  }
  if (design.cwiseAbs().maxCoeff() == 0.0) {
    throw DegenerateInputError(
        "target_ols: the subspaces vanish at every observed cell (all-zero design)");
  }

  Eigen::BDCSVD<DenseMatrix> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cutoff = 1e-10 * s(0);
  Vector coef = svd.matrixU().transpose() * y;
  for (Eigen::Index k = 0; k < coef.size(); ++k) {
    coef(k) = s(k) > cutoff ? coef(k) / s(k) : 0.0;
  }
  const Vector solution = svd.matrixV() * coef;

  DenseMatrix gamma(d1, d2);
  for (Eigen::Index r = 0; r < d1; ++r) {
    gamma.row(r) = solution.segment(r * d2, d2).transpose();
  }
  return gamma;
}

GateDecision optional_gate(const Subspace& target_u, const Subspace& target_v,
                           const std::optional<Subspace>& candidate_u,
                           const std::optional<Subspace>& candidate_v, const GateConfig& cfg) {
  cfg.validate();
  if (target_u.dim() != cfg.target_rank || target_v.dim() != cfg.target_rank) {
    throw InvalidInputError("gate: target subspaces must have dimension r0");
  }
  const double r0 = static_cast<double>(cfg.target_rank);
  GateDecision d{target_u, target_v};
  if (candidate_u) {
    d.alignment_u = alignment(target_u, *candidate_u);
    if (d.alignment_u >= r0 - cfg.delta_u) {
      d.u = *candidate_u;
      d.used_u = true;
    }
  }
  if (candidate_v) {
    d.alignment_v = alignment(target_v, *candidate_v);
    if (d.alignment_v >= r0 - cfg.delta_v) {
      d.v = *candidate_v;
      d.used_v = true;
    }
  }
  return d;
}

std::vector<SourceSubspaces> extract_all(const std::vector<DebiasedMatrix>& sources) {
  std::vector<SourceSubspaces> out;
  out.reserve(sources.size());
  for (const auto& s : sources) out.push_back(extract_subspaces(s));
  return out;
}

namespace {

void check_source_dims(const ObservationSet& target, const std::vector<DebiasedMatrix>& sources) {
  for (const auto& s : sources) {
    if (s.estimate.rows() != target.p || s.estimate.cols() != target.q) {
      throw DimensionMismatchError("source '" + s.source_id +
                                   "' does not share the target's dimensions");
    }
  }
}

void append(std::vector<std::string>& dst, const std::vector<std::string>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

}  // namespace

TransferModel oracle_transfer(const ObservationSet& target,
                              const std::vector<DebiasedMatrix>& sources, Eigen::Index p0,
                              Eigen::Index q0) {
  check_source_dims(target, sources);
  const auto subspaces = extract_all(sources);
  IntegrationResult left = barycenter(subspaces, Side::Left, p0);
  IntegrationResult right = barycenter(subspaces, Side::Right, q0);
  DenseMatrix gamma = target_ols(target, *left.subspace, *right.subspace);

  TransferModel model(std::move(*left.subspace), std::move(*right.subspace), std::move(gamma));
  model.selected_u = std::move(left.selected);
  model.selected_v = std::move(right.selected);
  model.residual_ss = residual_sum_squares(target, model.theta_hat);
  append(model.warnings, left.warnings);
  append(model.warnings, right.warnings);
  return model;
}

TransferModel nora_transfer(const ObservationSet& target,
                            const std::vector<DebiasedMatrix>& sources, const NoraConfig& cfg) {
  cfg.gate.validate();
  check_source_dims(target, sources);
  const Eigen::Index r0 = cfg.gate.target_rank;
  if (r0 > std::min(target.p, target.q)) {
    throw InvalidInputError("nora_transfer: target rank exceeds min(p, q)");
  }
  std::vector<std::string> warnings;

  // Target's own representation.
  CrudeSolverConfig crude = cfg.crude;
  crude.rank = r0;
  DenseMatrix own;
  if (cfg.debias_target) {
    own = debiased_estimate(target, crude, cfg.folds, child_seed(cfg.seed, 0), "target").estimate;
  } else {
    CrudeFit fit = crude_complete(target, crude);
    append(warnings, fit.warnings);
    own = std::move(fit.estimate);
  }
  const SvdResult own_svd = thin_svd(own, r0);
  const Subspace own_u(own_svd.u);
  const Subspace own_v(own_svd.v);

  // Selective integration.
  std::optional<Subspace> cand_u, cand_v;
  std::vector<std::string> sel_u, sel_v;
  if (sources.empty()) {
    warnings.push_back("nora_transfer: no sources given; using the target's own subspaces");
  } else {
    const auto subspaces = extract_all(sources);
    IntegrationResult left = rectified_kmeans(subspaces, Side::Left, cfg.p0, cfg.select_u);
    IntegrationResult right = rectified_kmeans(subspaces, Side::Right, cfg.q0, cfg.select_v);
    append(warnings, left.warnings);
    append(warnings, right.warnings);
    if (left.empty()) warnings.push_back("nora_transfer: no informative sources for U");
    if (right.empty()) warnings.push_back("nora_transfer: no informative sources for V");
    cand_u = std::move(left.subspace);
    cand_v = std::move(right.subspace);
    sel_u = std::move(left.selected);
    sel_v = std::move(right.selected);
  }

  GateDecision gate = optional_gate(own_u, own_v, cand_u, cand_v, cfg.gate);
  if (cand_u && !gate.used_u) warnings.push_back("nora_transfer: U gate fell back to target");
  if (cand_v && !gate.used_v) warnings.push_back("nora_transfer: V gate fell back to target");

  DenseMatrix gamma = target_ols(target, gate.u, gate.v);
  TransferModel model(std::move(gate.u), std::move(gate.v), std::move(gamma));
  model.gate_u_used_transfer = gate.used_u;
  model.gate_v_used_transfer = gate.used_v;
  model.selected_u = std::move(sel_u);
  model.selected_v = std::move(sel_v);
  model.residual_ss = residual_sum_squares(target, model.theta_hat);
  model.warnings = std::move(warnings);
  return model;
}

}  // namespace matcomp
