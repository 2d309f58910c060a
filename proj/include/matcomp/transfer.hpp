#pragma once

#include <optional>
#include <string>
#include <vector>

#include "matcomp/completion.hpp"
#include "matcomp/linalg.hpp"
#include "matcomp/subspace.hpp"

namespace matcomp {

struct GateConfig {
  double delta_u = 0.9;
  double delta_v = 0.9;
  Eigen::Index target_rank = 3;

  // delta defaults to 0.3 * r0.
  static GateConfig with_rank(Eigen::Index r0) {
    return GateConfig{0.3 * static_cast<double>(r0), 0.3 * static_cast<double>(r0), r0};
  }
  void validate() const;
};

struct GateDecision {
  Subspace u;
  Subspace v;
  bool used_u = false;
  bool used_v = false;
  double alignment_u = 0.0;  // tr(P_target P_candidate); 0 when absent
  double alignment_v = 0.0;
};

// Fitted representation transfer estimate Theta_hat = U Gamma V^T.
struct TransferModel {
  Subspace u_hat;
  Subspace v_hat;
  DenseMatrix gamma;
  DenseMatrix theta_hat;
  bool gate_u_used_transfer = true;
  bool gate_v_used_transfer = true;
  std::vector<std::string> selected_u;
  std::vector<std::string> selected_v;
  double residual_ss = 0.0;
  std::vector<std::string> warnings;

  TransferModel(Subspace u, Subspace v, DenseMatrix g);

  Eigen::Index p() const { return u_hat.ambient_dim(); }
  Eigen::Index q() const { return v_hat.ambient_dim(); }
};

// Ordinary least squares of y on vec(u^T X_i v) (row-major vec), solved as the
// minimum-norm solution through an SVD of the design with relative singular
// value cutoff 1e-10. Returns Gamma of shape u.dim() x v.dim().
DenseMatrix target_ols(const ObservationSet& obs, const Subspace& u, const Subspace& v);

// Per side: take the candidate iff tr(P_target P_candidate) >= r0 - delta.
GateDecision optional_gate(const Subspace& target_u, const Subspace& target_v,
                           const std::optional<Subspace>& candidate_u,
                           const std::optional<Subspace>& candidate_v, const GateConfig& cfg);

std::vector<SourceSubspaces> extract_all(const std::vector<DebiasedMatrix>& sources);

// Barycenter both sides over every source, then regress the target.
TransferModel oracle_transfer(const ObservationSet& target,
                              const std::vector<DebiasedMatrix>& sources, Eigen::Index p0,
                              Eigen::Index q0);

struct NoraConfig {
  Eigen::Index p0 = 5;
  Eigen::Index q0 = 5;
  SelectionConfig select_u;
  SelectionConfig select_v;
  GateConfig gate = GateConfig::with_rank(3);
  CrudeSolverConfig crude;  // rank is overridden by gate.target_rank
  // Debias the target before extracting its own subspaces for the gate.
  bool debias_target = false;
  int folds = 5;
  Seed seed = 0;
};

// Selective integration per side, optional-transfer gate against the target's
// own crude subspaces, then target regression on the gated representation.
TransferModel nora_transfer(const ObservationSet& target,
                            const std::vector<DebiasedMatrix>& sources, const NoraConfig& cfg);

}  // namespace matcomp
