#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "matcomp/completion.hpp"
#include "matcomp/linalg.hpp"
#include "matcomp/rng.hpp"
#include "matcomp/transfer.hpp"

namespace matcomp {

// How a matrix's singular subspaces relate to the planted spans:
//   I   both sides perturbed from span(U), span(V)
//   II  left perturbed, right Haar
//   III left Haar, right perturbed
//   IV  both Haar
enum class SourceType { I, II, III, IV };
enum class Scenario { A, B, C };  // target of type I, II, IV

std::string to_string(SourceType t);
std::string to_string(Scenario s);
Scenario parse_scenario(const std::string& s);
SourceType target_type(Scenario s);

struct GeneratorConfig {
  Eigen::Index p = 100;
  Eigen::Index q = 100;
  Eigen::Index p0 = 5;
  Eigen::Index q0 = 5;
  Eigen::Index r = 3;
  double h = 0.1;
  int K = 24;
  std::size_t n_target = 2500;
  std::size_t n_source = 2500;
  double sigma = 1.0;
  Scenario scenario = Scenario::A;
  std::array<double, 4> source_mix{0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0};
  Seed seed = 0;

  void validate() const;
  // Per-type source counts: floor for II-IV, the remainder goes to I.
  std::array<int, 4> type_counts() const;
};

struct SyntheticInstance {
  DenseMatrix truth_target;
  std::vector<DenseMatrix> truth_sources;
  ObservationSet obs_target;
  std::vector<ObservationSet> obs_sources;
  Subspace planted_u;
  Subspace planted_v;
  std::vector<SourceType> source_types;
  std::vector<std::string> source_ids;
};

// Symmetric, off-diagonal N(0, 1/(2 dim)), diagonal N(0, 1/dim).
DenseMatrix sample_goe(Eigen::Index dim, Rng& rng);
DenseMatrix sample_goe(Eigen::Index dim, Seed seed);

// Orthonormalized standard Gaussian matrix.
Subspace sample_haar_subspace(Eigen::Index ambient, Eigen::Index dim, Rng& rng);
Subspace sample_haar_subspace(Eigen::Index ambient, Eigen::Index dim, Seed seed);

// n uniform cells with replacement, y = Theta[a, b] + sigma (pq)^{-1/2} N(0, 1).
ObservationSet sample_observations(const DenseMatrix& theta, std::size_t n, double sigma,
                                   Rng& rng);

SyntheticInstance generate_instance(const GeneratorConfig& cfg);

// ||estimate - truth||_F^2 / ||truth||_F^2
double relative_error(const DenseMatrix& estimate, const DenseMatrix& truth);

DenseMatrix baseline_target_only(const ObservationSet& target, const CrudeSolverConfig& cfg);

// Complete the pooled samples (target included), then complete the target's
// residual contrast and add it back.
DenseMatrix baseline_pooled_two_step(const ObservationSet& target,
                                     const std::vector<ObservationSet>& sources,
                                     const CrudeSolverConfig& cfg);

// The oracle-transfer method of the experiments: each side integrates only
// the sources whose type shares the planted span on that side. When the
// target itself does not share it, or no source does, that side falls back
// to the target's own rank-r crude subspace.
bool shares_left(SourceType t);
bool shares_right(SourceType t);
TransferModel oracle_informed_transfer(const SyntheticInstance& inst,
                                       const std::vector<DebiasedMatrix>& debiased,
                                       const GeneratorConfig& gen, const CrudeSolverConfig& crude);

inline const std::string kTargetOnly = "target-only";
inline const std::string kPooledTwoStep = "pooled-two-step";
inline const std::string kOracleTransfer = "oracle-transfer";
inline const std::string kNoraTransfer = "nora-transfer";
const std::vector<std::string>& known_methods();

struct ExperimentConfig {
  GeneratorConfig generator;
  std::vector<std::string> methods{kTargetOnly, kPooledTwoStep, kOracleTransfer, kNoraTransfer};
  int reps = 1;
  Seed base_seed = 0;
  int folds = 5;
  double tau_u = 0.5;
  double tau_v = 0.5;
  std::optional<double> delta_u;  // default 0.3 * r
  std::optional<double> delta_v;
  CrudeSolverConfig crude;  // rank is always the generator's r
  int threads = 1;

  void validate() const;
};

struct MethodSummary {
  std::string label;
  std::vector<double> errors;  // per rep; NaN marks a failed rep
  double mean = 0.0;
  double std_error = 0.0;
  int failed = 0;
};

struct NoraDiagnostics {
  bool used_u = false;
  bool used_v = false;
  std::vector<std::string> selected_u;
  std::vector<std::string> selected_v;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<Seed> rep_seeds;
  std::vector<MethodSummary> methods;
  std::vector<std::optional<NoraDiagnostics>> nora;  // per rep, when nora ran
  std::vector<std::string> failures;                  // "rep k method: message"

  const MethodSummary& method(const std::string& label) const;
};

// Replicated comparison; rep k uses instance seed child_seed(base_seed, k),
// so the result does not depend on the thread count.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Runs fn(i) for i in [0, count) on up to `threads` workers.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace matcomp
