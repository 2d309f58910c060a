#include "matcomp/simulation.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "matcomp/errors.hpp"
#include "matcomp/subspace.hpp"
#include "matcomp/transfer.hpp"

namespace matcomp {

std::string to_string(SourceType t) {
  switch (t) {
    case SourceType::I: return "i";
    case SourceType::II: return "ii";
    case SourceType::III: return "iii";
    case SourceType::IV: return "iv";
  }
  return "?";
}

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::A: return "A";
    case Scenario::B: return "B";
    case Scenario::C: return "C";
  }
  return "?";
}

Scenario parse_scenario(const std::string& s) {
  if (s == "A" || s == "a") return Scenario::A;
  if (s == "B" || s == "b") return Scenario::B;
  if (s == "C" || s == "c") return Scenario::C;
  throw InvalidInputError("unknown scenario '" + s + "' (expected A, B or C)");
}

SourceType target_type(Scenario s) {
  switch (s) {
    case Scenario::A: return SourceType::I;
    case Scenario::B: return SourceType::II;
    case Scenario::C: return SourceType::IV;
  }
  return SourceType::I;
}

void GeneratorConfig::validate() const {
  if (p < 2 || q < 2) throw InvalidInputError("generator: p and q must be >= 2");
  if (p0 < 1 || p0 > p || q0 < 1 || q0 > q) {
    throw InvalidInputError("generator: need 1 <= p0 <= p and 1 <= q0 <= q");
  }
  if (r < 1 || r > std::min(p0, q0)) throw InvalidInputError("generator: need 1 <= r <= min(p0, q0)");
  if (!(h >= 0.0) || !std::isfinite(h)) throw InvalidInputError("generator: h must be >= 0");
  if (K < 0) throw InvalidInputError("generator: K must be >= 0");
  if (n_target < 1) throw InvalidInputError("generator: n_target must be >= 1");
  if (K > 0 && n_source < 1) throw InvalidInputError("generator: n_source must be >= 1");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidInputError("generator: sigma must be >= 0");
  double total = 0.0;
  for (double f : source_mix) {
    if (!(f >= 0.0)) throw InvalidInputError("generator: source_mix fractions must be >= 0");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidInputError("generator: source_mix must sum to 1");
}

std::array<int, 4> GeneratorConfig::type_counts() const {
  std::array<int, 4> counts{};
  int rest = K;
  for (int t = 1; t < 4; ++t) {
    counts[t] = static_cast<int>(std::floor(K * source_mix[t] + 1e-9));
    rest -= counts[t];
  }
  counts[0] = rest;
  return counts;
}

DenseMatrix sample_goe(Eigen::Index dim, Rng& rng) {
  if (dim < 1) throw InvalidInputError("sample_goe: dim must be >= 1");
  const double off_sd = std::sqrt(1.0 / (2.0 * static_cast<double>(dim)));
  const double diag_sd = std::sqrt(1.0 / static_cast<double>(dim));
  DenseMatrix g(dim, dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    g(j, j) = diag_sd * rng.normal();
    for (Eigen::Index i = j + 1; i < dim; ++i) {
      g(i, j) = off_sd * rng.normal();
      g(j, i) = g(i, j);
    }
  }
  return g;
}

DenseMatrix sample_goe(Eigen::Index dim, Seed seed) {
  Rng rng(seed);
  return sample_goe(dim, rng);
}

Subspace sample_haar_subspace(Eigen::Index ambient, Eigen::Index dim, Rng& rng) {
  if (dim < 1 || dim > ambient) throw InvalidInputError("sample_haar_subspace: need 1 <= dim <= ambient");
  DenseMatrix g(ambient, dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    for (Eigen::Index i = 0; i < ambient; ++i) g(i, j) = rng.normal();
  }
  return orthonormalize(g);
}

Subspace sample_haar_subspace(Eigen::Index ambient, Eigen::Index dim, Seed seed) {
  Rng rng(seed);
  return sample_haar_subspace(ambient, dim, rng);
}

ObservationSet sample_observations(const DenseMatrix& theta, std::size_t n, double sigma,
                                   Rng& rng) {
  ObservationSet obs{theta.rows(), theta.cols(), {}};
  obs.samples.reserve(n);
  const double scale = sigma / std::sqrt(static_cast<double>(theta.rows() * theta.cols()));
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(obs.p)));
    const auto b = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(obs.q)));
    double y = theta(a, b);
    if (scale > 0.0) y += scale * rng.normal();
    obs.samples.push_back({a, b, y});
  }
  return obs;
}

namespace {

DenseMatrix perturbed_basis(const Projector& planted, double h, Eigen::Index r, Rng& rng) {
  DenseMatrix m = planted.matrix();
  if (h > 0.0) m += h * sample_goe(planted.ambient_dim(), rng);
  return top_eigvecs_sym(m, r).basis();
}

DenseMatrix make_truth(SourceType type, const GeneratorConfig& cfg, const Projector& pu,
                       const Projector& pv, Rng& rng) {
  const bool left_planted = type == SourceType::I || type == SourceType::II;
  const bool right_planted = type == SourceType::I || type == SourceType::III;
  const DenseMatrix u = left_planted ? perturbed_basis(pu, cfg.h, cfg.r, rng)
                                     : sample_haar_subspace(cfg.p, cfg.r, rng).basis();
  const DenseMatrix v = right_planted ? perturbed_basis(pv, cfg.h, cfg.r, rng)
                                      : sample_haar_subspace(cfg.q, cfg.r, rng).basis();
  Vector lambda(cfg.r);
  for (Eigen::Index i = 0; i < cfg.r; ++i) lambda(i) = rng.uniform(1.0, 2.0);
  return u * lambda.asDiagonal() * v.transpose();
}

}  // namespace

SyntheticInstance generate_instance(const GeneratorConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  Subspace planted_u = sample_haar_subspace(cfg.p, cfg.p0, rng);
  Subspace planted_v = sample_haar_subspace(cfg.q, cfg.q0, rng);
  const Projector pu = planted_u.projector();
  const Projector pv = planted_v.projector();

  std::vector<SourceType> types;
  const auto counts = cfg.type_counts();
  for (int t = 0; t < 4; ++t) {
    for (int c = 0; c < counts[t]; ++c) types.push_back(static_cast<SourceType>(t));
  }

  SyntheticInstance inst{DenseMatrix(), {}, {}, {}, std::move(planted_u), std::move(planted_v),
                         types, {}};
  inst.truth_target = make_truth(target_type(cfg.scenario), cfg, pu, pv, rng);
  for (std::size_t k = 0; k < types.size(); ++k) {
    inst.truth_sources.push_back(make_truth(types[k], cfg, pu, pv, rng));
    inst.source_ids.push_back("s" + std::to_string(k + 1));
  }
  inst.obs_target = sample_observations(inst.truth_target, cfg.n_target, cfg.sigma, rng);
  for (const auto& truth : inst.truth_sources) {
    inst.obs_sources.push_back(sample_observations(truth, cfg.n_source, cfg.sigma, rng));
  }
  return inst;
}

double relative_error(const DenseMatrix& estimate, const DenseMatrix& truth) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols()) {
    throw DimensionMismatchError("relative_error: shapes differ");
  }
  return (estimate - truth).squaredNorm() / truth.squaredNorm();
}

DenseMatrix baseline_target_only(const ObservationSet& target, const CrudeSolverConfig& cfg) {
  return crude_complete(target, cfg).estimate;
}

DenseMatrix baseline_pooled_two_step(const ObservationSet& target,
                                     const std::vector<ObservationSet>& sources,
                                     const CrudeSolverConfig& cfg) {
  ObservationSet pooled = target;
  for (const auto& s : sources) {
    if (s.p != target.p || s.q != target.q) {
      throw DimensionMismatchError("pooled two-step: source dims differ from the target");
    }
    pooled.samples.insert(pooled.samples.end(), s.samples.begin(), s.samples.end());
  }
  const DenseMatrix base = crude_complete(pooled, cfg).estimate;
  ObservationSet contrast = target;
  for (auto& s : contrast.samples) s.y -= base(s.a, s.b);
  return base + crude_complete(contrast, cfg).estimate;
}

bool shares_left(SourceType t) { return t == SourceType::I || t == SourceType::II; }
bool shares_right(SourceType t) { return t == SourceType::I || t == SourceType::III; }

TransferModel oracle_informed_transfer(const SyntheticInstance& inst,
                                       const std::vector<DebiasedMatrix>& debiased,
                                       const GeneratorConfig& gen, const CrudeSolverConfig& crude) {
  if (debiased.size() != inst.source_types.size()) {
    throw DimensionMismatchError("oracle_informed_transfer: one debiased matrix per source");
  }
  const SourceType t = target_type(gen.scenario);
  std::vector<SourceSubspaces> left_set, right_set;
  for (std::size_t k = 0; k < debiased.size(); ++k) {
    if (shares_left(t) && shares_left(inst.source_types[k])) {
      left_set.push_back(extract_subspaces(debiased[k]));
    }
    if (shares_right(t) && shares_right(inst.source_types[k])) {
      right_set.push_back(extract_subspaces(debiased[k]));
    }
  }

  std::optional<SvdResult> own;
  auto target_own = [&]() -> const SvdResult& {
    if (!own) {
      CrudeSolverConfig c = crude;
      c.rank = gen.r;
      own = thin_svd(crude_complete(inst.obs_target, c).estimate, gen.r);
    }
    return *own;
  };

  std::vector<std::string> selected_u, selected_v;
  std::optional<Subspace> u, v;
  if (!left_set.empty()) {
    IntegrationResult res = barycenter(left_set, Side::Left, gen.p0);
    u = std::move(res.subspace);
    selected_u = std::move(res.selected);
  } else {
    u = Subspace(target_own().u);
  }
  if (!right_set.empty()) {
    IntegrationResult res = barycenter(right_set, Side::Right, gen.q0);
    v = std::move(res.subspace);
    selected_v = std::move(res.selected);
  } else {
    v = Subspace(target_own().v);
  }
  DenseMatrix gamma = target_ols(inst.obs_target, *u, *v);
  TransferModel model(std::move(*u), std::move(*v), std::move(gamma));
  model.gate_u_used_transfer = !left_set.empty();
  model.gate_v_used_transfer = !right_set.empty();
  model.selected_u = std::move(selected_u);
  model.selected_v = std::move(selected_v);
  model.residual_ss = residual_sum_squares(inst.obs_target, model.theta_hat);
  return model;
}

const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> methods{kTargetOnly, kPooledTwoStep, kOracleTransfer,
                                                kNoraTransfer};
  return methods;
}

void ExperimentConfig::validate() const {
  generator.validate();
  if (reps < 1) throw InvalidInputError("experiment: reps must be >= 1");
  if (methods.empty()) throw InvalidInputError("experiment: no methods requested");
  for (const auto& m : methods) {
    bool ok = false;
    for (const auto& k : known_methods()) ok = ok || (k == m);
    if (!ok) throw InvalidInputError("experiment: unknown method '" + m + "'");
  }
  if (folds < 2) throw InvalidInputError("experiment: folds must be >= 2");
  if (threads < 1) throw InvalidInputError("experiment: threads must be >= 1");
  const double r = static_cast<double>(generator.r);
  if (!(tau_u >= 0.0 && tau_u <= generator.p0) || !(tau_v >= 0.0 && tau_v <= generator.q0)) {
    throw InvalidInputError("experiment: tau must lie in [0, cut_dim]");
  }
  for (const auto& d : {delta_u, delta_v}) {
    if (d && !(*d >= 0.0 && *d <= r)) throw InvalidInputError("experiment: delta must lie in [0, r]");
  }
  crude.validate();
}

const MethodSummary& ExperimentResult::method(const std::string& label) const {
  for (const auto& m : methods) {
    if (m.label == label) return m;
  }
  throw InvalidInputError("experiment result has no method '" + label + "'");
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers =
      std::min<std::size_t>(count, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

namespace {

struct RepOutcome {
  std::vector<double> errors;
  std::optional<NoraDiagnostics> nora;
  std::vector<std::string> failures;
};

bool wants(const ExperimentConfig& cfg, const std::string& label) {
  for (const auto& m : cfg.methods) {
    if (m == label) return true;
  }
  return false;
}

RepOutcome run_rep(const ExperimentConfig& cfg, std::size_t rep, Seed seed) {
  GeneratorConfig gen = cfg.generator;
  gen.seed = seed;
  const SyntheticInstance inst = generate_instance(gen);
  CrudeSolverConfig crude = cfg.crude;
  crude.rank = gen.r;

  std::vector<DebiasedMatrix> debiased;
  if (wants(cfg, kOracleTransfer) || wants(cfg, kNoraTransfer)) {
    for (std::size_t k = 0; k < inst.obs_sources.size(); ++k) {
      debiased.push_back(debiased_estimate(inst.obs_sources[k], crude, cfg.folds,
                                           child_seed(seed, 1000 + k), inst.source_ids[k]));
    }
  }

  RepOutcome out;
  for (const auto& label : cfg.methods) {
    try {
      DenseMatrix estimate;
      if (label == kTargetOnly) {
        estimate = baseline_target_only(inst.obs_target, crude);
      } else if (label == kPooledTwoStep) {
        estimate = baseline_pooled_two_step(inst.obs_target, inst.obs_sources, crude);
      } else if (label == kOracleTransfer) {
        estimate = oracle_informed_transfer(inst, debiased, gen, crude).theta_hat;
      } else {
        NoraConfig nc;
        nc.p0 = gen.p0;
        nc.q0 = gen.q0;
        nc.select_u.tau = cfg.tau_u;
        nc.select_v.tau = cfg.tau_v;
        nc.gate = GateConfig::with_rank(gen.r);
        if (cfg.delta_u) nc.gate.delta_u = *cfg.delta_u;
        if (cfg.delta_v) nc.gate.delta_v = *cfg.delta_v;
        nc.crude = crude;
        nc.folds = cfg.folds;
        nc.seed = child_seed(seed, 2);
        TransferModel model = nora_transfer(inst.obs_target, debiased, nc);
        out.nora = NoraDiagnostics{model.gate_u_used_transfer, model.gate_v_used_transfer,
                                   model.selected_u, model.selected_v};
        estimate = std::move(model.theta_hat);
      }
      out.errors.push_back(relative_error(estimate, inst.truth_target));
    } catch (const Error& e) {
      out.errors.push_back(std::numeric_limits<double>::quiet_NaN());
      out.failures.push_back("rep " + std::to_string(rep) + " " + label + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult result;
  result.config = cfg;
  const auto reps = static_cast<std::size_t>(cfg.reps);
  for (std::size_t k = 0; k < reps; ++k) result.rep_seeds.push_back(child_seed(cfg.base_seed, k));

  std::vector<RepOutcome> outcomes(reps);
  parallel_for(reps, cfg.threads, [&](std::size_t k) {
    outcomes[k] = run_rep(cfg, k, result.rep_seeds[k]);
  });

  for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
    MethodSummary summary;
    summary.label = cfg.methods[m];
    double sum = 0.0, sum_sq = 0.0;
    int ok = 0;
    for (const auto& o : outcomes) {
      const double e = o.errors[m];
      summary.errors.push_back(e);
      if (std::isnan(e)) {
        ++summary.failed;
      } else {
        sum += e;
        sum_sq += e * e;
        ++ok;
      }
    }
    if (ok > 0) {
      summary.mean = sum / ok;
      if (ok > 1) {
        const double var = std::max(0.0, (sum_sq - ok * summary.mean * summary.mean) / (ok - 1));
        summary.std_error = std::sqrt(var / ok);
      }
    } else {
      summary.mean = std::numeric_limits<double>::quiet_NaN();
    }
    result.methods.push_back(std::move(summary));
  }
  for (auto& o : outcomes) {
    result.nora.push_back(std::move(o.nora));
    result.failures.insert(result.failures.end(), o.failures.begin(), o.failures.end());
  }
  return result;
}

}  // namespace matcomp
