#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "matcomp/errors.hpp"
#include "matcomp/simulation.hpp"

using namespace matcomp;
using testing::max_abs;

namespace {

double variance(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(xs.size() - 1);
}

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t m = xs.size() / 2;
  return xs.size() % 2 ? xs[m] : 0.5 * (xs[m - 1] + xs[m]);
}

Subspace left_span(const DenseMatrix& m, Eigen::Index r) { return Subspace(thin_svd(m, r).u); }
Subspace right_span(const DenseMatrix& m, Eigen::Index r) { return Subspace(thin_svd(m, r).v); }

ExperimentConfig tiny_experiment() {
  ExperimentConfig cfg;
  cfg.generator.p = cfg.generator.q = 30;
  cfg.generator.p0 = cfg.generator.q0 = 4;
  cfg.generator.r = 2;
  cfg.generator.K = 6;
  cfg.generator.n_target = cfg.generator.n_source = 900;
  cfg.crude.rank = 2;
  cfg.base_seed = 17;
  return cfg;
}

}  // namespace

TEST_CASE("sample_goe is exactly symmetric") {
  const DenseMatrix g = sample_goe(7, 3);
  CHECK(max_abs(g - g.transpose()) == 0.0);
}

TEST_CASE("sample_goe entry variances") {
  Rng rng(5);
  std::vector<double> off, diag;
  for (int draw = 0; draw < 100; ++draw) {
    const DenseMatrix g = sample_goe(200, rng);
    for (Eigen::Index j = 0; j < 200; ++j) {
      diag.push_back(g(j, j));
      for (Eigen::Index i = j + 1; i < 200; ++i) off.push_back(g(i, j));
    }
  }
  CHECK(std::abs(variance(off) / (1.0 / 400.0) - 1.0) <= 0.10);
  CHECK(std::abs(variance(diag) / (1.0 / 200.0) - 1.0) <= 0.15);
}

TEST_CASE("sample_haar_subspace basics") {
  CHECK(sample_haar_subspace(9, 4, 1).projector().trace() == doctest::Approx(4.0).epsilon(1e-8));
  CHECK(max_abs(sample_haar_subspace(5, 5, 2).projector().matrix() - DenseMatrix::Identity(5, 5)) <=
        1e-12);
  CHECK_THROWS_AS(sample_haar_subspace(3, 4, 1), InvalidInputError);
}

TEST_CASE("Haar lines in the plane have a uniform angle") {
  Rng rng(11);
  std::vector<double> u;
  for (int i = 0; i < 10000; ++i) {
    const DenseMatrix b = sample_haar_subspace(2, 1, rng).basis();
    double angle = std::atan2(b(1, 0), b(0, 0));
    if (angle < 0.0) angle += std::numbers::pi;
    if (angle >= std::numbers::pi) angle -= std::numbers::pi;
    u.push_back(angle / std::numbers::pi);
  }
  std::sort(u.begin(), u.end());
  double ks = 0.0;
  const double n = static_cast<double>(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    ks = std::max({ks, (static_cast<double>(i) + 1.0) / n - u[i], u[i] - static_cast<double>(i) / n});
  }
  CHECK(ks < 0.02);
}

TEST_CASE("type counts floor the minor types and give the rest to type I") {
  GeneratorConfig cfg;
  CHECK(cfg.type_counts() == std::array<int, 4>{12, 4, 4, 4});
  cfg.K = 7;
  CHECK(cfg.type_counts() == std::array<int, 4>{4, 1, 1, 1});
  cfg.K = 5;
  CHECK(cfg.type_counts() == std::array<int, 4>{5, 0, 0, 0});
}

TEST_CASE("generator config validation") {
  GeneratorConfig cfg;
  cfg.source_mix = {0.5, 0.5, 0.5, 0.0};
  CHECK_THROWS_AS(cfg.validate(), InvalidInputError);
  cfg = GeneratorConfig{};
  cfg.r = 6;
  CHECK_THROWS_AS(cfg.validate(), InvalidInputError);
  cfg = GeneratorConfig{};
  cfg.h = -0.1;
  CHECK_THROWS_AS(cfg.validate(), InvalidInputError);
  cfg = GeneratorConfig{};
  cfg.sigma = std::nan("");
  CHECK_THROWS_AS(cfg.validate(), InvalidInputError);
}

TEST_CASE("unperturbed type I sources lie inside the planted spans") {
  GeneratorConfig cfg;
  cfg.p = cfg.q = 40;
  cfg.h = 0.0;
  cfg.K = 6;
  cfg.n_target = cfg.n_source = 10;
  cfg.source_mix = {1.0, 0.0, 0.0, 0.0};
  cfg.seed = 3;
  const SyntheticInstance inst = generate_instance(cfg);
  for (const auto& truth : inst.truth_sources) {
    CHECK(alignment(left_span(truth, 3), inst.planted_u) == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(alignment(right_span(truth, 3), inst.planted_v) == doctest::Approx(3.0).epsilon(1e-6));
  }
}

TEST_CASE("source types follow the mix and share the planted spans accordingly") {
  GeneratorConfig cfg;
  cfg.p = cfg.q = 60;
  cfg.K = 12;
  cfg.h = 0.05;
  cfg.n_target = cfg.n_source = 10;
  cfg.seed = 8;
  const SyntheticInstance inst = generate_instance(cfg);
  REQUIRE(inst.source_types.size() == 12);
  REQUIRE(inst.source_ids.size() == 12);
  std::array<int, 4> seen{};
  for (std::size_t k = 0; k < inst.source_types.size(); ++k) {
    const SourceType t = inst.source_types[k];
    ++seen[static_cast<int>(t)];
    const double left = alignment(left_span(inst.truth_sources[k], 3), inst.planted_u);
    const double right = alignment(right_span(inst.truth_sources[k], 3), inst.planted_v);
    CHECK((left > 2.5) == shares_left(t));
    CHECK((right > 2.5) == shares_right(t));
    const Vector sv = thin_svd(inst.truth_sources[k], 3).singular_values;
    CHECK(sv.minCoeff() >= 1.0 - 1e-9);
    CHECK(sv.maxCoeff() <= 2.0 + 1e-9);
  }
  CHECK(seen == std::array<int, 4>{6, 2, 2, 2});
}

TEST_CASE("scenario C targets sit at the Haar-average alignment") {
  GeneratorConfig cfg;
  cfg.scenario = Scenario::C;
  cfg.K = 0;
  cfg.n_target = 1;
  double total = 0.0;
  for (Seed s = 0; s < 200; ++s) {
    cfg.seed = child_seed(99, s);
    const SyntheticInstance inst = generate_instance(cfg);
    total += alignment(left_span(inst.truth_target, 3), inst.planted_u);
  }
  CHECK(std::abs(total / 200.0 - 0.15) <= 0.05);
}

TEST_CASE("noise-free observations equal the truth") {
  for (const Scenario sc : {Scenario::A, Scenario::B, Scenario::C}) {
    GeneratorConfig cfg;
    cfg.p = cfg.q = 20;
    cfg.K = 6;
    cfg.sigma = 0.0;
    cfg.n_target = cfg.n_source = 200;
    cfg.scenario = sc;
    const SyntheticInstance inst = generate_instance(cfg);
    for (const auto& s : inst.obs_target.samples) CHECK(s.y == inst.truth_target(s.a, s.b));
    for (std::size_t k = 0; k < inst.obs_sources.size(); ++k) {
      for (const auto& s : inst.obs_sources[k].samples) CHECK(s.y == inst.truth_sources[k](s.a, s.b));
    }
  }
}

TEST_CASE("observations are unbiased for a fixed cell") {
  DenseMatrix theta(1, 1);
  theta(0, 0) = 2.5;
  Rng rng(4);
  const ObservationSet obs = sample_observations(theta, 10000, 1.0, rng);
  std::vector<double> ys;
  for (const auto& s : obs.samples) ys.push_back(s.y);
  double mean = 0.0;
  for (double y : ys) mean += y / 10000.0;
  CHECK(std::abs(mean - 2.5) <= 4.0 * std::sqrt(variance(ys) / 10000.0));
  CHECK(variance(ys) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("type I gap grows with h") {
  double previous = -1.0;
  for (const double h : {0.0, 0.05, 0.1, 0.2}) {
    std::vector<double> gaps;
    for (Seed s = 0; s < 50; ++s) {
      GeneratorConfig cfg;
      cfg.h = h;
      cfg.K = 0;
      cfg.n_target = 1;
      cfg.seed = child_seed(7, s);
      const SyntheticInstance inst = generate_instance(cfg);
      gaps.push_back(3.0 - alignment(left_span(inst.truth_target, 3), inst.planted_u));
    }
    const double med = median(gaps);
    if (h == 0.0) CHECK(med <= 1e-8);
    CHECK(med >= previous);
    previous = med;
  }
}

TEST_CASE("relative_error") {
  const DenseMatrix t = DenseMatrix::Ones(2, 2);
  CHECK(relative_error(t, t) == 0.0);
  CHECK(relative_error(DenseMatrix::Zero(2, 2), t) == doctest::Approx(1.0));
  CHECK(relative_error(2.0 * t, t) == doctest::Approx(1.0));
}

TEST_CASE("target-only baseline is exact on dense noiseless data and deterministic") {
  Vector sv(2);
  sv << 2.0, 1.0;
  const DenseMatrix truth = testing::low_rank(15, 12, sv, 2);
  CrudeSolverConfig cfg;
  cfg.rank = 2;
  const DenseMatrix est = baseline_target_only(testing::one_pass(truth), cfg);
  CHECK(max_abs(est - truth) <= 1e-4);

  Rng rng(3);
  const ObservationSet obs = sample_observations(truth, 150, 0.5, rng);
  CHECK(max_abs(baseline_target_only(obs, cfg) - baseline_target_only(obs, cfg)) == 0.0);
}

TEST_CASE("pooled two-step baseline") {
  Vector sv(2);
  sv << 2.0, 1.0;
  const DenseMatrix truth = testing::low_rank(15, 12, sv, 4);
  CrudeSolverConfig cfg;
  cfg.rank = 2;
  const ObservationSet dense = testing::one_pass(truth);

  SUBCASE("identical noiseless sources give exact recovery") {
    const DenseMatrix est = baseline_pooled_two_step(dense, {dense, dense}, cfg);
    CHECK(max_abs(est - truth) <= 1e-4);
  }
  SUBCASE("no sources means fitting the target, then its residuals") {
    Rng rng(5);
    const ObservationSet obs = sample_observations(truth, 120, 1.0, rng);
    const DenseMatrix first = crude_complete(obs, cfg).estimate;
    ObservationSet contrast = obs;
    for (auto& s : contrast.samples) s.y -= first(s.a, s.b);
    const DenseMatrix expect = first + crude_complete(contrast, cfg).estimate;
    CHECK(max_abs(baseline_pooled_two_step(obs, {}, cfg) - expect) <= 1e-12);
  }
  SUBCASE("mismatched shapes are rejected") {
    CHECK_THROWS_AS(baseline_pooled_two_step(dense, {ObservationSet{3, 3, {{0, 0, 1.0}}}}, cfg),
                    DimensionMismatchError);
  }
}

TEST_CASE("experiment smoke run on a tiny configuration") {
  const ExperimentResult r = run_experiment(tiny_experiment());
  REQUIRE(r.methods.size() == 4);
  CHECK(r.rep_seeds == std::vector<Seed>{child_seed(17, 0)});
  for (const auto& m : r.methods) {
    REQUIRE(m.errors.size() == 1);
    CHECK(std::isfinite(m.errors[0]));
    CHECK(m.errors[0] >= 0.0);
    CHECK(m.failed == 0);
  }
  REQUIRE(r.nora.size() == 1);
  CHECK(r.nora[0].has_value());
  CHECK(r.failures.empty());
}

TEST_CASE("experiments are reproducible and independent of the thread count") {
  ExperimentConfig cfg = tiny_experiment();
  cfg.reps = 3;
  cfg.methods = {kTargetOnly, kNoraTransfer};
  const ExperimentResult a = run_experiment(cfg);
  const ExperimentResult b = run_experiment(cfg);
  cfg.threads = 3;
  const ExperimentResult c = run_experiment(cfg);
  for (std::size_t m = 0; m < a.methods.size(); ++m) {
    CHECK(a.methods[m].errors == b.methods[m].errors);
    CHECK(a.methods[m].errors == c.methods[m].errors);
    CHECK(a.methods[m].mean == c.methods[m].mean);
    CHECK(a.methods[m].std_error == c.methods[m].std_error);
  }
  CHECK(a.rep_seeds == c.rep_seeds);
}

TEST_CASE("experiment config validation") {
  ExperimentConfig cfg = tiny_experiment();
  cfg.reps = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInputError);
  cfg = tiny_experiment();
  cfg.methods = {"foo"};
  CHECK_THROWS_AS(cfg.validate(), InvalidInputError);
  cfg = tiny_experiment();
  cfg.delta_u = 5.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInputError);
  cfg = tiny_experiment();
  CHECK_THROWS_AS(run_experiment(cfg).method("nope"), InvalidInputError);
}

TEST_CASE("parallel_for visits every index once") {
  for (const int threads : {1, 4}) {
    std::vector<std::atomic<int>> hits(37);
    parallel_for(hits.size(), threads, [&](std::size_t i) { hits[i]++; });
    for (const auto& h : hits) CHECK(h.load() == 1);
  }
}
