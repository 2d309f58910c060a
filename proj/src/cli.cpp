#include "matcomp/cli.hpp"

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "matcomp/inference.hpp"
#include "matcomp/io.hpp"

namespace matcomp {

namespace {

namespace fs = std::filesystem;

struct Globals {
  Seed seed = 0;
  bool seed_given = false;
  int threads = 1;
  bool json = false;
  bool quiet = false;
};

// Timing and input bookkeeping shared by every subcommand.
class Manifest {
 public:
  explicit Manifest(std::string command)
      : command_(std::move(command)),
        wall_start_(std::chrono::system_clock::now()),
        start_(std::chrono::steady_clock::now()) {}

  void add_input(const fs::path& path) {
    inputs_.push_back(Json{{"path", path.string()}, {"fnv1a64", file_digest(path)}});
  }
  void add_warnings(const std::vector<std::string>& w) {
    warnings_.insert(warnings_.end(), w.begin(), w.end());
  }
  const std::vector<std::string>& warnings() const { return warnings_; }

  Json to_json(const Json& config) const {
    const std::time_t t = std::chrono::system_clock::to_time_t(wall_start_);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    return Json{{"tool", kToolName},
                {"version", kToolVersion},
                {"command", command_},
                {"config", config},
                {"inputs", inputs_},
                {"warnings", warnings_},
                {"timestamp", {{"started_utc", stamp}, {"elapsed_seconds", elapsed}}}};
  }

 private:
  std::string command_;
  std::chrono::system_clock::time_point wall_start_;
  std::chrono::steady_clock::time_point start_;
  Json inputs_ = Json::array();
  std::vector<std::string> warnings_;
};

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidInputError("cannot open '" + path.string() + "' for writing");
  f << text;
  if (!f) throw InvalidInputError("failed writing '" + path.string() + "'");
}

void write_json_file(const fs::path& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

Json read_json_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidInputError("cannot open '" + path.string() + "' for reading");
  try {
    return Json::parse(f);
  } catch (const Json::parse_error& e) {
    throw InvalidInputError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void emit_warnings(const Globals& g, const std::vector<std::string>& w, std::ostream& err) {
  if (g.quiet) return;
  for (const auto& msg : w) err << "warning: " << msg << '\n';
}

int resolve_threads(std::optional<int> flag) {
  if (flag) {
    if (*flag < 1) throw InvalidInputError("--threads must be >= 1");
    return *flag;
  }
  if (const char* env = std::getenv("MATCOMP_THREADS"); env && *env) {
    int v = 0;
    const std::string s(env);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || v < 1) {
      throw InvalidInputError("MATCOMP_THREADS must be a positive integer, got '" + s + "'");
    }
    return v;
  }
  return 1;
}

// "e:<i>" for the i-th standard basis vector, otherwise a vector CSV path.
Vector parse_query_vector(const std::string& arg, Eigen::Index dim, const char* name) {
  if (arg.rfind("e:", 0) == 0) {
    const std::string idx = arg.substr(2);
    long long i = -1;
    auto [ptr, ec] = std::from_chars(idx.data(), idx.data() + idx.size(), i);
    if (idx.empty() || ec != std::errc() || ptr != idx.data() + idx.size() || i < 0 || i >= dim) {
      throw InvalidInputError(std::string("--") + name + ": basis index must lie in [0, " +
                              std::to_string(dim) + "), got '" + arg + "'");
    }
    Vector e = Vector::Zero(dim);
    e(static_cast<Eigen::Index>(i)) = 1.0;
    return e;
  }
  Vector v = read_vector_csv(arg);
  if (v.size() != dim) {
    throw DimensionMismatchError(std::string("--") + name + ": vector has length " +
                                 std::to_string(v.size()) + ", expected " + std::to_string(dim));
  }
  return v;
}

void check_dims(Eigen::Index p, Eigen::Index q) {
  if (p < 1 || q < 1) throw InvalidInputError("--p and --q must be positive");
}

struct CompleteArgs {
  std::string obs;
  Eigen::Index p = 0;
  Eigen::Index q = 0;
  Eigen::Index rank = 3;
  int folds = 5;
  std::string config;
  std::string out;
};

int cmd_complete(const CompleteArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  check_dims(a.p, a.q);
  Manifest manifest("complete");
  CrudeSolverConfig crude;
  if (!a.config.empty()) {
    crude = crude_config_from_json(read_json_file(a.config));
    manifest.add_input(a.config);
  }
  crude.rank = a.rank;
  crude.validate();
  const ObservationSet obs = read_observations_csv(a.obs, a.p, a.q);
  manifest.add_input(a.obs);
  if (a.folds < 2 || static_cast<std::size_t>(a.folds) > obs.size()) {
    throw InvalidInputError("--folds must satisfy 2 <= J <= n (J=" + std::to_string(a.folds) +
                            ", n=" + std::to_string(obs.size()) + ")");
  }
  if (obs.size() < static_cast<std::size_t>(a.rank * (a.p + a.q))) {
    manifest.add_warnings({"sample size n=" + std::to_string(obs.size()) +
                           " is below rank*(p+q)=" + std::to_string(a.rank * (a.p + a.q))});
  }
  const DebiasedMatrix est = debiased_estimate(obs, crude, a.folds, g.seed, fs::path(a.obs).stem());

  std::ostringstream csv;
  write_matrix_csv(csv, est.estimate);
  const fs::path out_path(a.out);
  write_text_file(out_path, csv.str());
  fs::path manifest_path = out_path;
  manifest_path.replace_extension(".manifest.json");
  Json config{{"p", a.p},     {"q", a.q},         {"rank", a.rank},
              {"folds", a.folds}, {"seed", g.seed}, {"crude", crude_config_to_json(crude)}};
  write_json_file(manifest_path, Json{{"output", out_path.string()},
                                      {"manifest", manifest.to_json(config)}});
  emit_warnings(g, manifest.warnings(), err);
  if (!g.quiet) {
    out << "wrote " << out_path.string() << " (" << a.p << "x" << a.q << ", n=" << obs.size()
        << ", rank=" << a.rank << ", folds=" << a.folds << ")\n";
  }
  return kExitOk;
}

struct TransferArgs {
  std::string target;
  std::vector<std::string> sources;
  std::string mode = "nora";
  std::string config;
  Eigen::Index p = 0;
  Eigen::Index q = 0;
  std::string out;
};

int cmd_transfer(const TransferArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  check_dims(a.p, a.q);
  if (a.mode != "oracle" && a.mode != "nora") {
    throw InvalidInputError("--mode must be 'oracle' or 'nora', got '" + a.mode + "'");
  }
  Manifest manifest("transfer");
  TransferOptions opts;
  if (!a.config.empty()) {
    opts = transfer_options_from_json(read_json_file(a.config));
    manifest.add_input(a.config);
  }
  const ObservationSet target = read_observations_csv(a.target, a.p, a.q);
  manifest.add_input(a.target);

  std::vector<ObservationSet> source_obs;
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const auto& path : a.sources) {
    source_obs.push_back(read_observations_csv(path, a.p, a.q));
    manifest.add_input(path);
    std::string id = fs::path(path).stem().string();
    if (!seen.insert(id).second) {
      throw InvalidInputError("duplicate source id '" + id + "' (ids are file stems)");
    }
    ids.push_back(std::move(id));
  }
  if (a.mode == "oracle" && source_obs.empty()) {
    throw InvalidInputError("--mode oracle needs at least one --source");
  }

  CrudeSolverConfig source_crude = opts.crude;
  source_crude.rank = opts.source_rank;
  std::vector<DebiasedMatrix> sources(source_obs.size());
  parallel_for(source_obs.size(), g.threads, [&](std::size_t k) {
    sources[k] = debiased_estimate(source_obs[k], source_crude, opts.folds,
                                   child_seed(g.seed, k + 1), ids[k]);
  });

  std::optional<TransferModel> model;
  if (a.mode == "oracle") {
    model.emplace(oracle_transfer(target, sources, opts.p0, opts.q0));
  } else {
    NoraConfig cfg;
    cfg.p0 = opts.p0;
    cfg.q0 = opts.q0;
    cfg.select_u.tau = opts.tau_u;
    cfg.select_v.tau = opts.tau_v;
    cfg.gate = GateConfig::with_rank(opts.target_rank);
    if (opts.delta_u) cfg.gate.delta_u = *opts.delta_u;
    if (opts.delta_v) cfg.gate.delta_v = *opts.delta_v;
    cfg.crude = opts.crude;
    cfg.debias_target = opts.debias_target;
    cfg.folds = opts.folds;
    cfg.seed = child_seed(g.seed, 0);
    model.emplace(nora_transfer(target, sources, cfg));
  }
  manifest.add_warnings(model->warnings);

  Json config = transfer_options_to_json(opts);
  config["mode"] = a.mode;
  config["p"] = a.p;
  config["q"] = a.q;
  config["seed"] = g.seed;
  config["sources"] = ids;
  Json doc = model_to_json(*model);
  doc["mode"] = a.mode;
  doc["manifest"] = manifest.to_json(config);
  write_json_file(a.out, doc);

  double y2 = 0.0;
  for (const Sample& s : target.samples) y2 += s.y * s.y;
  const double rel = y2 > 0.0 ? model->residual_ss / y2 : model->residual_ss;
  emit_warnings(g, manifest.warnings(), err);
  if (!g.quiet) {
    out << "relative_residual=" << format_double(rel) << " p0=" << model->u_hat.dim()
        << " q0=" << model->v_hat.dim() << " |I_U|=" << model->selected_u.size()
        << " |I_V|=" << model->selected_v.size() << '\n';
  }
  return kExitOk;
}

struct InferArgs {
  std::string model;
  std::string obs;
  std::string u;
  std::string v;
  double level = 0.95;
};

int cmd_infer(const InferArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  if (!(a.level > 0.0 && a.level < 1.0)) {
    throw InvalidInputError("--level must lie strictly between 0 and 1");
  }
  Manifest manifest("infer");
  const TransferModel model = model_from_json(read_json_file(a.model));
  manifest.add_input(a.model);
  const ObservationSet obs = read_observations_csv(a.obs, model.p(), model.q());
  manifest.add_input(a.obs);
  BilinearQuery query{parse_query_vector(a.u, model.p(), "u"),
                      parse_query_vector(a.v, model.q(), "v"), a.level};
  const InferenceResult r = bilinear_ci(model, obs, query);
  emit_warnings(g, manifest.warnings(), err);
  if (g.json) {
    Json config{{"u", a.u}, {"v", a.v}, {"level", a.level}, {"seed", g.seed}};
    Json doc{{"point", r.point},         {"sigma_l", r.sigma_l}, {"z", r.z},
             {"half_width", r.half_width}, {"ci_lo", r.ci_lo},     {"ci_hi", r.ci_hi},
             {"level", a.level},           {"manifest", manifest.to_json(config)}};
    out << doc.dump(2) << '\n';
  } else {
    out << "point      " << format_double(r.point) << '\n'
        << "sigma_l    " << format_double(r.sigma_l) << '\n'
        << "z          " << format_double(r.z) << '\n'
        << "half_width " << format_double(r.half_width) << '\n'
        << "ci         [" << format_double(r.ci_lo) << ", " << format_double(r.ci_hi) << "]\n";
  }
  return kExitOk;
}

struct SimulateArgs {
  std::string config;
  std::string out;
};

int cmd_simulate(const SimulateArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  Manifest manifest("simulate");
  ExperimentConfig cfg = experiment_config_from_json(read_json_file(a.config));
  manifest.add_input(a.config);
  if (g.seed_given) cfg.base_seed = g.seed;
  cfg.threads = g.threads;
  cfg.validate();

  const ExperimentResult result = run_experiment(cfg);
  for (const auto& f : result.failures) manifest.add_warnings({"failed " + f});

  Json doc = experiment_result_to_json(result);
  doc["manifest"] = manifest.to_json(experiment_config_to_json(cfg));
  write_json_file(a.out + ".json", doc);
  std::ostringstream csv;
  write_experiment_csv(csv, result);
  write_text_file(a.out + ".csv", csv.str());

  emit_warnings(g, manifest.warnings(), err);
  if (!g.quiet) {
    for (const auto& m : result.methods) {
      out << m.label << " mean=" << format_double(m.mean) << " se=" << format_double(m.std_error)
          << " failed=" << m.failed << '\n';
    }
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Representation transfer for noisy matrix completion", kToolName};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  Globals g;
  std::optional<int> threads;
  auto* seed_opt = app.add_option("--seed", g.seed, "Seed for every random choice");
  app.add_option("--threads", threads, "Worker threads (fallback: MATCOMP_THREADS)");
  app.add_flag("--json", g.json, "Machine-readable output where supported");
  app.add_flag("--quiet", g.quiet, "Suppress summaries and warnings");

  CompleteArgs ca;
  auto* complete = app.add_subcommand("complete", "Debiased completion of one matrix");
  complete->add_option("--obs", ca.obs, "Observation CSV")->required();
  complete->add_option("--p", ca.p, "Rows")->required();
  complete->add_option("--q", ca.q, "Columns")->required();
  complete->add_option("--rank", ca.rank, "Crude estimator rank")->capture_default_str();
  complete->add_option("--folds", ca.folds, "Cross-fitting folds J")->capture_default_str();
  complete->add_option("--config", ca.config, "Crude solver JSON");
  complete->add_option("--out", ca.out, "Output matrix CSV")->required();

  TransferArgs ta;
  auto* transfer = app.add_subcommand("transfer", "Fit a representation transfer model");
  transfer->add_option("--target", ta.target, "Target observation CSV")->required();
  transfer->add_option("--source", ta.sources, "Source observation CSV (repeatable)");
  transfer->add_option("--mode", ta.mode, "oracle | nora")->capture_default_str();
  transfer->add_option("--config", ta.config, "Transfer options JSON");
  transfer->add_option("--p", ta.p, "Rows")->required();
  transfer->add_option("--q", ta.q, "Columns")->required();
  transfer->add_option("--out", ta.out, "Output model JSON")->required();

  InferArgs ia;
  auto* infer = app.add_subcommand("infer", "Confidence interval for u^T Theta v");
  infer->add_option("--model", ia.model, "Model JSON")->required();
  infer->add_option("--obs", ia.obs, "Target observation CSV")->required();
  infer->add_option("--u", ia.u, "e:<i> or vector CSV")->required();
  infer->add_option("--v", ia.v, "e:<j> or vector CSV")->required();
  infer->add_option("--level", ia.level, "Confidence level")->capture_default_str();

  SimulateArgs sa;
  auto* simulate = app.add_subcommand("simulate", "Replicated synthetic comparison");
  simulate->add_option("--config", sa.config, "Experiment JSON")->required();
  simulate->add_option("--out", sa.out, "Output prefix (.json and .csv)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    g.seed_given = seed_opt->count() > 0;
    g.threads = resolve_threads(threads);
    if (*complete) return cmd_complete(ca, g, out, err);
    if (*transfer) return cmd_transfer(ta, g, out, err);
    if (*infer) return cmd_infer(ia, g, out, err);
    return cmd_simulate(sa, g, out, err);
  } catch (const InvalidInputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DegenerateQueryError& e) {
    err << "error: degenerate query: " << e.what() << '\n';
    return kExitDegenerateQuery;
  } catch (const NumericFailureError& e) {
    err << "error: numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const DegenerateInputError& e) {
    err << "error: degenerate input: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const Json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace matcomp
