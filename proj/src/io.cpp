#include "matcomp/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

namespace matcomp {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

long long parse_index(const std::string& text, const std::string& source, std::size_t line,
                      const char* name) {
  long long v = 0;
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (text.empty() || ec != std::errc() || ptr != last) {
    throw ParseError(source, line, std::string("column '") + name + "' is not an integer: '" +
                                       text + "'");
  }
  return v;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError("cannot open '" + path.string() + "' for reading");
  return in;
}

template <typename T>
T get_as(const Json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw InvalidInputError(where + ": field '" + key + "': " + e.what());
  }
}

double json_number_or_nan(const Json& j) { return j.is_null() ? std::nan("") : j.get<double>(); }

Json nan_to_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

}  // namespace

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw InvalidInputError("format_double: conversion failed");
  return std::string(buf, ptr);
}

double parse_double(const std::string& text, const std::string& source, std::size_t line) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (text.empty() || ec != std::errc() || ptr != last) {
    throw ParseError(source, line, "not a decimal number: '" + text + "'");
  }
  if (!std::isfinite(v)) throw ParseError(source, line, "non-finite value '" + text + "'");
  return v;
}

ObservationSet read_observations_csv(std::istream& in, Eigen::Index p, Eigen::Index q,
                                     const std::string& source) {
  if (p < 1 || q < 1) throw InvalidInputError("observation dims must be positive");
  ObservationSet obs{p, q, {}};
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (!header) {
      if (t != "a,b,y") throw ParseError(source, lineno, "expected header 'a,b,y', got '" + t + "'");
      header = true;
      continue;
    }
    const auto fields = split_commas(t);
    if (fields.size() != 3) {
      throw ParseError(source, lineno, "expected 3 fields, found " + std::to_string(fields.size()));
    }
    const long long a = parse_index(fields[0], source, lineno, "a");
    const long long b = parse_index(fields[1], source, lineno, "b");
    if (a < 0 || a >= p) {
      throw ParseError(source, lineno, "row index a=" + std::to_string(a) + " outside [0, " +
                                           std::to_string(p) + ")");
    }
    if (b < 0 || b >= q) {
      throw ParseError(source, lineno, "column index b=" + std::to_string(b) + " outside [0, " +
                                           std::to_string(q) + ")");
    }
    obs.samples.push_back({static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b),
                           parse_double(fields[2], source, lineno)});
  }
  if (!header) throw ParseError(source, std::max<std::size_t>(lineno, 1), "missing header 'a,b,y'");
  return obs;
}

ObservationSet read_observations_csv(const std::filesystem::path& path, Eigen::Index p,
                                     Eigen::Index q) {
  auto in = open_in(path);
  return read_observations_csv(in, p, q, path.string());
}

void write_observations_csv(std::ostream& out, const ObservationSet& obs) {
  out << "a,b,y\n";
  for (const Sample& s : obs.samples) out << s.a << ',' << s.b << ',' << format_double(s.y) << '\n';
}

DenseMatrix read_matrix_csv(std::istream& in, const std::string& source) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    std::vector<double> row;
    for (const auto& f : split_commas(t)) row.push_back(parse_double(f, source, lineno));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError(source, lineno, "row has " + std::to_string(row.size()) +
                                           " entries, expected " +
                                           std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(source, 1, "empty matrix file");
  DenseMatrix m(static_cast<Eigen::Index>(rows.size()),
                static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

DenseMatrix read_matrix_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_matrix_csv(in, path.string());
}

void write_matrix_csv(std::ostream& out, const DenseMatrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

Vector read_vector_csv(const std::filesystem::path& path) {
  const DenseMatrix m = read_matrix_csv(path);
  if (m.rows() != 1 && m.cols() != 1) {
    throw InvalidInputError("vector file '" + path.string() + "' must hold a single row or column");
  }
  return m.reshaped();
}

Json matrix_to_json(const DenseMatrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

DenseMatrix matrix_from_json(const Json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw InvalidInputError(what + ": expected a non-empty array of rows");
  }
  const std::size_t cols = j.front().size();
  DenseMatrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) {
      throw InvalidInputError(what + ": row " + std::to_string(i) + " has the wrong length");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[i][c].is_number()) {
        throw InvalidInputError(what + ": entry (" + std::to_string(i) + "," + std::to_string(c) +
                                ") is not a number");
      }
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = j[i][c].get<double>();
    }
  }
  return m;
}

std::string file_digest(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

void reject_unknown_keys(const Json& j, const std::vector<std::string>& allowed,
                         const std::string& where) {
  if (!j.is_object()) throw InvalidInputError(where + ": expected a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  std::string bad;
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) bad += (bad.empty() ? "" : ", ") + key;
  }
  if (!bad.empty()) throw InvalidInputError(where + ": unknown keys: " + bad);
}

Json crude_config_to_json(const CrudeSolverConfig& c) {
  return Json{{"rank", c.rank},
              {"max_iters", c.max_iters},
              {"step_size", c.step_size ? Json(*c.step_size) : Json("auto")},
              {"rel_tol", c.rel_tol},
              {"balance_weight", c.balance_weight},
              {"als_sweeps", c.als_sweeps},
              {"ridge", c.ridge}};
}

CrudeSolverConfig crude_config_from_json(const Json& j) {
  const std::string where = "crude solver config";
  reject_unknown_keys(j, {"rank", "max_iters", "step_size", "rel_tol", "balance_weight", "als_sweeps",
                       "ridge"},
                      where);
  CrudeSolverConfig c;
  if (j.contains("rank")) c.rank = get_as<Eigen::Index>(j, "rank", where);
  if (j.contains("max_iters")) c.max_iters = get_as<int>(j, "max_iters", where);
  if (j.contains("step_size")) {
    const Json& s = j.at("step_size");
    if (s.is_string()) {
      if (s.get<std::string>() != "auto") {
        throw InvalidInputError(where + ": step_size must be a number or \"auto\"");
      }
      c.step_size.reset();
    } else {
      c.step_size = get_as<double>(j, "step_size", where);
    }
  }
  if (j.contains("rel_tol")) c.rel_tol = get_as<double>(j, "rel_tol", where);
  if (j.contains("balance_weight")) c.balance_weight = get_as<double>(j, "balance_weight", where);
  if (j.contains("als_sweeps")) c.als_sweeps = get_as<int>(j, "als_sweeps", where);
  if (j.contains("ridge")) c.ridge = get_as<double>(j, "ridge", where);
  c.validate();
  return c;
}

Json transfer_options_to_json(const TransferOptions& o) {
  Json j{{"p0", o.p0},
         {"q0", o.q0},
         {"source_rank", o.source_rank},
         {"target_rank", o.target_rank},
         {"folds", o.folds},
         {"tau_u", o.tau_u},
         {"tau_v", o.tau_v},
         {"delta_u", o.delta_u.value_or(0.3 * static_cast<double>(o.target_rank))},
         {"delta_v", o.delta_v.value_or(0.3 * static_cast<double>(o.target_rank))},
         {"debias_target", o.debias_target},
         {"crude", crude_config_to_json(o.crude)}};
  j["crude"].erase("rank");
  return j;
}

TransferOptions transfer_options_from_json(const Json& j) {
  const std::string where = "transfer config";
  reject_unknown_keys(j,
                      {"p0", "q0", "source_rank", "target_rank", "folds", "tau_u", "tau_v",
                       "delta_u", "delta_v", "debias_target", "crude"},
                      where);
  TransferOptions o;
  if (j.contains("p0")) o.p0 = get_as<Eigen::Index>(j, "p0", where);
  if (j.contains("q0")) o.q0 = get_as<Eigen::Index>(j, "q0", where);
  if (j.contains("source_rank")) o.source_rank = get_as<Eigen::Index>(j, "source_rank", where);
  if (j.contains("target_rank")) o.target_rank = get_as<Eigen::Index>(j, "target_rank", where);
  if (j.contains("folds")) o.folds = get_as<int>(j, "folds", where);
  if (j.contains("tau_u")) o.tau_u = get_as<double>(j, "tau_u", where);
  if (j.contains("tau_v")) o.tau_v = get_as<double>(j, "tau_v", where);
  if (j.contains("delta_u")) o.delta_u = get_as<double>(j, "delta_u", where);
  if (j.contains("delta_v")) o.delta_v = get_as<double>(j, "delta_v", where);
  if (j.contains("debias_target")) o.debias_target = get_as<bool>(j, "debias_target", where);
  if (j.contains("crude")) {
    if (j.at("crude").contains("rank")) {
      throw InvalidInputError(where + ": crude.rank is set by source_rank/target_rank");
    }
    o.crude = crude_config_from_json(j.at("crude"));
  }
  if (o.p0 < 1 || o.q0 < 1 || o.source_rank < 1 || o.target_rank < 1) {
    throw InvalidInputError(where + ": dimensions and ranks must be >= 1");
  }
  if (o.folds < 2) throw InvalidInputError(where + ": folds must be >= 2");
  return o;
}

Json model_to_json(const TransferModel& m) {
  return Json{{"format", "matcomp-transfer-model"},
              {"p", m.p()},
              {"q", m.q()},
              {"p0", m.u_hat.dim()},
              {"q0", m.v_hat.dim()},
              {"u_basis", matrix_to_json(m.u_hat.basis())},
              {"v_basis", matrix_to_json(m.v_hat.basis())},
              {"gamma", matrix_to_json(m.gamma)},
              {"gate_u_used_transfer", m.gate_u_used_transfer},
              {"gate_v_used_transfer", m.gate_v_used_transfer},
              {"selected_u", m.selected_u},
              {"selected_v", m.selected_v},
              {"residual_ss", m.residual_ss},
              {"warnings", m.warnings}};
}

void validate_model_json(const Json& j) {
  if (!j.is_object()) throw InvalidInputError("model: expected a JSON object");
  std::string problems;
  auto need = [&](const char* key, bool ok) {
    if (!ok) problems += (problems.empty() ? "" : ", ") + std::string(key);
  };
  auto has = [&](const char* key) { return j.contains(key); };
  need("format", has("format") && j["format"] == "matcomp-transfer-model");
  for (const char* k : {"p", "q", "p0", "q0"}) {
    need(k, has(k) && j[k].is_number_integer() && j[k].get<long long>() >= 1);
  }
  for (const char* k : {"u_basis", "v_basis", "gamma"}) need(k, has(k) && j[k].is_array());
  for (const char* k : {"gate_u_used_transfer", "gate_v_used_transfer"}) {
    need(k, has(k) && j[k].is_boolean());
  }
  for (const char* k : {"selected_u", "selected_v"}) {
    bool ok = has(k) && j[k].is_array();
    if (ok) {
      for (const auto& e : j[k]) ok = ok && e.is_string();
    }
    need(k, ok);
  }
  need("residual_ss", has("residual_ss") && j["residual_ss"].is_number());
  if (!problems.empty()) throw InvalidInputError("model: missing or invalid fields: " + problems);

  const DenseMatrix u = matrix_from_json(j["u_basis"], "model.u_basis");
  const DenseMatrix v = matrix_from_json(j["v_basis"], "model.v_basis");
  const DenseMatrix g = matrix_from_json(j["gamma"], "model.gamma");
  const auto p = j["p"].get<Eigen::Index>(), q = j["q"].get<Eigen::Index>();
  const auto p0 = j["p0"].get<Eigen::Index>(), q0 = j["q0"].get<Eigen::Index>();
  if (u.rows() != p || u.cols() != p0 || v.rows() != q || v.cols() != q0 || g.rows() != p0 ||
      g.cols() != q0) {
    throw InvalidInputError("model: matrix shapes disagree with p, q, p0, q0");
  }
}

TransferModel model_from_json(const Json& j) {
  validate_model_json(j);
  TransferModel m(Subspace(matrix_from_json(j["u_basis"], "model.u_basis")),
                  Subspace(matrix_from_json(j["v_basis"], "model.v_basis")),
                  matrix_from_json(j["gamma"], "model.gamma"));
  m.gate_u_used_transfer = j["gate_u_used_transfer"].get<bool>();
  m.gate_v_used_transfer = j["gate_v_used_transfer"].get<bool>();
  m.selected_u = j["selected_u"].get<std::vector<std::string>>();
  m.selected_v = j["selected_v"].get<std::vector<std::string>>();
  m.residual_ss = j["residual_ss"].get<double>();
  if (j.contains("warnings")) m.warnings = j["warnings"].get<std::vector<std::string>>();
  return m;
}

Json generator_config_to_json(const GeneratorConfig& c) {
  return Json{{"p", c.p},
              {"q", c.q},
              {"p0", c.p0},
              {"q0", c.q0},
              {"r", c.r},
              {"h", c.h},
              {"K", c.K},
              {"n_target", c.n_target},
              {"n_source", c.n_source},
              {"sigma", c.sigma},
              {"scenario", to_string(c.scenario)},
              {"source_mix", c.source_mix}};
}

Json experiment_config_to_json(const ExperimentConfig& c) {
  Json j = generator_config_to_json(c.generator);
  j["methods"] = c.methods;
  j["reps"] = c.reps;
  j["seed"] = c.base_seed;
  j["folds"] = c.folds;
  j["tau_u"] = c.tau_u;
  j["tau_v"] = c.tau_v;
  j["delta_u"] = c.delta_u.value_or(0.3 * static_cast<double>(c.generator.r));
  j["delta_v"] = c.delta_v.value_or(0.3 * static_cast<double>(c.generator.r));
  j["crude"] = crude_config_to_json(c.crude);
  j["crude"].erase("rank");
  return j;
}

ExperimentConfig experiment_config_from_json(const Json& j) {
  const std::string where = "simulation config";
  reject_unknown_keys(j,
                      {"p", "q", "p0", "q0", "r", "h", "K", "n_target", "n_source", "sigma",
                       "scenario", "source_mix", "methods", "reps", "seed", "folds", "tau_u",
                       "tau_v", "delta_u", "delta_v", "crude"},
                      where);
  ExperimentConfig c;
  GeneratorConfig& g = c.generator;
  if (j.contains("p")) g.p = get_as<Eigen::Index>(j, "p", where);
  if (j.contains("q")) g.q = get_as<Eigen::Index>(j, "q", where);
  if (j.contains("p0")) g.p0 = get_as<Eigen::Index>(j, "p0", where);
  if (j.contains("q0")) g.q0 = get_as<Eigen::Index>(j, "q0", where);
  if (j.contains("r")) g.r = get_as<Eigen::Index>(j, "r", where);
  if (j.contains("h")) g.h = get_as<double>(j, "h", where);
  if (j.contains("K")) g.K = get_as<int>(j, "K", where);
  if (j.contains("n_target")) g.n_target = get_as<std::size_t>(j, "n_target", where);
  if (j.contains("n_source")) g.n_source = get_as<std::size_t>(j, "n_source", where);
  if (j.contains("sigma")) g.sigma = get_as<double>(j, "sigma", where);
  if (j.contains("scenario")) g.scenario = parse_scenario(get_as<std::string>(j, "scenario", where));
  if (j.contains("source_mix")) g.source_mix = get_as<std::array<double, 4>>(j, "source_mix", where);
  if (j.contains("methods")) c.methods = get_as<std::vector<std::string>>(j, "methods", where);
  if (j.contains("reps")) c.reps = get_as<int>(j, "reps", where);
  if (j.contains("seed")) c.base_seed = get_as<Seed>(j, "seed", where);
  if (j.contains("folds")) c.folds = get_as<int>(j, "folds", where);
  if (j.contains("tau_u")) c.tau_u = get_as<double>(j, "tau_u", where);
  if (j.contains("tau_v")) c.tau_v = get_as<double>(j, "tau_v", where);
  if (j.contains("delta_u")) c.delta_u = get_as<double>(j, "delta_u", where);
  if (j.contains("delta_v")) c.delta_v = get_as<double>(j, "delta_v", where);
  if (j.contains("crude")) {
    if (j.at("crude").contains("rank")) {
      throw InvalidInputError(where + ": crude.rank is fixed to the generator rank r");
    }
    c.crude = crude_config_from_json(j.at("crude"));
  }
  c.crude.rank = g.r;
  c.validate();
  return c;
}

Json experiment_result_to_json(const ExperimentResult& r) {
  Json methods = Json::array();
  for (const auto& m : r.methods) {
    Json errors = Json::array();
    for (double e : m.errors) errors.push_back(nan_to_null(e));
    methods.push_back(Json{{"label", m.label},
                           {"errors", errors},
                           {"mean", nan_to_null(m.mean)},
                           {"std_error", nan_to_null(m.std_error)},
                           {"failed", m.failed}});
  }
  Json nora = Json::array();
  for (const auto& d : r.nora) {
    if (!d) {
      nora.push_back(nullptr);
    } else {
      nora.push_back(Json{{"used_u", d->used_u},
                          {"used_v", d->used_v},
                          {"selected_u", d->selected_u},
                          {"selected_v", d->selected_v}});
    }
  }
  return Json{{"config", experiment_config_to_json(r.config)},
              {"rep_seeds", r.rep_seeds},
              {"methods", methods},
              {"nora", nora},
              {"failures", r.failures}};
}

ExperimentResult experiment_result_from_json(const Json& j) {
  try {
    ExperimentResult r;
    r.config = experiment_config_from_json(j.at("config"));
    r.rep_seeds = j.at("rep_seeds").get<std::vector<Seed>>();
    for (const auto& m : j.at("methods")) {
      MethodSummary s;
      s.label = m.at("label").get<std::string>();
      for (const auto& e : m.at("errors")) s.errors.push_back(json_number_or_nan(e));
      s.mean = json_number_or_nan(m.at("mean"));
      s.std_error = json_number_or_nan(m.at("std_error"));
      s.failed = m.at("failed").get<int>();
      r.methods.push_back(std::move(s));
    }
    for (const auto& d : j.at("nora")) {
      if (d.is_null()) {
        r.nora.emplace_back();
      } else {
        r.nora.emplace_back(NoraDiagnostics{d.at("used_u").get<bool>(), d.at("used_v").get<bool>(),
                                            d.at("selected_u").get<std::vector<std::string>>(),
                                            d.at("selected_v").get<std::vector<std::string>>()});
      }
    }
    r.failures = j.at("failures").get<std::vector<std::string>>();
    return r;
  } catch (const Json::exception& e) {
    throw InvalidInputError(std::string("experiment result: ") + e.what());
  }
}

void write_experiment_csv(std::ostream& out, const ExperimentResult& r) {
  out << "method,rep,rel_error\n";
  for (const auto& m : r.methods) {
    for (std::size_t k = 0; k < m.errors.size(); ++k) {
      out << m.label << ',' << k << ','
          << (std::isnan(m.errors[k]) ? std::string("nan") : format_double(m.errors[k])) << '\n';
    }
  }
}

}  // namespace matcomp
