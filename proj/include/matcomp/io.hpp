#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "matcomp/completion.hpp"
#include "matcomp/errors.hpp"
#include "matcomp/linalg.hpp"
#include "matcomp/simulation.hpp"
#include "matcomp/transfer.hpp"

namespace matcomp {

using Json = nlohmann::json;

inline constexpr const char* kToolName = "matcomp";
inline constexpr const char* kToolVersion = "0.1.0";

// Malformed file content; what() names the 1-based line.
class ParseError : public InvalidInputError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : InvalidInputError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Shortest decimal that parses back to the same double; '.' separator, no
// locale dependence.
std::string format_double(double x);
double parse_double(const std::string& text, const std::string& source, std::size_t line);

// Observation CSV: header "a,b,y", then one "a,b,y" sample per line with
// 0-based integer indices.
ObservationSet read_observations_csv(std::istream& in, Eigen::Index p, Eigen::Index q,
                                     const std::string& source = "<stream>");
ObservationSet read_observations_csv(const std::filesystem::path& path, Eigen::Index p,
                                     Eigen::Index q);
void write_observations_csv(std::ostream& out, const ObservationSet& obs);

// Matrix CSV: no header, one matrix row per line, comma-separated.
DenseMatrix read_matrix_csv(std::istream& in, const std::string& source = "<stream>");
DenseMatrix read_matrix_csv(const std::filesystem::path& path);
void write_matrix_csv(std::ostream& out, const DenseMatrix& m);

// Either one value per line or a single comma-separated line.
Vector read_vector_csv(const std::filesystem::path& path);

Json matrix_to_json(const DenseMatrix& m);
DenseMatrix matrix_from_json(const Json& j, const std::string& what);

// FNV-1a 64-bit digest of a file, as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

// Rejects keys outside `allowed`, naming every offender.
void reject_unknown_keys(const Json& j, const std::vector<std::string>& allowed,
                         const std::string& where);

Json crude_config_to_json(const CrudeSolverConfig& c);
CrudeSolverConfig crude_config_from_json(const Json& j);

// Options of the `transfer` pipeline as read from its JSON config file.
struct TransferOptions {
  Eigen::Index p0 = 5;
  Eigen::Index q0 = 5;
  Eigen::Index source_rank = 3;
  Eigen::Index target_rank = 3;
  int folds = 5;
  double tau_u = 0.5;
  double tau_v = 0.5;
  std::optional<double> delta_u;  // default 0.3 * target_rank
  std::optional<double> delta_v;
  bool debias_target = false;
  CrudeSolverConfig crude;
};

Json transfer_options_to_json(const TransferOptions& o);
TransferOptions transfer_options_from_json(const Json& j);

Json model_to_json(const TransferModel& m);
TransferModel model_from_json(const Json& j);
// Structural check of a model document; throws InvalidInputError listing
// missing or mistyped fields.
void validate_model_json(const Json& j);

Json generator_config_to_json(const GeneratorConfig& c);
Json experiment_config_to_json(const ExperimentConfig& c);
ExperimentConfig experiment_config_from_json(const Json& j);

Json experiment_result_to_json(const ExperimentResult& r);
ExperimentResult experiment_result_from_json(const Json& j);
// "method,rep,rel_error" rows in rep order.
void write_experiment_csv(std::ostream& out, const ExperimentResult& r);

}  // namespace matcomp
