#pragma once

// CSV dataset ingestion, JSON run configuration and fit reports shared by the
// CLI and the test suites.

#include "epifit/fit.hpp"
#include "epifit/inference.hpp"
#include "epifit/model.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace epifit {

// Parse failure with a 1-based line number where applicable.
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& msg, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg),
        line(line) {}
  int line;
};

struct Dataset {
  EpidemicData data;
  std::vector<std::string> intervention_names;  // header names of the a_ columns
};

// Schema: header row with required column `y`, intervention columns prefixed
// `a_`, optional `date`. Anything else is rejected.
Dataset read_dataset_csv(const std::string& path);
void write_dataset_csv(const std::string& path, const EpidemicData& data,
                       const std::vector<std::string>& intervention_names);

// shortest round-trip formatting, used for all CSV numeric output
std::string fmt_double(double v);

struct RunConfig {
  ModelConfig model;
  FitOptions fit;
};

// Strict parse: unknown keys anywhere are rejected.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

struct RescaleInfo {
  std::vector<double> scale;   // per intervention column
  std::vector<double> offset;
};

struct FitReport {
  int schema_version = 1;
  ObsFamily family = ObsFamily::negative_binomial;
  std::vector<std::string> intervention_names;
  int t_len = 0;
  Theta theta_hat;
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<double> trace;
  double marginal_level = 0.95;
  std::vector<MarginalInterval> marginal;
  Matrix upsilon;
  int bandwidth = 0;
  double h_condition = 0.0;
  double clip_magnitude = 0.0;
  Vector fitted_means;
  std::string note;
  // config echo so downstream commands can rebuild the model exactly
  double k_max = 0.0;
  double alpha = 0.0;
  int t0 = 0;
  Vector g_weights;
  Vector pi_weights;
  std::optional<RescaleInfo> rescale;

  ModelConfig model_config() const;
};

nlohmann::json fit_report_to_json(const FitReport& report);
FitReport fit_report_from_json(const nlohmann::json& j);
FitReport load_fit_report(const std::string& path);

// Evaluates scores/Hessian/means at a given theta and packages a FitResult
// (used to rebuild fits from stored reports).
FitResult evaluate_fit(const Theta& theta, const EpidemicData& data, const ModelConfig& config);

}  // namespace epifit
