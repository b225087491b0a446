#include "epifit/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace epifit {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(field);
      field.clear();
    } else if (ch != '\r') {
      field += ch;
    }
  }
  out.push_back(field);
  for (auto& f : out) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.erase(f.begin());
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t')) f.pop_back();
  }
  return out;
}

double parse_number(const std::string& s, int line, const std::string& col) {
  if (s.empty()) throw ParseError("empty value in column '" + col + "'", line);
  const char* begin = s.data();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end != begin + s.size() || !std::isfinite(v))
    throw ParseError("cannot parse '" + s + "' in column '" + col + "'", line);
  return v;
}

void check_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw ParseError("unknown key '" + it.key() + "' in " + where);
  }
}

DelayPmf parse_delay(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + " must be an object");
  std::string type = j.value("type", "");
  if (type == "weights") {
    check_keys(j, {"type", "values"}, where);
    auto vals = j.at("values").get<std::vector<double>>();
    Vector w(vals.size());
    for (size_t i = 0; i < vals.size(); ++i) w(i) = vals[i];
    return DelayPmf(w);
  }
  if (type == "discretized_gamma") {
    check_keys(j, {"type", "mean", "cv", "max_lag"}, where);
    return discretized_gamma_pmf(j.at("mean").get<double>(), j.at("cv").get<double>(),
                                 j.at("max_lag").get<int>());
  }
  throw ParseError(where + ": type must be 'weights' or 'discretized_gamma'");
}

Vector json_to_vector(const nlohmann::json& j) {
  auto vals = j.get<std::vector<double>>();
  Vector v(vals.size());
  for (size_t i = 0; i < vals.size(); ++i) v(i) = vals[i];
  return v;
}

nlohmann::json vector_to_json(const VectorRef& v) {
  nlohmann::json j = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

nlohmann::json matrix_to_json(const MatrixRef& m) {
  nlohmann::json j = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) j.push_back(vector_to_json(m.row(i).transpose()));
  return j;
}

Matrix json_to_matrix(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw ParseError("expected a matrix (array of arrays)");
  int rows = static_cast<int>(j.size());
  int cols = static_cast<int>(j[0].size());
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (static_cast<int>(j[i].size()) != cols) throw ParseError("ragged matrix rows");
    for (int k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

}  // namespace

std::string fmt_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) == std::vector<std::string>{""})
    throw ParseError("empty file", 1);

  auto header = split_csv_line(line);
  int y_col = -1, date_col = -1;
  std::vector<int> a_cols;
  std::vector<std::string> a_names;
  for (int i = 0; i < static_cast<int>(header.size()); ++i) {
    const std::string& h = header[i];
    if (h == "y") {
      y_col = i;
    } else if (h == "date") {
      date_col = i;
    } else if (h.rfind("a_", 0) == 0) {
      a_cols.push_back(i);
      a_names.push_back(h);
    } else {
      throw ParseError("unexpected column '" + h + "' (want y, date or a_*)", 1);
    }
  }
  if (y_col < 0) throw ParseError("missing required column 'y'", 1);

  std::vector<double> ys;
  std::vector<std::vector<double>> as;
  std::vector<std::string> dates;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()),
                       lineno);
    ys.push_back(parse_number(fields[y_col], lineno, "y"));
    std::vector<double> row;
    for (size_t k = 0; k < a_cols.size(); ++k)
      row.push_back(parse_number(fields[a_cols[k]], lineno, a_names[k]));
    as.push_back(std::move(row));
    if (date_col >= 0) dates.push_back(fields[date_col]);
  }
  if (ys.empty()) throw ParseError("no data rows", lineno);

  Dataset ds;
  ds.intervention_names = a_names;
  ds.data.outcomes.resize(ys.size());
  ds.data.interventions.resize(ys.size(), a_cols.size());
  for (size_t t = 0; t < ys.size(); ++t) {
    ds.data.outcomes(t) = ys[t];
    for (size_t k = 0; k < a_cols.size(); ++k) ds.data.interventions(t, k) = as[t][k];
  }
  if (date_col >= 0) ds.data.labels = dates;
  return ds;
}

void write_dataset_csv(const std::string& path, const EpidemicData& data,
                       const std::vector<std::string>& intervention_names) {
  if (static_cast<int>(intervention_names.size()) != data.n_interventions())
    throw std::invalid_argument("write_dataset_csv: name count mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "y";
  for (const auto& n : intervention_names) out << "," << n;
  if (data.labels) out << ",date";
  out << "\n";
  for (int t = 0; t < data.t_len(); ++t) {
    out << fmt_double(data.outcomes(t));
    for (int k = 0; k < data.n_interventions(); ++k)
      out << "," << fmt_double(data.interventions(t, k));
    if (data.labels) out << "," << (*data.labels)[t];
    out << "\n";
  }
}

RunConfig parse_run_config(const nlohmann::json& j) {
  check_keys(j, {"model", "fit"}, "config");
  if (!j.contains("model")) throw ParseError("config: missing 'model'");
  const auto& jm = j.at("model");
  check_keys(jm, {"k_max", "alpha", "t0", "family", "g", "pi"}, "config.model");
  std::string fam = jm.value("family", "negative_binomial");
  ObsFamily family;
  if (fam == "negative_binomial")
    family = ObsFamily::negative_binomial;
  else if (fam == "gaussian")
    family = ObsFamily::gaussian;
  else
    throw ParseError("config.model.family must be 'gaussian' or 'negative_binomial'");

  RunConfig rc{ModelConfig(jm.at("k_max").get<double>(), jm.at("alpha").get<double>(),
                           jm.at("t0").get<int>(), parse_delay(jm.at("g"), "config.model.g"),
                           parse_delay(jm.at("pi"), "config.model.pi"), family),
               FitOptions{}};
  if (j.contains("fit")) {
    const auto& jf = j.at("fit");
    check_keys(jf, {"max_iters", "loglik_tol", "newton_step", "nu_solver_tol"}, "config.fit");
    rc.fit.max_iters = jf.value("max_iters", rc.fit.max_iters);
    rc.fit.loglik_tol = jf.value("loglik_tol", rc.fit.loglik_tol);
    rc.fit.newton_step = jf.value("newton_step", rc.fit.newton_step);
    rc.fit.nu_solver_tol = jf.value("nu_solver_tol", rc.fit.nu_solver_tol);
    if (rc.fit.max_iters < 1 || rc.fit.loglik_tol <= 0.0 || rc.fit.newton_step <= 0.0 ||
        rc.fit.nu_solver_tol <= 0.0)
      throw ParseError("config.fit: options must be positive");
  }
  return rc;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  return parse_run_config(j);
}

ModelConfig FitReport::model_config() const {
  return ModelConfig(k_max, alpha, t0, DelayPmf(g_weights), DelayPmf(pi_weights), family);
}

nlohmann::json fit_report_to_json(const FitReport& r) {
  nlohmann::json j;
  j["schema_version"] = r.schema_version;
  j["family"] = r.family == ObsFamily::gaussian ? "gaussian" : "negative_binomial";
  j["intervention_columns"] = r.intervention_names;
  j["t_len"] = r.t_len;
  j["theta_hat"] = {{"beta", vector_to_json(r.theta_hat.beta)},
                    {"mu", r.theta_hat.mu},
                    {"nu", r.theta_hat.nu}};
  j["loglik"] = r.loglik;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["trace"] = r.trace;
  j["marginal_level"] = r.marginal_level;
  nlohmann::json lo = nlohmann::json::array(), hi = nlohmann::json::array();
  for (const auto& ci : r.marginal) {
    lo.push_back(ci.lower);
    hi.push_back(ci.upper);
  }
  j["marginal_lower"] = lo;
  j["marginal_upper"] = hi;
  j["upsilon"] = matrix_to_json(r.upsilon);
  j["sandwich"] = {{"bandwidth", r.bandwidth},
                   {"h_condition", r.h_condition},
                   {"clip_magnitude", r.clip_magnitude}};
  j["fitted_means"] = vector_to_json(r.fitted_means);
  j["note"] = r.note;
  j["config"] = {{"k_max", r.k_max},
                 {"alpha", r.alpha},
                 {"t0", r.t0},
                 {"g", vector_to_json(r.g_weights)},
                 {"pi", vector_to_json(r.pi_weights)}};
  if (r.rescale) {
    j["rescale"] = {{"scale", r.rescale->scale}, {"offset", r.rescale->offset}};
  } else {
    j["rescale"] = nullptr;
  }
  return j;
}

FitReport fit_report_from_json(const nlohmann::json& j) {
  FitReport r;
  r.schema_version = j.at("schema_version").get<int>();
  if (r.schema_version != 1) throw ParseError("unsupported report schema_version");
  std::string fam = j.at("family").get<std::string>();
  r.family = fam == "gaussian" ? ObsFamily::gaussian : ObsFamily::negative_binomial;
  r.intervention_names = j.at("intervention_columns").get<std::vector<std::string>>();
  r.t_len = j.at("t_len").get<int>();
  r.theta_hat.beta = json_to_vector(j.at("theta_hat").at("beta"));
  r.theta_hat.mu = j.at("theta_hat").at("mu").get<double>();
  r.theta_hat.nu = j.at("theta_hat").at("nu").get<double>();
  r.loglik = j.at("loglik").get<double>();
  r.converged = j.at("converged").get<bool>();
  r.iterations = j.at("iterations").get<int>();
  r.trace = j.at("trace").get<std::vector<double>>();
  r.marginal_level = j.at("marginal_level").get<double>();
  auto lo = j.at("marginal_lower").get<std::vector<double>>();
  auto hi = j.at("marginal_upper").get<std::vector<double>>();
  if (lo.size() != hi.size()) throw ParseError("marginal bounds size mismatch");
  for (size_t i = 0; i < lo.size(); ++i) r.marginal.push_back({lo[i], hi[i]});
  r.upsilon = json_to_matrix(j.at("upsilon"));
  r.bandwidth = j.at("sandwich").at("bandwidth").get<int>();
  r.h_condition = j.at("sandwich").at("h_condition").get<double>();
  r.clip_magnitude = j.at("sandwich").at("clip_magnitude").get<double>();
  r.fitted_means = json_to_vector(j.at("fitted_means"));
  r.note = j.at("note").get<std::string>();
  r.k_max = j.at("config").at("k_max").get<double>();
  r.alpha = j.at("config").at("alpha").get<double>();
  r.t0 = j.at("config").at("t0").get<int>();
  r.g_weights = json_to_vector(j.at("config").at("g"));
  r.pi_weights = json_to_vector(j.at("config").at("pi"));
  if (j.contains("rescale") && !j.at("rescale").is_null()) {
    RescaleInfo ri;
    ri.scale = j.at("rescale").at("scale").get<std::vector<double>>();
    ri.offset = j.at("rescale").at("offset").get<std::vector<double>>();
    r.rescale = ri;
  }
  return r;
}

FitReport load_fit_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  try {
    return fit_report_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed report: ") + e.what());
  }
}

FitResult evaluate_fit(const Theta& theta, const EpidemicData& data, const ModelConfig& config) {
  LikelihoodRequest req;
  req.scores = true;
  req.hessian = true;
  LikelihoodEval ev = evaluate_likelihood(theta, data, config, req);
  FitResult res;
  res.theta_hat = theta;
  res.loglik = ev.loglik;
  res.fitted_means = ev.means;
  res.per_time_scores = ev.per_time_scores;
  res.hessian_at_mle = ev.hessian;
  Vector sc = ev.per_time_scores.colwise().sum();
  res.converged = sc.norm() <= 1e-6 * (1.0 + std::fabs(ev.loglik));
  res.iterations = 0;
  res.trace = {ev.loglik};
  return res;
}

}  // namespace epifit
