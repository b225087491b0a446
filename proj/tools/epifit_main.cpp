// epifit command line: fit, predict, shrink, diagnose, simulate.
// Exit codes: 0 success, 1 computation failure, 2 input error.

#include "epifit/diagnostics.hpp"
#include "epifit/fit.hpp"
#include "epifit/inference.hpp"
#include "epifit/io.hpp"
#include "epifit/shrinkage.hpp"
#include "epifit/simulate.hpp"
#include "epifit/special.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace epifit;

namespace {

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

std::pair<double, double> parse_min_max(const std::string& s) {
  auto comma = s.find(',');
  if (comma == std::string::npos) throw InputError("--rescale-interventions expects 'min,max'");
  try {
    double lo = std::stod(s.substr(0, comma));
    double hi = std::stod(s.substr(comma + 1));
    if (!(hi > lo)) throw InputError("--rescale-interventions requires max > min");
    return {lo, hi};
  } catch (const std::invalid_argument&) {
    throw InputError("--rescale-interventions expects numeric 'min,max'");
  }
}

std::vector<std::string> split_fields(const std::string& line) {
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
  return out;
}

// scenario CSV: exactly the fitted intervention columns, optional date
Matrix read_scenario_csv(const std::string& path, const std::vector<std::string>& names) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file", 1);
  auto header = split_fields(line);
  std::vector<int> a_cols;
  std::vector<std::string> a_names;
  for (int i = 0; i < static_cast<int>(header.size()); ++i) {
    if (header[i] == "date" || header[i] == "t") continue;
    if (header[i].rfind("a_", 0) == 0) {
      a_cols.push_back(i);
      a_names.push_back(header[i]);
    } else {
      throw ParseError("unexpected scenario column '" + header[i] + "'", 1);
    }
  }
  if (a_names != names) {
    std::string got, want;
    for (const auto& n : a_names) got += (got.empty() ? "" : ",") + n;
    for (const auto& n : names) want += (want.empty() ? "" : ",") + n;
    throw InputError("scenario columns [" + got + "] do not match fitted columns [" + want + "]");
  }
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto fields = split_fields(line);
    if (fields.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()),
                       lineno);
    std::vector<double> row;
    for (size_t k = 0; k < a_cols.size(); ++k) {
      const std::string& s = fields[a_cols[k]];
      char* end = nullptr;
      double v = std::strtod(s.c_str(), &end);
      if (end != s.c_str() + s.size() || !std::isfinite(v))
        throw ParseError("cannot parse '" + s + "' in column '" + a_names[k] + "'", lineno);
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("no scenario rows", lineno);
  Matrix m(rows.size(), a_cols.size());
  for (size_t t = 0; t < rows.size(); ++t)
    for (size_t k = 0; k < a_cols.size(); ++k) m(t, k) = rows[t][k];
  return m;
}

FitReport build_report(const FitResult& fit, const ModelConfig& config,
                       const std::vector<std::string>& names, double level,
                       const std::optional<RescaleInfo>& rescale) {
  FitReport rep;
  rep.family = config.family;
  rep.intervention_names = names;
  rep.t_len = fit.t_len();
  rep.theta_hat = fit.theta_hat;
  rep.loglik = fit.loglik;
  rep.converged = fit.converged;
  rep.iterations = fit.iterations;
  rep.trace = fit.trace;
  rep.marginal_level = level;
  rep.fitted_means = fit.fitted_means;
  rep.note = fit.note;
  rep.k_max = config.k_max;
  rep.alpha = config.alpha;
  rep.t0 = config.t0;
  rep.g_weights = config.g.weights();
  rep.pi_weights = config.pi.weights();
  rep.rescale = rescale;

  const int p = fit.n_params();
  try {
    SandwichResult sw = sandwich_covariance_ex(fit);
    rep.upsilon = sw.upsilon;
    rep.bandwidth = sw.bandwidth;
    rep.h_condition = sw.h_condition;
    rep.clip_magnitude = sw.clip_magnitude;
    rep.marginal = marginal_intervals(fit, level);
  } catch (const std::exception& e) {
    rep.upsilon = Matrix::Zero(p, p);
    rep.marginal.assign(p, MarginalInterval{});
    rep.note += std::string(rep.note.empty() ? "" : "; ") + "sandwich failed: " + e.what();
  }

  if (rescale) {
    // fitted on rescaled interventions a' = offset + scale * a; report theta
    // and covariance on the original scale
    const int da = static_cast<int>(names.size());
    Matrix l = Matrix::Identity(p, p);
    for (int jcol = 0; jcol < da; ++jcol) {
      l(0, 1 + jcol) = rescale->offset[jcol];
      l(1 + jcol, 1 + jcol) = rescale->scale[jcol];
    }
    Vector full(p);
    full.head(da + 1) = fit.theta_hat.beta;
    full(p - 2) = fit.theta_hat.mu;
    full(p - 1) = fit.theta_hat.nu;
    Vector orig = l * full;
    rep.theta_hat.beta = orig.head(da + 1);
    rep.theta_hat.mu = orig(p - 2);
    rep.theta_hat.nu = orig(p - 1);
    rep.upsilon = l * rep.upsilon * l.transpose();
    double z = std::sqrt(chi_square_quantile(level, 1));
    for (int k = 0; k < p; ++k) {
      double half = z * std::sqrt(std::max(0.0, rep.upsilon(k, k)) / rep.t_len);
      rep.marginal[k] = {orig(k) - half, orig(k) + half};
    }
  }
  return rep;
}

int cmd_fit(const std::string& data_path, const std::string& config_path,
            const std::string& out_path, const std::string& means_path, double level,
            const std::string& rescale_arg) {
  Dataset ds = read_dataset_csv(data_path);
  RunConfig rc = load_run_config(config_path);

  std::optional<RescaleInfo> rescale;
  EpidemicData fit_data = ds.data;
  if (!rescale_arg.empty()) {
    auto [lo, hi] = parse_min_max(rescale_arg);
    RescaleInfo ri;
    for (int jcol = 0; jcol < ds.data.n_interventions(); ++jcol) {
      double cmin = ds.data.interventions.col(jcol).minCoeff();
      double cmax = ds.data.interventions.col(jcol).maxCoeff();
      if (!(cmax > cmin))
        throw InputError("cannot rescale constant intervention column '" +
                         ds.intervention_names[jcol] + "'");
      double s = (hi - lo) / (cmax - cmin);
      ri.scale.push_back(s);
      ri.offset.push_back(lo - s * cmin);
      fit_data.interventions.col(jcol) =
          (ri.offset[jcol] + s * ds.data.interventions.col(jcol).array()).matrix();
    }
    rescale = ri;
  }
  fit_data.validate(rc.model.family);

  FitResult fit = fit_mle(fit_data, rc.model, rc.fit);
  FitReport rep = build_report(fit, rc.model, ds.intervention_names, level, rescale);
  write_text(out_path, fit_report_to_json(rep).dump(2) + "\n");

  if (!means_path.empty()) {
    std::ostringstream csv;
    csv << "t,y,mean\n";
    for (int t = 0; t < fit.t_len(); ++t)
      csv << (t + 1) << "," << fmt_double(ds.data.outcomes(t)) << ","
          << fmt_double(fit.fitted_means(t)) << "\n";
    write_text(means_path, csv.str());
  }
  if (!fit.converged) {
    std::cerr << "epifit fit: did not converge (" << fit.note << ")\n";
    return 1;
  }
  return 0;
}

int cmd_predict(const std::string& report_path, const std::string& scenario_path,
                const std::string& out_path, double level) {
  FitReport rep = load_fit_report(report_path);
  Matrix scenario = read_scenario_csv(scenario_path, rep.intervention_names);
  ModelConfig config = rep.model_config();
  ScenarioBand band =
      scenario_band(rep.theta_hat, rep.upsilon, rep.t_len, config, scenario, level);

  std::ostringstream csv;
  csv << "t,lower,mean,upper,inner_flag\n";
  for (int t = 0; t < band.lower.size(); ++t)
    csv << (t + 1) << "," << fmt_double(band.lower(t)) << "," << fmt_double(band.center_mean(t))
        << "," << fmt_double(band.upper(t)) << "," << static_cast<int>(band.inner_flag[t])
        << "\n";
  write_text(out_path, csv.str());
  if (band.possibly_inner)
    std::cerr << "epifit predict: band may be an inner approximation at some time points\n";
  return 0;
}

int cmd_shrink(const std::string& dir, double alpha, const std::string& out_path,
               const std::string& table_path, const std::string& block_arg,
               const std::string& weights_arg) {
  std::vector<std::pair<std::string, FitReport>> reports;
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    try {
      reports.emplace_back(f, load_fit_report(f));
    } catch (const std::exception& e) {
      std::cerr << "epifit shrink: skipping '" << f << "': " << e.what() << "\n";
    }
  }
  if (reports.size() < 2) throw InputError("need at least 2 valid fit reports");

  const int p = static_cast<int>(reports[0].second.theta_hat.beta.size()) + 2;
  std::vector<int> block;
  if (block_arg.empty()) {
    for (int i = 0; i < p - 1; ++i) block.push_back(i);  // all but nu
  } else {
    std::istringstream ss(block_arg);
    std::string tok;
    while (std::getline(ss, tok, ',')) block.push_back(std::stoi(tok));
    for (int i : block)
      if (i < 0 || i >= p) throw InputError("--block index out of range");
  }
  WeightScheme scheme = weights_arg == "unit" ? WeightScheme::unit : WeightScheme::efficient;
  const int d = static_cast<int>(block.size());

  std::vector<RegionFit> fits;
  for (auto& [file, rep] : reports) {
    Vector full(p);
    full.head(p - 2) = rep.theta_hat.beta;
    full(p - 2) = rep.theta_hat.mu;
    full(p - 1) = rep.theta_hat.nu;
    RegionFit rf;
    rf.t_len = rep.t_len;
    rf.theta_hat.resize(d);
    rf.upsilon.resize(d, d);
    for (int i = 0; i < d; ++i) {
      rf.theta_hat(i) = full(block[i]);
      for (int j = 0; j < d; ++j) rf.upsilon(i, j) = rep.upsilon(block[i], block[j]);
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(rf.upsilon);
    double floor = std::max(1e-10, 1e-10 * es.eigenvalues().maxCoeff());
    if (es.eigenvalues().minCoeff() < floor) {
      Vector ev = es.eigenvalues().cwiseMax(floor);
      rf.upsilon = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    }
    fits.push_back(std::move(rf));
  }

  EbConfidenceSets eb = eb_confidence_sets(fits, alpha, scheme);

  json j;
  j["schema_version"] = 1;
  j["alpha"] = alpha;
  j["weight_scheme"] = scheme == WeightScheme::unit ? "unit" : "efficient";
  j["block"] = block;
  j["theta_o"] = std::vector<double>(eb.moments.theta_o.data(),
                                     eb.moments.theta_o.data() + eb.moments.theta_o.size());
  json phi2 = json::array();
  for (int i = 0; i < d; ++i) {
    json row = json::array();
    for (int k = 0; k < d; ++k) row.push_back(eb.moments.phi2(i, k));
    phi2.push_back(row);
  }
  j["phi2"] = phi2;
  j["regions"] = json::array();
  for (size_t r = 0; r < fits.size(); ++r) {
    json jr;
    jr["file"] = fs::path(reports[r].first).filename().string();
    jr["ok"] = eb.sets[r].ok;
    jr["t_len"] = fits[r].t_len;
    jr["theta_hat"] = std::vector<double>(fits[r].theta_hat.data(),
                                          fits[r].theta_hat.data() + d);
    if (eb.sets[r].ok) {
      const EbRegionSet& s = eb.sets[r];
      jr["shrunk"] = std::vector<double>(s.shrunk.data(), s.shrunk.data() + d);
      jr["chi_tilde"] = s.chi_tilde;
      jr["m2"] = s.m2;
      jr["m4"] = s.m4;
      json w = json::array(), tu = json::array();
      for (int i = 0; i < d; ++i) {
        json wrow = json::array(), turow = json::array();
        for (int k = 0; k < d; ++k) {
          wrow.push_back(s.w_matrix(i, k));
          turow.push_back(s.tilde_upsilon(i, k));
        }
        w.push_back(wrow);
        tu.push_back(turow);
      }
      jr["w_matrix"] = w;
      jr["tilde_upsilon"] = tu;
    } else {
      jr["error"] = eb.sets[r].error;
    }
    j["regions"].push_back(jr);
  }
  write_text(out_path, j.dump(2) + "\n");

  if (!table_path.empty()) {
    double z = std::sqrt(chi_square_quantile(1.0 - alpha, 1));
    std::ostringstream csv;
    csv << "region,param,est_before,lo_before,hi_before,est_after,lo_after,hi_after\n";
    for (size_t r = 0; r < fits.size(); ++r) {
      if (!eb.sets[r].ok) continue;
      const EbRegionSet& s = eb.sets[r];
      for (int k = 0; k < d; ++k) {
        double se = std::sqrt(std::max(0.0, fits[r].upsilon(k, k)) / fits[r].t_len);
        double half_after =
            s.chi_tilde * std::sqrt(std::max(0.0, s.tilde_upsilon(k, k)) / fits[r].t_len);
        csv << fs::path(reports[r].first).filename().string() << "," << block[k] << ","
            << fmt_double(fits[r].theta_hat(k)) << "," << fmt_double(fits[r].theta_hat(k) - z * se)
            << "," << fmt_double(fits[r].theta_hat(k) + z * se) << "," << fmt_double(s.shrunk(k))
            << "," << fmt_double(s.shrunk(k) - half_after) << ","
            << fmt_double(s.shrunk(k) + half_after) << "\n";
      }
    }
    write_text(table_path, csv.str());
  }
  return 0;
}

int cmd_diagnose(const std::string& report_path, const std::string& data_path,
                 const std::string& out_path, const std::string& qq_path,
                 const std::string& acf_path, const std::string& loo_arg) {
  FitReport rep = load_fit_report(report_path);
  Dataset ds = read_dataset_csv(data_path);
  if (ds.data.t_len() != rep.t_len)
    throw InputError("report T (" + std::to_string(rep.t_len) + ") does not match dataset T (" +
                     std::to_string(ds.data.t_len()) + ")");
  if (ds.intervention_names != rep.intervention_names)
    throw InputError("dataset intervention columns do not match the report");

  ModelConfig config = rep.model_config();
  EpidemicData data = ds.data;
  if (rep.rescale) {
    for (int jcol = 0; jcol < data.n_interventions(); ++jcol)
      data.interventions.col(jcol) = (rep.rescale->offset[jcol] +
                                      rep.rescale->scale[jcol] *
                                          ds.data.interventions.col(jcol).array())
                                         .matrix();
    // the report's theta is on the original scale; map back to fitted scale
    const int da = data.n_interventions();
    for (int jcol = 0; jcol < da; ++jcol) {
      rep.theta_hat.beta(1 + jcol) /= rep.rescale->scale[jcol];
    }
    double adj = 0.0;
    for (int jcol = 0; jcol < da; ++jcol)
      adj += rep.rescale->offset[jcol] * rep.theta_hat.beta(1 + jcol);
    rep.theta_hat.beta(0) -= adj;
  }
  FitResult fit = evaluate_fit(rep.theta_hat, data, config);
  LooMode mode = loo_arg == "exact" ? LooMode::exact : LooMode::fast;
  DiagnosticsReport diag = diagnostics_report(fit, data, config, mode);

  std::ostringstream csv;
  csv << "t,raw,standardized,studentized,cooks,beta1_influence\n";
  for (int t = 0; t < data.t_len(); ++t)
    csv << (t + 1) << "," << fmt_double(diag.raw(t)) << "," << fmt_double(diag.standardized(t))
        << "," << fmt_double(diag.studentized(t)) << "," << fmt_double(diag.cooks(t)) << ","
        << fmt_double(diag.beta1_influence(t)) << "\n";
  write_text(out_path, csv.str());

  if (!qq_path.empty()) {
    std::ostringstream qq;
    qq << "theoretical,sample\n";
    for (int i = 0; i < diag.qq.rows(); ++i)
      qq << fmt_double(diag.qq(i, 0)) << "," << fmt_double(diag.qq(i, 1)) << "\n";
    write_text(qq_path, qq.str());
  }
  if (!acf_path.empty()) {
    std::ostringstream acf;
    acf << "lag,acf_std,acf_diff\n";
    int n = static_cast<int>(std::min(diag.acf_std.size(), diag.acf_diff.size()));
    for (int k = 0; k < n; ++k)
      acf << k << "," << fmt_double(diag.acf_std(k)) << "," << fmt_double(diag.acf_diff(k))
          << "\n";
    write_text(acf_path, acf.str());
  }
  return 0;
}

int cmd_simulate_epidemic(const SimDesign& design, const std::string& out_path) {
  ModelConfig config = default_sim_config();
  SimPath path = simulate_epidemic(design, config);
  write_dataset_csv(out_path, path.data, {"a_step"});
  return 0;
}

int cmd_simulate_coverage(const SimDesign& design, int reps, double level,
                          const std::string& out_path, const std::string& json_path) {
  ModelConfig config = default_sim_config();
  CoverageResult res = coverage_study(design, config, reps, level);
  const char* names[3] = {"beta0", "beta1", "mu"};
  std::ostringstream csv;
  csv << "parameter,level,coverage,std_error,n_used,n_failed\n";
  for (int k = 0; k < 3; ++k)
    csv << names[k] << "," << fmt_double(level) << "," << fmt_double(res.coverage(k)) << ","
        << fmt_double(res.std_error(k)) << "," << res.n_used << "," << res.n_failed << "\n";
  write_text(out_path, csv.str());
  if (!json_path.empty()) {
    json j;
    j["level"] = level;
    j["n_used"] = res.n_used;
    j["n_failed"] = res.n_failed;
    for (int k = 0; k < 3; ++k)
      j["coverage"][names[k]] = {{"estimate", res.coverage(k)}, {"std_error", res.std_error(k)}};
    write_text(json_path, j.dump(2) + "\n");
  }
  return 0;
}

int cmd_simulate_shrinkage(const SimDesign& design, const std::string& scenario_arg, int regions,
                           double alpha, const std::string& out_path,
                           const std::string& json_path) {
  ScenarioKind kind;
  if (scenario_arg == "a")
    kind = ScenarioKind::a;
  else if (scenario_arg == "b")
    kind = ScenarioKind::b;
  else if (scenario_arg == "c")
    kind = ScenarioKind::c;
  else
    throw InputError("--scenario must be a, b or c");
  ModelConfig config = default_sim_config();
  ScenarioSpec spec = make_scenario(kind, regions);
  ShrinkageStudyResult res = shrinkage_coverage_study(spec, design, config, alpha);
  std::ostringstream csv;
  csv << "scenario,alpha,n_regions,n_used,n_failed,avg_coverage\n";
  csv << scenario_arg << "," << fmt_double(alpha) << "," << regions << "," << res.n_used << ","
      << res.n_failed << "," << fmt_double(res.avg_coverage) << "\n";
  write_text(out_path, csv.str());
  if (!json_path.empty()) {
    json j;
    j["scenario"] = scenario_arg;
    j["alpha"] = alpha;
    j["n_regions"] = regions;
    j["n_used"] = res.n_used;
    j["n_failed"] = res.n_failed;
    j["avg_coverage"] = res.avg_coverage;
    write_text(json_path, j.dump(2) + "\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frequentist inference for renewal-equation epidemic models"};
  app.require_subcommand(1);

  // fit
  std::string fit_data, fit_config, fit_out, fit_means, fit_rescale;
  double fit_level = 0.95;
  auto* fit_cmd = app.add_subcommand("fit", "Maximum-likelihood fit with sandwich intervals");
  fit_cmd->add_option("--data", fit_data, "dataset CSV")->required();
  fit_cmd->add_option("--config", fit_config, "model/fit configuration JSON")->required();
  fit_cmd->add_option("--out", fit_out, "output report JSON")->required();
  fit_cmd->add_option("--means", fit_means, "optional fitted-means CSV");
  fit_cmd->add_option("--level", fit_level, "marginal interval level (default 0.95)");
  fit_cmd->add_option("--rescale-interventions", fit_rescale,
                      "affinely map each a_ column to [min,max] before fitting; "
                      "estimates are reported on the original scale");

  // predict
  std::string pred_fit, pred_scenario, pred_out;
  double pred_level = 0.95;
  auto* pred_cmd = app.add_subcommand("predict", "Scenario band for the model mean");
  pred_cmd->add_option("--fit", pred_fit, "fit report JSON")->required();
  pred_cmd->add_option("--scenario", pred_scenario, "scenario CSV with a_ columns")->required();
  pred_cmd->add_option("--out", pred_out, "output band CSV")->required();
  pred_cmd->add_option("--level", pred_level, "band level (default 0.95)");

  // shrink
  std::string shr_dir, shr_out, shr_table, shr_block, shr_weights = "efficient";
  double shr_alpha = 0.05;
  auto* shr_cmd = app.add_subcommand("shrink", "Robust EB shrinkage across region fit reports");
  shr_cmd->add_option("--reports", shr_dir, "directory of per-region fit reports")->required();
  shr_cmd->add_option("--out", shr_out, "output sets JSON")->required();
  shr_cmd->add_option("--alpha", shr_alpha, "miscoverage level (default 0.05)");
  shr_cmd->add_option("--table", shr_table, "optional before/after interval CSV");
  shr_cmd->add_option("--block", shr_block, "comma-separated parameter indices (default all but nu)");
  shr_cmd->add_option("--weights", shr_weights, "unit or efficient (default)");

  // diagnose
  std::string dia_fit, dia_data, dia_out, dia_qq, dia_acf, dia_loo = "fast";
  auto* dia_cmd = app.add_subcommand("diagnose", "Residual and influence diagnostics");
  dia_cmd->add_option("--fit", dia_fit, "fit report JSON")->required();
  dia_cmd->add_option("--data", dia_data, "dataset CSV used for the fit")->required();
  dia_cmd->add_option("--out", dia_out, "output diagnostics CSV")->required();
  dia_cmd->add_option("--qq", dia_qq, "optional QQ CSV");
  dia_cmd->add_option("--acf", dia_acf, "optional ACF CSV");
  dia_cmd->add_option("--loo", dia_loo, "leave-one-out mode: fast (default) or exact");

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Simulation studies");
  sim_cmd->require_subcommand(1);
  SimDesign design;
  uint64_t seed = 0;
  std::string sim_out, sim_json, sim_scenario = "a";
  int sim_reps = 200, sim_regions = 100;
  double sim_level = 0.95, sim_alpha = 0.05;
  bool sim_deterministic = false;

  auto add_design_opts = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "RNG seed")->required();
    cmd->add_option("--mu", design.mu, "log seeding level");
    cmd->add_option("--beta0", design.beta0, "intercept");
    cmd->add_option("--beta1", design.beta1, "intervention effect");
    cmd->add_option("--t", design.t_len, "series length");
    cmd->add_option("--step-time", design.step_time, "intervention onset");
    cmd->add_option("--r-infection", design.r_infection, "NB successes, infections");
    cmd->add_option("--r-outcome", design.r_outcome, "NB successes, outcomes");
  };

  auto* sim_epi = sim_cmd->add_subcommand("epidemic", "Write one simulated dataset CSV");
  add_design_opts(sim_epi);
  sim_epi->add_flag("--deterministic", sim_deterministic, "emit exact means (no noise)");
  sim_epi->add_option("--out", sim_out, "output dataset CSV")->required();

  auto* sim_cov = sim_cmd->add_subcommand("coverage", "Interval coverage study");
  add_design_opts(sim_cov);
  sim_cov->add_option("--reps", sim_reps, "replicates (default 200)");
  sim_cov->add_option("--level", sim_level, "interval level (default 0.95)");
  sim_cov->add_option("--out", sim_out, "output CSV")->required();
  sim_cov->add_option("--json", sim_json, "optional JSON summary");

  auto* sim_shr = sim_cmd->add_subcommand("shrinkage", "Multi-region EB coverage study");
  add_design_opts(sim_shr);
  sim_shr->add_option("--scenario", sim_scenario, "a, b or c (default a)");
  sim_shr->add_option("--regions", sim_regions, "region count (default 100)");
  sim_shr->add_option("--alpha", sim_alpha, "miscoverage level (default 0.05)");
  sim_shr->add_option("--out", sim_out, "output CSV")->required();
  sim_shr->add_option("--json", sim_json, "optional JSON summary");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit_cmd->parsed())
      return cmd_fit(fit_data, fit_config, fit_out, fit_means, fit_level, fit_rescale);
    if (pred_cmd->parsed()) return cmd_predict(pred_fit, pred_scenario, pred_out, pred_level);
    if (shr_cmd->parsed())
      return cmd_shrink(shr_dir, shr_alpha, shr_out, shr_table, shr_block, shr_weights);
    if (dia_cmd->parsed()) return cmd_diagnose(dia_fit, dia_data, dia_out, dia_qq, dia_acf, dia_loo);
    if (sim_cmd->parsed()) {
      design.seed = seed;
      design.deterministic = sim_deterministic;
      if (sim_epi->parsed()) return cmd_simulate_epidemic(design, sim_out);
      if (sim_cov->parsed())
        return cmd_simulate_coverage(design, sim_reps, sim_level, sim_out, sim_json);
      if (sim_shr->parsed())
        return cmd_simulate_shrinkage(design, sim_scenario, sim_regions, sim_alpha, sim_out,
                                      sim_json);
    }
  } catch (const ParseError& e) {
    std::cerr << "epifit: " << e.what() << "\n";
    return 2;
  } catch (const InputError& e) {
    std::cerr << "epifit: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "epifit: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "epifit: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "epifit: computation failed: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "epifit: no command\n";
  return 2;
}
