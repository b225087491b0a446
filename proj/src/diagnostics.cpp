#include "epifit/diagnostics.hpp"

#include "epifit/special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace epifit {

namespace {

constexpr double kVarFloor = 1e-12;

double outcome_variance(double mean, double nu, ObsFamily family) {
  double v = (family == ObsFamily::gaussian) ? nu * nu : mean + mean * mean / nu;
  return std::max(v, kVarFloor);
}

struct LooFit {
  bool ok = false;
  Theta theta;
  Vector means;
};

std::vector<LooFit> leave_one_out_fits(const FitResult& fit, const EpidemicData& data,
                                       const ModelConfig& config, LooMode mode) {
  const int t_len = data.t_len();
  std::vector<LooFit> out(t_len);
  for (int t = 0; t < t_len; ++t) {
    FitOptions opts;
    opts.start = fit.theta_hat;
    opts.exclude = t;
    if (mode == LooMode::fast) opts.max_iters = 1;
    try {
      FitResult loo = fit_mle(data, config, opts);
      if (mode == LooMode::exact && !loo.converged) continue;  // entry stays missing
      out[t].ok = true;
      out[t].theta = loo.theta_hat;
      out[t].means = loo.fitted_means;
    } catch (const std::exception&) {
      // entry stays missing
    }
  }
  return out;
}

void check_consistent(const FitResult& fit, const EpidemicData& data) {
  if (fit.t_len() != data.t_len())
    throw std::invalid_argument("diagnostics: fit and dataset lengths differ");
}

}  // namespace

Vector standardized_residuals(const FitResult& fit, const EpidemicData& data,
                              const ModelConfig& config) {
  check_consistent(fit, data);
  const int t_len = data.t_len();
  Vector r(t_len);
  for (int t = 0; t < t_len; ++t) {
    double v = outcome_variance(fit.fitted_means(t), fit.theta_hat.nu, config.family);
    r(t) = (data.outcomes(t) - fit.fitted_means(t)) / std::sqrt(v);
  }
  return r;
}

Vector studentized_residuals(const FitResult& fit, const EpidemicData& data,
                             const ModelConfig& config, LooMode mode) {
  check_consistent(fit, data);
  auto loo = leave_one_out_fits(fit, data, config, mode);
  const int t_len = data.t_len();
  Vector r = Vector::Constant(t_len, std::numeric_limits<double>::quiet_NaN());
  for (int t = 0; t < t_len; ++t) {
    if (!loo[t].ok) continue;
    double m = loo[t].means(t);
    double v = outcome_variance(m, loo[t].theta.nu, config.family);
    r(t) = (data.outcomes(t) - m) / std::sqrt(v);
  }
  return r;
}

Vector cooks_distances(const FitResult& fit, const EpidemicData& data, const ModelConfig& config,
                       LooMode mode) {
  check_consistent(fit, data);
  auto loo = leave_one_out_fits(fit, data, config, mode);
  const int t_len = data.t_len();
  const int p = fit.n_params();
  if (t_len <= p) throw std::invalid_argument("cooks_distances: requires T > p");
  double s2 = (data.outcomes - fit.fitted_means).squaredNorm() / (t_len - p);
  s2 = std::max(s2, kVarFloor);
  Vector d = Vector::Constant(t_len, std::numeric_limits<double>::quiet_NaN());
  for (int t = 0; t < t_len; ++t) {
    if (!loo[t].ok) continue;
    d(t) = (fit.fitted_means - loo[t].means).squaredNorm() / (p * s2);
  }
  return d;
}

Vector beta1_influence(const FitResult& fit, const EpidemicData& data, const ModelConfig& config,
                       LooMode mode) {
  check_consistent(fit, data);
  const int t_len = data.t_len();
  if (fit.theta_hat.beta.size() < 2) return Vector::Zero(t_len);  // no intervention slope
  auto loo = leave_one_out_fits(fit, data, config, mode);
  Matrix ups = sandwich_covariance(fit);
  double var_b1 = std::max(ups(1, 1) / fit.t_len(), kVarFloor);
  Vector c = Vector::Constant(t_len, std::numeric_limits<double>::quiet_NaN());
  for (int t = 0; t < t_len; ++t) {
    if (!loo[t].ok) continue;
    c(t) = (fit.theta_hat.beta(1) - loo[t].theta.beta(1)) / std::sqrt(var_b1);
  }
  return c;
}

Vector residual_acf(const VectorRef& series, int max_lag) {
  const int n = static_cast<int>(series.size());
  if (max_lag < 0 || 2 * max_lag >= n)
    throw std::invalid_argument("residual_acf: requires 0 <= max_lag < T/2");
  double mean = series.mean();
  Vector c = series.array() - mean;
  double denom = c.squaredNorm();
  if (!(denom > 0.0)) throw std::domain_error("residual_acf: constant series");
  Vector acf(max_lag + 1);
  for (int k = 0; k <= max_lag; ++k) {
    double num = 0.0;
    for (int t = k; t < n; ++t) num += c(t) * c(t - k);
    acf(k) = num / denom;
  }
  return acf;
}

DiagnosticsReport diagnostics_report(const FitResult& fit, const EpidemicData& data,
                                     const ModelConfig& config, LooMode mode) {
  check_consistent(fit, data);
  const int t_len = data.t_len();
  const int p = fit.n_params();

  DiagnosticsReport rep;
  rep.raw = data.outcomes - fit.fitted_means;
  rep.standardized = standardized_residuals(fit, data, config);

  auto loo = leave_one_out_fits(fit, data, config, mode);
  rep.studentized = Vector::Constant(t_len, std::numeric_limits<double>::quiet_NaN());
  rep.cooks = Vector::Constant(t_len, std::numeric_limits<double>::quiet_NaN());
  rep.beta1_influence = Vector::Constant(t_len, std::numeric_limits<double>::quiet_NaN());
  double s2 = std::max(rep.raw.squaredNorm() / std::max(1, t_len - p), kVarFloor);
  Matrix ups = sandwich_covariance(fit);
  double var_b1 =
      fit.theta_hat.beta.size() >= 2 ? std::max(ups(1, 1) / fit.t_len(), kVarFloor) : 1.0;
  for (int t = 0; t < t_len; ++t) {
    if (!loo[t].ok) continue;
    double m = loo[t].means(t);
    double v = outcome_variance(m, loo[t].theta.nu, config.family);
    rep.studentized(t) = (data.outcomes(t) - m) / std::sqrt(v);
    rep.cooks(t) = (fit.fitted_means - loo[t].means).squaredNorm() / (p * s2);
    rep.beta1_influence(t) = fit.theta_hat.beta.size() >= 2
                                 ? (fit.theta_hat.beta(1) - loo[t].theta.beta(1)) / std::sqrt(var_b1)
                                 : 0.0;
  }

  rep.qq.resize(t_len, 2);
  std::vector<double> sorted(rep.standardized.data(), rep.standardized.data() + t_len);
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < t_len; ++i) {
    rep.qq(i, 0) = normal_quantile((i + 0.5) / t_len);
    rep.qq(i, 1) = sorted[i];
  }

  int max_lag = std::min(29, (t_len - 1) / 2);
  rep.acf_std = residual_acf(rep.standardized, max_lag);
  Vector dy = data.outcomes.tail(t_len - 1) - data.outcomes.head(t_len - 1);
  rep.acf_diff = residual_acf(dy, std::min(max_lag, (static_cast<int>(dy.size()) - 1) / 2));
  return rep;
}

}  // namespace epifit
