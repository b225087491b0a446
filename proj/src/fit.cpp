#include "epifit/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace epifit {

namespace {

constexpr double kNuFloor = 1e-8;
constexpr double kNuMin = 1e-6;
constexpr double kNuMax = 1e9;
constexpr double kArmijoC = 1e-4;
constexpr int kMaxHalvings = 30;

Vector masked_means(const Theta& theta, const EpidemicData& data, const ModelConfig& config) {
  return expected_outcomes(latent_infections(theta, data, config), config);
}

double nb_profile_loglik(const Vector& y, const Vector& m, double nu, int exclude) {
  double s = 0.0;
  for (int t = 0; t < y.size(); ++t) {
    if (t == exclude) continue;
    s += family::nb_logpmf(y(t), m(t), nu);
  }
  return s;
}

// log-likelihood at given (beta, mu) with nu fixed; -inf on divergence
double safe_loglik(const Theta& theta, const EpidemicData& data, const ModelConfig& config,
                   int exclude) {
  try {
    LikelihoodRequest req;
    req.exclude = exclude;
    return evaluate_likelihood(theta, data, config, req).loglik;
  } catch (const DivergenceError&) {
    return -std::numeric_limits<double>::infinity();
  }
}

}  // namespace

InitialValues initial_values(const EpidemicData& data, const ModelConfig& config) {
  data.validate(config.family);
  const int t_len = data.t_len();
  const int da = data.n_interventions();
  const int pi_bar = std::max(1, static_cast<int>(std::lround(config.pi.mean())));

  if (t_len <= pi_bar + 2)
    throw std::invalid_argument("initial_values: series too short for the shifted regression");

  // mu from the pre-onset proxy window: Y_t / alpha approximates infections
  // at t - pi_bar, averaged over up to T0 values
  int w_lo = std::max(1, pi_bar - config.t0 + 1);
  int w_hi = std::min(pi_bar, t_len);
  double ysum = 0.0;
  int count = 0;
  for (int t = w_lo; t <= w_hi; ++t) {
    ysum += data.outcomes(t - 1);
    ++count;
  }
  if (count == 0) throw std::invalid_argument("initial_values: empty seeding proxy window");
  if (!(ysum > 0.0))
    throw std::invalid_argument("initial_values: all-zero outcomes in the seeding proxy window");
  InitialValues out;
  out.mu = std::log(ysum / (config.alpha * count));

  // linearized logistic: Y_{t+pi_bar} ~ (K/2) conv_t + (K/4) (beta'A_t) conv_t
  const int lg = config.g.max_lag();
  std::vector<double> conv, resp;
  std::vector<int> rows;
  for (int t = 1; t + pi_bar <= t_len; ++t) {
    double c = 0.0;
    for (int r = 1; r <= std::min(lg, t + pi_bar - 1); ++r)
      c += config.g.weight(r) * data.outcomes(t - r + pi_bar - 1);
    if (c > 0.0) {
      conv.push_back(c);
      resp.push_back(data.outcomes(t + pi_bar - 1) - 0.5 * config.k_max * c);
      rows.push_back(t);
    }
  }
  const int n_rows = static_cast<int>(rows.size());
  if (n_rows < da + 1)
    throw std::invalid_argument("initial_values: not enough regression rows");

  Matrix x(n_rows, da + 1);
  Vector z(n_rows);
  for (int i = 0; i < n_rows; ++i) {
    double scale = 0.25 * config.k_max * conv[i];
    x(i, 0) = scale;
    for (int j = 0; j < da; ++j) x(i, j + 1) = scale * data.interventions(rows[i] - 1, j);
    z(i) = resp[i];
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  if (qr.rank() < da + 1) {
    out.beta = Vector::Zero(da + 1);
    out.degenerate_design = true;
  } else {
    out.beta = qr.solve(z);
  }
  return out;
}

NuUpdate update_nu_ex(const Theta& theta, const EpidemicData& data, const ModelConfig& config,
                      double tol, int exclude) {
  const Vector m = masked_means(theta, data, config);
  NuUpdate out;

  if (config.family == ObsFamily::gaussian) {
    double ss = 0.0;
    int n = 0;
    for (int t = 0; t < data.t_len(); ++t) {
      if (t == exclude) continue;
      double r = data.outcomes(t) - m(t);
      ss += r * r;
      ++n;
    }
    out.nu = std::max(kNuFloor, std::sqrt(ss / std::max(1, n)));
    return out;
  }

  auto ll = [&](double nu) { return nb_profile_loglik(data.outcomes, m, nu, exclude); };

  // coarse geometric bracket over [kNuMin, kNuMax]
  const int n_grid = 61;
  const double llo = std::log(kNuMin), lhi = std::log(kNuMax);
  int best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_grid; ++i) {
    double nu = std::exp(llo + (lhi - llo) * i / (n_grid - 1));
    double v = ll(nu);
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  if (best == 0 || best == n_grid - 1) {
    out.nu = std::exp(llo + (lhi - llo) * best / (n_grid - 1));
    out.at_boundary = true;
    return out;
  }

  // golden section on log nu
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = llo + (lhi - llo) * (best - 1) / (n_grid - 1);
  double b = llo + (lhi - llo) * (best + 1) / (n_grid - 1);
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = ll(std::exp(x1)), f2 = ll(std::exp(x2));
  while (b - a > std::max(tol, 1e-12)) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = ll(std::exp(x2));
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = ll(std::exp(x1));
    }
    if (b - a < 1e-6) break;  // hand off to Newton once the bracket is tight
  }
  double nu = std::exp(0.5 * (a + b));
  double fnu = ll(nu);

  // Newton polish on nu inside [exp(a), exp(b)]'s wider neighborhood
  for (int it = 0; it < 25; ++it) {
    double d1 = 0.0, d2 = 0.0;
    for (int t = 0; t < data.t_len(); ++t) {
      if (t == exclude) continue;
      family::PointDerivs d = family::nb_derivs(data.outcomes(t), m(t), nu);
      d1 += d.dnu;
      d2 += d.dnunu;
    }
    if (!(d2 < 0.0)) break;
    double step = d1 / d2;
    double nu_new = std::clamp(nu - step, kNuMin, kNuMax);
    double f_new = ll(nu_new);
    if (f_new >= fnu) {
      if (std::fabs(nu_new - nu) <= tol * std::max(1.0, nu)) {
        nu = nu_new;
        fnu = f_new;
        break;
      }
      nu = nu_new;
      fnu = f_new;
    } else {
      break;
    }
  }
  out.nu = nu;
  return out;
}

double update_nu(const Theta& theta, const EpidemicData& data, const ModelConfig& config) {
  return update_nu_ex(theta, data, config).nu;
}

FitResult fit_mle(const EpidemicData& data, const ModelConfig& config, const FitOptions& options) {
  data.validate(config.family);
  const int da = data.n_interventions();
  const int pm = da + 2;

  FitResult res;
  Theta theta;
  if (options.start) {
    theta = *options.start;
    theta.validate();
  } else {
    InitialValues init;
    try {
      init = initial_values(data, config);
      theta.beta = init.beta;
      theta.mu = init.mu;
      theta.nu = 1.0;
      latent_infections(theta, data, config);  // probe for divergence
    } catch (const DivergenceError&) {
      init.beta.setZero(da + 1);
      init.degenerate_design = true;
      theta.beta = init.beta;
      // mu already set by initial_values above
    }
    res.degenerate_start = init.degenerate_design;
    // starting nu: Gaussian closed form; NB method-of-moments on residuals
    Vector m = masked_means(theta, data, config);
    if (config.family == ObsFamily::gaussian) {
      theta.nu = 1.0;
      theta.nu = update_nu_ex(theta, data, config, options.nu_solver_tol, options.exclude).nu;
    } else {
      double num = 0.0, den = 0.0;
      for (int t = 0; t < data.t_len(); ++t) {
        if (t == options.exclude) continue;
        double r = data.outcomes(t) - m(t);
        num += m(t) * m(t);
        den += r * r - m(t);
      }
      theta.nu = (den > 0.0) ? std::clamp(num / den, 1e-3, 1e6) : 1e6;
    }
  }

  double ll = safe_loglik(theta, data, config, options.exclude);
  if (!std::isfinite(ll))
    throw std::runtime_error("fit_mle: starting point has non-finite log-likelihood");
  res.trace.push_back(ll);

  bool converged = false;
  int iter = 0;
  int stalled = 0;
  for (; iter < options.max_iters; ++iter) {
    double ll_prev = ll;

    // nu block (never allowed to decrease the objective)
    NuUpdate nu_up = update_nu_ex(theta, data, config, options.nu_solver_tol, options.exclude);
    Theta theta_nu = theta;
    theta_nu.nu = nu_up.nu;
    double ll_nu = safe_loglik(theta_nu, data, config, options.exclude);
    if (ll_nu >= ll) {
      theta = theta_nu;
      ll = ll_nu;
      res.nu_at_boundary = nu_up.at_boundary;
    }

    // (beta, mu) block: damped Newton with Armijo backtracking
    LikelihoodRequest req;
    req.scores = true;
    req.hessian = true;
    req.exclude = options.exclude;
    LikelihoodEval ev = evaluate_likelihood(theta, data, config, req);
    Vector grad = ev.per_time_scores.colwise().sum().head(pm);
    Matrix neg_h = -ev.hessian.topLeftCorner(pm, pm);

    Vector dir;
    Eigen::LLT<Matrix> llt(neg_h);
    if (llt.info() == Eigen::Success) {
      dir = llt.solve(grad);
    } else {
      dir = grad;  // ascent fallback when -H is not positive definite
    }
    double slope = grad.dot(dir);
    if (slope <= 0.0) {
      dir = grad;
      slope = grad.squaredNorm();
    }

    bool accepted = false;
    double eta = options.newton_step;
    for (int h = 0; h <= kMaxHalvings; ++h, eta *= 0.5) {
      Theta trial = theta;
      trial.beta += eta * dir.head(da + 1);
      trial.mu += eta * dir(pm - 1);
      double ll_trial = safe_loglik(trial, data, config, options.exclude);
      if (ll_trial >= ll + kArmijoC * eta * slope) {
        theta = trial;
        ll = ll_trial;
        accepted = true;
        break;
      }
    }

    res.trace.push_back(ll);

    double rel_change = std::fabs(ll - ll_prev) / (1.0 + std::fabs(ll));
    if (rel_change < options.loglik_tol) {
      LikelihoodRequest sreq;
      sreq.scores = true;
      sreq.exclude = options.exclude;
      Vector full_score =
          evaluate_likelihood(theta, data, config, sreq).per_time_scores.colwise().sum();
      if (full_score.norm() <= 1e-6 * (1.0 + std::fabs(ll))) {
        converged = true;
        ++iter;
        break;
      }
      (void)accepted;
      if (++stalled >= 3) {
        res.note = "stopped: log-likelihood fixed point with score norm above tolerance";
        ++iter;
        break;
      }
    } else {
      stalled = 0;
    }
  }

  LikelihoodRequest req;
  req.scores = true;
  req.hessian = true;
  req.exclude = options.exclude;
  LikelihoodEval ev = evaluate_likelihood(theta, data, config, req);
  res.theta_hat = theta;
  res.loglik = ev.loglik;
  res.fitted_means = ev.means;
  res.per_time_scores = ev.per_time_scores;
  res.hessian_at_mle = ev.hessian;
  res.converged = converged;
  res.iterations = iter;
  if (!converged && res.note.empty()) res.note = "stopped: iteration limit";
  return res;
}

}  // namespace epifit
