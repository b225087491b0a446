#include "epifit/fit.hpp"

#include "epifit/inference.hpp"
#include "epifit/simulate.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace epifit;

namespace {

SimPath paper_path(uint64_t seed) {
  SimDesign design;
  design.seed = seed;
  return simulate_epidemic(design, default_sim_config());
}

}  // namespace

TEST_CASE("initial values: mu window and beta sign on simulated data") {
  ModelConfig config = default_sim_config();
  SimPath path = paper_path(301);
  InitialValues init = initial_values(path.data, config);
  CHECK(!init.degenerate_design);
  CHECK(init.beta(1) < 0.0);  // intervention suppresses transmission
  CHECK(std::isfinite(init.mu));
}

TEST_CASE("initial values: all-zero outcomes rejected before the regression") {
  ModelConfig config = default_sim_config();
  EpidemicData data;
  data.outcomes = Vector::Zero(120);
  data.interventions = Matrix::Zero(120, 1);
  CHECK_THROWS_AS((void)initial_values(data, config), std::invalid_argument);
}

TEST_CASE("initial values: constant design recovers the linearized intercept") {
  // no intervention columns, constant outcomes
  ModelConfig config = default_sim_config();
  EpidemicData data;
  data.outcomes = Vector::Constant(150, 40.0);
  data.interventions = Matrix::Zero(150, 0);
  InitialValues init = initial_values(data, config);

  // independent least squares on the identical linearization
  const int pi_bar = static_cast<int>(std::lround(config.pi.mean()));
  double sxx = 0.0, sxz = 0.0;
  for (int t = 1; t + pi_bar <= 150; ++t) {
    double conv = 0.0;
    for (int r = 1; r <= std::min(config.g.max_lag(), t + pi_bar - 1); ++r)
      conv += config.g.weight(r) * 40.0;
    if (conv <= 0.0) continue;
    double x = 0.25 * config.k_max * conv;
    double z = 40.0 - 0.5 * config.k_max * conv;
    sxx += x * x;
    sxz += x * z;
  }
  double beta0_ls = sxz / sxx;
  CHECK(init.beta(0) == doctest::Approx(beta0_ls).epsilon(1e-10));
  // the linearization should put K logistic(beta0) near 1 for a flat series
  double r = config.k_max / (1.0 + std::exp(-init.beta(0)));
  CHECK(r > 0.75);
  CHECK(r < 1.35);
}

TEST_CASE("update_nu: Gaussian closed forms") {
  ModelConfig config = default_sim_config(ObsFamily::gaussian);
  SimPath path = paper_path(77);
  Theta th;
  th.beta.resize(2);
  th.beta << 0.0, -2.2;
  th.mu = std::log(100.0);
  th.nu = 1.0;
  Vector m = expected_outcomes(latent_infections(th, path.data, config), config);

  EpidemicData data = path.data;
  data.outcomes = m + Vector::Constant(m.size(), 3.25);  // constant residual c
  CHECK(update_nu(th, data, config) == doctest::Approx(3.25).epsilon(1e-12));

  data.outcomes = m;  // zero residual floors at 1e-8
  CHECK(update_nu(th, data, config) == doctest::Approx(1e-8).epsilon(1e-12));
}

TEST_CASE("update_nu: NB matches a dense grid search over log nu") {
  ModelConfig config = default_sim_config();
  SimPath path = paper_path(88);
  Theta th;
  th.beta.resize(2);
  th.beta << 0.0, -2.2;
  th.mu = std::log(100.0);
  th.nu = 1.0;
  double nu_hat = update_nu(th, path.data, config);

  Vector m = expected_outcomes(latent_infections(th, path.data, config), config);
  // same NB likelihood, regrouped: sum_t sum_{k<=y_t} f(k) = sum_k c_k f(k)
  // with c_k = #{t: y_t >= k}
  const int t_len = path.data.t_len();
  int y_max = static_cast<int>(path.data.outcomes.maxCoeff());
  std::vector<int> count_ge(y_max + 1, 0);
  double const_part = 0.0;
  for (int t = 0; t < t_len; ++t) {
    int y = static_cast<int>(path.data.outcomes(t));
    for (int k = 1; k <= y; ++k) ++count_ge[k];
    if (y > 0) const_part += y * std::log(m(t));
  }
  auto ll = [&](double nu) {
    double s = const_part + t_len * nu * std::log(nu);
    for (int k = 1; k <= y_max; ++k)
      if (count_ge[k] > 0) s += count_ge[k] * std::log1p((nu - 1.0) / k);
    for (int t = 0; t < t_len; ++t)
      s -= (nu + path.data.outcomes(t)) * std::log(nu + m(t));
    return s;
  };
  // two-stage grid: coarse bracket, then 1e6 points across a +-2% window
  double best = 1e-2, best_val = ll(1e-2);
  for (double lnu = std::log(1e-2); lnu <= std::log(1e4); lnu += 0.01) {
    double v = ll(std::exp(lnu));
    if (v > best_val) {
      best_val = v;
      best = std::exp(lnu);
    }
  }
  double lo = std::log(best * 0.98), hi = std::log(best * 1.02);
  const int n = 1000000;
  double grid_best = best, grid_val = best_val;
  for (int i = 0; i <= n; ++i) {
    double nu = std::exp(lo + (hi - lo) * i / n);
    double v = ll(nu);
    if (v > grid_val) {
      grid_val = v;
      grid_best = nu;
    }
  }
  CHECK(std::fabs(nu_hat - grid_best) / grid_best <= 1e-6);
  CHECK(ll(nu_hat) >= grid_val - 1e-9);
}

TEST_CASE("fit recovers the design parameters within sandwich bands") {
  ModelConfig config = default_sim_config();
  SimPath path = paper_path(2024);
  FitResult fit = fit_mle(path.data, config);
  CHECK(fit.converged);
  CHECK(fit.iterations <= 200);

  Matrix ups = sandwich_covariance(fit);
  double se_b1 = std::sqrt(ups(1, 1) / fit.t_len());
  CHECK(std::fabs(fit.theta_hat.beta(1) - (-2.2)) <= 3.0 * se_b1);

  // monotone trace
  for (size_t i = 1; i < fit.trace.size(); ++i)
    CHECK(fit.trace[i] >= fit.trace[i - 1] - 1e-12 * (1.0 + std::fabs(fit.trace[i])));

  // first-order condition
  Vector grad = fit.per_time_scores.colwise().sum();
  CHECK(grad.norm() <= 1e-6 * (1.0 + std::fabs(fit.loglik)));

  // hessian negative definite at the optimum
  Eigen::SelfAdjointEigenSolver<Matrix> es(fit.hessian_at_mle);
  CHECK(es.eigenvalues().maxCoeff() < 0.0);
}

TEST_CASE("near-noiseless Gaussian data recovers the exact parameters") {
  ModelConfig config = default_sim_config(ObsFamily::gaussian);
  SimDesign design;
  design.seed = 5150;
  design.deterministic = true;
  SimPath path = simulate_epidemic(design, config);
  std::mt19937_64 rng(40);
  std::normal_distribution<double> gauss(0.0, 1e-3);
  EpidemicData data = path.data;
  for (int t = 0; t < data.t_len(); ++t) data.outcomes(t) += gauss(rng);

  FitResult fit = fit_mle(data, config);
  // at nu ~ 1e-3 the absolute score-norm criterion is out of reach of double
  // precision, so only the recovery claim is asserted
  CHECK(std::fabs(fit.theta_hat.beta(0) - 0.0) <= 1e-3);
  CHECK(std::fabs(fit.theta_hat.beta(1) - (-2.2)) <= 1e-3);
  CHECK(std::fabs(fit.theta_hat.mu - std::log(100.0)) <= 1e-3);
  CHECK(fit.theta_hat.nu <= 2e-3);
}

TEST_CASE("restart from the optimum is a fixed point") {
  ModelConfig config = default_sim_config();
  SimPath path = paper_path(606);
  FitResult fit = fit_mle(path.data, config);
  FitOptions opts;
  opts.start = fit.theta_hat;
  FitResult again = fit_mle(path.data, config, opts);
  CHECK(std::fabs(again.loglik - fit.loglik) <= 1e-8 * (1.0 + std::fabs(fit.loglik)));
}

TEST_CASE("fit is deterministic") {
  ModelConfig config = default_sim_config();
  SimPath path = paper_path(31337);
  FitResult a = fit_mle(path.data, config);
  FitResult b = fit_mle(path.data, config);
  CHECK(a.loglik == b.loglik);
  CHECK(a.theta_hat.beta == b.theta_hat.beta);
  CHECK(a.theta_hat.mu == b.theta_hat.mu);
  CHECK(a.theta_hat.nu == b.theta_hat.nu);
}

TEST_CASE("permuting intervention columns permutes the fitted slopes") {
  ModelConfig config = default_sim_config();
  SimPath path = paper_path(7);
  EpidemicData data = path.data;
  // add a second, distinct intervention: ramp in the last third
  Matrix a2(data.t_len(), 2);
  a2.col(0) = data.interventions.col(0);
  for (int t = 0; t < data.t_len(); ++t)
    a2(t, 1) = t > 2 * data.t_len() / 3 ? (3.0 * t / data.t_len() - 2.0) : 0.0;
  data.interventions = a2;

  FitResult fit = fit_mle(data, config);
  EpidemicData swapped = data;
  swapped.interventions.col(0) = data.interventions.col(1);
  swapped.interventions.col(1) = data.interventions.col(0);
  FitResult fit_swapped = fit_mle(swapped, config);
  CHECK(fit_swapped.theta_hat.beta(1) == doctest::Approx(fit.theta_hat.beta(2)).epsilon(1e-6));
  CHECK(fit_swapped.theta_hat.beta(2) == doctest::Approx(fit.theta_hat.beta(1)).epsilon(1e-6));
  CHECK(fit_swapped.theta_hat.beta(0) == doctest::Approx(fit.theta_hat.beta(0)).epsilon(1e-6));
}

TEST_CASE("identifiability: ten random starts converge to one point") {
  ModelConfig config = default_sim_config();
  SimPath path = paper_path(424242);
  FitResult base = fit_mle(path.data, config);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int s = 0; s < 10; ++s) {
    FitOptions opts;
    Theta start = base.theta_hat;
    start.beta(0) += 0.3 * gauss(rng);
    start.beta(1) += 0.3 * gauss(rng);
    start.mu += 0.3 * gauss(rng);
    start.nu = std::exp(std::log(start.nu) + 0.5 * gauss(rng));
    opts.start = start;
    FitResult fit = fit_mle(path.data, config, opts);
    CHECK(fit.converged);
    CHECK(std::fabs(fit.theta_hat.beta(0) - base.theta_hat.beta(0)) <= 1e-4);
    CHECK(std::fabs(fit.theta_hat.beta(1) - base.theta_hat.beta(1)) <= 1e-4);
    CHECK(std::fabs(fit.theta_hat.mu - base.theta_hat.mu) <= 1e-4);
  }
}
