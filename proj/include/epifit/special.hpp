#pragma once

// Self-contained special functions: log-gamma, regularized incomplete gamma,
// central chi-square CDF/quantile and the noncentral chi-square survival
// function (Poisson mixture of central terms).

namespace epifit {

// ln Gamma(x) for x > 0, Lanczos approximation. Throws std::domain_error on
// nonpositive input.
double log_gamma(double x);

// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
double regularized_gamma_p(double a, double x);

// P[chi^2_dof <= x].
double chi_square_cdf(double x, int dof);

// Inverse of chi_square_cdf in x for p in (0, 1).
double chi_square_quantile(double p, int dof);

// Standard normal quantile (used for QQ plots and marginal intervals).
double normal_quantile(double p);

struct NoncentralSf {
  double value = 0.0;
  // Poisson mass not covered by the truncated series; bounds the absolute
  // error of `value` from above.
  double tail_bound = 0.0;
  bool truncated = false;  // hit the term cap before reaching 1 - 1e-12 mass
};

// P[chi^2_dof(ncp) >= x] with full error reporting.
NoncentralSf noncentral_chi_square_sf_ex(double x, int dof, double ncp);

// P[chi^2_dof(ncp) >= x].
double noncentral_chi_square_sf(double x, int dof, double ncp);

}  // namespace epifit
