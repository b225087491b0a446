#include "epifit/special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace epifit {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Lanczos, g = 7, 9 coefficients.
constexpr double kLanczos[9] = {
    0.99999999999980993,      676.5203681218851,     -1259.1392167224028,
    771.32342877765313,       -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,     9.9843695780195716e-6, 1.5056327351493116e-7};

double log_gamma_lanczos(double x) {
  // valid for x >= 0.5
  double a = kLanczos[0];
  double t = x + 6.5;
  for (int i = 1; i < 9; ++i) a += kLanczos[i] / (x + i - 1.0);
  return 0.5 * std::log(2.0 * kPi) + (x - 0.5) * std::log(t) - t + std::log(a);
}

// Series expansion of P(a, x), converges fast for x < a + 1.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < 10000; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - log_gamma(a));
}

// Continued fraction for Q(a, x) (modified Lentz), for x >= a + 1.
double gamma_q_cf(double a, double x) {
  const double fpmin = std::numeric_limits<double>::min() / 1e-16;
  double b = x + 1.0 - a;
  double c = 1.0 / fpmin;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 10000; ++i) {
    double an = -static_cast<double>(i) * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = b + an / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - log_gamma(a)) * h;
}

double chi_square_pdf(double x, int dof) {
  if (x <= 0.0) return 0.0;
  double a = 0.5 * dof;
  return std::exp((a - 1.0) * std::log(x) - 0.5 * x - a * std::log(2.0) - log_gamma(a));
}

}  // namespace

double log_gamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("log_gamma: requires x > 0");
  if (x < 0.5) {
    // reflection: ln Gamma(x) = ln(pi / sin(pi x)) - ln Gamma(1 - x)
    return std::log(kPi / std::sin(kPi * x)) - log_gamma_lanczos(1.0 - x);
  }
  return log_gamma_lanczos(x);
}

double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0)) throw std::domain_error("regularized_gamma_p: requires a > 0");
  if (x < 0.0) throw std::domain_error("regularized_gamma_p: requires x >= 0");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_cf(a, x);
}

double chi_square_cdf(double x, int dof) {
  if (dof < 1) throw std::domain_error("chi_square_cdf: requires dof >= 1");
  if (x < 0.0) throw std::domain_error("chi_square_cdf: requires x >= 0");
  return regularized_gamma_p(0.5 * dof, 0.5 * x);
}

double chi_square_quantile(double p, int dof) {
  if (dof < 1) throw std::domain_error("chi_square_quantile: requires dof >= 1");
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("chi_square_quantile: requires p in (0,1)");

  // bracket
  double lo = 0.0;
  double hi = std::max(1.0, dof + 10.0 * std::sqrt(2.0 * dof));
  while (chi_square_cdf(hi, dof) < p) hi *= 2.0;

  // bisection down to a coarse width, then Newton polish
  for (int i = 0; i < 200 && hi - lo > 1e-8 * (1.0 + hi); ++i) {
    double mid = 0.5 * (lo + hi);
    if (chi_square_cdf(mid, dof) < p)
      lo = mid;
    else
      hi = mid;
  }
  double x = 0.5 * (lo + hi);
  for (int i = 0; i < 50; ++i) {
    double f = chi_square_cdf(x, dof) - p;
    if (std::fabs(f) <= 1e-12) break;
    double d = chi_square_pdf(x, dof);
    if (d <= 0.0) break;
    double step = f / d;
    double xn = x - step;
    if (xn <= lo || xn >= hi) xn = 0.5 * (lo + hi);  // keep inside the bracket
    if (chi_square_cdf(xn, dof) < p)
      lo = xn;
    else
      hi = xn;
    if (std::fabs(xn - x) < 1e-14 * (1.0 + x)) {
      x = xn;
      break;
    }
    x = xn;
  }
  return x;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: requires p in (0,1)");
  if (p == 0.5) return 0.0;
  // |z| = sqrt of the chi-square(1) quantile at 2p-1 (or its mirror)
  double q = p > 0.5 ? 2.0 * p - 1.0 : 1.0 - 2.0 * p;
  double z = std::sqrt(chi_square_quantile(q, 1));
  return p > 0.5 ? z : -z;
}

NoncentralSf noncentral_chi_square_sf_ex(double x, int dof, double ncp) {
  if (dof < 1) throw std::domain_error("noncentral_chi_square_sf: requires dof >= 1");
  if (x < 0.0) throw std::domain_error("noncentral_chi_square_sf: requires x >= 0");
  if (ncp < 0.0) throw std::domain_error("noncentral_chi_square_sf: requires ncp >= 0");

  NoncentralSf out;
  if (x == 0.0) {
    out.value = 1.0;
    return out;
  }
  if (ncp == 0.0) {
    out.value = 1.0 - chi_square_cdf(x, dof);
    return out;
  }

  // SF(x; dof, ncp) = sum_j Pois(j; ncp/2) * SF_central(x; dof + 2j).
  // Central survival terms follow the recurrence
  //   Q(a+1, z) = Q(a, z) + z^a e^{-z} / Gamma(a+1),  a = dof/2 + j, z = x/2.
  const double lambda = 0.5 * ncp;
  const double z = 0.5 * x;
  const int max_terms = 100000;

  double a = 0.5 * dof;
  double q = 1.0 - regularized_gamma_p(a, z);                        // SF at dof
  double inc = std::exp(a * std::log(z) - z - log_gamma(a + 1.0));   // next recurrence term
  double logw = -lambda;                                             // log Poisson weight, j = 0
  double wsum = 0.0;
  double acc = 0.0;
  int j = 0;
  for (; j < max_terms; ++j) {
    double w = std::exp(logw);
    acc += w * q;
    wsum += w;
    if (wsum >= 1.0 - 1e-12) break;
    // advance to j+1
    logw += std::log(lambda) - std::log(j + 1.0);
    q += inc;
    if (q > 1.0) q = 1.0;  // guard accumulated roundoff
    inc *= z / (a + j + 1.0);
  }
  out.value = std::min(1.0, acc);
  out.tail_bound = std::max(0.0, 1.0 - wsum);
  out.truncated = (j >= max_terms);
  return out;
}

double noncentral_chi_square_sf(double x, int dof, double ncp) {
  return noncentral_chi_square_sf_ex(x, dof, ncp).value;
}

}  // namespace epifit
