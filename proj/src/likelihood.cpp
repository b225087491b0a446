#include "epifit/likelihood.hpp"

#include <cmath>
#include <stdexcept>

namespace epifit {

namespace family {

namespace {
constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log sqrt(2 pi)
}

double gaussian_logpdf(double y, double m, double nu) {
  double r = y - m;
  return -std::log(nu) - r * r / (2.0 * nu * nu) - kLogSqrt2Pi;
}

double nb_logpmf(double y, double m, double nu) {
  // sum_{k=1..y} log(1 + (nu-1)/k) + nu log nu + y log m - (nu+y) log(nu+m)
  double s = 0.0;
  long yi = std::lround(y);
  for (long k = 1; k <= yi; ++k) s += std::log1p((nu - 1.0) / k);
  double ylogm = (yi == 0) ? 0.0 : y * std::log(m);
  return s + nu * std::log(nu) + ylogm - (nu + y) * std::log(nu + m);
}

PointDerivs gaussian_derivs(double y, double m, double nu) {
  PointDerivs d;
  double r = y - m;
  double nu2 = nu * nu;
  d.dm = r / nu2;
  d.dnu = -1.0 / nu + r * r / (nu2 * nu);
  d.dmm = -1.0 / nu2;
  d.dnunu = 1.0 / nu2 - 3.0 * r * r / (nu2 * nu2);
  d.dnum = -2.0 * r / (nu2 * nu);
  return d;
}

PointDerivs nb_derivs(double y, double m, double nu) {
  PointDerivs d;
  double digamma_sum = 0.0;
  double trigamma_sum = 0.0;
  long yi = std::lround(y);
  for (long k = 1; k <= yi; ++k) {
    double u = 1.0 / (k + nu - 1.0);
    digamma_sum += u;
    trigamma_sum += u * u;
  }
  double nm = nu + m;
  d.dm = y / m - (nu + y) / nm;
  d.dnu = digamma_sum + std::log(nu) + 1.0 - std::log(nm) - (nu + y) / nm;
  d.dmm = (nu + y) / (nm * nm) - y / (m * m);
  d.dnunu = -trigamma_sum + 1.0 / nu - 1.0 / nm + (y - m) / (nm * nm);
  d.dnum = (y - m) / (nm * nm);
  return d;
}

}  // namespace family

LikelihoodEval evaluate_likelihood(const Theta& theta, const EpidemicData& data,
                                   const ModelConfig& config, const LikelihoodRequest& req) {
  const int t_len = data.t_len();
  const int pm = data.n_interventions() + 2;
  const int p = pm + 1;
  const bool need_jac = req.scores || req.hessian;
  const bool need_hess = req.hessian && !req.gauss_newton;

  LikelihoodEval out;
  MeanDerivatives md;
  if (need_jac) {
    md = mean_derivatives(theta, data, config, need_hess);
  } else {
    md.infections = latent_infections(theta, data, config);
    md.means = expected_outcomes(md.infections, config);
  }
  out.means = md.means;
  if (req.scores) out.per_time_scores.setZero(t_len, p);
  if (req.hessian) out.hessian.setZero(p, p);

  const bool gaussian = (config.family == ObsFamily::gaussian);
  for (int t = 0; t < t_len; ++t) {
    if (t == req.exclude) continue;
    double y = data.outcomes(t);
    double m = md.means(t);
    out.loglik += gaussian ? family::gaussian_logpdf(y, m, theta.nu)
                           : family::nb_logpmf(y, m, theta.nu);
    if (!need_jac) continue;

    family::PointDerivs d =
        gaussian ? family::gaussian_derivs(y, m, theta.nu) : family::nb_derivs(y, m, theta.nu);
    if (req.scores) {
      out.per_time_scores.row(t).head(pm) = d.dm * md.jacobian.row(t);
      out.per_time_scores(t, p - 1) = d.dnu;
    }
    if (req.hessian) {
      auto jt = md.jacobian.row(t).transpose();
      out.hessian.topLeftCorner(pm, pm) += d.dmm * (jt * jt.transpose());
      if (need_hess) out.hessian.topLeftCorner(pm, pm) += d.dm * md.hessians[t];
      out.hessian.block(0, p - 1, pm, 1) += d.dnum * jt;
      out.hessian(p - 1, p - 1) += d.dnunu;
    }
  }
  if (req.hessian) {
    out.hessian.block(p - 1, 0, 1, pm) = out.hessian.block(0, p - 1, pm, 1).transpose();
  }
  return out;
}

double log_likelihood(const Theta& theta, const EpidemicData& data, const ModelConfig& config) {
  return evaluate_likelihood(theta, data, config).loglik;
}

Matrix score(const Theta& theta, const EpidemicData& data, const ModelConfig& config) {
  LikelihoodRequest req;
  req.scores = true;
  return evaluate_likelihood(theta, data, config, req).per_time_scores;
}

Matrix hessian(const Theta& theta, const EpidemicData& data, const ModelConfig& config,
               bool gauss_newton) {
  LikelihoodRequest req;
  req.hessian = true;
  req.gauss_newton = gauss_newton;
  return evaluate_likelihood(theta, data, config, req).hessian;
}

}  // namespace epifit
