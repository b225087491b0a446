#include "epifit/renewal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace epifit {

namespace {

constexpr double kOverflowGuard = 1e300;

double stable_logistic(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  double e = std::exp(eta);
  return e / (1.0 + e);
}

}  // namespace

double reproduction_number(const VectorRef& beta, const VectorRef& a_t, double k_max) {
  if (beta.size() != a_t.size() + 1)
    throw std::invalid_argument("reproduction_number: beta must have length d_A + 1");
  double eta = beta(0) + beta.tail(a_t.size()).dot(a_t);
  return k_max * stable_logistic(eta);
}

MeanDerivatives mean_derivatives(const Theta& theta, const EpidemicData& data,
                                 const ModelConfig& config, bool second_order) {
  theta.validate();
  data.validate(config.family);
  const int t0 = config.t0;
  const int t_len = data.t_len();
  const int da = data.n_interventions();
  if (theta.beta.size() != da + 1)
    throw std::invalid_argument("mean_derivatives: beta length must be d_A + 1");
  const int pm = da + 2;  // beta..., mu
  const int n = t0 + t_len;

  MeanDerivatives out;
  out.infections.setZero(n);
  out.jacobian.setZero(t_len, pm);
  if (second_order) out.hessians.assign(t_len, Matrix::Zero(pm, pm));

  // dI[k], d2I[k] for buffer slot k (time t = k - t0 + 1)
  Matrix d_inf = Matrix::Zero(n, pm);
  std::vector<Matrix> d2_inf;
  if (second_order) d2_inf.assign(n, Matrix::Zero(pm, pm));

  const double seed = std::exp(theta.mu);
  for (int k = 0; k < t0; ++k) {
    out.infections(k) = seed;
    d_inf(k, pm - 1) = seed;
    if (second_order) d2_inf[k](pm - 1, pm - 1) = seed;
  }

  const int lg = config.g.max_lag();
  const int lpi = config.pi.max_lag();

  Vector a_ext(pm - 1);  // (1, a_t), gradient of eta w.r.t. beta
  for (int t = 1; t <= t_len; ++t) {
    const int k = t + t0 - 1;
    const int rmax_g = std::min(lg, k);

    double conv = 0.0;
    Vector d_conv = Vector::Zero(pm);
    Matrix d2_conv;
    if (second_order) d2_conv.setZero(pm, pm);
    for (int r = 1; r <= rmax_g; ++r) {
      double w = config.g.weight(r);
      if (w == 0.0) continue;
      conv += w * out.infections(k - r);
      d_conv += w * d_inf.row(k - r).transpose();
      if (second_order) d2_conv += w * d2_inf[k - r];
    }

    a_ext(0) = 1.0;
    for (int j = 0; j < da; ++j) a_ext(j + 1) = data.interventions(t - 1, j);
    double eta = theta.beta.dot(a_ext);
    double sig = stable_logistic(eta);
    double rt = config.k_max * sig;
    double d_sig = sig * (1.0 - sig);
    Vector d_rt = Vector::Zero(pm);
    d_rt.head(pm - 1) = config.k_max * d_sig * a_ext;

    double it = rt * conv;
    if (!(it < kOverflowGuard)) throw DivergenceError(t, it);
    out.infections(k) = it;
    d_inf.row(k) = (d_rt * conv + rt * d_conv).transpose();
    if (second_order) {
      double dd_sig = d_sig * (1.0 - 2.0 * sig);
      Matrix d2_rt = Matrix::Zero(pm, pm);
      d2_rt.topLeftCorner(pm - 1, pm - 1) = config.k_max * dd_sig * (a_ext * a_ext.transpose());
      d2_inf[k] = d2_rt * conv + d_rt * d_conv.transpose() + d_conv * d_rt.transpose() +
                  rt * d2_conv;
    }
  }

  out.means.setZero(t_len);
  for (int t = 1; t <= t_len; ++t) {
    const int k = t + t0 - 1;
    const int rmax = std::min(lpi, k);
    double m = 0.0;
    Vector dm = Vector::Zero(pm);
    Matrix d2m;
    if (second_order) d2m.setZero(pm, pm);
    for (int r = 1; r <= rmax; ++r) {
      double w = config.pi.weight(r);
      if (w == 0.0) continue;
      m += w * out.infections(k - r);
      dm += w * d_inf.row(k - r).transpose();
      if (second_order) d2m += w * d2_inf[k - r];
    }
    out.means(t - 1) = config.alpha * m;
    out.jacobian.row(t - 1) = config.alpha * dm.transpose();
    if (second_order) out.hessians[t - 1] = config.alpha * d2m;
  }
  return out;
}

Vector latent_infections(const Theta& theta, const EpidemicData& data,
                         const ModelConfig& config) {
  theta.validate();
  data.validate(config.family);
  const int t0 = config.t0;
  const int t_len = data.t_len();
  const int da = data.n_interventions();
  if (theta.beta.size() != da + 1)
    throw std::invalid_argument("latent_infections: beta length must be d_A + 1");

  Vector infections(t0 + t_len);
  const double seed = std::exp(theta.mu);
  infections.head(t0).setConstant(seed);

  const int lg = config.g.max_lag();
  for (int t = 1; t <= t_len; ++t) {
    const int k = t + t0 - 1;
    double conv = 0.0;
    for (int r = 1; r <= std::min(lg, k); ++r)
      conv += config.g.weight(r) * infections(k - r);
    double rt = reproduction_number(theta.beta, data.interventions.row(t - 1), config.k_max);
    double it = rt * conv;
    if (!(it < kOverflowGuard)) throw DivergenceError(t, it);
    infections(k) = it;
  }
  return infections;
}

Vector expected_outcomes(const VectorRef& infections, const ModelConfig& config) {
  const int t0 = config.t0;
  const int t_len = static_cast<int>(infections.size()) - t0;
  if (t_len < 1)
    throw std::invalid_argument("expected_outcomes: infection vector must cover the seeding window");
  Vector means(t_len);
  const int lpi = config.pi.max_lag();
  for (int t = 1; t <= t_len; ++t) {
    const int k = t + t0 - 1;
    double m = 0.0;
    for (int r = 1; r <= std::min(lpi, k); ++r)
      m += config.pi.weight(r) * infections(k - r);
    means(t - 1) = config.alpha * m;
  }
  return means;
}

Matrix mean_jacobian(const Theta& theta, const EpidemicData& data, const ModelConfig& config) {
  return mean_derivatives(theta, data, config, false).jacobian;
}

}  // namespace epifit
