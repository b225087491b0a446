#pragma once

// Log-likelihood, analytic per-time scores and analytic Hessian for the
// Gaussian and negative binomial observation families, chained through the
// mean derivatives of the renewal recursion.
//
// Parameter ordering everywhere: beta0, beta..., mu, nu (p = d_A + 3).

#include "epifit/model.hpp"
#include "epifit/renewal.hpp"
#include "epifit/types.hpp"

namespace epifit {

namespace family {

// derivatives of one likelihood contribution with respect to (m_t, nu)
struct PointDerivs {
  double dm = 0.0;
  double dnu = 0.0;
  double dmm = 0.0;
  double dnunu = 0.0;
  double dnum = 0.0;
};

double gaussian_logpdf(double y, double m, double nu);
double nb_logpmf(double y, double m, double nu);
PointDerivs gaussian_derivs(double y, double m, double nu);
PointDerivs nb_derivs(double y, double m, double nu);

}  // namespace family

struct LikelihoodEval {
  double loglik = 0.0;
  Matrix per_time_scores;  // T x p; excluded rows are zero
  Matrix hessian;          // p x p, symmetric
  Vector means;            // fitted means m_1..m_T
};

struct LikelihoodRequest {
  bool scores = false;
  bool hessian = false;
  bool gauss_newton = false;  // drop the d^2 m / d theta^2 term
  int exclude = -1;           // 0-based time index left out of all sums
};

LikelihoodEval evaluate_likelihood(const Theta& theta, const EpidemicData& data,
                                   const ModelConfig& config, const LikelihoodRequest& req = {});

double log_likelihood(const Theta& theta, const EpidemicData& data, const ModelConfig& config);

// per-time score matrix T x p
Matrix score(const Theta& theta, const EpidemicData& data, const ModelConfig& config);

Matrix hessian(const Theta& theta, const EpidemicData& data, const ModelConfig& config,
               bool gauss_newton = false);

}  // namespace epifit
