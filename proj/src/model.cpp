#include "epifit/model.hpp"

#include "epifit/special.hpp"

#include <cmath>
#include <stdexcept>

namespace epifit {

DelayPmf::DelayPmf(const Vector& weights) : weights_(weights) {
  if (weights_.size() < 1) throw std::invalid_argument("DelayPmf: needs at least one lag");
  if ((weights_.array() < 0.0).any())
    throw std::invalid_argument("DelayPmf: weights must be nonnegative");
  double s = weights_.sum();
  if (!(s > 0.0) || !std::isfinite(s))
    throw std::invalid_argument("DelayPmf: weights must have positive finite sum");
  if (s < 1.0 - 1e-6 || s > 1.0 + 1e-6)
    throw std::invalid_argument("DelayPmf: weights must sum to 1 within 1e-6");
  weights_ /= s;
}

double DelayPmf::mean() const {
  double m = 0.0;
  for (int r = 1; r <= max_lag(); ++r) m += r * weight(r);
  return m;
}

double DelayPmf::cumulative(int lag) const {
  double s = 0.0;
  for (int r = 1; r <= std::min(lag, max_lag()); ++r) s += weight(r);
  return s;
}

DelayPmf discretized_gamma_pmf(double mean, double cv, int max_lag) {
  if (!(mean > 0.0) || !(cv > 0.0) || max_lag < 1)
    throw std::invalid_argument("discretized_gamma_pmf: bad parameters");
  double shape = 1.0 / (cv * cv);
  double scale = mean / shape;
  Vector w(max_lag);
  double prev = 0.0;
  for (int r = 1; r <= max_lag; ++r) {
    double cdf = regularized_gamma_p(shape, r / scale);
    w(r - 1) = cdf - prev;
    prev = cdf;
  }
  double s = w.sum();
  if (!(s > 0.0)) throw std::invalid_argument("discretized_gamma_pmf: degenerate discretization");
  return DelayPmf(w / s);
}

ModelConfig::ModelConfig(double k_max, double alpha, int t0, DelayPmf g_in, DelayPmf pi_in,
                         ObsFamily family)
    : k_max(k_max), alpha(alpha), t0(t0), g(std::move(g_in)), pi(std::move(pi_in)),
      family(family) {
  if (!(k_max > 0.0)) throw std::invalid_argument("ModelConfig: K must be positive");
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::invalid_argument("ModelConfig: alpha must be in (0, 1]");
  if (t0 < 1) throw std::invalid_argument("ModelConfig: T0 must be >= 1");
  if (!(pi.cumulative(t0) > 0.0 && g.cumulative(t0) > 0.0))
    throw std::invalid_argument(
        "ModelConfig: g and pi need positive mass on lags 1..T0 (identifiability)");
}

void Theta::validate() const {
  if (!(nu > 0.0)) throw std::invalid_argument("Theta: nu must be positive");
  if (!beta.allFinite() || !std::isfinite(mu) || !std::isfinite(nu))
    throw std::invalid_argument("Theta: entries must be finite");
  if (beta.size() < 1) throw std::invalid_argument("Theta: beta needs an intercept entry");
}

void EpidemicData::validate(ObsFamily family) const {
  if (t_len() < 2) throw std::invalid_argument("EpidemicData: needs T >= 2");
  if (interventions.rows() != t_len())
    throw std::invalid_argument("EpidemicData: intervention rows must match outcome length");
  if (!outcomes.allFinite() || !interventions.allFinite())
    throw std::invalid_argument("EpidemicData: entries must be finite");
  if ((outcomes.array() < 0.0).any())
    throw std::invalid_argument("EpidemicData: outcomes must be nonnegative");
  if (family == ObsFamily::negative_binomial) {
    for (int t = 0; t < t_len(); ++t) {
      if (std::nearbyint(outcomes(t)) != outcomes(t))
        throw std::invalid_argument("EpidemicData: NB outcomes must be integer-valued");
    }
  }
  if (labels && static_cast<int>(labels->size()) != t_len())
    throw std::invalid_argument("EpidemicData: label count must match outcome length");
}

}  // namespace epifit
