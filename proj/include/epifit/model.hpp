#pragma once

// Model ingredients: lag distributions, parameter triple, observed data and
// the fixed model configuration.

#include "epifit/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace epifit {

// Finite nonnegative probability vector over lags 1..L, renormalized to sum
// exactly 1 on construction.
class DelayPmf {
public:
  explicit DelayPmf(const Vector& weights);

  int max_lag() const { return static_cast<int>(weights_.size()); }
  double weight(int lag) const { return weights_(lag - 1); }  // lag in 1..L
  const Vector& weights() const { return weights_; }
  double mean() const;
  double cumulative(int lag) const;  // sum of weights for lags <= lag

private:
  Vector weights_;
};

// weights proportional to F(r) - F(r-1) on lags 1..max_lag for a Gamma
// distribution given by mean and coefficient of variation
DelayPmf discretized_gamma_pmf(double mean, double cv, int max_lag);

enum class ObsFamily { gaussian, negative_binomial };

struct ModelConfig {
  double k_max;        // maximum transmission rate K
  double alpha;        // ascertainment rate
  int t0;              // seeding window length
  DelayPmf g;          // generation-interval distribution
  DelayPmf pi;         // infection-to-outcome distribution
  ObsFamily family = ObsFamily::negative_binomial;

  ModelConfig(double k_max, double alpha, int t0, DelayPmf g, DelayPmf pi,
              ObsFamily family = ObsFamily::negative_binomial);
};

// (beta, mu, nu): reproduction coefficients (intercept first), log seeding
// level, and the Gaussian sd / NB inverse-dispersion nuisance.
struct Theta {
  Vector beta;  // length d_A + 1
  double mu = 0.0;
  double nu = 1.0;

  void validate() const;
};

struct EpidemicData {
  Vector outcomes;                          // Y_1..Y_T
  Matrix interventions;                     // T x d_A
  std::optional<std::vector<std::string>> labels;

  int t_len() const { return static_cast<int>(outcomes.size()); }
  int n_interventions() const { return static_cast<int>(interventions.cols()); }
  void validate(ObsFamily family) const;
};

}  // namespace epifit
