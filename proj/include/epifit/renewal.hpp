#pragma once

// Deterministic latent-infection recursion, outcome means, and exact
// forward-mode derivatives with respect to (beta, mu).
//
// Infection vectors cover t = -T0+1 .. T; buffer index is t + T0 - 1. The
// constant seeding level e^mu occupies the first T0 slots.

#include "epifit/model.hpp"
#include "epifit/types.hpp"

#include <vector>

namespace epifit {

// K * logistic(beta0 + beta1' a_t); strictly inside (0, K) up to underflow.
double reproduction_number(const VectorRef& beta, const VectorRef& a_t, double k_max);

// Length T0 + T. Throws DivergenceError when the recursion exceeds 1e300.
Vector latent_infections(const Theta& theta, const EpidemicData& data, const ModelConfig& config);

// m_1..m_T from an infection vector covering lags back to -T0+1.
Vector expected_outcomes(const VectorRef& infections, const ModelConfig& config);

// d m_t / d(beta, mu), shape T x (d_A + 2); columns ordered beta0, beta..., mu.
Matrix mean_jacobian(const Theta& theta, const EpidemicData& data, const ModelConfig& config);

struct MeanDerivatives {
  Vector infections;              // T0 + T
  Vector means;                   // T
  Matrix jacobian;                // T x p_m, p_m = d_A + 2
  std::vector<Matrix> hessians;   // T matrices p_m x p_m (empty unless requested)
};

MeanDerivatives mean_derivatives(const Theta& theta, const EpidemicData& data,
                                 const ModelConfig& config, bool second_order);

}  // namespace epifit
