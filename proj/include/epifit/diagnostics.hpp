#pragma once

// Residual, case-influence and autocorrelation diagnostics.

#include "epifit/fit.hpp"
#include "epifit/inference.hpp"
#include "epifit/types.hpp"

namespace epifit {

enum class LooMode {
  fast,   // one coordinate-descent cycle from theta_hat per deleted point
  exact,  // full refit per deleted point
};

struct DiagnosticsReport {
  Vector raw;               // e_t = Y_t - Yhat_t
  Vector standardized;      // e_t / sqrt(Var_hat(Y_t)), leverage taken as 0
  Vector studentized;       // standardized against the leave-one-out fit
  Vector cooks;             // Cook's distance D_t
  Vector beta1_influence;   // C_t, scaled influence on the first slope
  Matrix qq;                // T x 2: theoretical and sorted sample quantiles
  Vector acf_std;           // autocorrelations of standardized residuals, lag 0..
  Vector acf_diff;          // same for first differences of Y
};

Vector standardized_residuals(const FitResult& fit, const EpidemicData& data,
                              const ModelConfig& config);

Vector studentized_residuals(const FitResult& fit, const EpidemicData& data,
                             const ModelConfig& config, LooMode mode = LooMode::fast);

Vector cooks_distances(const FitResult& fit, const EpidemicData& data, const ModelConfig& config,
                       LooMode mode = LooMode::fast);

Vector beta1_influence(const FitResult& fit, const EpidemicData& data, const ModelConfig& config,
                       LooMode mode = LooMode::fast);

// Sample autocorrelations with mean removal, lags 0..max_lag. Requires
// max_lag < T/2 and a non-constant series.
Vector residual_acf(const VectorRef& series, int max_lag);

DiagnosticsReport diagnostics_report(const FitResult& fit, const EpidemicData& data,
                                     const ModelConfig& config, LooMode mode = LooMode::fast);

}  // namespace epifit
