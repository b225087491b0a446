#pragma once

// Maximum likelihood by block coordinate descent: exact/numeric nu update
// alternating with damped Newton steps in (beta, mu), Armijo backtracking.

#include "epifit/likelihood.hpp"
#include "epifit/model.hpp"
#include "epifit/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace epifit {

struct FitOptions {
  int max_iters = 500;
  double loglik_tol = 1e-8;       // relative change stopping rule
  double newton_step = 1.0;       // initial step, halved up to 30 times
  double nu_solver_tol = 1e-10;

  std::optional<Theta> start;     // overrides the linearized starting values
  int exclude = -1;               // leave-one-out support (0-based index)
};

struct FitResult {
  Theta theta_hat;
  double loglik = 0.0;
  Vector fitted_means;
  Matrix per_time_scores;   // T x p at the optimum
  Matrix hessian_at_mle;    // p x p
  bool converged = false;
  int iterations = 0;
  std::vector<double> trace;  // nondecreasing log-likelihood values
  std::string note;
  bool nu_at_boundary = false;
  bool degenerate_start = false;

  int t_len() const { return static_cast<int>(fitted_means.size()); }
  int n_params() const { return static_cast<int>(per_time_scores.cols()); }
};

struct InitialValues {
  Vector beta;
  double mu = 0.0;
  bool degenerate_design = false;  // rank-deficient regression, beta fell back to 0
};

// Linearized-logistic least squares for beta plus the pre-onset window
// estimate of mu. Throws on all-zero outcomes or too-short series.
InitialValues initial_values(const EpidemicData& data, const ModelConfig& config);

struct NuUpdate {
  double nu = 0.0;
  bool at_boundary = false;
};

// Maximizer of the log-likelihood over nu at fixed (beta, mu). Gaussian:
// closed-form RMS residual (floored at 1e-8). NB: bracketed golden section
// plus Newton polish on [1e-6, 1e9].
NuUpdate update_nu_ex(const Theta& theta, const EpidemicData& data, const ModelConfig& config,
                      double tol = 1e-10, int exclude = -1);
double update_nu(const Theta& theta, const EpidemicData& data, const ModelConfig& config);

FitResult fit_mle(const EpidemicData& data, const ModelConfig& config,
                  const FitOptions& options = {});

}  // namespace epifit
