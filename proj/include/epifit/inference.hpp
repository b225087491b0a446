#pragma once

// Misspecification-robust covariance (Bartlett-weighted HAC sandwich), joint
// confidence ellipsoids and global scenario prediction bands.

#include "epifit/fit.hpp"
#include "epifit/types.hpp"

#include <optional>
#include <vector>

namespace epifit {

// Bartlett weight max(1 - lag/tau, 0) with tau = floor(4 (T/100)^{2/9}).
double hac_weight(int lag, int t_len);
int hac_bandwidth(int t_len);

struct SandwichOptions {
  std::optional<int> forced_bandwidth;  // override tau (testing hook)
};

struct SandwichResult {
  Matrix upsilon;          // T-normalized covariance: Var(theta_hat) ~ upsilon / T
  Matrix middle;           // HAC-weighted score cross-product sum S_hat
  int bandwidth = 0;
  double h_condition = 0.0;       // condition number of the Hessian
  double clip_magnitude = 0.0;    // most negative eigenvalue clipped to zero
};

SandwichResult sandwich_covariance_ex(const FitResult& fit, const SandwichOptions& opts = {});
Matrix sandwich_covariance(const FitResult& fit);

class Ellipsoid {
public:
  Ellipsoid() = default;
  // sqrt_matrix is the symmetric PSD square root of the T-normalized
  // covariance; radius is the critical value chi.
  Ellipsoid(Vector center, Matrix sqrt_matrix, double radius, int t_norm);

  const Vector& center() const { return center_; }
  const Matrix& sqrt_matrix() const { return sqrt_matrix_; }
  double radius() const { return radius_; }
  int t_norm() const { return t_norm_; }
  int dim() const { return static_cast<int>(center_.size()); }

  // center + (radius / sqrt(T)) * sqrt_matrix * x
  Vector point(const VectorRef& x) const;
  // (theta - c)' Upsilon^+ (theta - c) <= radius^2 / T, null-space aware
  bool contains(const VectorRef& theta, double tol = 1e-9) const;
  double quadratic_form(const VectorRef& theta) const;

private:
  Vector center_;
  Matrix sqrt_matrix_;
  double radius_ = 0.0;
  int t_norm_ = 1;
  // eigendecomposition of sqrt_matrix for the membership test
  Matrix eigvecs_;
  Vector eigvals_;
};

// Joint (or subset-marginal) ellipsoid at the given confidence level;
// level 0 yields the degenerate point set.
Ellipsoid confidence_ellipsoid(const FitResult& fit, double level,
                               const std::vector<int>& subset = {});

struct MarginalInterval {
  double lower = 0.0;
  double upper = 0.0;
};

// theta_k +/- z sqrt(Upsilon_kk / T) per coordinate.
std::vector<MarginalInterval> marginal_intervals(const FitResult& fit, double level);

struct ScenarioBand {
  Vector lower;
  Vector upper;
  Vector center_mean;            // plug-in mean at theta_hat
  std::vector<char> inner_flag;  // per-time: optimizer failed to improve on any start
  bool possibly_inner = false;
};

// Pointwise extrema of the model mean over the joint confidence ellipsoid
// under a fixed intervention trajectory (may extend beyond the fitted T).
ScenarioBand scenario_band(const FitResult& fit, const ModelConfig& config,
                           const MatrixRef& scenario, double level);

// Same, from a stored estimate and T-normalized covariance.
ScenarioBand scenario_band(const Theta& theta, const MatrixRef& upsilon, int t_len,
                           const ModelConfig& config, const MatrixRef& scenario, double level);

}  // namespace epifit
