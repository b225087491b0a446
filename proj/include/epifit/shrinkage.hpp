#pragma once

// Multivariate robust empirical-Bayes shrinkage across regions with
// average-coverage confidence sets: moment estimation, shrinkage matrices,
// normalized-bias moments, worst-case non-coverage and critical values.

#include "epifit/inference.hpp"
#include "epifit/types.hpp"

#include <string>
#include <vector>

namespace epifit {

// order-4 tensor stored flat, d^4 entries
class Tensor4 {
public:
  Tensor4() = default;
  explicit Tensor4(int d) : d_(d), v_(Vector::Zero(static_cast<long>(d) * d * d * d)) {}

  int dim() const { return d_; }
  double& operator()(int i, int j, int k, int l) { return v_(((i * d_ + j) * d_ + k) * d_ + l); }
  double operator()(int i, int j, int k, int l) const {
    return v_(((i * d_ + j) * d_ + k) * d_ + l);
  }
  Vector& flat() { return v_; }
  const Vector& flat() const { return v_; }

  void symmetrize();  // average over all 24 index permutations

private:
  int d_ = 0;
  Vector v_;
};

struct RegionFit {
  Vector theta_hat;  // d
  Matrix upsilon;    // d x d, T-normalized, symmetric positive definite
  int t_len = 1;
};

enum class WeightScheme { unit, efficient };

struct MomentEstimates {
  Vector theta_o;
  Matrix phi2;      // eigen-floored at 1e-8
  Tensor4 phi4;
  Vector weights;   // xi per region
  bool phi2_floored = false;
};

MomentEstimates moment_estimates(const std::vector<RegionFit>& region_fits, WeightScheme scheme);

// W = Phi2 (Phi2 + Upsilon / T)^{-1}
Matrix shrinkage_matrix(const MatrixRef& phi2, const MatrixRef& upsilon, int t_len);

// theta_o + W (theta_hat - theta_o)
Vector shrink(const VectorRef& theta_hat, const VectorRef& theta_o, const MatrixRef& w);

struct BiasMoments {
  double m2 = 0.0;
  double m4 = 0.0;
};

BiasMoments bias_moments(const MatrixRef& phi2, const Tensor4& phi4, const MatrixRef& upsilon,
                         int t_len);

// Pr[chi^2_{d-1} + (Z - sqrt(u))^2 >= chi^2]
double noncoverage_r(double u, double chi, int d);

// sup_F E_F[r_{d-1}(u, chi)] subject to E[u] = m2, E[u^2] = m4, solved as a
// small LP over a discretized support.
double max_noncoverage(double m2, double m4, double chi, int d, int grid_size = 1000);

// inf{chi : rho(chi) <= alpha}, bisection on [0, sqrt((d + m2)/alpha)]
double critical_value(double m2, double m4, double alpha, int d, int grid_size = 1000);

struct EbRegionSet {
  bool ok = false;
  std::string error;
  Vector shrunk;
  Matrix w_matrix;
  Matrix tilde_upsilon;  // W Upsilon W'
  double m2 = 0.0;
  double m4 = 0.0;
  double chi_tilde = 0.0;
  Ellipsoid set;
};

struct EbConfidenceSets {
  MomentEstimates moments;
  std::vector<EbRegionSet> sets;  // aligned with the input regions
};

EbConfidenceSets eb_confidence_sets(const std::vector<RegionFit>& region_fits, double alpha,
                                    WeightScheme scheme = WeightScheme::efficient);

}  // namespace epifit
