#include "epifit/shrinkage.hpp"

#include "epifit/simplex.hpp"
#include "epifit/special.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace epifit {

namespace {

constexpr double kPhi2Floor = 1e-8;

Matrix symmetric_sqrt(const MatrixRef& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
  Vector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

void require_positive_definite(const MatrixRef& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
  if (!(es.eigenvalues().minCoeff() > 0.0))
    throw std::invalid_argument(std::string(what) + ": matrix must be positive definite");
}

}  // namespace

void Tensor4::symmetrize() {
  static const int perms[24][4] = {
      {0, 1, 2, 3}, {0, 1, 3, 2}, {0, 2, 1, 3}, {0, 2, 3, 1}, {0, 3, 1, 2}, {0, 3, 2, 1},
      {1, 0, 2, 3}, {1, 0, 3, 2}, {1, 2, 0, 3}, {1, 2, 3, 0}, {1, 3, 0, 2}, {1, 3, 2, 0},
      {2, 0, 1, 3}, {2, 0, 3, 1}, {2, 1, 0, 3}, {2, 1, 3, 0}, {2, 3, 0, 1}, {2, 3, 1, 0},
      {3, 0, 1, 2}, {3, 0, 2, 1}, {3, 1, 0, 2}, {3, 1, 2, 0}, {3, 2, 0, 1}, {3, 2, 1, 0}};
  Tensor4 acc(d_);
  int idx[4];
  for (idx[0] = 0; idx[0] < d_; ++idx[0])
    for (idx[1] = 0; idx[1] < d_; ++idx[1])
      for (idx[2] = 0; idx[2] < d_; ++idx[2])
        for (idx[3] = 0; idx[3] < d_; ++idx[3]) {
          double s = 0.0;
          for (const auto& p : perms)
            s += (*this)(idx[p[0]], idx[p[1]], idx[p[2]], idx[p[3]]);
          acc(idx[0], idx[1], idx[2], idx[3]) = s / 24.0;
        }
  *this = acc;
}

MomentEstimates moment_estimates(const std::vector<RegionFit>& region_fits, WeightScheme scheme) {
  const int n_regions = static_cast<int>(region_fits.size());
  if (n_regions < 2) throw std::invalid_argument("moment_estimates: requires at least 2 regions");
  const int d = static_cast<int>(region_fits[0].theta_hat.size());
  for (const auto& r : region_fits) {
    if (r.theta_hat.size() != d || r.upsilon.rows() != d || r.upsilon.cols() != d)
      throw std::invalid_argument("moment_estimates: inconsistent region dimensions");
    if (r.t_len < 1) throw std::invalid_argument("moment_estimates: t_len must be >= 1");
    require_positive_definite(r.upsilon, "moment_estimates");
  }

  MomentEstimates out;
  out.weights.resize(n_regions);
  for (int j = 0; j < n_regions; ++j) {
    if (scheme == WeightScheme::unit) {
      out.weights(j) = 1.0;
    } else {
      double det = region_fits[j].upsilon.determinant();
      out.weights(j) = region_fits[j].t_len * std::pow(std::max(det, 1e-300), -1.0 / d);
    }
  }
  const double wsum = out.weights.sum();

  out.theta_o = Vector::Zero(d);
  for (int j = 0; j < n_regions; ++j)
    out.theta_o += out.weights(j) * region_fits[j].theta_hat;
  out.theta_o /= wsum;

  Matrix phi2 = Matrix::Zero(d, d);
  for (int j = 0; j < n_regions; ++j) {
    Vector eps = region_fits[j].theta_hat - out.theta_o;
    Matrix v = region_fits[j].upsilon / region_fits[j].t_len;
    phi2 += out.weights(j) * (eps * eps.transpose() - v);
  }
  phi2 /= wsum;
  phi2 = 0.5 * (phi2 + phi2.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(phi2);
  Vector ev = es.eigenvalues();
  if (ev.minCoeff() < kPhi2Floor) {
    out.phi2_floored = true;
    ev = ev.cwiseMax(kPhi2Floor);
  }
  out.phi2 = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  out.phi2 = 0.5 * (out.phi2 + out.phi2.transpose());

  out.phi4 = Tensor4(d);
  for (int j = 0; j < n_regions; ++j) {
    Vector eps = region_fits[j].theta_hat - out.theta_o;
    Matrix v = region_fits[j].upsilon / region_fits[j].t_len;
    double w = out.weights(j) / wsum;
    for (int i1 = 0; i1 < d; ++i1)
      for (int i2 = 0; i2 < d; ++i2)
        for (int i3 = 0; i3 < d; ++i3)
          for (int i4 = 0; i4 < d; ++i4) {
            double term = eps(i1) * eps(i2) * eps(i3) * eps(i4)
                        + v(i1, i2) * v(i3, i4) + v(i1, i3) * v(i2, i4) + v(i1, i4) * v(i2, i3)
                        - v(i1, i2) * eps(i3) * eps(i4) - v(i1, i3) * eps(i2) * eps(i4)
                        - v(i1, i4) * eps(i2) * eps(i3) - v(i2, i3) * eps(i1) * eps(i4)
                        - v(i2, i4) * eps(i1) * eps(i3) - v(i3, i4) * eps(i1) * eps(i2);
            out.phi4(i1, i2, i3, i4) += w * term;
          }
  }
  out.phi4.symmetrize();
  return out;
}

Matrix shrinkage_matrix(const MatrixRef& phi2, const MatrixRef& upsilon, int t_len) {
  require_positive_definite(phi2, "shrinkage_matrix(phi2)");
  require_positive_definite(upsilon, "shrinkage_matrix(upsilon)");
  Matrix sum = phi2 + upsilon / static_cast<double>(t_len);
  Eigen::LLT<Matrix> llt(sum);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("shrinkage_matrix: singular phi2 + upsilon/T");
  // W = Phi (Phi + V)^{-1}  via  (Phi + V)' X' = Phi'
  return llt.solve(phi2.transpose()).transpose();
}

Vector shrink(const VectorRef& theta_hat, const VectorRef& theta_o, const MatrixRef& w) {
  if (theta_hat.size() != theta_o.size() || w.rows() != theta_hat.size() ||
      w.cols() != theta_hat.size())
    throw std::invalid_argument("shrink: dimension mismatch");
  return theta_o + w * (theta_hat - theta_o);
}

BiasMoments bias_moments(const MatrixRef& phi2, const Tensor4& phi4, const MatrixRef& upsilon,
                         int t_len) {
  require_positive_definite(phi2, "bias_moments(phi2)");
  const int d = static_cast<int>(phi2.rows());
  if (phi4.dim() != d || upsilon.rows() != d || upsilon.cols() != d)
    throw std::invalid_argument("bias_moments: dimension mismatch");

  Matrix ups_sqrt = symmetric_sqrt(upsilon);
  Matrix phi2_inv = phi2.inverse();
  BiasMoments out;
  out.m2 = (ups_sqrt * phi2_inv * ups_sqrt).trace() / t_len;

  // Psi_{i1,i2} = <Phi4, g_{i1} (x) g_{i1} (x) g_{i2} (x) g_{i2}>, g_i rows of
  // G = Upsilon^{1/2} Phi2^{-1}
  Matrix g = ups_sqrt * phi2_inv;
  double psi_sum = 0.0;
  for (int i1 = 0; i1 < d; ++i1)
    for (int i2 = 0; i2 < d; ++i2) {
      double psi = 0.0;
      for (int j1 = 0; j1 < d; ++j1)
        for (int j2 = 0; j2 < d; ++j2)
          for (int j3 = 0; j3 < d; ++j3)
            for (int j4 = 0; j4 < d; ++j4)
              psi += phi4(j1, j2, j3, j4) * g(i1, j1) * g(i1, j2) * g(i2, j3) * g(i2, j4);
      psi_sum += psi;
    }
  out.m4 = psi_sum / (static_cast<double>(t_len) * t_len);

  if (out.m4 < out.m2 * out.m2 - 1e-9) throw MomentConsistencyError(out.m2, out.m4);
  out.m4 = std::max(out.m4, out.m2 * out.m2);
  return out;
}

double noncoverage_r(double u, double chi, int d) {
  if (u < 0.0 || chi < 0.0) throw std::domain_error("noncoverage_r: requires u, chi >= 0");
  return noncentral_chi_square_sf(chi * chi, d, u);
}

double max_noncoverage(double m2, double m4, double chi, int d, int grid_size) {
  if (m2 < 0.0 || m4 < m2 * m2 - 1e-12)
    throw std::invalid_argument("max_noncoverage: requires m4 >= m2^2 >= 0");
  if (grid_size < 10) throw std::invalid_argument("max_noncoverage: grid too small");
  if (m2 <= 0.0) return noncoverage_r(0.0, chi, d);

  const double eps = 1e-12;
  const double u_point = m4 / std::max(m2, eps);
  double u_max = std::max({8.0 * u_point, 8.0 * m2, 10.0});

  for (int attempt = 0; attempt < 5; ++attempt) {
    // mixed support: linear on [0, 2 m2], geometric up to u_max, plus the
    // forced points {0, m2, m4/m2}
    std::set<double> pts;
    pts.insert(0.0);
    pts.insert(m2);
    if (u_point <= u_max) pts.insert(u_point);
    const int n_lin = grid_size / 2;
    for (int i = 0; i <= n_lin; ++i) pts.insert(2.0 * m2 * i / n_lin);
    const int n_geo = grid_size - n_lin;
    const double geo_lo = std::max(2.0 * m2, 1e-8 * u_max);
    for (int i = 1; i <= n_geo; ++i)
      pts.insert(geo_lo * std::pow(u_max / geo_lo, static_cast<double>(i) / n_geo));

    std::vector<double> grid(pts.begin(), pts.end());
    const int n = static_cast<int>(grid.size());

    SmallLp lp;
    lp.objective.resize(n);
    lp.eq_matrix.resize(3, n);
    for (int i = 0; i < n; ++i) {
      lp.objective(i) = noncoverage_r(grid[i], chi, d);
      lp.eq_matrix(0, i) = 1.0;
      lp.eq_matrix(1, i) = grid[i];
      lp.eq_matrix(2, i) = grid[i] * grid[i];
    }
    lp.eq_rhs.resize(3);
    lp.eq_rhs << 1.0, m2, m4;
    try {
      LpSolution sol = solve_small_lp(lp, LpSense::maximize);
      return std::clamp(sol.optimum, 0.0, 1.0);
    } catch (const LpInfeasibleError&) {
      u_max *= 2.0;  // support too short; retry wider
    }
  }
  throw std::runtime_error("max_noncoverage: no feasible support grid after widening");
}

double critical_value(double m2, double m4, double alpha, int d, int grid_size) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::domain_error("critical_value: requires alpha in (0,1)");
  double lo = 0.0;
  double hi = std::sqrt((d + m2) / alpha);  // Markov upper bound
  while (hi - lo > 1e-4) {
    double mid = 0.5 * (lo + hi);
    if (max_noncoverage(m2, m4, mid, d, grid_size) <= alpha)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

EbConfidenceSets eb_confidence_sets(const std::vector<RegionFit>& region_fits, double alpha,
                                    WeightScheme scheme) {
  EbConfidenceSets out;
  out.moments = moment_estimates(region_fits, scheme);
  out.sets.resize(region_fits.size());
  for (size_t j = 0; j < region_fits.size(); ++j) {
    EbRegionSet& set = out.sets[j];
    try {
      const RegionFit& rf = region_fits[j];
      set.w_matrix = shrinkage_matrix(out.moments.phi2, rf.upsilon, rf.t_len);
      set.shrunk = shrink(rf.theta_hat, out.moments.theta_o, set.w_matrix);
      Matrix tld = set.w_matrix * rf.upsilon * set.w_matrix.transpose();
      set.tilde_upsilon = 0.5 * (tld + tld.transpose());
      BiasMoments bm = bias_moments(out.moments.phi2, out.moments.phi4, rf.upsilon, rf.t_len);
      set.m2 = bm.m2;
      set.m4 = bm.m4;
      set.chi_tilde = critical_value(bm.m2, bm.m4, alpha, static_cast<int>(rf.theta_hat.size()));
      set.set = Ellipsoid(set.shrunk, symmetric_sqrt(set.tilde_upsilon), set.chi_tilde, rf.t_len);
      set.ok = true;
    } catch (const std::exception& e) {
      set.ok = false;
      set.error = e.what();
    }
  }
  return out;
}

}  // namespace epifit
