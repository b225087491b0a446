#include "epifit/inference.hpp"

#include "epifit/special.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace epifit {

int hac_bandwidth(int t_len) {
  if (t_len < 1) throw std::invalid_argument("hac_bandwidth: requires T >= 1");
  int tau = static_cast<int>(std::floor(4.0 * std::pow(t_len / 100.0, 2.0 / 9.0)));
  return std::max(1, tau);
}

double hac_weight(int lag, int t_len) {
  if (lag < 0) throw std::invalid_argument("hac_weight: requires lag >= 0");
  int tau = hac_bandwidth(t_len);
  return std::max(1.0 - static_cast<double>(lag) / tau, 0.0);
}

SandwichResult sandwich_covariance_ex(const FitResult& fit, const SandwichOptions& opts) {
  const int t_len = fit.t_len();
  const int p = fit.n_params();
  const Matrix& s = fit.per_time_scores;

  SandwichResult out;
  out.bandwidth = opts.forced_bandwidth ? *opts.forced_bandwidth : hac_bandwidth(t_len);
  if (out.bandwidth < 1) throw std::invalid_argument("sandwich: bandwidth must be >= 1");

  // single pass over lags: S = G_0 + sum_l w_l (G_l + G_l')
  Matrix middle = s.transpose() * s;
  for (int lag = 1; lag < out.bandwidth; ++lag) {
    double w = 1.0 - static_cast<double>(lag) / out.bandwidth;
    Matrix gl = s.bottomRows(t_len - lag).transpose() * s.topRows(t_len - lag);
    middle += w * (gl + gl.transpose());
  }
  out.middle = middle;

  const Matrix& h = fit.hessian_at_mle;
  Eigen::JacobiSVD<Matrix> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
  double smax = svd.singularValues()(0);
  double smin = svd.singularValues()(p - 1);
  if (!(smin > smax * 1e-13)) throw SingularHessianError(smin);
  out.h_condition = smax / smin;

  Matrix hinv_s = svd.solve(middle);
  Matrix ups = static_cast<double>(t_len) * svd.solve(hinv_s.transpose()).transpose();
  ups = 0.5 * (ups + ups.transpose());

  Eigen::SelfAdjointEigenSolver<Matrix> es(ups);
  Vector ev = es.eigenvalues();
  out.clip_magnitude = std::max(0.0, -ev.minCoeff());
  ev = ev.cwiseMax(0.0);
  out.upsilon = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  out.upsilon = 0.5 * (out.upsilon + out.upsilon.transpose());
  return out;
}

Matrix sandwich_covariance(const FitResult& fit) { return sandwich_covariance_ex(fit).upsilon; }

Ellipsoid::Ellipsoid(Vector center, Matrix sqrt_matrix, double radius, int t_norm)
    : center_(std::move(center)), sqrt_matrix_(std::move(sqrt_matrix)), radius_(radius),
      t_norm_(t_norm) {
  if (sqrt_matrix_.rows() != center_.size() || sqrt_matrix_.cols() != center_.size())
    throw std::invalid_argument("Ellipsoid: dimension mismatch");
  if (radius_ < 0.0) throw std::invalid_argument("Ellipsoid: radius must be nonnegative");
  if (t_norm_ < 1) throw std::invalid_argument("Ellipsoid: t_norm must be >= 1");
  Eigen::SelfAdjointEigenSolver<Matrix> es(sqrt_matrix_);
  eigvecs_ = es.eigenvectors();
  eigvals_ = es.eigenvalues().cwiseMax(0.0);
}

Vector Ellipsoid::point(const VectorRef& x) const {
  return center_ + (radius_ / std::sqrt(static_cast<double>(t_norm_))) * (sqrt_matrix_ * x);
}

double Ellipsoid::quadratic_form(const VectorRef& theta) const {
  // (theta-c)' Upsilon^+ (theta-c) with Upsilon = sqrt * sqrt'
  Vector z = eigvecs_.transpose() * (theta - center_);
  double scale = eigvals_.maxCoeff();
  double q = 0.0;
  for (int i = 0; i < z.size(); ++i) {
    if (eigvals_(i) > 1e-14 * scale) {
      double w = z(i) / eigvals_(i);
      q += w * w;
    } else if (std::fabs(z(i)) > 1e-10 * (1.0 + center_.norm())) {
      return std::numeric_limits<double>::infinity();  // outside the degenerate span
    }
  }
  return q;
}

bool Ellipsoid::contains(const VectorRef& theta, double tol) const {
  return quadratic_form(theta) <= radius_ * radius_ / t_norm_ + tol;
}

namespace {

Matrix symmetric_sqrt(const Matrix& m, double* clip = nullptr) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
  Vector ev = es.eigenvalues();
  if (clip) *clip = std::max(0.0, -ev.minCoeff());
  ev = ev.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

Ellipsoid confidence_ellipsoid(const FitResult& fit, double level,
                               const std::vector<int>& subset) {
  if (level < 0.0 || level >= 1.0)
    throw std::domain_error("confidence_ellipsoid: level must be in [0, 1)");
  Matrix ups = sandwich_covariance(fit);
  const int p = fit.n_params();

  std::vector<int> idx = subset;
  if (idx.empty()) {
    idx.resize(p);
    for (int i = 0; i < p; ++i) idx[i] = i;
  }
  const int d = static_cast<int>(idx.size());
  Vector full(p);
  full.head(fit.theta_hat.beta.size()) = fit.theta_hat.beta;
  full(p - 2) = fit.theta_hat.mu;
  full(p - 1) = fit.theta_hat.nu;

  Vector center(d);
  Matrix sub(d, d);
  for (int i = 0; i < d; ++i) {
    if (idx[i] < 0 || idx[i] >= p) throw std::invalid_argument("confidence_ellipsoid: bad subset");
    center(i) = full(idx[i]);
    for (int j = 0; j < d; ++j) sub(i, j) = ups(idx[i], idx[j]);
  }
  double radius = (level == 0.0) ? 0.0 : std::sqrt(chi_square_quantile(level, d));
  return Ellipsoid(center, symmetric_sqrt(sub), radius, fit.t_len());
}

std::vector<MarginalInterval> marginal_intervals(const FitResult& fit, double level) {
  Matrix ups = sandwich_covariance(fit);
  const int p = fit.n_params();
  double z = std::sqrt(chi_square_quantile(level, 1));
  Vector full(p);
  full.head(fit.theta_hat.beta.size()) = fit.theta_hat.beta;
  full(p - 2) = fit.theta_hat.mu;
  full(p - 1) = fit.theta_hat.nu;
  std::vector<MarginalInterval> out(p);
  for (int k = 0; k < p; ++k) {
    double half = z * std::sqrt(std::max(0.0, ups(k, k)) / fit.t_len());
    out[k] = {full(k) - half, full(k) + half};
  }
  return out;
}

namespace {

struct BandObjective {
  const ModelConfig* config;
  EpidemicData scenario_data;  // zero outcomes, scenario interventions
  Theta base;

  Theta theta_at(const Vector& full) const {
    Theta th = base;
    th.beta = full.head(base.beta.size());
    th.mu = full(full.size() - 2);
    th.nu = std::max(full(full.size() - 1), 1e-12);
    return th;
  }
};

}  // namespace

ScenarioBand scenario_band(const FitResult& fit, const ModelConfig& config,
                           const MatrixRef& scenario, double level) {
  return scenario_band(fit.theta_hat, sandwich_covariance(fit), fit.t_len(), config, scenario,
                       level);
}

ScenarioBand scenario_band(const Theta& theta, const MatrixRef& upsilon, int t_len,
                           const ModelConfig& config, const MatrixRef& scenario, double level) {
  const int da = static_cast<int>(theta.beta.size()) - 1;
  if (scenario.cols() != da)
    throw std::invalid_argument("scenario_band: scenario must have d_A columns");
  if (level < 0.0 || level >= 1.0)
    throw std::domain_error("scenario_band: level must be in [0, 1)");
  const int horizon = static_cast<int>(scenario.rows());
  const int p = da + 3;
  if (upsilon.rows() != p || upsilon.cols() != p)
    throw std::invalid_argument("scenario_band: upsilon must be p x p");

  Vector center(p);
  center.head(da + 1) = theta.beta;
  center(p - 2) = theta.mu;
  center(p - 1) = theta.nu;
  double radius = (level == 0.0) ? 0.0 : std::sqrt(chi_square_quantile(level, p));
  Ellipsoid ell(center, symmetric_sqrt(upsilon), radius, t_len);

  BandObjective obj;
  obj.config = &config;
  obj.scenario_data.outcomes = Vector::Zero(horizon);
  obj.scenario_data.interventions = scenario;
  obj.base = theta;

  auto means_at = [&](const Vector& x, Vector& out_means) -> bool {
    Theta th = obj.theta_at(ell.point(x));
    try {
      out_means = expected_outcomes(latent_infections(th, obj.scenario_data, config), config);
      return out_means.allFinite();
    } catch (const DivergenceError&) {
      return false;
    }
  };

  ScenarioBand band;
  band.inner_flag.assign(horizon, 0);
  Vector center_means;
  if (!means_at(Vector::Zero(p), center_means))
    throw std::runtime_error("scenario_band: plug-in mean diverges under the scenario");
  band.center_mean = center_means;
  band.lower = center_means;
  band.upper = center_means;

  if (ell.radius() == 0.0) return band;

  auto track = [&](const Vector& means) {
    band.lower = band.lower.cwiseMin(means);
    band.upper = band.upper.cwiseMax(means);
  };

  const double scale = ell.radius() / std::sqrt(static_cast<double>(t_len));
  const int n_boundary = 32, n_interior = 32, max_pga_iters = 25;

  auto grad_x = [&](const Vector& x, int t, Vector& g, Vector& means) -> bool {
    Theta th = obj.theta_at(ell.point(x));
    try {
      MeanDerivatives md = mean_derivatives(th, obj.scenario_data, config, false);
      means = md.means;
      Vector grad_theta = Vector::Zero(p);
      grad_theta.head(p - 1) = md.jacobian.row(t).transpose();
      g = scale * (ell.sqrt_matrix() * grad_theta);
      return means.allFinite();
    } catch (const DivergenceError&) {
      return false;
    }
  };

  for (int t = 0; t < horizon; ++t) {
    for (int sense = 0; sense < 2; ++sense) {
      const double sgn = (sense == 0) ? 1.0 : -1.0;  // maximize, then minimize
      std::mt19937_64 rng(0x5eedc0deULL ^ (static_cast<uint64_t>(t) << 18) ^ sense);
      std::normal_distribution<double> gauss(0.0, 1.0);
      std::uniform_real_distribution<double> unif(0.0, 1.0);

      double best = sgn * center_means(t);
      bool improved = false;

      std::vector<Vector> starts;
      starts.reserve(n_boundary + n_interior + 1);
      starts.push_back(Vector::Zero(p));
      {
        // analytic first boundary start: linearized optimizer direction
        Vector g, means;
        if (grad_x(Vector::Zero(p), t, g, means) && g.norm() > 0.0)
          starts.push_back(sgn * g / g.norm());
      }
      while (static_cast<int>(starts.size()) < 1 + n_boundary) {
        Vector v(p);
        for (int i = 0; i < p; ++i) v(i) = gauss(rng);
        double nrm = v.norm();
        if (nrm > 1e-12) starts.push_back(v / nrm);
      }
      for (int i = 0; i < n_interior; ++i) {
        Vector v(p);
        for (int j = 0; j < p; ++j) v(j) = gauss(rng);
        double nrm = v.norm();
        double r = std::pow(unif(rng), 1.0 / p);
        starts.push_back(nrm > 1e-12 ? Vector((r / nrm) * v) : Vector::Zero(p));
      }

      for (const Vector& s0 : starts) {
        Vector x = s0;
        Vector means;
        if (!means_at(x, means)) continue;
        track(means);
        double fx = sgn * means(t);

        double step = 1.0;
        for (int it = 0; it < max_pga_iters; ++it) {
          Vector g;
          if (!grad_x(x, t, g, means)) break;
          track(means);
          fx = sgn * means(t);
          Vector dir = sgn * g;
          double gnorm = dir.norm();
          if (gnorm < 1e-12 * (1.0 + std::fabs(fx))) break;

          bool moved = false;
          for (int h = 0; h < 20; ++h, step *= 0.5) {
            Vector xn = x + (step / gnorm) * dir;
            double nrm = xn.norm();
            if (nrm > 1.0) xn /= nrm;  // project back onto the unit ball
            Vector mn;
            if (!means_at(xn, mn)) continue;
            track(mn);
            double fn = sgn * mn(t);
            if (fn > fx + 1e-14 * (1.0 + std::fabs(fx))) {
              x = xn;
              fx = fn;
              moved = true;
              step = std::min(step * 2.0, 1.0);
              break;
            }
          }
          if (!moved) break;
        }
        if (fx > best + 1e-12 * (1.0 + std::fabs(best))) {
          best = fx;
          improved = true;
        }
      }
      if (!improved) {
        band.inner_flag[t] = 1;
        band.possibly_inner = true;
      }
    }
  }
  return band;
}

}  // namespace epifit
