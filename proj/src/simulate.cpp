#include "epifit/simulate.hpp"

#include "epifit/inference.hpp"
#include "epifit/shrinkage.hpp"

#include <cmath>
#include <stdexcept>

namespace epifit {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 substream_rng(uint64_t seed, uint64_t stream) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(stream + 1)));
}

double nb_draw(std::mt19937_64& rng, double mean, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("nb_draw: r must be positive");
  if (mean <= 1e-12) return 0.0;
  std::gamma_distribution<double> gamma(r, mean / r);
  double lambda = gamma(rng);
  if (lambda <= 0.0) return 0.0;
  std::poisson_distribution<long long> pois(lambda);
  return static_cast<double>(pois(rng));
}

ModelConfig default_sim_config(ObsFamily family) {
  return ModelConfig(6.5, 0.01, 40, discretized_gamma_pmf(6.5, 0.62, 30),
                     discretized_gamma_pmf(23.9, 0.40, 60), family);
}

Theta SimDesign::theta_true() const {
  Theta th;
  th.beta.resize(2);
  th.beta << beta0, beta1;
  th.mu = mu;
  th.nu = 1.0;
  return th;
}

Matrix SimDesign::intervention_matrix() const {
  Matrix a = Matrix::Zero(t_len, 1);
  for (int t = step_time; t <= t_len; ++t) a(t - 1, 0) = 1.0;
  return a;
}

SimPath simulate_epidemic(const SimDesign& design, const ModelConfig& config) {
  const int t_len = design.t_len;
  const int t0 = config.t0;
  SimPath path;
  path.data.interventions = design.intervention_matrix();
  path.infections.resize(t_len);
  path.outcomes.resize(t_len);

  Theta th = design.theta_true();
  std::mt19937_64 rng = substream_rng(design.seed, 0);

  // realized infection history including the seeding window
  Vector hist(t0 + t_len);
  hist.head(t0).setConstant(std::exp(design.mu));
  const int lg = config.g.max_lag();
  const int lpi = config.pi.max_lag();
  for (int t = 1; t <= t_len; ++t) {
    const int k = t + t0 - 1;
    double conv = 0.0;
    for (int r = 1; r <= std::min(lg, k); ++r) conv += config.g.weight(r) * hist(k - r);
    double rt = reproduction_number(th.beta, path.data.interventions.row(t - 1), config.k_max);
    double mean_i = rt * conv;
    hist(k) = design.deterministic ? mean_i : nb_draw(rng, mean_i, design.r_infection);
    path.infections(t - 1) = hist(k);

    double mean_y = 0.0;
    for (int r = 1; r <= std::min(lpi, k); ++r) mean_y += config.pi.weight(r) * hist(k - r);
    mean_y *= config.alpha;
    path.outcomes(t - 1) = design.deterministic ? mean_y : nb_draw(rng, mean_y, design.r_outcome);
  }
  path.data.outcomes = path.outcomes;
  return path;
}

CoverageResult coverage_study(const SimDesign& design, const ModelConfig& config, int n_reps,
                              double level) {
  if (n_reps < 50) throw std::invalid_argument("coverage_study: requires n_reps >= 50");
  CoverageResult out;
  Eigen::Vector3i hits = Eigen::Vector3i::Zero();  // beta0, beta1, mu
  for (int rep = 0; rep < n_reps; ++rep) {
    SimDesign d = design;
    d.seed = splitmix64(design.seed ^ splitmix64(rep + 1));
    SimPath path = simulate_epidemic(d, config);
    try {
      FitResult fit = fit_mle(path.data, config);
      if (!fit.converged) {
        ++out.n_failed;
        continue;
      }
      auto ci = marginal_intervals(fit, level);
      // theta ordering: beta0, beta1, mu, nu
      double truth[3] = {design.beta0, design.beta1, design.mu};
      for (int k = 0; k < 3; ++k)
        if (ci[k].lower <= truth[k] && truth[k] <= ci[k].upper) ++hits(k);
      ++out.n_used;
    } catch (const std::exception&) {
      ++out.n_failed;
    }
  }
  if (out.n_failed > n_reps / 10)
    throw std::runtime_error("coverage_study: more than 10% of replicates failed to converge");
  out.coverage.resize(3);
  out.std_error.resize(3);
  for (int k = 0; k < 3; ++k) {
    double p = static_cast<double>(hits(k)) / out.n_used;
    out.coverage(k) = p;
    out.std_error(k) = std::sqrt(p * (1.0 - p) / out.n_used);
  }
  return out;
}

ScenarioSpec make_scenario(ScenarioKind kind, int n_regions) {
  ScenarioSpec spec;
  spec.kind = kind;
  spec.n_regions = n_regions;
  switch (kind) {
    case ScenarioKind::a: {
      ScenarioComponent c;
      c.mean.resize(3);
      c.mean << std::log(300.0), 0.0, -2.0;
      c.cov = Vector{{0.5, 0.3, 0.3}}.asDiagonal();
      spec.components.push_back(c);
      break;
    }
    case ScenarioKind::b: {
      ScenarioComponent c;
      c.mean.resize(3);
      c.mean << std::log(300.0), 0.0, -2.0;
      c.cov.setZero(3, 3);
      c.cov(0, 0) = 0.5;
      c.cov(1, 1) = 0.3;
      c.cov(2, 2) = 0.3;
      c.cov(1, 2) = c.cov(2, 1) = -0.28;
      spec.components.push_back(c);
      break;
    }
    case ScenarioKind::c: {
      Matrix cov(3, 3);
      cov << 1.0, 0.0, 0.0, 0.0, 0.5, -0.25, 0.0, -0.25, 0.5;
      ScenarioComponent c1, c2;
      c1.weight = c2.weight = 0.5;
      c1.mean.resize(3);
      c1.mean << std::log(150.0), 0.5, -2.5;
      c2.mean.resize(3);
      c2.mean << std::log(600.0), -0.5, -1.5;
      c1.cov = c2.cov = cov;
      spec.components.push_back(c1);
      spec.components.push_back(c2);
      break;
    }
  }
  for (const auto& comp : spec.components) {
    Eigen::LLT<Matrix> llt(comp.cov);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("make_scenario: component covariance not positive definite");
  }
  return spec;
}

std::vector<SimRegion> simulate_regions(const ScenarioSpec& spec, const SimDesign& design_template,
                                        const ModelConfig& config) {
  std::vector<SimRegion> regions;
  regions.reserve(spec.n_regions);
  for (int j = 0; j < spec.n_regions; ++j) {
    std::mt19937_64 rng = substream_rng(design_template.seed, 1000003ULL + j);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    // pick a mixture component, then theta = mean + chol(cov) z
    double u = unif(rng);
    size_t pick = 0;
    double acc = 0.0;
    for (size_t i = 0; i < spec.components.size(); ++i) {
      acc += spec.components[i].weight;
      if (u <= acc) {
        pick = i;
        break;
      }
      pick = i;
    }
    const ScenarioComponent& comp = spec.components[pick];
    Eigen::LLT<Matrix> llt(comp.cov);
    Vector z(3);
    for (int i = 0; i < 3; ++i) z(i) = gauss(rng);
    Vector triple = comp.mean + llt.matrixL() * z;

    SimDesign d = design_template;
    d.mu = triple(0);
    d.beta0 = triple(1);
    d.beta1 = triple(2);
    d.seed = splitmix64(design_template.seed ^ splitmix64(2000003ULL + j));
    SimRegion region;
    region.theta_true = triple;
    region.data = simulate_epidemic(d, config).data;
    regions.push_back(std::move(region));
  }
  return regions;
}

ShrinkageStudyResult shrinkage_coverage_study(const ScenarioSpec& spec,
                                              const SimDesign& design_template,
                                              const ModelConfig& config, double alpha) {
  if (spec.n_regions < 30)
    throw std::invalid_argument("shrinkage_coverage_study: requires N >= 30");
  auto regions = simulate_regions(spec, design_template, config);

  ShrinkageStudyResult out;
  std::vector<RegionFit> fits;
  std::vector<Vector> truths;  // block order (beta0, beta1, mu)
  for (const auto& region : regions) {
    try {
      FitResult fit = fit_mle(region.data, config);
      if (!fit.converged) {
        ++out.n_failed;
        continue;
      }
      Matrix ups = sandwich_covariance(fit);
      RegionFit rf;
      rf.t_len = fit.t_len();
      rf.theta_hat.resize(3);
      rf.theta_hat << fit.theta_hat.beta(0), fit.theta_hat.beta(1), fit.theta_hat.mu;
      rf.upsilon = ups.topLeftCorner(3, 3);
      // keep the block numerically positive definite for the EB pipeline
      Eigen::SelfAdjointEigenSolver<Matrix> es(rf.upsilon);
      double floor = std::max(1e-10, 1e-10 * es.eigenvalues().maxCoeff());
      if (es.eigenvalues().minCoeff() < floor) {
        Vector ev = es.eigenvalues().cwiseMax(floor);
        rf.upsilon = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
      }
      fits.push_back(std::move(rf));
      Vector truth(3);
      truth << region.theta_true(1), region.theta_true(2), region.theta_true(0);
      truths.push_back(truth);
    } catch (const std::exception&) {
      ++out.n_failed;
    }
  }
  if (fits.size() < 2)
    throw std::runtime_error("shrinkage_coverage_study: fewer than 2 usable regions");

  EbConfidenceSets eb = eb_confidence_sets(fits, alpha, WeightScheme::efficient);
  int covered = 0;
  for (size_t j = 0; j < fits.size(); ++j) {
    if (!eb.sets[j].ok) {
      ++out.n_failed;
      continue;
    }
    bool in = eb.sets[j].set.contains(truths[j]);
    out.contains.push_back(in ? 1 : 0);
    if (in) ++covered;
    ++out.n_used;
  }
  out.avg_coverage = out.n_used > 0 ? static_cast<double>(covered) / out.n_used : 0.0;
  return out;
}

}  // namespace epifit
