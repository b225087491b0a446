#pragma once

// Data generation and Monte Carlo study harnesses: NB epidemic simulation,
// single-model interval coverage, multi-region pools and shrinkage coverage.
// All randomness flows from one 64-bit seed through counted substreams.

#include "epifit/fit.hpp"
#include "epifit/model.hpp"
#include "epifit/types.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace epifit {

uint64_t splitmix64(uint64_t x);
std::mt19937_64 substream_rng(uint64_t seed, uint64_t stream);

// NB draw with the given mean and "number of successes" r via the
// gamma-Poisson mixture (exact for non-integer r).
double nb_draw(std::mt19937_64& rng, double mean, double r);

// Default simulation configuration: K = 6.5, alpha = 0.01, T0 = 40 and
// discretized-gamma lag distributions.
ModelConfig default_sim_config(ObsFamily family = ObsFamily::negative_binomial);

struct SimDesign {
  double mu = std::log(100.0);
  double beta0 = 0.0;
  double beta1 = -2.2;
  int t_len = 120;
  int step_time = 30;     // intervention 0 before, 1 from step_time on
  double r_infection = 100.0;
  double r_outcome = 10.0;
  bool deterministic = false;  // r -> infinity limit: emit the exact means
  uint64_t seed = 1;

  Theta theta_true() const;
  Matrix intervention_matrix() const;  // t_len x 1 step series
};

struct SimPath {
  Vector infections;  // realized I_1..I_T
  Vector outcomes;    // realized Y_1..Y_T
  EpidemicData data;  // outcomes + step intervention
};

SimPath simulate_epidemic(const SimDesign& design, const ModelConfig& config);

struct CoverageResult {
  // parameter order: beta0, beta1, mu
  Vector coverage;     // proportion of intervals containing the truth
  Vector std_error;    // binomial standard errors
  int n_used = 0;
  int n_failed = 0;
};

CoverageResult coverage_study(const SimDesign& design, const ModelConfig& config, int n_reps,
                              double level);

enum class ScenarioKind { a, b, c };

struct ScenarioComponent {
  double weight = 1.0;
  Vector mean;  // (mu, beta0, beta1)
  Matrix cov;
};

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::a;
  int n_regions = 100;
  std::vector<ScenarioComponent> components;
};

ScenarioSpec make_scenario(ScenarioKind kind, int n_regions);

struct SimRegion {
  Vector theta_true;  // (mu, beta0, beta1)
  EpidemicData data;
};

std::vector<SimRegion> simulate_regions(const ScenarioSpec& spec, const SimDesign& design_template,
                                        const ModelConfig& config);

struct ShrinkageStudyResult {
  double avg_coverage = 0.0;
  std::vector<char> contains;  // per used region
  int n_used = 0;
  int n_failed = 0;
};

ShrinkageStudyResult shrinkage_coverage_study(const ScenarioSpec& spec,
                                              const SimDesign& design_template,
                                              const ModelConfig& config, double alpha);

}  // namespace epifit
