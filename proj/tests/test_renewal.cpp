#include "epifit/renewal.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace epifit;

namespace {

EpidemicData step_data(int t_len, int onset) {
  EpidemicData data;
  data.outcomes = Vector::Ones(t_len);
  data.interventions = Matrix::Zero(t_len, 1);
  for (int t = onset; t <= t_len; ++t) data.interventions(t - 1, 0) = 1.0;
  return data;
}

ModelConfig paper_config() {
  return ModelConfig(6.5, 0.01, 40, discretized_gamma_pmf(6.5, 0.62, 30),
                     discretized_gamma_pmf(23.9, 0.40, 60), ObsFamily::negative_binomial);
}

Theta paper_theta() {
  Theta th;
  th.beta.resize(2);
  th.beta << 0.0, -2.2;
  th.mu = std::log(100.0);
  th.nu = 10.0;
  return th;
}

}  // namespace

TEST_CASE("DelayPmf invariants") {
  Vector w(3);
  w << 0.2, 0.5, 0.3;
  DelayPmf pmf(w);
  CHECK(pmf.weights().sum() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pmf.mean() == doctest::Approx(0.2 + 1.0 + 0.9).epsilon(1e-12));

  Vector bad(2);
  bad << 0.5, 0.4;  // sums to 0.9, outside the 1e-6 normalization window
  CHECK_THROWS_AS(DelayPmf{bad}, std::invalid_argument);
  Vector neg(2);
  neg << 1.2, -0.2;
  CHECK_THROWS_AS(DelayPmf{neg}, std::invalid_argument);
}

TEST_CASE("reproduction_number logistic values") {
  Vector beta(2);
  beta << 0.0, -2.2;
  Vector a0 = Vector::Zero(1), a1 = Vector::Ones(1);
  CHECK(reproduction_number(beta, a0, 6.5) == doctest::Approx(3.25).epsilon(1e-12));
  CHECK(reproduction_number(beta, a1, 6.5) ==
        doctest::Approx(6.5 / (1.0 + std::exp(2.2))).epsilon(1e-12));
  // no slope: constant in a
  Vector flat(2);
  flat << 0.4, 0.0;
  CHECK(reproduction_number(flat, a0, 6.5) == reproduction_number(flat, a1, 6.5));
  Vector wrong(3);
  CHECK_THROWS_AS(reproduction_number(wrong, a0, 6.5), std::invalid_argument);
}

TEST_CASE("latent_infections geometric closed form") {
  // g point mass at lag 1, constant R, T0 = 1: I_t = R^t e^mu
  Vector w = Vector::Zero(1);
  w(0) = 1.0;
  ModelConfig config(6.5, 1.0, 1, DelayPmf(Vector::Ones(1)), DelayPmf(Vector::Ones(1)),
                     ObsFamily::gaussian);
  EpidemicData data;
  data.outcomes = Vector::Ones(12);
  data.interventions = Matrix::Zero(12, 0);
  Theta th;
  th.beta = Vector::Zero(1);  // R = K/2
  th.mu = 1.3;
  th.nu = 1.0;
  Vector inf = latent_infections(th, data, config);
  double r = 6.5 / 2.0;
  for (int t = 1; t <= 12; ++t)
    CHECK(inf(t + config.t0 - 1) ==
          doctest::Approx(std::pow(r, t) * std::exp(1.3)).epsilon(1e-12));

  // m_t = I_{t-1} with pi at lag 1, alpha = 1
  Vector m = expected_outcomes(inf, config);
  for (int t = 2; t <= 12; ++t)
    CHECK(m(t - 1) == doctest::Approx(inf(t - 1 + config.t0 - 1)).epsilon(1e-12));
}

TEST_CASE("R -> 0 limit empties the recursion") {
  ModelConfig config = paper_config();
  EpidemicData data = step_data(20, 10);
  Theta th = paper_theta();
  th.beta(0) = -100.0;  // logistic underflows to 0
  th.beta(1) = 0.0;
  Vector inf = latent_infections(th, data, config);
  for (int t = 1; t <= 20; ++t) CHECK(inf(t + config.t0 - 1) <= 1e-40);
}

TEST_CASE("renewal matches the naive direct-summation oracle") {
  ModelConfig config = paper_config();
  EpidemicData data = step_data(120, 30);
  Theta th = paper_theta();
  Vector inf = latent_infections(th, data, config);
  Vector naive = testutil::naive_latent_infections(th, data, config);
  for (int i = 0; i < inf.size(); ++i)
    CHECK(inf(i) == doctest::Approx(naive(i)).epsilon(1e-10));
  Vector m = expected_outcomes(inf, config);
  Vector m_naive = testutil::naive_expected_outcomes(naive, config);
  for (int i = 0; i < m.size(); ++i) CHECK(m(i) == doctest::Approx(m_naive(i)).epsilon(1e-10));
}

TEST_CASE("expected_outcomes scales linearly in alpha") {
  ModelConfig config = paper_config();
  ModelConfig config2(config.k_max, 0.02, config.t0, config.g, config.pi, config.family);
  EpidemicData data = step_data(60, 30);
  Theta th = paper_theta();
  Vector inf = latent_infections(th, data, config);
  Vector m1 = expected_outcomes(inf, config);
  Vector m2 = expected_outcomes(inf, config2);
  for (int i = 0; i < m1.size(); ++i) CHECK(m2(i) == doctest::Approx(2.0 * m1(i)).epsilon(1e-12));
}

TEST_CASE("divergence error names the first offending time") {
  ModelConfig config = paper_config();
  EpidemicData data = step_data(400, 500);
  Theta th = paper_theta();
  th.beta(0) = 30.0;  // R ~ K, sustained growth
  th.mu = 600.0;      // astronomical seeding
  try {
    latent_infections(th, data, config);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.t_first >= 1);
  }
}

TEST_CASE("mean_jacobian matches finite differences") {
  ModelConfig config = paper_config();
  EpidemicData data = step_data(60, 30);
  Theta th = paper_theta();
  Matrix jac = mean_jacobian(th, data, config);
  const int pm = 3;
  for (int k = 0; k < pm; ++k) {
    Theta lo = th, hi = th;
    double base = k < 2 ? th.beta(k) : th.mu;
    double h = 1e-6 * (1.0 + std::fabs(base));
    if (k < 2) {
      lo.beta(k) -= h;
      hi.beta(k) += h;
    } else {
      lo.mu -= h;
      hi.mu += h;
    }
    Vector m_lo = expected_outcomes(latent_infections(lo, data, config), config);
    Vector m_hi = expected_outcomes(latent_infections(hi, data, config), config);
    for (int t = 0; t < 60; ++t) {
      double fd = (m_hi(t) - m_lo(t)) / (2.0 * h);
      CHECK(jac(t, k) == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("jacobian column for an all-zero intervention is zero") {
  ModelConfig config = paper_config();
  EpidemicData data = step_data(40, 100);  // onset beyond T: intervention never switches on
  Theta th = paper_theta();
  Matrix jac = mean_jacobian(th, data, config);
  CHECK(jac.col(1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("point-mass delays: d m_t / d mu = m_t under constant R") {
  ModelConfig config(2.0, 1.0, 1, DelayPmf(Vector::Ones(1)), DelayPmf(Vector::Ones(1)),
                     ObsFamily::gaussian);
  EpidemicData data;
  data.outcomes = Vector::Ones(10);
  data.interventions = Matrix::Zero(10, 0);
  Theta th;
  th.beta = Vector::Zero(1);
  th.mu = 0.7;
  th.nu = 1.0;
  MeanDerivatives md = mean_derivatives(th, data, config, false);
  for (int t = 0; t < 10; ++t)
    CHECK(md.jacobian(t, 1) == doctest::Approx(md.means(t)).epsilon(1e-12));
}

TEST_CASE("second-order mean derivatives match finite differences of the jacobian") {
  ModelConfig config = paper_config();
  EpidemicData data = step_data(50, 25);
  Theta th = paper_theta();
  MeanDerivatives md = mean_derivatives(th, data, config, true);
  const int pm = 3;
  for (int k = 0; k < pm; ++k) {
    Theta lo = th, hi = th;
    double base = k < 2 ? th.beta(k) : th.mu;
    double h = 1e-5 * (1.0 + std::fabs(base));
    if (k < 2) {
      lo.beta(k) -= h;
      hi.beta(k) += h;
    } else {
      lo.mu -= h;
      hi.mu += h;
    }
    Matrix j_lo = mean_jacobian(lo, data, config);
    Matrix j_hi = mean_jacobian(hi, data, config);
    for (int t = 5; t < 50; t += 11) {
      for (int l = 0; l < pm; ++l) {
        double fd = (j_hi(t, l) - j_lo(t, l)) / (2.0 * h);
        double scale = std::max(1e-8, std::fabs(fd));
        CHECK(std::fabs(md.hessians[t](k, l) - fd) / scale <= 2e-4);
      }
    }
  }
}

TEST_CASE("monotonicity: larger beta0 strictly raises every infection") {
  ModelConfig config = paper_config();
  EpidemicData data = step_data(60, 30);
  Theta lo = paper_theta(), hi = paper_theta();
  hi.beta(0) += 0.25;
  Vector i_lo = latent_infections(lo, data, config);
  Vector i_hi = latent_infections(hi, data, config);
  for (int t = 1; t <= 60; ++t) CHECK(i_hi(t + config.t0 - 1) > i_lo(t + config.t0 - 1));
}

TEST_CASE("recursion outputs are bit-identical across calls") {
  ModelConfig config = paper_config();
  EpidemicData data = step_data(80, 30);
  Theta th = paper_theta();
  Vector a = latent_infections(th, data, config);
  Vector b = latent_infections(th, data, config);
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);
}
