#include "epifit/likelihood.hpp"

#include "epifit/simulate.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace epifit;

namespace {

EpidemicData sim_data(uint64_t seed) {
  SimDesign design;
  design.seed = seed;
  return simulate_epidemic(design, default_sim_config()).data;
}

Theta truth() {
  Theta th;
  th.beta.resize(2);
  th.beta << 0.0, -2.2;
  th.mu = std::log(100.0);
  th.nu = 10.0;
  return th;
}

}  // namespace

TEST_CASE("Gaussian log-likelihood at zero residuals") {
  ModelConfig config = default_sim_config(ObsFamily::gaussian);
  EpidemicData data = sim_data(11);
  Theta th = truth();
  th.nu = 2.5;
  // set outcomes to the model means exactly
  data.outcomes = expected_outcomes(latent_infections(th, data, config), config);
  double ll = log_likelihood(th, data, config);
  double expected = -data.t_len() * (std::log(th.nu) + 0.5 * std::log(2.0 * M_PI));
  CHECK(ll == doctest::Approx(expected).epsilon(1e-12));

  // m_t-channel scores vanish, nu score is -T/nu
  Matrix sc = score(th, data, config);
  CHECK(sc.leftCols(3).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(sc.col(3).sum() == doctest::Approx(-data.t_len() / th.nu).epsilon(1e-12));
}

TEST_CASE("NB pointwise pmf identities") {
  // y = 0: log p = nu log nu - nu log(nu + m)
  for (double nu : {0.3, 1.0, 17.0}) {
    for (double m : {0.1, 2.0, 50.0}) {
      CHECK(family::nb_logpmf(0.0, m, nu) ==
            doctest::Approx(nu * std::log(nu) - nu * std::log(nu + m)).epsilon(1e-12));
    }
  }
  // nu -> infinity approaches the Poisson log-pmf
  double m = 7.3;
  for (double y : {0.0, 3.0, 12.0}) {
    double pois = y * std::log(m) - m - std::lgamma(y + 1.0);
    CHECK(std::fabs(family::nb_logpmf(y, m, 1e6) - pois) <= 1e-3);
  }
}

TEST_CASE("NB pmf sums to one over the support") {
  double total = 0.0;
  for (int y = 0; y < 4000; ++y) total += std::exp(family::nb_logpmf(y, 20.0, 3.0));
  CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("scores match central finite differences at random points near the truth") {
  for (ObsFamily fam : {ObsFamily::negative_binomial, ObsFamily::gaussian}) {
    ModelConfig config = default_sim_config(fam);
    EpidemicData data = sim_data(23);
    std::mt19937_64 rng(99);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
      Theta th = truth();
      th.beta(0) += 0.15 * gauss(rng);
      th.beta(1) += 0.15 * gauss(rng);
      th.mu += 0.1 * gauss(rng);
      th.nu = std::exp(std::log(th.nu) + 0.3 * gauss(rng));
      Vector analytic = score(th, data, config).colwise().sum();
      Vector fd = testutil::fd_gradient(
          [&](const Theta& q) { return log_likelihood(q, data, config); }, th);
      for (int k = 0; k < 4; ++k) {
        double scale = std::max(1.0, std::fabs(fd(k)));
        CHECK(std::fabs(analytic(k) - fd(k)) / scale <= 1e-5);
      }
    }
  }
}

TEST_CASE("hessian matches finite differences of the score") {
  for (ObsFamily fam : {ObsFamily::negative_binomial, ObsFamily::gaussian}) {
    ModelConfig config = default_sim_config(fam);
    EpidemicData data = sim_data(37);
    Theta th = truth();
    Matrix h = hessian(th, data, config);
    CHECK((h - h.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    const int p = 4;
    for (int k = 0; k < p; ++k) {
      Vector fd = testutil::fd_gradient(
          [&](const Theta& q) {
            Vector s = score(q, data, config).colwise().sum();
            return s(k);
          },
          th, 1e-6);
      for (int l = 0; l < p; ++l) {
        double scale = std::max(1.0, std::fabs(fd(l)));
        CHECK(std::fabs(h(k, l) - fd(l)) / scale <= 1e-4);
      }
    }
  }
}

TEST_CASE("Gaussian d2l/dm2 contributes -1/nu^2 per point") {
  family::PointDerivs d = family::gaussian_derivs(3.0, 2.0, 0.7);
  CHECK(d.dmm == doctest::Approx(-1.0 / (0.7 * 0.7)).epsilon(1e-14));
}

TEST_CASE("NB m-channel score has mean zero under the model") {
  std::mt19937_64 rng(12345);
  const double m = 6.0, nu = 4.0;
  const int n = 100000;
  double acc = 0.0, acc2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double y = nb_draw(rng, m, nu);
    double s = y / m - (nu + y) / (nu + m);
    acc += s;
    acc2 += s * s;
  }
  double mean = acc / n;
  double se = std::sqrt((acc2 / n - mean * mean) / n);
  CHECK(std::fabs(mean) <= 3.0 * se);
}

TEST_CASE("Gaussian likelihood decreases as the mean moves away from the data") {
  double y = 4.0, nu = 1.3;
  double at_y = family::gaussian_logpdf(y, y, nu);
  for (double delta : {0.1, 0.5, 2.0}) {
    CHECK(family::gaussian_logpdf(y, y + delta, nu) < at_y);
    CHECK(family::gaussian_logpdf(y, y - delta, nu) < at_y);
    CHECK(family::gaussian_logpdf(y, y + delta, nu) <
          family::gaussian_logpdf(y, y + delta / 2.0, nu));
  }
}

TEST_CASE("per-time scores sum to the total and exclusion drops one row") {
  ModelConfig config = default_sim_config();
  EpidemicData data = sim_data(5);
  Theta th = truth();
  LikelihoodRequest req;
  req.scores = true;
  LikelihoodEval full = evaluate_likelihood(th, data, config, req);
  req.exclude = 17;
  LikelihoodEval loo = evaluate_likelihood(th, data, config, req);
  CHECK(loo.per_time_scores.row(17).cwiseAbs().maxCoeff() == 0.0);
  CHECK(full.loglik - loo.loglik ==
        doctest::Approx(family::nb_logpmf(data.outcomes(17), full.means(17), th.nu))
            .epsilon(1e-12));
}

TEST_CASE("gauss-newton hessian equals exact hessian minus the curvature term") {
  ModelConfig config = default_sim_config(ObsFamily::gaussian);
  EpidemicData data = sim_data(71);
  Theta th = truth();
  Matrix exact = hessian(th, data, config, false);
  Matrix gn = hessian(th, data, config, true);
  MeanDerivatives md = mean_derivatives(th, data, config, true);
  Matrix diff = Matrix::Zero(3, 3);
  for (int t = 0; t < data.t_len(); ++t) {
    family::PointDerivs d = family::gaussian_derivs(data.outcomes(t), md.means(t), th.nu);
    diff += d.dm * md.hessians[t];
  }
  CHECK((exact.topLeftCorner(3, 3) - gn.topLeftCorner(3, 3) - diff).cwiseAbs().maxCoeff() <=
        1e-9 * diff.cwiseAbs().maxCoeff());
}
