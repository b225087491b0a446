#include "epifit/special.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace epifit;

TEST_CASE("log_gamma matches closed forms") {
  CHECK(log_gamma(1.0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(log_gamma(0.5) == doctest::Approx(std::log(std::sqrt(M_PI))).epsilon(1e-12));
  CHECK(log_gamma(10.0) == doctest::Approx(std::log(362880.0)).epsilon(1e-12));  // 9!
  CHECK_THROWS_AS(log_gamma(0.0), std::domain_error);
  CHECK_THROWS_AS(log_gamma(-1.5), std::domain_error);
}

TEST_CASE("log_gamma tracks the factorial recurrence over the domain") {
  // Gamma(x+1) = x Gamma(x), checked from 1e-3 up to 1e6
  for (double x : {1e-3, 0.02, 0.3, 1.5, 7.0, 123.4, 5e3, 9.9e5}) {
    double lhs = log_gamma(x + 1.0);
    double rhs = log_gamma(x) + std::log(x);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("chi_square_cdf reference values") {
  CHECK(chi_square_cdf(0.0, 1) == 0.0);
  CHECK(chi_square_cdf(0.0, 7) == 0.0);
  // normal-CDF oracle: P[chi^2_1 <= z^2] = P(|Z| <= z) = erf(z / sqrt(2))
  for (double z : {0.5, 1.0, 1.959964, 3.2})
    CHECK(chi_square_cdf(z * z, 1) ==
          doctest::Approx(std::erf(z / std::sqrt(2.0))).epsilon(1e-12));
  CHECK(chi_square_cdf(3.841459, 1) == doctest::Approx(0.95).epsilon(1e-7));
  CHECK(chi_square_cdf(7.814728, 3) == doctest::Approx(0.95).epsilon(1e-6));
  // dof 2 closed form: 1 - exp(-x/2)
  for (double x : {0.1, 1.0, 5.0, 20.0})
    CHECK(chi_square_cdf(x, 2) == doctest::Approx(1.0 - std::exp(-0.5 * x)).epsilon(1e-12));
  CHECK_THROWS_AS(chi_square_cdf(-0.1, 2), std::domain_error);
}

TEST_CASE("chi_square_quantile closed forms and round trip") {
  CHECK(chi_square_quantile(0.5, 2) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-10));
  CHECK(chi_square_quantile(0.95, 3) == doctest::Approx(7.814728).epsilon(1e-5));
  for (int d = 1; d <= 10; ++d) {
    for (int i = 1; i <= 99; i += 7) {
      double p = i / 100.0;
      double q = chi_square_quantile(p, d);
      CHECK(std::fabs(chi_square_cdf(q, d) - p) <= 1e-9);
    }
  }
  CHECK_THROWS_AS(chi_square_quantile(0.0, 2), std::domain_error);
  CHECK_THROWS_AS(chi_square_quantile(1.0, 2), std::domain_error);
}

TEST_CASE("noncentral chi-square survival: trivial reductions") {
  for (int d : {1, 2, 5}) {
    for (double x : {0.5, 3.0, 12.0}) {
      CHECK(noncentral_chi_square_sf(x, d, 0.0) ==
            doctest::Approx(1.0 - chi_square_cdf(x, d)).epsilon(1e-12));
    }
    CHECK(noncentral_chi_square_sf(0.0, d, 3.7) == 1.0);
  }
  CHECK_THROWS_AS(noncentral_chi_square_sf(-1.0, 2, 1.0), std::domain_error);
  CHECK_THROWS_AS(noncentral_chi_square_sf(1.0, 2, -1.0), std::domain_error);
}

TEST_CASE("noncentral chi-square survival vs Monte Carlo oracle") {
  // chi^2_2 + (Z - 2)^2 is noncentral chi-square, dof 3, ncp 4
  double mc = testutil::mc_noncoverage(4.0, std::sqrt(7.814728), 3, 10'000'000);
  double lib = noncentral_chi_square_sf(7.814728, 3, 4.0);
  CHECK(std::fabs(lib - mc) <= 3e-4);
}

TEST_CASE("noncentral chi-square survival: monotone in x and ncp") {
  for (int d : {1, 3}) {
    for (int i = 0; i < 20; ++i) {
      double prev_x = 2.0;
      for (int j = 0; j < 20; ++j) {
        double x = 0.5 + j * 0.8;
        double u = 0.3 + i * 0.7;
        if (j > 0)
          CHECK(noncentral_chi_square_sf(x, d, u) <=
                noncentral_chi_square_sf(prev_x, d, u) + 1e-12);
        if (i > 0)
          CHECK(noncentral_chi_square_sf(x, d, u) >=
                noncentral_chi_square_sf(x, d, u - 0.7) - 1e-12);
        prev_x = x;
      }
    }
  }
}

TEST_CASE("noncentral chi-square survival: large ncp stays controlled") {
  NoncentralSf r = noncentral_chi_square_sf_ex(900.0, 3, 1000.0);
  CHECK(!r.truncated);
  CHECK(r.tail_bound <= 1e-12);
  CHECK(r.value > 0.9);  // mean is 1003, so mass above 900 dominates
  CHECK(r.value <= 1.0);
}

TEST_CASE("normal_quantile basic values") {
  CHECK(normal_quantile(0.5) == 0.0);
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959964).epsilon(1e-5));
  CHECK(normal_quantile(0.025) == doctest::Approx(-1.959964).epsilon(1e-5));
}
