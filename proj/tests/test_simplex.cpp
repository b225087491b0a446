#include "epifit/simplex.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <limits>
#include <random>

using namespace epifit;

namespace {

// exhaustive vertex enumeration over all basis subsets (oracle)
double brute_force_lp(const SmallLp& lp, LpSense sense) {
  const int n = static_cast<int>(lp.objective.size());
  const int m = static_cast<int>(lp.eq_rhs.size());
  double best = std::numeric_limits<double>::quiet_NaN();
  std::vector<int> idx(m);
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == m) {
      Matrix b(m, m);
      for (int i = 0; i < m; ++i) b.col(i) = lp.eq_matrix.col(idx[i]);
      Eigen::FullPivLU<Matrix> lu(b);
      if (!lu.isInvertible()) return;
      Vector xb = lu.solve(lp.eq_rhs);
      if ((xb.array() < -1e-9).any()) return;
      double val = 0.0;
      for (int i = 0; i < m; ++i) val += lp.objective(idx[i]) * xb(i);
      if (std::isnan(best) || (sense == LpSense::maximize ? val > best : val < best)) best = val;
      return;
    }
    for (int j = start; j < n; ++j) {
      idx[depth] = j;
      rec(j + 1, depth + 1);
    }
  };
  rec(0, 0);
  return best;
}

}  // namespace

TEST_CASE("simplex: unit mass at the best objective entry") {
  SmallLp lp;
  lp.objective.resize(5);
  lp.objective << 0.3, 0.9, 0.1, 0.7, 0.2;
  lp.eq_matrix = Matrix::Ones(1, 5);
  lp.eq_rhs = Vector::Ones(1);
  LpSolution sol = solve_small_lp(lp, LpSense::maximize);
  CHECK(sol.optimum == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(sol.x(1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sol.support_size == 1);
}

TEST_CASE("simplex: forced point") {
  SmallLp lp;
  lp.objective.resize(2);
  lp.objective << 1.0, 1.0;
  lp.eq_matrix.resize(2, 2);
  lp.eq_matrix << 1.0, 1.0, 1.0, -1.0;
  lp.eq_rhs.resize(2);
  lp.eq_rhs << 1.0, 0.0;
  LpSolution sol = solve_small_lp(lp, LpSense::maximize);
  CHECK(sol.optimum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sol.x(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(sol.x(1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("simplex: random instances match vertex enumeration") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  int solved = 0;
  for (int rep = 0; rep < 200; ++rep) {
    int n = 4 + static_cast<int>(rng() % 9);  // up to 12
    SmallLp lp;
    lp.objective.resize(n);
    lp.eq_matrix.resize(3, n);
    for (int j = 0; j < n; ++j) {
      lp.objective(j) = unif(rng);
      lp.eq_matrix(0, j) = 1.0;
      lp.eq_matrix(1, j) = unif(rng);
      lp.eq_matrix(2, j) = unif(rng);
    }
    lp.eq_rhs.resize(3);
    lp.eq_rhs << 1.0, 0.3 * unif(rng), 0.3 * unif(rng);

    double oracle = brute_force_lp(lp, LpSense::maximize);
    try {
      LpSolution sol = solve_small_lp(lp, LpSense::maximize);
      REQUIRE(!std::isnan(oracle));
      CHECK(sol.optimum == doctest::Approx(oracle).epsilon(1e-8));
      // KKT residuals: primal feasibility
      CHECK((lp.eq_matrix * sol.x - lp.eq_rhs).cwiseAbs().maxCoeff() <= 1e-9);
      CHECK((sol.x.array() >= -1e-12).all());
      CHECK(sol.support_size <= 3);
      ++solved;
    } catch (const LpInfeasibleError&) {
      CHECK(std::isnan(oracle));
    }
  }
  CHECK(solved > 100);  // most random instances should be feasible
}

TEST_CASE("simplex: minimize matches negated maximize") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  SmallLp lp;
  int n = 8;
  lp.objective.resize(n);
  lp.eq_matrix.resize(2, n);
  for (int j = 0; j < n; ++j) {
    lp.objective(j) = unif(rng);
    lp.eq_matrix(0, j) = 1.0;
    lp.eq_matrix(1, j) = unif(rng);
  }
  lp.eq_rhs.resize(2);
  lp.eq_rhs << 1.0, 0.4;
  SmallLp neg = lp;
  neg.objective = -lp.objective;
  CHECK(solve_small_lp(lp, LpSense::minimize).optimum ==
        doctest::Approx(-solve_small_lp(neg, LpSense::maximize).optimum).epsilon(1e-10));
}

TEST_CASE("simplex: infeasible and unbounded reports") {
  SmallLp lp;
  lp.objective = Vector::Ones(2);
  lp.eq_matrix.resize(2, 2);
  lp.eq_matrix << 1.0, 1.0, 1.0, 1.0;
  lp.eq_rhs.resize(2);
  lp.eq_rhs << 1.0, 2.0;
  // dependent rows with inconsistent rhs are rejected as degenerate
  CHECK_THROWS_AS(solve_small_lp(lp, LpSense::maximize), std::invalid_argument);

  SmallLp inf;
  inf.objective = Vector::Ones(2);
  inf.eq_matrix.resize(2, 2);
  inf.eq_matrix << 1.0, 1.0, 1.0, -1.0;
  inf.eq_rhs.resize(2);
  inf.eq_rhs << -1.0, 0.0;  // x1 + x2 = -1 impossible with x >= 0
  CHECK_THROWS_AS(solve_small_lp(inf, LpSense::maximize), LpInfeasibleError);

  SmallLp unb;
  unb.objective.resize(2);
  unb.objective << 1.0, 0.0;
  unb.eq_matrix.resize(1, 2);
  unb.eq_matrix << 0.0, 1.0;  // x2 = 1, x1 free upward
  unb.eq_rhs = Vector::Ones(1);
  CHECK_THROWS_AS(solve_small_lp(unb, LpSense::maximize), LpUnboundedError);
}
