#include "epifit/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace epifit {

namespace {

constexpr double kReducedCostTol = 1e-9;
constexpr double kPivotTol = 1e-11;

struct Tableau {
  // columns 0..n-1 are structural, n..n+m-1 are artificial
  Matrix a;   // m x (n + m)
  Vector b;   // m
  int n = 0;
  int m = 0;

  Matrix basis_matrix(const std::vector<int>& basis) const {
    Matrix bm(m, m);
    for (int i = 0; i < m; ++i) bm.col(i) = a.col(basis[i]);
    return bm;
  }
};

// One simplex phase: maximize c'x over the given column set, Bland's rule.
// `allowed` masks columns permitted to enter the basis. Returns false on
// unboundedness.
bool run_phase(const Tableau& tab, const Vector& c, const std::vector<bool>& allowed,
               std::vector<int>& basis, Vector& xb) {
  const int m = tab.m;
  const int ncols = static_cast<int>(c.size());
  const long max_iters = 10000 + 20L * (ncols + m);

  for (long iter = 0; iter < max_iters; ++iter) {
    Eigen::PartialPivLU<Matrix> lu(tab.basis_matrix(basis));
    xb = lu.solve(tab.b);

    Vector cb(m);
    for (int i = 0; i < m; ++i) cb(i) = c(basis[i]);
    Vector y = lu.transpose().solve(cb);

    // Bland: smallest-index column with positive reduced cost
    int entering = -1;
    for (int j = 0; j < ncols; ++j) {
      if (!allowed[j]) continue;
      bool basic = false;
      for (int i = 0; i < m; ++i)
        if (basis[i] == j) {
          basic = true;
          break;
        }
      if (basic) continue;
      double rc = c(j) - y.dot(tab.a.col(j));
      if (rc > kReducedCostTol) {
        entering = j;
        break;
      }
    }
    if (entering < 0) return true;  // optimal

    Vector d = lu.solve(tab.a.col(entering));
    int leave = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
      if (d(i) > kPivotTol) {
        double ratio = std::max(0.0, xb(i)) / d(i);
        if (ratio < best_ratio - 1e-15 ||
            (ratio <= best_ratio + 1e-15 && (leave < 0 || basis[i] < basis[leave]))) {
          best_ratio = ratio;
          leave = i;
        }
      }
    }
    if (leave < 0) return false;  // unbounded
    basis[leave] = entering;
  }
  throw std::runtime_error("solve_small_lp: iteration limit exceeded");
}

}  // namespace

LpSolution solve_small_lp(const SmallLp& lp, LpSense sense) {
  const int n = static_cast<int>(lp.objective.size());
  const int m = static_cast<int>(lp.eq_rhs.size());
  if (lp.eq_matrix.rows() != m || lp.eq_matrix.cols() != n)
    throw std::invalid_argument("solve_small_lp: dimension mismatch");
  if (m < 1 || m > 4) throw std::invalid_argument("solve_small_lp: requires 1 <= m <= 4");
  if (n < 1 || n > 10000) throw std::invalid_argument("solve_small_lp: requires 1 <= n <= 10000");

  Eigen::ColPivHouseholderQR<Matrix> qr(lp.eq_matrix.transpose());
  if (qr.rank() < m)
    throw std::invalid_argument("solve_small_lp: degenerate (linearly dependent) equality rows");

  Tableau tab;
  tab.n = n;
  tab.m = m;
  tab.a.setZero(m, n + m);
  tab.b.resize(m);

  // row equilibration, then flip signs so b >= 0
  for (int i = 0; i < m; ++i) {
    double scale = std::max(lp.eq_matrix.row(i).cwiseAbs().maxCoeff(), std::fabs(lp.eq_rhs(i)));
    if (scale <= 0.0) scale = 1.0;
    double sign = lp.eq_rhs(i) < 0.0 ? -1.0 : 1.0;
    tab.a.row(i).head(n) = (sign / scale) * lp.eq_matrix.row(i);
    tab.b(i) = sign / scale * lp.eq_rhs(i);
    tab.a(i, n + i) = 1.0;
  }

  std::vector<int> basis(m);
  for (int i = 0; i < m; ++i) basis[i] = n + i;
  Vector xb;

  // phase 1: drive artificials to zero
  Vector c1 = Vector::Zero(n + m);
  c1.tail(m).setConstant(-1.0);
  std::vector<bool> allow_all(n + m, true);
  if (!run_phase(tab, c1, allow_all, basis, xb))
    throw std::runtime_error("solve_small_lp: phase 1 unbounded (internal error)");

  {
    Eigen::PartialPivLU<Matrix> lu(tab.basis_matrix(basis));
    xb = lu.solve(tab.b);
    double infeas = 0.0;
    for (int i = 0; i < m; ++i)
      if (basis[i] >= n) infeas += std::max(0.0, xb(i));
    if (infeas > 1e-9) throw LpInfeasibleError(infeas);

    // pivot lingering zero-level artificials out on any structural column
    for (int i = 0; i < m; ++i) {
      if (basis[i] < n) continue;
      bool replaced = false;
      for (int j = 0; j < n && !replaced; ++j) {
        bool basic = false;
        for (int k = 0; k < m; ++k)
          if (basis[k] == j) basic = true;
        if (basic) continue;
        Vector d = lu.solve(tab.a.col(j));
        if (std::fabs(d(i)) > 1e-8) {
          basis[i] = j;
          lu.compute(tab.basis_matrix(basis));
          replaced = true;
        }
      }
      if (!replaced)
        throw std::invalid_argument("solve_small_lp: degenerate equality rows after presolve");
    }
  }

  // phase 2 on the real objective; artificials may not re-enter
  const double sign = (sense == LpSense::maximize) ? 1.0 : -1.0;
  double cscale = std::max(1.0, lp.objective.cwiseAbs().maxCoeff());
  Vector c2 = Vector::Zero(n + m);
  c2.head(n) = (sign / cscale) * lp.objective;
  std::vector<bool> allowed(n + m, true);
  for (int j = n; j < n + m; ++j) allowed[j] = false;
  if (!run_phase(tab, c2, allowed, basis, xb)) throw LpUnboundedError();

  LpSolution sol;
  sol.x = Vector::Zero(n);
  Eigen::PartialPivLU<Matrix> lu(tab.basis_matrix(basis));
  xb = lu.solve(tab.b);
  sol.basis = basis;
  for (int i = 0; i < m; ++i)
    if (basis[i] < n) sol.x(basis[i]) = std::max(0.0, xb(i));
  sol.optimum = lp.objective.dot(sol.x);
  for (int j = 0; j < n; ++j)
    if (sol.x(j) > 0.0) ++sol.support_size;
  return sol;
}

}  // namespace epifit
