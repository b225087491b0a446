#pragma once

// Dense revised simplex for tiny equality-form LPs:
//   optimize c'x  s.t.  A x = b,  x >= 0,  with m <= 4 rows.
// Bland's rule throughout, so cycling cannot occur. Sized for the
// discretized moment problem (n up to 10000).

#include "epifit/types.hpp"

#include <vector>

namespace epifit {

struct SmallLp {
  Vector objective;  // length n
  Matrix eq_matrix;  // m x n
  Vector eq_rhs;     // length m
};

enum class LpSense { maximize, minimize };

struct LpSolution {
  double optimum = 0.0;
  Vector x;                 // length n, nonnegative
  std::vector<int> basis;   // basic variable indices (size m)
  int support_size = 0;     // nonzeros in x
};

// Throws LpInfeasibleError / LpUnboundedError; std::invalid_argument on
// malformed or rank-deficient input.
LpSolution solve_small_lp(const SmallLp& lp, LpSense sense);

}  // namespace epifit
