#pragma once

#include <functional>
#include <vector>

#include "htl/common.hpp"

namespace htl {

struct QuadConfig {
  double abs_tol = 1e-12;
  double rel_tol = 1e-9;
  int max_subdivisions = 1 << 16;
};

struct QuadResult {
  double value = 0.0;
  double err = 0.0;      // estimated absolute error
  bool reliable = true;  // false when the subdivision budget ran out first
  int subdivisions = 0;  // intervals split beyond the mandatory pre-splits
  int evaluations = 0;   // integrand calls
};

// Adaptive Gauss-Legendre integration of f over [lo, hi]. The interval is
// pre-split at every interior point of `presplit` (kinks, block boundaries,
// reflected boundaries); the adaptive loop then bisects whichever interval
// carries the largest error estimate (15-point value vs embedded 7-point)
// until the summed estimate meets max(abs_tol, rel_tol * |value|).
QuadResult integrate(const std::function<double(double)>& f, double lo, double hi,
                     const std::vector<double>& presplit = {}, const QuadConfig& cfg = {});

}  // namespace htl
