#pragma once

#include <vector>

#include "htl/common.hpp"

namespace htl {

// Doubly exponential anchor sequence a_n = a^{r^n}, r = 1 + 1/alpha > 2.
// Anchors are kept in the log domain: a_6 already overflows double for a = 3.
struct ScaleSequence {
  double a = 0;
  double alpha = 0;
  double r = 0;      // growth exponent, 1 + 1/alpha
  double t = 1;      // block-width exponent the sequence was validated against
  int n_max = 0;     // index of the last retained anchor
  std::vector<double> log_anchors;  // log a_n, n = 0..n_max

  double log_anchor(int n) const;       // valid for any n >= 0 (formula-based past n_max)
  double anchor(int n) const;           // exp(log_anchor); +inf once past double range

  // log of sum_{i=from}^{n_max} a_i^{-K}, K > 0, evaluated stably.
  double log_tail_sum(double K, int from) const;

  // log of a rigorous upper bound on the dropped mass sum_{i>n_max} a_i^{-K}:
  // the first dropped term times a geometric majorant with ratio a_{n_max+1}^{-K(r-1)}.
  double log_truncation_bound(double K) const;

  // dropped/retained ratio for exponent K (the certified relative truncation error)
  double truncation_rel_error(double K) const;
};

// Validates a > 1, alpha in (0,1), n_max >= 2 and the block-separation
// requirement a^r > 2^{t+2} a for the t the family will use.
ScaleSequence build_scale_sequence(double a, double alpha, double t, int n_max);

}  // namespace htl
