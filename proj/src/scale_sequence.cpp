#include "htl/scale_sequence.hpp"

#include <cmath>
#include <sstream>

namespace htl {

double ScaleSequence::log_anchor(int n) const {
  require(n >= 0, "ScaleSequence: negative anchor index");
  if (n <= n_max) return log_anchors[static_cast<size_t>(n)];
  return std::pow(r, n) * std::log(a);
}

double ScaleSequence::anchor(int n) const { return std::exp(log_anchor(n)); }

double ScaleSequence::log_tail_sum(double K, int from) const {
  require(K > 0, "ScaleSequence: tail-sum exponent must be positive");
  if (from > n_max) return kNegInf;
  std::vector<double> terms;
  terms.reserve(static_cast<size_t>(n_max - from + 1));
  for (int i = from; i <= n_max; ++i) terms.push_back(-K * log_anchors[static_cast<size_t>(i)]);
  return log_sum(terms);
}

double ScaleSequence::log_truncation_bound(double K) const {
  const double la_next = log_anchor(n_max + 1);
  const double lead = -K * la_next;                 // first dropped term
  const double lratio = -K * (r - 1.0) * la_next;   // ratio bound of successive dropped terms
  // sum <= lead / (1 - ratio)
  return lead - log1m_exp(std::min(lratio, -1e-300));
}

double ScaleSequence::truncation_rel_error(double K) const {
  return std::exp(log_truncation_bound(K) - log_tail_sum(K, 0));
}

ScaleSequence build_scale_sequence(double a, double alpha, double t, int n_max) {
  require(std::isfinite(a) && a > 1.0, "scale sequence: base a must be > 1");
  require(alpha > 0.0 && alpha < 1.0, "scale sequence: alpha must lie in (0,1)");
  require(t >= 1.0 && std::isfinite(t), "scale sequence: t must be >= 1");
  require(n_max >= 2, "scale sequence: n_max must be >= 2");

  ScaleSequence s;
  s.a = a;
  s.alpha = alpha;
  s.r = 1.0 + 1.0 / alpha;
  s.t = t;
  s.n_max = n_max;

  // separation requirement a^r > 2^{t+2} a  <=>  (r-1) ln a > (t+2) ln 2
  if ((s.r - 1.0) * std::log(a) <= (t + 2.0) * kLn2) {
    std::ostringstream os;
    os << "scale sequence: base " << a << " violates a^r > 2^(t+2)*a for r=" << s.r
       << ", t=" << t;
    throw Error(os.str());
  }

  s.log_anchors.resize(static_cast<size_t>(n_max) + 1);
  const double la = std::log(a);
  double p = 1.0;
  for (int n = 0; n <= n_max; ++n) {
    s.log_anchors[static_cast<size_t>(n)] = p * la;
    p *= s.r;
  }
  return s;
}

}  // namespace htl
