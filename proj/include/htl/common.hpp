#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace htl {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr double kLn2 = 0.6931471805599453094172321214581766;

// log(exp(la) + exp(lb)) without leaving the log domain.
inline double log_add(double la, double lb) {
  if (la == kNegInf) return lb;
  if (lb == kNegInf) return la;
  const double hi = std::max(la, lb), lo = std::min(la, lb);
  return hi + std::log1p(std::exp(lo - hi));
}

// log(exp(la) - exp(lb)), requires la >= lb.
inline double log_sub(double la, double lb) {
  if (lb == kNegInf) return la;
  if (la == lb) return kNegInf;
  if (la < lb) throw Error("log_sub: negative result");
  return la + std::log1p(-std::exp(lb - la));
}

// log(1 - exp(la)) for la <= 0.
inline double log1m_exp(double la) {
  if (la > 0.0) throw Error("log1m_exp: argument must be <= 0");
  if (la == 0.0) return kNegInf;
  // crossover at ln(1/2) keeps both branches well conditioned
  return la > -kLn2 ? std::log(-std::expm1(la)) : std::log1p(-std::exp(la));
}

inline double log_sum(const std::vector<double>& logs) {
  double hi = kNegInf;
  for (double v : logs) hi = std::max(hi, v);
  if (hi == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double v : logs) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

inline bool nearly_equal(double a, double b, double rel, double abs = 0.0) {
  return std::fabs(a - b) <= std::max(abs, rel * std::max(std::fabs(a), std::fabs(b)));
}

// Ulp-exact bisection: first x in (lo, hi] where a nonincreasing fn has
// dropped to <= level. Assumes fn(lo) > level >= fn(hi).
template <class F>
double bisect_crossing(F&& fn, double lo, double hi, double level = 0.0) {
  require(lo < hi, "bisect_crossing: empty bracket");
  while (true) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;  // bracket shrunk to adjacent doubles
    if (fn(mid) <= level)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

}  // namespace htl
