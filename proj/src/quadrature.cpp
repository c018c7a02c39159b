#include "htl/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>

namespace htl {

namespace {

// Gauss-Legendre nodes/weights on [-1,1], Newton-refined to machine precision.
struct GaussRule {
  std::vector<double> x, w;
  explicit GaussRule(int n) : x(static_cast<size_t>(n)), w(static_cast<size_t>(n)) {
    for (int i = 0; i < n; ++i) {
      double xi = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 64; ++it) {
        double p0 = 1.0, p1 = xi;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * xi * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (xi * p1 - p0) / (xi * xi - 1.0);
        const double dx = p1 / dp;
        xi -= dx;
        if (std::abs(dx) <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(xi)) break;
      }
      x[static_cast<size_t>(i)] = xi;
      w[static_cast<size_t>(i)] = 2.0 / ((1.0 - xi * xi) * dp * dp);
    }
  }
};

const GaussRule& rule7() {
  static const GaussRule r(7);
  return r;
}
const GaussRule& rule15() {
  static const GaussRule r(15);
  return r;
}

struct Interval {
  double lo, hi, value, err;
};

struct ByErr {
  bool operator()(const Interval& a, const Interval& b) const { return a.err < b.err; }
};

Interval evaluate(const std::function<double(double)>& f, double lo, double hi, int& evals) {
  const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  double v15 = 0.0;
  const auto& r15 = rule15();
  for (size_t i = 0; i < r15.x.size(); ++i) v15 += r15.w[i] * f(mid + half * r15.x[i]);
  v15 *= half;
  double v7 = 0.0;
  const auto& r7 = rule7();
  for (size_t i = 0; i < r7.x.size(); ++i) v7 += r7.w[i] * f(mid + half * r7.x[i]);
  v7 *= half;
  evals += 22;
  return {lo, hi, v15, std::abs(v15 - v7)};
}

}  // namespace

QuadResult integrate(const std::function<double(double)>& f, double lo, double hi,
                     const std::vector<double>& presplit, const QuadConfig& cfg) {
  require(!std::isnan(lo) && !std::isnan(hi) && lo <= hi, "integrate: bad interval");
  require(std::isfinite(lo) && std::isfinite(hi), "integrate: endpoints must be finite");
  QuadResult out;
  if (lo == hi) return out;

  std::vector<double> cuts{lo, hi};
  for (double p : presplit) {
    if (p > lo && p < hi) cuts.push_back(p);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::priority_queue<Interval, std::vector<Interval>, ByErr> queue;
  double total_value = 0.0, total_err = 0.0;
  double frozen_value = 0.0, frozen_err = 0.0;  // intervals too thin to split further
  for (size_t i = 0; i + 1 < cuts.size(); ++i) {
    const Interval iv = evaluate(f, cuts[i], cuts[i + 1], out.evaluations);
    total_value += iv.value;
    total_err += iv.err;
    queue.push(iv);
  }

  auto tolerance = [&] { return std::max(cfg.abs_tol, cfg.rel_tol * std::abs(total_value)); };

  while (total_err > tolerance() && !queue.empty()) {
    if (out.subdivisions >= cfg.max_subdivisions) {
      out.reliable = false;
      break;
    }
    const Interval worst = queue.top();
    queue.pop();
    const double mid = 0.5 * (worst.lo + worst.hi);
    if (mid <= worst.lo || mid >= worst.hi) {  // cannot split further
      frozen_value += worst.value;
      frozen_err += worst.err;
      total_value -= worst.value;
      total_err -= worst.err;
      continue;
    }
    total_value -= worst.value;
    total_err -= worst.err;
    const Interval left = evaluate(f, worst.lo, mid, out.evaluations);
    const Interval right = evaluate(f, mid, worst.hi, out.evaluations);
    total_value += left.value + right.value;
    total_err += left.err + right.err;
    queue.push(left);
    queue.push(right);
    ++out.subdivisions;
  }

  out.value = total_value + frozen_value;
  out.err = total_err + frozen_err;
  return out;
}

}  // namespace htl
