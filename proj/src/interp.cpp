#include "htl/interp.hpp"

#include <algorithm>
#include <cmath>

namespace htl {

namespace {

size_t find_cell(const std::vector<double>& xs, double x) {
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  size_t i = static_cast<size_t>(it - xs.begin());
  if (i == 0) return 0;
  if (i >= xs.size()) return xs.size() - 2;
  return i - 1;
}

}  // namespace

MonotoneCubic::MonotoneCubic(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
  require(x_.size() == y_.size() && x_.size() >= 2, "interp: need >= 2 nodes");
  for (size_t i = 0; i + 1 < x_.size(); ++i) {
    require(x_[i] < x_[i + 1], "interp: abscissae must be strictly increasing");
  }
  for (double v : y_) require(std::isfinite(v), "interp: non-finite ordinate");

  const size_t n = x_.size();
  std::vector<double> h(n - 1), del(n - 1);
  for (size_t i = 0; i + 1 < n; ++i) {
    h[i] = x_[i + 1] - x_[i];
    del[i] = (y_[i + 1] - y_[i]) / h[i];
  }
  d_.assign(n, 0.0);
  if (n == 2) {
    d_[0] = d_[1] = del[0];
  } else {
    for (size_t i = 1; i + 1 < n; ++i) {
      if (del[i - 1] == 0.0 || del[i] == 0.0 || (del[i - 1] > 0) != (del[i] > 0)) {
        d_[i] = 0.0;
      } else {
        const double w1 = 2.0 * h[i] + h[i - 1];
        const double w2 = h[i] + 2.0 * h[i - 1];
        d_[i] = (w1 + w2) / (w1 / del[i - 1] + w2 / del[i]);
      }
    }
    auto end_slope = [](double h0, double h1, double d0, double d1) {
      double d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
      if (d * d0 <= 0.0) return 0.0;
      if (d0 * d1 < 0.0 && std::abs(d) > 3.0 * std::abs(d0)) return 3.0 * d0;
      return d;
    };
    d_[0] = end_slope(h[0], h[1], del[0], del[1]);
    d_[n - 1] = end_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
  }
}

double MonotoneCubic::operator()(double x) const {
  const size_t i = cell(x);
  const double h = x_[i + 1] - x_[i];
  const double t = (x - x_[i]) / h;
  const double t2 = t * t, t3 = t2 * t;
  const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
  const double h10 = t3 - 2.0 * t2 + t;
  const double h01 = -2.0 * t3 + 3.0 * t2;
  const double h11 = t3 - t2;
  return h00 * y_[i] + h10 * h * d_[i] + h01 * y_[i + 1] + h11 * h * d_[i + 1];
}

double MonotoneCubic::linear(double x) const {
  const size_t i = cell(x);
  const double t = (x - x_[i]) / (x_[i + 1] - x_[i]);
  return y_[i] + t * (y_[i + 1] - y_[i]);
}

double MonotoneCubic::deviation(double x) const { return std::abs((*this)(x) - linear(x)); }

size_t MonotoneCubic::cell(double x) const { return find_cell(x_, x); }

LinearTable::LinearTable(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
  require(x_.size() == y_.size() && x_.size() >= 2, "interp: need >= 2 nodes");
  for (size_t i = 0; i + 1 < x_.size(); ++i) {
    require(x_[i] < x_[i + 1], "interp: abscissae must be strictly increasing");
  }
}

double LinearTable::operator()(double x) const {
  const size_t i = find_cell(x_, x);
  if (y_[i] == 0.0 && y_[i + 1] == 0.0) return 0.0;
  const double t = (x - x_[i]) / (x_[i + 1] - x_[i]);
  return y_[i] + t * (y_[i + 1] - y_[i]);
}

}  // namespace htl
