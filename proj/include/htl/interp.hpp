#pragma once

#include <vector>

#include "htl/common.hpp"

namespace htl {

// Shape-preserving piecewise-cubic interpolant with Fritsch-Carlson slope
// limiting. Monotone data yield a monotone interpolant and exactly-flat data
// spans stay exactly flat, which is what tabulated tails need.
class MonotoneCubic {
 public:
  MonotoneCubic() = default;
  MonotoneCubic(std::vector<double> x, std::vector<double> y);

  double operator()(double x) const;
  // secant interpolant on the same nodes; |cubic - secant| serves as a cheap
  // local error proxy because both converge to the same underlying function
  double linear(double x) const;
  double deviation(double x) const;

  bool empty() const { return x_.empty(); }
  double x_front() const { return x_.front(); }
  double x_back() const { return x_.back(); }

 private:
  std::vector<double> x_, y_, d_;
  size_t cell(double x) const;
};

// Piecewise-linear table that keeps identically-zero spans exactly zero
// (no spurious mass leaks into support gaps).
class LinearTable {
 public:
  LinearTable() = default;
  LinearTable(std::vector<double> x, std::vector<double> y);

  double operator()(double x) const;

  bool empty() const { return x_.empty(); }
  double x_front() const { return x_.front(); }
  double x_back() const { return x_.back(); }

 private:
  std::vector<double> x_, y_;
};

}  // namespace htl
