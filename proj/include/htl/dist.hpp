#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "htl/common.hpp"

namespace htl {

enum class SegKind { density_block, plateau, atom, smooth_tail };

inline const char* to_string(SegKind k) {
  switch (k) {
    case SegKind::density_block: return "density_block";
    case SegKind::plateau: return "plateau";
    case SegKind::atom: return "atom";
    case SegKind::smooth_tail: return "smooth_tail";
  }
  return "?";
}

// Self-describing support segment. x-ranges live in the log domain so that
// anchors past double range still serialize faithfully.
struct Segment {
  int block = -1;            // scale index where applicable, else sequential id
  SegKind kind = SegKind::plateau;
  double log_lo = kNegInf;   // log x at segment start
  double log_hi = kInf;      // log x at segment end (== log_lo for atoms)
  double log_mass = kNegInf; // log of probability carried by the segment
  double log_tail_hi = kNegInf;  // log tail just right of the segment
  std::string form;          // human-readable density/tail shape
  std::vector<double> density_coeffs;
  std::vector<double> tail_coeffs;
};

struct Atom {
  double x;
  double mass;
};

// Piecewise-analytic distribution on the positive half-line.
// Tail convention: tail(x) = P(X > x), right-continuous, tail(x) = 1 below the
// support infimum. All evaluations are pure and safe for concurrent readers.
class PiecewiseDist {
 public:
  virtual ~PiecewiseDist() = default;

  virtual double density(double x) const = 0;
  virtual double tail(double x) const = 0;
  virtual double log_tail(double x) const = 0;

  // Entry point for abscissae only representable in the log domain.
  virtual double log_tail_at_log(double log_x) const { return log_tail(std::exp(log_x)); }

  virtual double support_inf() const = 0;
  virtual double support_sup() const { return kInf; }  // finite when truncated

  virtual std::vector<Segment> segments() const = 0;
  virtual const char* kind() const = 0;
  virtual std::string describe() const { return kind(); }

  virtual bool has_density_component() const { return true; }
  virtual std::vector<Atom> atoms() const { return {}; }

  // Exact mass-uniformizing chart for a density segment with an integrable
  // endpoint singularity: maps u in [0,1] to x so that f(x) dx = mass * du.
  // Engines must integrate in u over such segments. Index refers to segments().
  struct Chart {
    double log_mass;     // log of segment mass (the du weight)
    bool singular_left;  // density unbounded at the left edge
  };
  virtual std::optional<Chart> chart(size_t /*segment_index*/) const { return std::nullopt; }
  virtual double chart_x_of_u(size_t /*segment_index*/, double /*u*/) const {
    throw Error("chart_x_of_u: no chart on this segment");
  }
  virtual double chart_u_of_x(size_t /*segment_index*/, double /*x*/) const {
    throw Error("chart_u_of_x: no chart on this segment");
  }
};

using DistPtr = std::shared_ptr<const PiecewiseDist>;

}  // namespace htl
