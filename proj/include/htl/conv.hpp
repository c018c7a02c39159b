#pragma once

#include <iosfwd>
#include <utility>
#include <vector>

#include "htl/dist.hpp"
#include "htl/interp.hpp"
#include "htl/quadrature.hpp"

namespace htl {

// One numerically computed quantity with an attached absolute-error bound.
struct ConvPoint {
  double value = 0.0;
  double err = 0.0;
  bool reliable = true;  // false when a quadrature budget was exhausted
};

// Density of the sum at x (absolutely continuous part plus atom cross terms).
// The integration domain is cut at every support edge of either factor and at
// the reflected edges {x - e}; blocks with an integrable endpoint singularity
// are integrated through their mass-uniformizing chart, so the quadrature
// never sees an unbounded integrand. Exactly 0 (no tolerance) when no pair of
// support pieces overlaps.
ConvPoint conv_density_point(const PiecewiseDist& f1, const PiecewiseDist& f2, double x,
                             const QuadConfig& cfg = {});

// Same value computed as 2 * int_{x/2}^{x} f(y) f(x-y) dy (the doubled
// half-range form); cross-checked against the full-range form in tests.
ConvPoint self_conv_density(const PiecewiseDist& f, double x, const QuadConfig& cfg = {});

// P(X1 + X2 > x) through the cancellation-free complementary split
//   tail2(x) + int_{[0,x]} tail1(x-u) dF2(u),
// every term nonnegative, so relative accuracy survives near mass 1.
// Atoms of F2 enter the integral exactly; atoms of F1 enter through tail1.
ConvPoint conv_tail_point(const PiecewiseDist& f1, const PiecewiseDist& f2, double x,
                          const QuadConfig& cfg = {});

struct ConvGridSpec {
  int points_per_block = 512;  // log-spaced abscissae per scale band
  double x_max = kNaN;         // NaN: up to the largest representable support edge
  QuadConfig quad{};           // per-piece budget (defaults match the global pins)
  int threads = 0;             // 0: hardware concurrency
};

// Tabulated n-fold convolution on a per-scale log grid. Per-point error
// estimates come from the quadrature itself; interpolated reads add a local
// cubic-vs-secant deviation term so table consumers stay honest.
class NumericConv {
 public:
  int order() const { return order_; }
  DistPtr base() const { return base_; }
  DistPtr second() const { return second_; }

  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& density_vals() const { return dens_; }
  const std::vector<double>& density_errs() const { return dens_err_; }
  const std::vector<double>& tail_vals() const { return tail_; }
  const std::vector<double>& tail_errs() const { return tail_err_; }
  const std::vector<int>& block_index() const { return block_; }
  const std::vector<Atom>& conv_atoms() const { return atoms_; }

  // points whose error estimate exceeded the reporting tolerance, never silent
  const std::vector<uint8_t>& flagged() const { return flagged_; }
  size_t flagged_count() const;

  double coverage_min() const { return grid_.front(); }
  double coverage_max() const { return grid_.back(); }

  // true when the table ends because the tail reached exact zero there (the
  // distribution has bounded support), as opposed to running out of grid
  bool truncated_at_zero() const { return truncated_at_zero_; }

  // interpolated reads; tail is 1 and density 0 below coverage, queries above
  // coverage throw (the table never extrapolates)
  double tail_at(double x) const;
  double tail_err_at(double x) const;
  double density_at(double x) const;
  double density_err_at(double x) const;

  // fixed schema: x,log_x,density,density_err,tail,tail_err,scale_block_index
  void write_csv(std::ostream& os) const;

  friend NumericConv convolve_pair(DistPtr f1, DistPtr f2, std::vector<double> grid,
                                   const ConvGridSpec& spec);
  friend std::vector<NumericConv> nfold_ladder(DistPtr f, int order, std::vector<double> grid,
                                               const ConvGridSpec& spec);

 private:
  NumericConv() = default;
  void finalize();  // builds interpolants, flags out-of-tolerance points

  int order_ = 0;
  DistPtr base_, second_;
  std::vector<double> grid_, dens_, dens_err_, tail_, tail_err_;
  std::vector<int> block_;
  std::vector<uint8_t> flagged_;
  std::vector<Atom> atoms_;
  bool truncated_at_zero_ = false;
  double abs_tol_ = 0.0, rel_tol_ = 0.0;
  MonotoneCubic log_tail_interp_;  // on (log x, log tail)
  LinearTable dens_interp_, dens_err_interp_, tail_err_interp_;  // on log x
};

// Evaluation grid serving every self-convolution fold up to `order`:
// per-scale log-spaced points plus forced abscissae at the kinks of each
// intermediate order (pairwise sums of support edges shifted by (m-2)
// support infima for m = 2..order) and pre-atom nodes so tail cliffs sit on
// grid nodes. For order >= 2 the grid starts at twice the support infimum.
std::vector<double> make_conv_grid(const PiecewiseDist& f, int order,
                                   const ConvGridSpec& spec = {});
std::vector<double> make_pair_grid(const PiecewiseDist& f1, const PiecewiseDist& f2,
                                   const ConvGridSpec& spec = {});

// Order-2 table for two (possibly distinct) distributions. Empty grid: the
// default pair grid. Scale-block indices follow f1's segment blocks.
NumericConv convolve_pair(DistPtr f1, DistPtr f2, std::vector<double> grid = {},
                          const ConvGridSpec& spec = {});

// All fold orders 1..order over the same grid (order 1 is the closed form;
// order m >= 3 folds the (m-1)-table against the base measure).
std::vector<NumericConv> nfold_ladder(DistPtr f, int order, std::vector<double> grid = {},
                                      const ConvGridSpec& spec = {});
NumericConv nfold_tail(DistPtr f, int order, std::vector<double> grid = {},
                       const ConvGridSpec& spec = {});

// Wrap a table as a distribution so it can be fed back into the pointwise
// engines (association cross-checks, higher folds).
DistPtr make_tabulated(NumericConv nc);

// scale block containing x according to the distribution's segment table;
// -1 below the support
int scale_block_of(const PiecewiseDist& f, double x);

struct CstarProbePoint {
  double x = kNaN;
  int block = -1;
  double conv_tail = kNaN, conv_err = kNaN;
  double base_tail = kNaN;
  double ratio = kNaN;
};

// Scale-resolved estimate of sup tail2fold/tail. sup_ratio is the max over
// the two deepest probed blocks (never a claimed limit); the full trace and
// per-block maxima expose the scale-to-scale trend.
struct CstarEstimate {
  double sup_ratio = 0.0;
  double arg = kNaN;
  std::vector<CstarProbePoint> trace;
  std::vector<std::pair<int, double>> block_max;  // (block, max ratio), ascending
};

CstarEstimate cstar_estimate(const PiecewiseDist& f, const std::vector<double>& probe,
                             const QuadConfig& cfg = {});
CstarEstimate cstar_estimate(const NumericConv& self_conv, const std::vector<double>& probe);

// log-spaced probe points spanning the requested scale blocks, plus each
// block's edges nudged inward; throws if fewer than 3 blocks are covered
std::vector<double> make_scale_probe(const PiecewiseDist& f, int block_lo, int block_hi,
                                     int per_block = 64);

struct TFunctional {
  double t_value = 0.0, t_err = 0.0;
  double conv_tail = kNaN, conv_tail_err = kNaN;
  double ratio = kNaN;
  bool reliable = true;
};

// T(x) = int_{x/2}^{x} tail2fold(x-y) dens2fold(y) dy from an order-2 table,
// composite quadrature over the table cells; exact 0 across support gaps.
TFunctional t_functional(const NumericConv& conv, double x);
TFunctional t_functional(const PiecewiseDist& f, const NumericConv& conv, double x);

}  // namespace htl
