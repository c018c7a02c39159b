#pragma once

#include <functional>
#include <string>
#include <vector>

#include "htl/conv.hpp"
#include "htl/dist.hpp"

namespace htl {

// Membership diagnostics for the tail classes probed by this laboratory:
//   L  - long-tailed:            tail(x-c)/tail(x) -> 1 for fixed c
//   OL - shift-bounded:          limsup tail(x-c)/tail(x) finite
//   OS - fold-bounded:           limsup conv2_tail(x)/tail(x) finite
//   D  - halving-bounded:        limsup tail(x/2)/tail(x) finite
// Verdicts are trend statements over finitely many probe windows, never
// membership proofs: "consistent" / "inconsistent" with the class pattern,
// or "inconclusive" when the trend is mixed.

enum class Verdict { consistent, inconsistent, inconclusive };
const char* to_string(Verdict v);

// one evaluated point of a tail-ratio trace
struct RatioPoint {
  double x = 0.0;
  double c = 0.0;   // shift used (0 when the probe is not a shift probe)
  int window = -1;  // probe window index, -1 when outside every window
  double ratio = 0.0;
  double err = 0.0;  // propagated table error where applicable, else 0
};

// a probe window [lo, hi): one "scale" of trend evidence
struct ProbeWindow {
  double lo = 0.0;
  double hi = 0.0;
};

// tail(x-c)/tail(x) along an increasing grid. The closed-form overload works
// in the log domain, so deep-scale ratios never degrade to 0/0; the table
// overload propagates stored error channels. Ratios are >= 1 whenever c > 0.
std::vector<RatioPoint> ratio_sweep(const PiecewiseDist& f, double c,
                                    const std::vector<double>& grid,
                                    const std::vector<ProbeWindow>& windows = {});
std::vector<RatioPoint> ratio_sweep(const NumericConv& conv, double c,
                                    const std::vector<double>& grid,
                                    const std::vector<ProbeWindow>& windows = {});

struct ScaleMax {
  int window = -1;
  double value = 0.0;
  double arg = 0.0;  // abscissa where the maximum was attained
};

// per-window maxima of |ratio - 1| (deviation = true) or of the raw ratio;
// points outside every window are ignored
std::vector<ScaleMax> per_window_maxima(const std::vector<RatioPoint>& trace, bool deviation);

// generic probe trace value (window-tagged scalar)
struct ProbePoint {
  double x = 0.0;
  int window = -1;
  double value = 0.0;
};
std::vector<ScaleMax> per_window_maxima(const std::vector<ProbePoint>& trace);

// probe windows taken from a distribution's scale blocks block_lo..block_hi
// (each window spans every segment tagged with that block)
std::vector<ProbeWindow> scale_windows(const PiecewiseDist& f, int block_lo, int block_hi);

// log-spaced abscissae across each window plus the window's interior segment
// edges, each edge accompanied by +-offset neighbours (clamped to x_limit
// when positive)
std::vector<double> window_probe_grid(const PiecewiseDist& f, const std::vector<ProbeWindow>& windows,
                                      int per_window, const std::vector<double>& offsets,
                                      double x_limit = kInf);

struct ClassifyConfig {
  int block_lo = 0;
  int block_hi = 2;
  int per_window = 64;       // log-spaced points per probe window
  int conv_per_window = 16;  // quadrature-backed points per window (OS probe on a distribution)
  std::vector<double> c_values = {1.0, 2.0, 4.0};  // OL probe shifts; c_values[0] drives the L probe
  double decreasing_factor = 0.7;  // "decreasing": each window max <= 0.7x the previous
  double bounded_ratio = 1.5;      // "bounded": max/min across windows <= 1.5
  double growth_factor = 1.3;      // "growing": each window max >= 1.3x the previous ...
  double growth_total = 3.0;       // ... and last/first > 3
  double deviation_floor = 0.05;   // L probe: bounded deviations below this are inconclusive
  bool os_probe = true;            // the OS probe convolves, which costs quadrature
  QuadConfig quad{};               // budget for the OS probe's fold quadrature
  std::vector<ProbeWindow> windows;  // explicit windows override the block range
};

struct ClassVerdict {
  std::string cls;  // "L", "OL", "OS", "D"
  Verdict verdict = Verdict::inconclusive;
  std::string note;
  std::vector<ScaleMax> scale_maxima;  // the trend evidence
  std::vector<double> witness_x;       // per-window argmax abscissae
  std::vector<RatioPoint> trace;       // full probed trace (all c values)
};

struct ClassReport {
  std::string subject;
  ClassifyConfig config;
  std::vector<ClassVerdict> verdicts;

  const ClassVerdict* find(const std::string& cls) const;
  // JSON document with config, verdicts, maxima, witnesses; trace_cap > 0
  // keeps at most that many trace points per verdict (0 keeps all)
  std::string to_json(int trace_cap = 0) const;
};

// Trend-based membership diagnostics. The distribution overload evaluates
// closed forms plus direct fold quadrature; the table overload reads the
// order-2 self-fold and extends it to order 4 for the OS probe.
ClassReport classify(const PiecewiseDist& f, const ClassifyConfig& cfg = {});
ClassReport classify(const NumericConv& self_conv, const ClassifyConfig& cfg = {});

// F(x - h(x), x + h(x)] / tail(x): smallness across scales evidences
// insensitivity to windows of width h. Requires h(x) < x on the grid.
std::vector<ProbePoint> insensitivity_probe(const PiecewiseDist& f,
                                            const std::function<double(double)>& h,
                                            const std::vector<double>& grid,
                                            const std::vector<ProbeWindow>& windows = {});
std::vector<ProbePoint> insensitivity_probe(const NumericConv& conv,
                                            const std::function<double(double)>& h,
                                            const std::vector<double>& grid,
                                            const std::vector<ProbeWindow>& windows = {});

// density(x)/tail(x): decreasing per-window maxima evidence density = o(tail)
std::vector<ProbePoint> density_o_tail_probe(const PiecewiseDist& f,
                                             const std::vector<double>& grid,
                                             const std::vector<ProbeWindow>& windows = {});
std::vector<ProbePoint> density_o_tail_probe(const NumericConv& conv,
                                             const std::vector<double>& grid,
                                             const std::vector<ProbeWindow>& windows = {});

struct TransferConfig {
  double equiv_decreasing = 0.9;  // tail-equivalence maxima must decay at least this fast
  double equiv_final = 0.2;       // ... and end below this
  double lag_tolerance = 1.25;    // fold deviation at scale n vs equivalence at scale n-1
  double resolved = 1e-3;         // deviations below this carry no signal ...
  double err_factor = 3.0;        // ... nor do ones within a few table error bars
  QuadConfig quad{};
};

struct TransferReport {
  bool precondition_ok = false;          // tail(L)/tail(F) -> 1 verified on the grid
  std::vector<ScaleMax> equivalence_maxima;  // per-window max |tail_L/tail_F - 1|
  std::vector<RatioPoint> trace;             // conv_tail(F,L)(x) / conv2_tail(x)
  std::vector<ScaleMax> deviation_maxima;    // per-window max |trace - 1|
  bool converging = false;
  std::string note;
};

// Replace one convolution factor by a tail-equivalent law and measure how the
// fold tail responds; the precondition tail(L) ~ tail(F) is checked first and
// the operation aborts (reported, not thrown) when it fails.
TransferReport tail_equivalence_transfer(DistPtr F, DistPtr L, const NumericConv& conv_FF,
                                         const std::vector<double>& grid,
                                         const std::vector<ProbeWindow>& windows,
                                         const TransferConfig& cfg = {});

struct RootCrosscheck {
  bool applicable = false;  // base OS-consistent: the equivalence law binds
  bool anomaly = false;     // base L-inconsistent while the fold is L-consistent
  Verdict verdict = Verdict::inconclusive;
  std::string pattern;  // e.g. "base: L x, OS x; fold: L ok"
  std::string note;
};

// Cross-checks the fold-root law: within OS, the base and its square are
// long-tailed together; outside OS the anomaly is permitted. Both reports
// must come from classify runs on the base and on its order-2 self-fold.
RootCrosscheck convolution_root_crosscheck(const ClassReport& base, const ClassReport& fold);

struct ConcentrationPoint {
  int order = 0;
  double sup = 0.0;  // sup over admissible x of (tail(x-1) - tail(x)) * sqrt(order)
  double arg = 0.0;
};

// sqrt(n)-scaled one-step concentration of each fold in the ladder, with the
// sup taken over grid points x >= n (x0 - 1) + x0
std::vector<ConcentrationPoint> concentration_sweep(const std::vector<NumericConv>& ladder,
                                                    double x0, const std::vector<double>& grid);

// smallest grid abscissa x0 with sup over grid points x in [x0, x_hi] of
// (tail(x-1) - tail(x))/tail(x) <= eps, found by a reverse running maximum
// over the table grid (exact on the grid, unlike a bisection, because the
// quantity is not monotone). x_hi NaN scans the whole table; cap it below
// the truncation cliff when the law has bounded support, where the relative
// one-step drop blows up for the trivial reason that the tail is dying.
double concentration_threshold(const NumericConv& conv, double eps, double x_hi = kNaN);

}  // namespace htl
