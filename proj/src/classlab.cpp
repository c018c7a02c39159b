#include "htl/classlab.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <utility>

#include "json.hpp"

namespace htl {

namespace {

int window_of(double x, const std::vector<ProbeWindow>& windows) {
  for (size_t i = 0; i < windows.size(); ++i) {
    if (x >= windows[i].lo && x < windows[i].hi) return static_cast<int>(i);
  }
  // a closing edge not covered by any other window belongs to its own window:
  // the deepest block's top is exactly where the extremal ratios live
  for (size_t i = 0; i < windows.size(); ++i) {
    if (x == windows[i].hi) return static_cast<int>(i);
  }
  return -1;
}

void check_windows(const std::vector<ProbeWindow>& windows) {
  require(!windows.empty(), "probe windows: none given and none derivable");
  for (size_t i = 0; i < windows.size(); ++i) {
    require(windows[i].lo > 0.0 && windows[i].hi > windows[i].lo && std::isfinite(windows[i].hi),
            "probe windows: need finite windows with 0 < lo < hi (distributions without "
            "scale blocks need explicit windows in the config)");
    if (i) {
      require(windows[i].lo >= windows[i - 1].hi, "probe windows: must be sorted and disjoint");
    }
  }
}

template <class P, class V>
std::vector<ScaleMax> maxima_impl(const std::vector<P>& trace, V&& value_of) {
  std::map<int, ScaleMax> best;
  for (const auto& p : trace) {
    if (p.window < 0) continue;
    const double v = value_of(p);
    auto it = best.find(p.window);
    if (it == best.end() || v > it->second.value) {
      best[p.window] = ScaleMax{p.window, v, p.x};
    }
  }
  std::vector<ScaleMax> out;
  out.reserve(best.size());
  for (const auto& [w, m] : best) out.push_back(m);
  return out;
}

enum class Trend { decreasing, growing, bounded, mixed, insufficient };

// Trend of per-window maxima. Early windows see boundary transients (a shift
// comparable to the window, a fold still assembling its mass), so boundedness
// is judged where a limsup lives: on the two deepest windows ("settling").
// Growth must be sustained to the end AND not settling; with toward_one the
// decrease test runs on the excess above 1 (a ratio falling toward 1 is the
// strongest boundedness evidence, whatever the early levels were).
Trend trend_of(const std::vector<ScaleMax>& m, const ClassifyConfig& cfg, bool toward_one) {
  if (m.size() < 2) return Trend::insufficient;
  constexpr double tiny = 1e-300;  // keeps exact-zero maxima from poisoning ratios
  bool dec = true, grow = true;
  for (size_t i = 1; i < m.size(); ++i) {
    const double prev = toward_one ? std::max(m[i - 1].value - 1.0, 0.0) : m[i - 1].value;
    const double cur = toward_one ? std::max(m[i].value - 1.0, 0.0) : m[i].value;
    dec = dec && cur <= cfg.decreasing_factor * prev;
    grow = grow && m[i].value >= cfg.growth_factor * std::max(m[i - 1].value, tiny);
  }
  const double a = m[m.size() - 2].value, b = m.back().value;
  const double settle = std::max(a, b) / std::max(std::min(a, b), tiny);
  grow = grow && m.back().value > cfg.growth_total * std::max(m.front().value, tiny) &&
         settle > cfg.bounded_ratio;
  if (dec) return Trend::decreasing;
  if (grow) return Trend::growing;
  if (settle <= cfg.bounded_ratio) return Trend::bounded;
  return Trend::mixed;
}

std::string fmt_g(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

std::string fmt_maxima(const std::vector<ScaleMax>& m) {
  std::ostringstream os;
  for (size_t i = 0; i < m.size(); ++i) {
    os << (i ? ", " : "") << "w" << m[i].window << "=" << fmt_g(m[i].value);
  }
  return os.str();
}

std::vector<double> witnesses_of(const std::vector<ScaleMax>& m) {
  std::vector<double> out;
  out.reserve(m.size());
  for (const auto& s : m) out.push_back(s.arg);
  return out;
}

// shift-ratio deviations vanishing evidence the shift-insensitive class
ClassVerdict long_tail_verdict(std::vector<RatioPoint> trace, const ClassifyConfig& cfg) {
  ClassVerdict v;
  v.cls = "L";
  v.scale_maxima = maxima_impl(trace, [](const RatioPoint& p) { return std::fabs(p.ratio - 1.0); });
  v.witness_x = witnesses_of(v.scale_maxima);
  const Trend t = trend_of(v.scale_maxima, cfg, /*toward_one=*/false);
  double lo = kInf;
  for (const auto& m : v.scale_maxima) lo = std::min(lo, m.value);
  switch (t) {
    case Trend::decreasing:
      v.verdict = Verdict::consistent;
      v.note = "shift-ratio deviations fall across scales (" + fmt_maxima(v.scale_maxima) + ")";
      break;
    case Trend::growing:
      v.verdict = Verdict::inconsistent;
      v.note = "shift-ratio deviations grow across scales (" + fmt_maxima(v.scale_maxima) + ")";
      break;
    case Trend::bounded:
      if (lo >= cfg.deviation_floor) {
        v.verdict = Verdict::inconsistent;
        v.note = "shift-ratio deviations persist at a fixed level (" + fmt_maxima(v.scale_maxima) +
                 "), no decay toward 1";
      } else {
        v.verdict = Verdict::inconclusive;
        v.note = "deviations bounded but below the resolution floor (" +
                 fmt_maxima(v.scale_maxima) + ")";
      }
      break;
    case Trend::mixed:
      v.verdict = Verdict::inconclusive;
      v.note = "deviation maxima are non-monotone across the probed scales (" +
               fmt_maxima(v.scale_maxima) + ")";
      break;
    case Trend::insufficient:
      v.verdict = Verdict::inconclusive;
      v.note = "fewer than two probe windows held usable points";
      break;
  }
  v.trace = std::move(trace);
  return v;
}

// raw-ratio boundedness evidence for the limsup-finite classes (OL, OS, D)
ClassVerdict bounded_ratio_verdict(std::string cls, std::vector<RatioPoint> trace,
                                   const ClassifyConfig& cfg, const std::string& what) {
  ClassVerdict v;
  v.cls = std::move(cls);
  v.scale_maxima = maxima_impl(trace, [](const RatioPoint& p) { return p.ratio; });
  v.witness_x = witnesses_of(v.scale_maxima);
  switch (trend_of(v.scale_maxima, cfg, /*toward_one=*/true)) {
    case Trend::decreasing:
      v.verdict = Verdict::consistent;
      v.note = what + " maxima fall toward 1 across scales (" + fmt_maxima(v.scale_maxima) + ")";
      break;
    case Trend::bounded:
      v.verdict = Verdict::consistent;
      v.note = what + " maxima settle across the deepest scales (" + fmt_maxima(v.scale_maxima) +
               ")";
      break;
    case Trend::growing:
      v.verdict = Verdict::inconsistent;
      v.note = what + " maxima grow across scales (" + fmt_maxima(v.scale_maxima) + ")";
      break;
    case Trend::mixed:
      v.verdict = Verdict::inconclusive;
      v.note = what + " maxima are non-monotone across the probed scales (" +
               fmt_maxima(v.scale_maxima) + ")";
      break;
    case Trend::insufficient:
      v.verdict = Verdict::inconclusive;
      v.note = "fewer than two probe windows held usable points";
      break;
  }
  v.trace = std::move(trace);
  return v;
}

Verdict worse(Verdict a, Verdict b) {
  auto rank = [](Verdict v) {
    return v == Verdict::inconsistent ? 2 : (v == Verdict::inconclusive ? 1 : 0);
  };
  return rank(a) >= rank(b) ? a : b;
}

// tail(x/2)/tail(x) from closed forms
std::vector<RatioPoint> halving_sweep(const PiecewiseDist& f, const std::vector<double>& grid,
                                      const std::vector<ProbeWindow>& windows) {
  std::vector<RatioPoint> out;
  out.reserve(grid.size());
  for (double x : grid) {
    const double lt = f.log_tail(x);
    if (!std::isfinite(lt)) continue;
    const double xh = 0.5 * x;
    const double lth = xh <= f.support_inf() ? 0.0 : f.log_tail(xh);
    out.push_back({x, 0.0, window_of(x, windows), std::exp(lth - lt), 0.0});
  }
  return out;
}

// tail_at(x/2)/tail_at(x) from a fold table
std::vector<RatioPoint> halving_sweep(const NumericConv& conv, const std::vector<double>& grid,
                                      const std::vector<ProbeWindow>& windows) {
  std::vector<RatioPoint> out;
  out.reserve(grid.size());
  for (double x : grid) {
    if (x > conv.coverage_max()) continue;
    const double t1 = conv.tail_at(x);
    if (t1 <= 0.0) continue;
    const double t0 = conv.tail_at(0.5 * x);
    const double r = t0 / t1;
    const double err = r * (conv.tail_err_at(0.5 * x) / t0 + conv.tail_err_at(x) / t1);
    out.push_back({x, 0.0, window_of(x, windows), r, err});
  }
  return out;
}

// shift sweeps for every configured c, folded into one OL verdict (worst c wins)
ClassVerdict shift_bounded_verdict(const std::function<std::vector<RatioPoint>(double)>& sweep,
                                   const ClassifyConfig& cfg) {
  ClassVerdict combined;
  combined.cls = "OL";
  std::string note;
  for (size_t i = 0; i < cfg.c_values.size(); ++i) {
    const double c = cfg.c_values[i];
    ClassVerdict one = bounded_ratio_verdict("OL", sweep(c), cfg, "shift-ratio");
    note += (i ? "; " : "") + ("c=" + fmt_g(c) + ": ") + to_string(one.verdict) + " (" +
            fmt_maxima(one.scale_maxima) + ")";
    if (i == 0 || one.verdict == worse(one.verdict, combined.verdict)) {
      // keep the evidence of the most damaging shift
      combined.verdict = i == 0 ? one.verdict : worse(one.verdict, combined.verdict);
      combined.scale_maxima = one.scale_maxima;
      combined.witness_x = one.witness_x;
    }
    combined.trace.insert(combined.trace.end(), one.trace.begin(), one.trace.end());
  }
  combined.note = note;
  return combined;
}

// the same fold-tail/tail ratio a cstar estimate is built from, but grouped
// by the lab's own probe windows so subjects with a single scale block (the
// light-tailed controls) stay probeable
std::vector<RatioPoint> fold_ratio_trace(const PiecewiseDist& f, const std::vector<double>& grid,
                                         const std::vector<ProbeWindow>& windows,
                                         const QuadConfig& quad) {
  std::vector<RatioPoint> out;
  out.reserve(grid.size());
  for (double x : grid) {
    const double t = f.tail(x);
    if (t <= 0.0) continue;
    const ConvPoint cp = conv_tail_point(f, f, x, quad);
    out.push_back({x, 0.0, window_of(x, windows), cp.value / t, cp.err / t});
  }
  return out;
}

// the verdict logic must respect the class inclusion L within OL
void enforce_inclusion(ClassReport& rep) {
  ClassVerdict* l = nullptr;
  ClassVerdict* ol = nullptr;
  for (auto& v : rep.verdicts) {
    if (v.cls == "L") l = &v;
    if (v.cls == "OL") ol = &v;
  }
  if (l && ol && l->verdict == Verdict::consistent && ol->verdict == Verdict::inconsistent) {
    l->verdict = Verdict::inconclusive;
    l->note += "; downgraded: the shift-bounded probe contradicts it, and shift-insensitive "
               "implies shift-bounded";
  }
}

nlohmann::json maxima_json(const std::vector<ScaleMax>& m) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : m) {
    arr.push_back({{"window", s.window}, {"value", s.value}, {"arg", s.arg}});
  }
  return arr;
}

}  // namespace

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::consistent:
      return "consistent";
    case Verdict::inconsistent:
      return "inconsistent";
    default:
      return "inconclusive";
  }
}

std::vector<RatioPoint> ratio_sweep(const PiecewiseDist& f, double c,
                                    const std::vector<double>& grid,
                                    const std::vector<ProbeWindow>& windows) {
  require(c > 0.0 && std::isfinite(c), "ratio_sweep: shift must be positive and finite");
  require(std::is_sorted(grid.begin(), grid.end()), "ratio_sweep: grid must be increasing");
  std::vector<RatioPoint> out;
  out.reserve(grid.size());
  for (double x : grid) {
    const double lt = f.log_tail(x);
    if (!std::isfinite(lt)) continue;  // past the support: ratio undefined
    const double xs = x - c;
    const double lts = xs <= f.support_inf() ? 0.0 : f.log_tail(xs);
    out.push_back({x, c, window_of(x, windows), std::exp(lts - lt), 0.0});
  }
  return out;
}

std::vector<RatioPoint> ratio_sweep(const NumericConv& conv, double c,
                                    const std::vector<double>& grid,
                                    const std::vector<ProbeWindow>& windows) {
  require(c > 0.0 && std::isfinite(c), "ratio_sweep: shift must be positive and finite");
  require(std::is_sorted(grid.begin(), grid.end()), "ratio_sweep: grid must be increasing");
  std::vector<RatioPoint> out;
  out.reserve(grid.size());
  for (double x : grid) {
    if (x > conv.coverage_max()) continue;
    const double t1 = conv.tail_at(x);
    if (t1 <= 0.0) continue;  // past a truncation cliff: ratio undefined
    const double t0 = conv.tail_at(x - c);  // reads below coverage are exactly 1
    const double r = t0 / t1;
    const double err = r * (conv.tail_err_at(x - c) / t0 + conv.tail_err_at(x) / t1);
    out.push_back({x, c, window_of(x, windows), r, err});
  }
  return out;
}

std::vector<ScaleMax> per_window_maxima(const std::vector<RatioPoint>& trace, bool deviation) {
  if (deviation) {
    return maxima_impl(trace, [](const RatioPoint& p) { return std::fabs(p.ratio - 1.0); });
  }
  return maxima_impl(trace, [](const RatioPoint& p) { return p.ratio; });
}

std::vector<ScaleMax> per_window_maxima(const std::vector<ProbePoint>& trace) {
  return maxima_impl(trace, [](const ProbePoint& p) { return p.value; });
}

std::vector<ProbeWindow> scale_windows(const PiecewiseDist& f, int block_lo, int block_hi) {
  require(block_lo >= 0 && block_hi >= block_lo, "scale_windows: need 0 <= block_lo <= block_hi");
  std::map<int, ProbeWindow> by_block;
  for (const auto& s : f.segments()) {
    if (s.block < block_lo || s.block > block_hi) continue;
    const double lo = std::exp(s.log_lo);
    // a zero-tail run-out piece can extend to infinity; the window should end
    // where the block's tail lives, so non-finite extents clamp to the edge
    double hi = std::exp(s.log_hi);
    if (!std::isfinite(hi)) hi = lo;
    auto it = by_block.find(s.block);
    if (it == by_block.end()) {
      by_block[s.block] = {lo, hi};
    } else {
      it->second.lo = std::min(it->second.lo, lo);
      it->second.hi = std::max(it->second.hi, hi);
    }
  }
  require(!by_block.empty(), "scale_windows: no segments in the requested block range");
  require(by_block.count(block_hi) == 1,
          "scale_windows: the distribution carries no block " + std::to_string(block_hi) +
              "; deepen the ladder or lower block_hi");
  std::vector<ProbeWindow> out;
  out.reserve(by_block.size());
  for (const auto& [b, w] : by_block) out.push_back(w);
  return out;
}

std::vector<double> window_probe_grid(const PiecewiseDist& f,
                                      const std::vector<ProbeWindow>& windows, int per_window,
                                      const std::vector<double>& offsets, double x_limit) {
  check_windows(windows);
  require(per_window >= 2, "window_probe_grid: need at least 2 points per window");
  std::vector<double> edges;
  for (const auto& s : f.segments()) {
    const double lo = std::exp(s.log_lo), hi = std::exp(s.log_hi);
    if (std::isfinite(lo) && lo > 0.0) edges.push_back(lo);
    if (std::isfinite(hi) && hi > 0.0) edges.push_back(hi);
  }
  std::vector<double> xs;
  for (const auto& w : windows) {
    const double llo = std::log(w.lo), lhi = std::log(w.hi);
    for (int i = 0; i < per_window; ++i) {
      xs.push_back(std::exp(llo + (lhi - llo) * i / per_window));  // half-open [lo, hi)
    }
    // take every candidate this window owns, closing edge included when no
    // other window covers it (window_of settles the boundary attribution)
    const int self = window_of(w.lo, windows);
    auto add = [&](double x) {
      if (window_of(x, windows) == self) xs.push_back(x);
    };
    add(w.hi);
    // the extremal ratios live at the block boundaries and one shift away
    for (double e : edges) {
      add(e);
      for (double o : offsets) {
        if (o > 0.0) {
          add(e - o);
          add(e + o);
        }
      }
    }
  }
  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs) {
    if (x > 0.0 && x <= x_limit) out.push_back(x);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  require(!out.empty(), "window_probe_grid: no probe point survived the limits");
  return out;
}

const ClassVerdict* ClassReport::find(const std::string& cls) const {
  for (const auto& v : verdicts) {
    if (v.cls == cls) return &v;
  }
  return nullptr;
}

std::string ClassReport::to_json(int trace_cap) const {
  nlohmann::json j;
  j["subject"] = subject;
  nlohmann::json wins = nlohmann::json::array();
  for (const auto& w : config.windows) wins.push_back({{"lo", w.lo}, {"hi", w.hi}});
  j["config"] = {{"block_lo", config.block_lo},
                 {"block_hi", config.block_hi},
                 {"per_window", config.per_window},
                 {"conv_per_window", config.conv_per_window},
                 {"c_values", config.c_values},
                 {"decreasing_factor", config.decreasing_factor},
                 {"bounded_ratio", config.bounded_ratio},
                 {"growth_factor", config.growth_factor},
                 {"growth_total", config.growth_total},
                 {"deviation_floor", config.deviation_floor},
                 {"os_probe", config.os_probe},
                 {"windows", wins}};
  nlohmann::json verds = nlohmann::json::array();
  for (const auto& v : verdicts) {
    nlohmann::json jv;
    jv["class"] = v.cls;
    jv["verdict"] = to_string(v.verdict);
    jv["note"] = v.note;
    jv["scale_maxima"] = maxima_json(v.scale_maxima);
    jv["witness_x"] = v.witness_x;
    nlohmann::json tr = nlohmann::json::array();
    const size_t cap =
        trace_cap > 0 ? std::min(v.trace.size(), static_cast<size_t>(trace_cap)) : v.trace.size();
    for (size_t i = 0; i < cap; ++i) {
      const auto& p = v.trace[i];
      tr.push_back({{"x", p.x},
                    {"c", p.c},
                    {"window", p.window},
                    {"ratio", p.ratio},
                    {"err", p.err}});
    }
    jv["trace"] = tr;
    jv["trace_total"] = v.trace.size();
    verds.push_back(jv);
  }
  j["verdicts"] = verds;
  return j.dump(2);
}

ClassReport classify(const PiecewiseDist& f, const ClassifyConfig& cfg) {
  require(!cfg.c_values.empty(), "classify: need at least one shift value");
  ClassReport rep;
  rep.subject = f.describe();
  rep.config = cfg;
  const std::vector<ProbeWindow> windows =
      cfg.windows.empty() ? scale_windows(f, cfg.block_lo, cfg.block_hi) : cfg.windows;
  check_windows(windows);
  rep.config.windows = windows;  // the report records what was actually probed
  std::vector<double> offsets = cfg.c_values;
  offsets.push_back(1.0);
  const std::vector<double> grid = window_probe_grid(f, windows, cfg.per_window, offsets);

  rep.verdicts.push_back(
      long_tail_verdict(ratio_sweep(f, cfg.c_values.front(), grid, windows), cfg));
  rep.verdicts.push_back(shift_bounded_verdict(
      [&](double c) { return ratio_sweep(f, c, grid, windows); }, cfg));
  if (cfg.os_probe) {
    const std::vector<double> os_grid =
        window_probe_grid(f, windows, cfg.conv_per_window, offsets);
    rep.verdicts.push_back(bounded_ratio_verdict(
        "OS", fold_ratio_trace(f, os_grid, windows, cfg.quad), cfg, "fold-ratio"));
  }
  rep.verdicts.push_back(
      bounded_ratio_verdict("D", halving_sweep(f, grid, windows), cfg, "halving-ratio"));
  enforce_inclusion(rep);
  return rep;
}

ClassReport classify(const NumericConv& self_conv, const ClassifyConfig& cfg) {
  require(!cfg.c_values.empty(), "classify: need at least one shift value");
  require(self_conv.order() >= 2, "classify: need a fold table of order >= 2");
  const PiecewiseDist& base = *self_conv.base();
  ClassReport rep;
  rep.subject = "fold[" + std::to_string(self_conv.order()) + "] of " + base.describe();
  rep.config = cfg;
  const std::vector<ProbeWindow> windows =
      cfg.windows.empty() ? scale_windows(base, cfg.block_lo, cfg.block_hi) : cfg.windows;
  check_windows(windows);
  rep.config.windows = windows;
  std::vector<double> offsets = cfg.c_values;
  offsets.push_back(1.0);
  std::vector<double> grid =
      window_probe_grid(base, windows, cfg.per_window, offsets, self_conv.coverage_max());
  {
    // the fold's own kinks sit at pairwise sums of the base support edges
    std::vector<double> edges;
    for (const auto& s : base.segments()) {
      const double lo = std::exp(s.log_lo), hi = std::exp(s.log_hi);
      if (std::isfinite(lo) && lo > 0.0) edges.push_back(lo);
      if (std::isfinite(hi) && hi > 0.0) edges.push_back(hi);
    }
    for (size_t i = 0; i < edges.size(); ++i) {
      for (size_t j = i; j < edges.size(); ++j) {
        const double s = edges[i] + edges[j];
        if (s <= self_conv.coverage_max() && window_of(s, windows) >= 0) grid.push_back(s);
      }
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  }

  rep.verdicts.push_back(
      long_tail_verdict(ratio_sweep(self_conv, cfg.c_values.front(), grid, windows), cfg));
  rep.verdicts.push_back(shift_bounded_verdict(
      [&](double c) { return ratio_sweep(self_conv, c, grid, windows); }, cfg));
  if (cfg.os_probe) {
    // the subject is the fold itself, so its own fold-boundedness probe
    // convolves the table with itself (order 2 -> order 4 evidence)
    const DistPtr tab = make_tabulated(self_conv);
    const std::vector<double> os_grid =
        window_probe_grid(base, windows, cfg.conv_per_window, offsets, self_conv.coverage_max());
    rep.verdicts.push_back(bounded_ratio_verdict(
        "OS", fold_ratio_trace(*tab, os_grid, windows, cfg.quad), cfg, "fold-ratio"));
  }
  rep.verdicts.push_back(
      bounded_ratio_verdict("D", halving_sweep(self_conv, grid, windows), cfg, "halving-ratio"));
  enforce_inclusion(rep);
  return rep;
}

std::vector<ProbePoint> insensitivity_probe(const PiecewiseDist& f,
                                            const std::function<double(double)>& h,
                                            const std::vector<double>& grid,
                                            const std::vector<ProbeWindow>& windows) {
  std::vector<ProbePoint> out;
  out.reserve(grid.size());
  for (double x : grid) {
    const double hx = h(x);
    require(hx > 0.0 && hx < x, "insensitivity_probe: need 0 < h(x) < x on the grid");
    const double t = f.tail(x);
    if (t <= 0.0) continue;
    const double lo = x - hx <= f.support_inf() ? 1.0 : f.tail(x - hx);
    const double hi = f.tail(x + hx);
    out.push_back({x, window_of(x, windows), std::max(0.0, lo - hi) / t});
  }
  return out;
}

std::vector<ProbePoint> insensitivity_probe(const NumericConv& conv,
                                            const std::function<double(double)>& h,
                                            const std::vector<double>& grid,
                                            const std::vector<ProbeWindow>& windows) {
  std::vector<ProbePoint> out;
  out.reserve(grid.size());
  for (double x : grid) {
    const double hx = h(x);
    require(hx > 0.0 && hx < x, "insensitivity_probe: need 0 < h(x) < x on the grid");
    if (x + hx > conv.coverage_max()) continue;
    const double t = conv.tail_at(x);
    if (t <= 0.0) continue;
    const double lo = conv.tail_at(x - hx);
    const double hi = conv.tail_at(x + hx);
    out.push_back({x, window_of(x, windows), std::max(0.0, lo - hi) / t});
  }
  return out;
}

std::vector<ProbePoint> density_o_tail_probe(const PiecewiseDist& f,
                                             const std::vector<double>& grid,
                                             const std::vector<ProbeWindow>& windows) {
  require(f.has_density_component(), "density_o_tail_probe: subject has no density component");
  std::vector<ProbePoint> out;
  out.reserve(grid.size());
  for (double x : grid) {
    const double t = f.tail(x);
    if (t <= 0.0) continue;
    out.push_back({x, window_of(x, windows), f.density(x) / t});
  }
  return out;
}

std::vector<ProbePoint> density_o_tail_probe(const NumericConv& conv,
                                             const std::vector<double>& grid,
                                             const std::vector<ProbeWindow>& windows) {
  std::vector<ProbePoint> out;
  out.reserve(grid.size());
  for (double x : grid) {
    if (x > conv.coverage_max()) continue;
    const double t = conv.tail_at(x);
    if (t <= 0.0) continue;
    out.push_back({x, window_of(x, windows), conv.density_at(x) / t});
  }
  return out;
}

TransferReport tail_equivalence_transfer(DistPtr F, DistPtr L, const NumericConv& conv_FF,
                                         const std::vector<double>& grid,
                                         const std::vector<ProbeWindow>& windows,
                                         const TransferConfig& cfg) {
  require(F != nullptr && L != nullptr, "tail_equivalence_transfer: null distribution");
  require(conv_FF.order() == 2, "tail_equivalence_transfer: need the order-2 self-fold");
  check_windows(windows);
  TransferReport rep;

  // precondition: the substitute's tail must already track the original's,
  // with per-window deviation maxima falling toward 0
  std::vector<ProbePoint> eq;
  eq.reserve(grid.size());
  for (double x : grid) {
    const double ltF = F->log_tail(x);
    if (!std::isfinite(ltF)) continue;
    const double ltL = x <= L->support_inf() ? 0.0 : L->log_tail(x);
    eq.push_back({x, window_of(x, windows), std::fabs(std::expm1(ltL - ltF))});
  }
  rep.equivalence_maxima = per_window_maxima(eq);
  bool ok = rep.equivalence_maxima.size() >= 2;
  for (size_t i = 1; ok && i < rep.equivalence_maxima.size(); ++i) {
    ok = rep.equivalence_maxima[i].value <=
         cfg.equiv_decreasing * rep.equivalence_maxima[i - 1].value;
  }
  ok = ok && rep.equivalence_maxima.back().value < cfg.equiv_final;
  rep.precondition_ok = ok;
  if (!ok) {
    rep.note = "tail equivalence not established on the probe grid (deviation maxima " +
               fmt_maxima(rep.equivalence_maxima) + "); transfer not evaluated";
    return rep;
  }

  for (double x : grid) {
    if (x > conv_FF.coverage_max()) continue;
    const double den = conv_FF.tail_at(x);
    if (den <= 0.0) continue;
    const ConvPoint num = conv_tail_point(*F, *L, x, cfg.quad);
    const double r = num.value / den;
    rep.trace.push_back(
        {x, 0.0, window_of(x, windows), r, (num.err + r * conv_FF.tail_err_at(x)) / den});
  }
  rep.deviation_maxima = per_window_maxima(rep.trace, /*deviation=*/true);
  // a deviation inside the table's own resolution carries no signal either way
  bool all_resolved = !rep.trace.empty();
  double hi = 0.0;
  for (const auto& p : rep.trace) {
    const double dev = std::fabs(p.ratio - 1.0);
    hi = std::max(hi, dev);
    all_resolved = all_resolved && dev <= std::max(cfg.resolved, cfg.err_factor * p.err);
  }
  if (all_resolved) {
    rep.converging = true;
    rep.note = "mixed-fold tail already matches the self-fold within table resolution (max "
               "deviation " +
               fmt_g(hi) + ")";
    return rep;
  }
  // The mixed fold integrates the substitute over the *previous* blocks, so
  // its deviation at scale n is controlled by the equivalence gap one scale
  // earlier; convergence means every window honors that lag bound.
  std::map<int, double> equiv_at;
  for (const auto& m : rep.equivalence_maxima) equiv_at[m.window] = m.value;
  bool conv_ok = rep.deviation_maxima.size() >= 2;
  for (const auto& m : rep.deviation_maxima) {
    auto it = equiv_at.find(m.window - 1);
    if (it == equiv_at.end()) continue;  // no earlier scale to compare against
    conv_ok = conv_ok && m.value <= cfg.lag_tolerance * it->second;
  }
  rep.converging = conv_ok;
  rep.note = std::string(conv_ok ? "mixed-fold deviations track the substitute's equivalence "
                                   "gap one scale behind"
                                 : "mixed-fold deviations exceed the lagged equivalence gap") +
             " (deviation maxima " + fmt_maxima(rep.deviation_maxima) + ")";
  return rep;
}

RootCrosscheck convolution_root_crosscheck(const ClassReport& base, const ClassReport& fold) {
  const ClassVerdict* b_l = base.find("L");
  const ClassVerdict* b_os = base.find("OS");
  const ClassVerdict* f_l = fold.find("L");
  require(b_l != nullptr && b_os != nullptr && f_l != nullptr,
          "convolution_root_crosscheck: reports must carry L (both) and OS (base) verdicts");
  RootCrosscheck rc;
  rc.applicable = b_os->verdict == Verdict::consistent;
  rc.anomaly = b_l->verdict == Verdict::inconsistent && f_l->verdict == Verdict::consistent;
  const bool reverse =
      b_l->verdict == Verdict::consistent && f_l->verdict == Verdict::inconsistent;
  rc.pattern = std::string("base: L=") + to_string(b_l->verdict) + ", OS=" +
               to_string(b_os->verdict) + "; fold: L=" + to_string(f_l->verdict);
  if (rc.applicable && rc.anomaly) {
    rc.verdict = Verdict::inconsistent;
    rc.note = "fold shift-insensitive while the fold-bounded base is not: within the "
              "fold-bounded class the base and its fold are long-tailed together";
  } else if (rc.applicable && reverse) {
    rc.verdict = Verdict::inconsistent;
    rc.note = "base shift-insensitive but its fold is not: contradicts closure of the "
              "long-tailed class under folding";
  } else if (rc.anomaly) {
    rc.verdict = Verdict::consistent;
    rc.note = "fold long-tailed, base not: permitted exactly because the base shows no "
              "fold-boundedness";
  } else if (rc.applicable) {
    if (b_l->verdict == Verdict::inconclusive || f_l->verdict == Verdict::inconclusive) {
      rc.verdict = Verdict::inconclusive;
      rc.note = "probe trends too ambiguous to test the root law";
    } else {
      rc.verdict = Verdict::consistent;
      rc.note = "base and fold agree within the law's scope";
    }
  } else {
    rc.verdict = Verdict::inconclusive;
    rc.note = "out of class scope: the base shows no fold-boundedness and no anomaly arises";
  }
  return rc;
}

std::vector<ConcentrationPoint> concentration_sweep(const std::vector<NumericConv>& ladder,
                                                    double x0, const std::vector<double>& grid) {
  require(!ladder.empty(), "concentration_sweep: empty ladder");
  require(x0 > 1.0, "concentration_sweep: need x0 > 1 so the cutoff grows with the order");
  std::vector<ConcentrationPoint> out;
  out.reserve(ladder.size());
  for (const auto& conv : ladder) {
    const int n = conv.order();
    const double cutoff = n * (x0 - 1.0) + x0;
    ConcentrationPoint p;
    p.order = n;
    for (double x : grid) {
      if (x < cutoff || x > conv.coverage_max()) continue;
      const double v = (conv.tail_at(x - 1.0) - conv.tail_at(x)) * std::sqrt(double(n));
      if (v > p.sup) {
        p.sup = v;
        p.arg = x;
      }
    }
    out.push_back(p);
  }
  return out;
}

double concentration_threshold(const NumericConv& conv, double eps, double x_hi) {
  require(eps > 0.0, "concentration_threshold: eps must be positive");
  const double cap = std::isnan(x_hi) ? conv.coverage_max() : x_hi;
  const auto& xs = conv.grid();
  double best = kInf;
  double running = 0.0;
  for (size_t i = xs.size(); i-- > 0;) {
    const double x = xs[i];
    if (x > cap) continue;
    if (x - 1.0 < conv.coverage_min()) break;  // one-step drop undefined further left
    const double t = conv.tail_at(x);
    if (t <= 0.0) continue;  // past a truncation cliff the ratio is undefined
    running = std::max(running, (conv.tail_at(x - 1.0) - t) / t);
    if (running <= eps) best = x;
  }
  return best;
}

}  // namespace htl
