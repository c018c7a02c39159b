#include "htl/conv.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <ostream>
#include <thread>

namespace htl {

namespace {

// ---------------------------------------------------------------------------
// flattened view of a distribution's density-carrying structure
// ---------------------------------------------------------------------------

struct SegView {
  double xlo = 0.0, xhi = 0.0;
  size_t index = 0;    // index into segments()
  int block = -1;
  bool singular = false;  // integrable endpoint singularity at xlo
  double mass = 0.0;      // chart weight when singular
};

struct DistView {
  const PiecewiseDist* d = nullptr;
  std::vector<SegView> dens;   // density carriers, ascending, disjoint
  std::vector<Atom> atoms;     // ascending x
  std::vector<double> edges;   // finite support edges + atom abscissae
  double sinf = 0.0;
};

double exp_or_inf(double lx) {
  if (lx == kNegInf) return 0.0;
  const double v = std::exp(lx);
  return std::isfinite(v) ? v : kInf;
}

DistView make_view(const PiecewiseDist& d) {
  DistView v;
  v.d = &d;
  v.sinf = d.support_inf();
  const auto segs = d.segments();
  for (size_t i = 0; i < segs.size(); ++i) {
    const auto& s = segs[i];
    if (s.kind == SegKind::atom) continue;
    const double xlo = exp_or_inf(s.log_lo);
    const double xhi = exp_or_inf(s.log_hi);
    if (!(xlo < xhi) || !std::isfinite(xlo)) continue;
    if (std::isfinite(xlo) && xlo > 0.0) v.edges.push_back(xlo);
    if (std::isfinite(xhi)) v.edges.push_back(xhi);
    if (s.kind == SegKind::plateau) continue;  // carries no density
    SegView sv;
    sv.xlo = xlo;
    sv.xhi = std::isfinite(xhi) ? xhi : kInf;
    sv.index = i;
    sv.block = s.block;
    if (auto c = d.chart(i); c && c->singular_left) {
      sv.singular = true;
      sv.mass = std::exp(c->log_mass);
    }
    v.dens.push_back(sv);
  }
  for (const auto& a : d.atoms()) {
    v.atoms.push_back(a);
    v.edges.push_back(a.x);
  }
  std::sort(v.dens.begin(), v.dens.end(),
            [](const SegView& a, const SegView& b) { return a.xlo < b.xlo; });
  std::sort(v.atoms.begin(), v.atoms.end(), [](const Atom& a, const Atom& b) { return a.x < b.x; });
  std::sort(v.edges.begin(), v.edges.end());
  v.edges.erase(std::unique(v.edges.begin(), v.edges.end()), v.edges.end());
  return v;
}

const SegView* find_seg(const DistView& v, double x) {
  for (const auto& s : v.dens) {
    if (x >= s.xlo && x < s.xhi) return &s;
  }
  return nullptr;
}

void accumulate(ConvPoint& out, const QuadResult& r, double scale = 1.0) {
  out.value += scale * r.value;
  out.err += scale * r.err;
  out.reliable = out.reliable && r.reliable;
}

// ---------------------------------------------------------------------------
// measure-side integral: int_{[lo,hi]} g dF  (density via charts + atoms)
// ---------------------------------------------------------------------------

ConvPoint integrate_against(const DistView& F, const std::function<double(double)>& g, double lo,
                            double hi, const std::vector<double>& cuts, const QuadConfig& cfg) {
  ConvPoint out;
  if (!(lo < hi) && !(lo == hi)) return out;
  for (const auto& s : F.dens) {
    const double a = std::max(lo, s.xlo);
    const double b = std::min(hi, s.xhi);
    if (!(a < b)) continue;
    if (s.singular) {
      const double ua = F.d->chart_u_of_x(s.index, a);
      const double ub = F.d->chart_u_of_x(s.index, b);
      std::vector<double> ucuts;
      for (double c : cuts) {
        if (c > a && c < b) ucuts.push_back(F.d->chart_u_of_x(s.index, c));
      }
      auto r = integrate([&](double u) { return g(F.d->chart_x_of_u(s.index, u)); },
                         std::min(ua, ub), std::max(ua, ub), ucuts, cfg);
      accumulate(out, r, s.mass);
    } else {
      auto r = integrate([&](double u) { return g(u) * F.d->density(u); }, a, b, cuts, cfg);
      accumulate(out, r);
    }
  }
  for (const auto& atom : F.atoms) {
    if (atom.x >= lo && atom.x <= hi) out.value += atom.mass * g(atom.x);
  }
  return out;
}

// ---------------------------------------------------------------------------
// density pieces: int f2(y) f1(x-y) dy on a cut-free subinterval, with the
// roles chosen so any endpoint singularity is absorbed by a chart
// ---------------------------------------------------------------------------

bool near_edge(double a, double b) { return std::abs(a - b) <= 1e-12 * (std::abs(b) + 1.0); }

ConvPoint density_piece(const DistView& v1, const DistView& v2, double x, double lo, double hi,
                        const QuadConfig& cfg, int depth) {
  ConvPoint out;
  const double mid = 0.5 * (lo + hi);
  const SegView* sy = find_seg(v2, mid);          // factor f2(y)
  const SegView* sr = find_seg(v1, x - mid);      // factor f1(x-y)
  if (!sy || !sr) return out;                      // a factor vanishes: exact 0
  const bool y_sing = sy->singular && near_edge(lo, sy->xlo);
  const bool r_sing = sr->singular && near_edge(x - hi, sr->xlo);
  if (y_sing && r_sing) {
    if (depth >= 4) { out.reliable = false; return out; }
    ConvPoint a = density_piece(v1, v2, x, lo, mid, cfg, depth + 1);
    ConvPoint b = density_piece(v1, v2, x, mid, hi, cfg, depth + 1);
    out.value = a.value + b.value;
    out.err = a.err + b.err;
    out.reliable = a.reliable && b.reliable;
    return out;
  }
  if (y_sing) {
    const double ua = v2.d->chart_u_of_x(sy->index, lo);
    const double ub = v2.d->chart_u_of_x(sy->index, hi);
    auto r = integrate(
        [&](double u) { return v1.d->density(x - v2.d->chart_x_of_u(sy->index, u)); },
        std::min(ua, ub), std::max(ua, ub), {}, cfg);
    accumulate(out, r, sy->mass);
    return out;
  }
  if (r_sing) {
    // reflect: w = x - y runs over [x-hi, x-lo] with the singularity at w = xlo
    const double ua = v1.d->chart_u_of_x(sr->index, x - hi);
    const double ub = v1.d->chart_u_of_x(sr->index, x - lo);
    auto r = integrate(
        [&](double u) { return v2.d->density(x - v1.d->chart_x_of_u(sr->index, u)); },
        std::min(ua, ub), std::max(ua, ub), {}, cfg);
    accumulate(out, r, sr->mass);
    return out;
  }
  auto r = integrate([&](double y) { return v2.d->density(y) * v1.d->density(x - y); }, lo, hi,
                     {}, cfg);
  accumulate(out, r);
  return out;
}

ConvPoint density_over(const DistView& v1, const DistView& v2, double x, double lo, double hi,
                       const QuadConfig& cfg) {
  ConvPoint out;
  if (!(lo < hi)) return out;
  std::vector<double> cuts;
  cuts.push_back(lo);
  cuts.push_back(hi);
  for (double e : v2.edges) {
    if (e > lo && e < hi) cuts.push_back(e);
  }
  for (double e : v1.edges) {
    const double c = x - e;
    if (c > lo && c < hi) cuts.push_back(c);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  for (size_t i = 0; i + 1 < cuts.size(); ++i) {
    ConvPoint p = density_piece(v1, v2, x, cuts[i], cuts[i + 1], cfg, 0);
    out.value += p.value;
    out.err += p.err;
    out.reliable = out.reliable && p.reliable;
  }
  return out;
}

double atom_cross_density(const DistView& v1, const DistView& v2, double x) {
  double s = 0.0;
  for (const auto& a : v2.atoms) s += a.mass * v1.d->density(x - a.x);
  for (const auto& a : v1.atoms) s += a.mass * v2.d->density(x - a.x);
  return s;
}

std::vector<double> tail_cuts(const DistView& v1, const DistView& v2, double x) {
  std::vector<double> cuts = v2.edges;
  for (double e : v1.edges) cuts.push_back(x - e);
  cuts.push_back(0.5 * x);
  return cuts;
}

}  // namespace

// ---------------------------------------------------------------------------
// pointwise engines
// ---------------------------------------------------------------------------

ConvPoint conv_density_point(const PiecewiseDist& f1, const PiecewiseDist& f2, double x,
                             const QuadConfig& cfg) {
  require(std::isfinite(x), "conv_density_point: x must be finite");
  ConvPoint out;
  const DistView v1 = make_view(f1);
  const DistView v2 = make_view(f2);
  if (x <= v1.sinf + v2.sinf) return out;
  out = density_over(v1, v2, x, 0.0, x, cfg);
  out.value += atom_cross_density(v1, v2, x);
  return out;
}

ConvPoint self_conv_density(const PiecewiseDist& f, double x, const QuadConfig& cfg) {
  require(std::isfinite(x), "self_conv_density: x must be finite");
  ConvPoint out;
  const DistView v = make_view(f);
  if (x <= 2.0 * v.sinf) return out;
  out = density_over(v, v, x, 0.5 * x, x, cfg);
  out.value *= 2.0;
  out.err *= 2.0;
  out.value += atom_cross_density(v, v, x);
  return out;
}

ConvPoint conv_tail_point(const PiecewiseDist& f1, const PiecewiseDist& f2, double x,
                          const QuadConfig& cfg) {
  require(std::isfinite(x), "conv_tail_point: x must be finite");
  const DistView v1 = make_view(f1);
  const DistView v2 = make_view(f2);
  if (x < v1.sinf + v2.sinf) return {1.0, 0.0, true};
  ConvPoint out = integrate_against(
      v2, [&](double u) { return f1.tail(x - u); }, 0.0, x, tail_cuts(v1, v2, x), cfg);
  out.value += f2.tail(x);
  return out;
}

// ---------------------------------------------------------------------------
// grids
// ---------------------------------------------------------------------------

namespace {

void push_log_spaced(std::vector<double>& out, double lo, double hi, int n) {
  if (!(lo < hi) || n <= 0) return;
  const double la = std::log(lo), lb = std::log(hi);
  for (int i = 0; i <= n; ++i) {
    out.push_back(std::exp(la + (lb - la) * i / n));
  }
}

std::vector<double> assemble_grid(const std::vector<double>& markers,
                                  const std::vector<double>& forced, double x_lo, double x_max,
                                  int per_block) {
  require(x_lo > 0.0 && x_max > x_lo, "conv grid: empty range");
  std::vector<double> bands{x_lo};
  for (double m : markers) {
    if (m > x_lo && m < x_max) bands.push_back(m);
  }
  bands.push_back(x_max);
  std::sort(bands.begin(), bands.end());
  bands.erase(std::unique(bands.begin(), bands.end()), bands.end());

  std::vector<double> grid;
  for (size_t i = 0; i + 1 < bands.size(); ++i) {
    push_log_spaced(grid, bands[i], bands[i + 1], per_block);
  }
  for (double f : forced) {
    if (f >= x_lo && f <= x_max) grid.push_back(f);
  }
  std::sort(grid.begin(), grid.end());
  // merge near-duplicates but keep deliberate pre-atom nodes (1e-12 apart)
  std::vector<double> out;
  for (double g : grid) {
    if (out.empty() || g - out.back() > 1e-14 * g) out.push_back(g);
  }
  require(out.size() >= 8, "conv grid: too few abscissae");
  return out;
}

std::vector<double> block_starts(const DistView& v) {
  std::vector<double> m;
  for (const auto& s : v.dens) m.push_back(s.xlo);
  for (const auto& a : v.atoms) m.push_back(a.x);
  std::sort(m.begin(), m.end());
  m.erase(std::unique(m.begin(), m.end()), m.end());
  return m;
}

std::vector<Atom> convolve_atoms(const std::vector<Atom>& a1, const std::vector<Atom>& a2) {
  std::map<double, double> sums;
  for (const auto& p : a1) {
    for (const auto& q : a2) sums[p.x + q.x] += p.mass * q.mass;
  }
  std::vector<Atom> out;
  for (const auto& [x, m] : sums) out.push_back({x, m});
  return out;
}

void parallel_for(size_t n, int threads, const std::function<void(size_t)>& body) {
  int nt = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  nt = std::clamp(nt, 1, 16);
  if (nt == 1 || n < 16) {
    for (size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < nt; ++t) {
    pool.emplace_back([&, t] {
      for (size_t i = static_cast<size_t>(t); i < n; i += static_cast<size_t>(nt)) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

std::vector<double> make_conv_grid(const PiecewiseDist& f, int order, const ConvGridSpec& spec) {
  require(order >= 1, "make_conv_grid: order >= 1");
  const DistView v = make_view(f);
  require(!v.edges.empty(), "make_conv_grid: distribution exposes no finite support edges");
  // one grid serves every fold up to `order`, so it starts where the order-2
  // stage needs it and carries the kink abscissae of all intermediate orders
  const double x_lo = std::min(order, 2) * v.sinf;
  const double x_max = std::isnan(spec.x_max) ? v.edges.back() * order : spec.x_max;

  std::vector<double> forced = v.edges;
  for (int m = 2; m <= order; ++m) {
    const double shift = (m - 2) * v.sinf;
    for (size_t i = 0; i < v.edges.size(); ++i) {
      for (size_t j = i; j < v.edges.size(); ++j) {
        forced.push_back(v.edges[i] + v.edges[j] + shift);
      }
      forced.push_back(v.edges[i] + (m - 1) * v.sinf);
    }
    // pre-atom nodes so the interpolant can resolve tail cliffs
    for (const auto& p : v.atoms) {
      for (const auto& q : v.atoms) {
        const double s = p.x + q.x + shift;
        forced.push_back(s);
        forced.push_back(s * (1.0 - 4e-13));
      }
    }
  }
  return assemble_grid(block_starts(v), forced, x_lo, x_max, spec.points_per_block);
}

std::vector<double> make_pair_grid(const PiecewiseDist& f1, const PiecewiseDist& f2,
                                   const ConvGridSpec& spec) {
  const DistView v1 = make_view(f1);
  const DistView v2 = make_view(f2);
  require(!v1.edges.empty() && !v2.edges.empty(), "make_pair_grid: no finite support edges");
  const double x_lo = v1.sinf + v2.sinf;
  const double x_max =
      std::isnan(spec.x_max) ? std::max(v1.edges.back(), v2.edges.back()) * 2.0 : spec.x_max;

  std::vector<double> markers = block_starts(v1);
  for (double m : block_starts(v2)) markers.push_back(m);

  std::vector<double> forced = v1.edges;
  forced.insert(forced.end(), v2.edges.begin(), v2.edges.end());
  for (double e1 : v1.edges) {
    for (double e2 : v2.edges) forced.push_back(e1 + e2);
  }
  for (const auto& p : v1.atoms) {
    for (const auto& q : v2.atoms) {
      forced.push_back(p.x + q.x);
      forced.push_back((p.x + q.x) * (1.0 - 4e-13));
    }
  }
  return assemble_grid(markers, forced, x_lo, x_max, spec.points_per_block);
}

// ---------------------------------------------------------------------------
// NumericConv
// ---------------------------------------------------------------------------

void NumericConv::finalize() {
  const size_t n = grid_.size();
  std::vector<double> lx(n), ltail(n);
  size_t keep = n;
  for (size_t i = 0; i < n; ++i) {
    if (tail_[i] <= 0.0) { keep = i; break; }
  }
  truncated_at_zero_ = keep < n;
  require(keep >= 8, "NumericConv: tail vanished too early for tabulation");
  if (keep < n) {
    grid_.resize(keep); dens_.resize(keep); dens_err_.resize(keep);
    tail_.resize(keep); tail_err_.resize(keep); block_.resize(keep);
  }
  lx.resize(keep); ltail.resize(keep);
  for (size_t i = 0; i < keep; ++i) {
    lx[i] = std::log(grid_[i]);
    ltail[i] = std::log(tail_[i]);
  }
  log_tail_interp_ = MonotoneCubic(lx, ltail);
  dens_interp_ = LinearTable(lx, dens_);
  dens_err_interp_ = LinearTable(lx, dens_err_);
  tail_err_interp_ = LinearTable(lx, tail_err_);
  flagged_.assign(keep, 0);
  for (size_t i = 0; i < keep; ++i) {
    const double tol_t = std::max(abs_tol_, rel_tol_ * tail_[i]);
    const double tol_d = std::max(abs_tol_, rel_tol_ * std::max(dens_[i], tail_[i]));
    if (tail_err_[i] > tol_t || dens_err_[i] > tol_d) flagged_[i] = 1;
  }
}

size_t NumericConv::flagged_count() const {
  size_t c = 0;
  for (uint8_t f : flagged_) c += f;
  return c;
}

double NumericConv::tail_at(double x) const {
  if (x < grid_.front()) return 1.0;
  require(x <= grid_.back(), "NumericConv: query beyond tabulated coverage");
  return std::exp(log_tail_interp_(std::log(x)));
}

double NumericConv::tail_err_at(double x) const {
  if (x < grid_.front()) return 0.0;
  require(x <= grid_.back(), "NumericConv: query beyond tabulated coverage");
  const double lxq = std::log(x);
  const double interp = log_tail_interp_.deviation(lxq) * std::exp(log_tail_interp_(lxq));
  return tail_err_interp_(lxq) + interp;
}

double NumericConv::density_at(double x) const {
  if (x < grid_.front()) return 0.0;
  require(x <= grid_.back(), "NumericConv: query beyond tabulated coverage");
  return std::max(0.0, dens_interp_(std::log(x)));
}

double NumericConv::density_err_at(double x) const {
  if (x < grid_.front()) return 0.0;
  require(x <= grid_.back(), "NumericConv: query beyond tabulated coverage");
  return dens_err_interp_(std::log(x));
}

void NumericConv::write_csv(std::ostream& os) const {
  os << "x,log_x,density,density_err,tail,tail_err,scale_block_index\n";
  os.precision(17);
  for (size_t i = 0; i < grid_.size(); ++i) {
    os << grid_[i] << ',' << std::log(grid_[i]) << ',' << dens_[i] << ',' << dens_err_[i] << ','
       << tail_[i] << ',' << tail_err_[i] << ',' << block_[i] << '\n';
  }
}

namespace {

std::vector<int> tag_blocks(const PiecewiseDist& f, const std::vector<double>& grid) {
  std::vector<int> out(grid.size(), -1);
  for (size_t i = 0; i < grid.size(); ++i) out[i] = scale_block_of(f, grid[i]);
  return out;
}

}  // namespace

NumericConv convolve_pair(DistPtr f1, DistPtr f2, std::vector<double> grid,
                          const ConvGridSpec& spec) {
  require(f1 && f2, "convolve_pair: null distribution");
  if (grid.empty()) {
    grid = (f1 == f2) ? make_conv_grid(*f1, 2, spec) : make_pair_grid(*f1, *f2, spec);
  }
  NumericConv nc;
  nc.order_ = 2;
  nc.base_ = f1;
  nc.second_ = f2;
  nc.grid_ = std::move(grid);
  nc.abs_tol_ = spec.quad.abs_tol;
  nc.rel_tol_ = spec.quad.rel_tol;
  const size_t n = nc.grid_.size();
  nc.dens_.assign(n, 0.0);
  nc.dens_err_.assign(n, 0.0);
  nc.tail_.assign(n, 0.0);
  nc.tail_err_.assign(n, 0.0);
  const bool self = (f1 == f2);
  parallel_for(n, spec.threads, [&](size_t i) {
    const double x = nc.grid_[i];
    const ConvPoint d = self ? self_conv_density(*f1, x, spec.quad)
                             : conv_density_point(*f1, *f2, x, spec.quad);
    const ConvPoint t = conv_tail_point(*f1, *f2, x, spec.quad);
    nc.dens_[i] = d.value;
    nc.dens_err_[i] = d.reliable ? d.err : std::max(d.err, d.value);
    nc.tail_[i] = t.value;
    nc.tail_err_[i] = t.reliable ? t.err : std::max(t.err, t.value);
  });
  nc.block_ = tag_blocks(*f1, nc.grid_);
  nc.atoms_ = convolve_atoms(f1->atoms(), f2->atoms());
  nc.finalize();
  return nc;
}

std::vector<NumericConv> nfold_ladder(DistPtr f, int order, std::vector<double> grid,
                                      const ConvGridSpec& spec) {
  require(f != nullptr, "nfold_ladder: null distribution");
  require(order >= 1, "nfold_ladder: order >= 1");
  // one shared grid covers orders >= 2; it starts at 2*support_inf because
  // every intermediate table is read by the next fold at arguments down to
  // that level, and below its own grid a table reports tail = 1, which is
  // only true below 2*support_inf for the order-2 stage
  if (grid.empty()) grid = make_conv_grid(*f, order, spec);
  const size_t n = grid.size();
  const DistView base_view = make_view(*f);

  std::vector<NumericConv> ladder;
  ladder.reserve(static_cast<size_t>(order));

  {  // order 1: the closed form, zero reported error, on its own grid that
     // reaches down to support_inf (the shared grid starts at twice that, and
     // a bounded-support tail can be identically zero there)
    const std::vector<double> grid1 = order == 1 ? grid : make_conv_grid(*f, 1, spec);
    const size_t n1 = grid1.size();
    NumericConv nc;
    nc.order_ = 1;
    nc.base_ = f;
    nc.second_ = f;
    nc.grid_ = grid1;
    nc.abs_tol_ = spec.quad.abs_tol;
    nc.rel_tol_ = spec.quad.rel_tol;
    nc.dens_.assign(n1, 0.0);
    nc.dens_err_.assign(n1, 0.0);
    nc.tail_.assign(n1, 0.0);
    nc.tail_err_.assign(n1, 0.0);
    for (size_t i = 0; i < n1; ++i) {
      nc.dens_[i] = f->density(grid1[i]);
      nc.tail_[i] = f->tail(grid1[i]);
    }
    nc.block_ = tag_blocks(*f, grid1);
    nc.atoms_ = f->atoms();
    nc.finalize();
    ladder.push_back(std::move(nc));
  }
  if (order >= 2) ladder.push_back(convolve_pair(f, f, grid, spec));

  QuadConfig loose;  // error-channel integrals need no precision of their own
  loose.abs_tol = 1e-300;
  loose.rel_tol = 1e-3;
  loose.max_subdivisions = 64;

  for (int m = 3; m <= order; ++m) {
    const NumericConv& prev = ladder.back();
    DistPtr prev_dist = make_tabulated(prev);
    const DistView prev_view = make_view(*prev_dist);
    NumericConv nc;
    nc.order_ = m;
    nc.base_ = f;
    nc.second_ = f;
    nc.grid_ = grid;
    nc.abs_tol_ = spec.quad.abs_tol;
    nc.rel_tol_ = spec.quad.rel_tol;
    nc.dens_.assign(n, 0.0);
    nc.dens_err_.assign(n, 0.0);
    nc.tail_.assign(n, 0.0);
    nc.tail_err_.assign(n, 0.0);
    parallel_for(n, spec.threads, [&](size_t i) {
      const double x = grid[i];
      const ConvPoint t = conv_tail_point(*prev_dist, *f, x, spec.quad);
      const ConvPoint d = conv_density_point(*prev_dist, *f, x, spec.quad);
      // propagate the previous table's own uncertainty through the fold
      const ConvPoint te = integrate_against(
          base_view, [&](double u) { return x - u <= prev.coverage_max() ? prev.tail_err_at(x - u) : 0.0; },
          0.0, x, {}, loose);
      const ConvPoint de = integrate_against(
          base_view, [&](double u) { return x - u <= prev.coverage_max() ? prev.density_err_at(x - u) : 0.0; },
          0.0, x, {}, loose);
      nc.tail_[i] = t.value;
      nc.tail_err_[i] = (t.reliable ? t.err : std::max(t.err, t.value)) + te.value;
      nc.dens_[i] = d.value;
      nc.dens_err_[i] = (d.reliable ? d.err : std::max(d.err, d.value)) + de.value;
    });
    nc.block_ = tag_blocks(*f, grid);
    nc.atoms_ = convolve_atoms(prev.conv_atoms(), f->atoms());
    nc.finalize();
    ladder.push_back(std::move(nc));
  }
  return ladder;
}

NumericConv nfold_tail(DistPtr f, int order, std::vector<double> grid, const ConvGridSpec& spec) {
  auto ladder = nfold_ladder(std::move(f), order, std::move(grid), spec);
  return std::move(ladder.back());
}

// ---------------------------------------------------------------------------
// tabulated adapter
// ---------------------------------------------------------------------------

namespace {

class TabulatedDist final : public PiecewiseDist {
 public:
  explicit TabulatedDist(NumericConv nc) : nc_(std::move(nc)) {
    // band edges: block transitions of the table plus coverage endpoints
    const auto& g = nc_.grid();
    const auto& b = nc_.block_index();
    band_lo_.push_back(g.front());
    band_block_.push_back(b.front());
    for (size_t i = 1; i < g.size(); ++i) {
      if (b[i] != b[i - 1]) {
        band_lo_.push_back(g[i]);
        band_block_.push_back(b[i]);
      }
    }
    band_lo_.push_back(g.back());
  }

  double density(double x) const override {
    if (!(x > 0.0) || !std::isfinite(x)) return 0.0;
    if (x >= nc_.coverage_max()) return 0.0;
    return nc_.density_at(x);
  }
  double tail(double x) const override {
    require(!std::isnan(x), "tail: x must not be NaN");
    if (!(x > 0.0)) return 1.0;
    if (x > nc_.coverage_max()) {
      // past a genuine zero of the tail the answer is exact; past a mere
      // grid end keep the last value (right-censored view)
      return nc_.truncated_at_zero() ? 0.0 : nc_.tail_at(nc_.coverage_max());
    }
    return nc_.tail_at(x);
  }
  double log_tail(double x) const override { return std::log(tail(x)); }
  double support_inf() const override { return nc_.coverage_min(); }
  double support_sup() const override { return nc_.coverage_max(); }
  std::vector<Segment> segments() const override {
    std::vector<Segment> out;
    for (size_t i = 0; i + 1 < band_lo_.size(); ++i) {
      Segment s;
      s.block = band_block_[i];
      s.kind = SegKind::density_block;
      s.log_lo = std::log(band_lo_[i]);
      s.log_hi = std::log(band_lo_[i + 1]);
      s.form = "tabulated fold, monotone-cubic tail / linear density";
      const double t_lo = nc_.tail_at(band_lo_[i]);
      const double t_hi = nc_.tail_at(band_lo_[i + 1]);
      s.log_mass = t_lo > t_hi ? std::log(t_lo - t_hi) : kNegInf;
      s.log_tail_hi = std::log(t_hi);
      out.push_back(s);
    }
    return out;
  }
  const char* kind() const override { return "tabulated-conv"; }
  std::vector<Atom> atoms() const override { return nc_.conv_atoms(); }

  const NumericConv& table() const { return nc_; }

 private:
  NumericConv nc_;
  std::vector<double> band_lo_;
  std::vector<int> band_block_;
};

}  // namespace

DistPtr make_tabulated(NumericConv nc) {
  return std::make_shared<TabulatedDist>(std::move(nc));
}

// ---------------------------------------------------------------------------
// diagnostics
// ---------------------------------------------------------------------------

int scale_block_of(const PiecewiseDist& f, double x) {
  if (!(x > 0.0)) return -1;
  const double lx = std::log(x);
  int best = -1;
  for (const auto& s : f.segments()) {
    if (lx >= s.log_lo && s.log_lo > kNegInf) best = s.block;
    if (lx >= s.log_lo && lx < s.log_hi) return s.block;
  }
  return best;
}

std::vector<double> make_scale_probe(const PiecewiseDist& f, int block_lo, int block_hi,
                                     int per_block) {
  require(block_lo <= block_hi, "make_scale_probe: bad block range");
  require(per_block >= 2, "make_scale_probe: need >= 2 points per block");
  // collect per-block x-extent from the segment table
  std::map<int, std::pair<double, double>> extent;
  for (const auto& s : f.segments()) {
    if (s.block < block_lo || s.block > block_hi) continue;
    const double lo = exp_or_inf(s.log_lo);
    const double hi = exp_or_inf(s.log_hi);
    if (!std::isfinite(lo) || !(lo > 0.0)) continue;
    auto [it, fresh] = extent.try_emplace(s.block, lo, std::isfinite(hi) ? hi : lo);
    if (!fresh) {
      it->second.first = std::min(it->second.first, lo);
      if (std::isfinite(hi)) it->second.second = std::max(it->second.second, hi);
    } else if (std::isfinite(hi)) {
      it->second.second = std::max(it->second.second, hi);
    }
  }
  require(extent.size() >= 3, "make_scale_probe: fewer than 3 resolvable blocks");
  std::vector<double> probe;
  for (const auto& [blk, ext] : extent) {
    const double lo = ext.first, hi = ext.second;
    if (!(hi > lo)) { probe.push_back(lo); continue; }
    const double pad = 1e-9;
    push_log_spaced(probe, lo * (1.0 + pad), hi * (1.0 - pad), per_block - 1);
  }
  std::sort(probe.begin(), probe.end());
  probe.erase(std::unique(probe.begin(), probe.end()), probe.end());
  return probe;
}

namespace {

CstarEstimate cstar_from_points(const std::vector<CstarProbePoint>& pts) {
  CstarEstimate est;
  est.trace = pts;
  std::map<int, double> per_block;
  for (const auto& p : pts) {
    auto [it, fresh] = per_block.try_emplace(p.block, p.ratio);
    if (!fresh) it->second = std::max(it->second, p.ratio);
  }
  require(per_block.size() >= 3, "cstar_estimate: probe covers fewer than 3 scale blocks");
  for (const auto& [b, r] : per_block) est.block_max.emplace_back(b, r);
  const int deepest = est.block_max.back().first;
  const int second = est.block_max[est.block_max.size() - 2].first;
  for (const auto& p : pts) {
    if ((p.block == deepest || p.block == second) && p.ratio > est.sup_ratio) {
      est.sup_ratio = p.ratio;
      est.arg = p.x;
    }
  }
  return est;
}

}  // namespace

CstarEstimate cstar_estimate(const PiecewiseDist& f, const std::vector<double>& probe,
                             const QuadConfig& cfg) {
  require(!probe.empty(), "cstar_estimate: empty probe");
  std::vector<CstarProbePoint> pts(probe.size());
  parallel_for(probe.size(), 0, [&](size_t i) {
    CstarProbePoint p;
    p.x = probe[i];
    p.block = scale_block_of(f, probe[i]);
    const ConvPoint t = conv_tail_point(f, f, probe[i], cfg);
    p.conv_tail = t.value;
    p.conv_err = t.err;
    p.base_tail = f.tail(probe[i]);
    require(p.base_tail > 0.0, "cstar_estimate: probe point beyond the support");
    p.ratio = p.conv_tail / p.base_tail;
    pts[i] = p;
  });
  return cstar_from_points(pts);
}

CstarEstimate cstar_estimate(const NumericConv& self_conv, const std::vector<double>& probe) {
  require(self_conv.order() == 2, "cstar_estimate: table must be an order-2 fold");
  require(self_conv.base() == self_conv.second(), "cstar_estimate: table must be a self-fold");
  require(!probe.empty(), "cstar_estimate: empty probe");
  const PiecewiseDist& f = *self_conv.base();
  std::vector<CstarProbePoint> pts;
  pts.reserve(probe.size());
  for (double x : probe) {
    if (x > self_conv.coverage_max()) continue;  // the table cannot speak there
    CstarProbePoint p;
    p.x = x;
    p.block = scale_block_of(f, x);
    p.conv_tail = self_conv.tail_at(x);
    p.conv_err = self_conv.tail_err_at(x);
    p.base_tail = f.tail(x);
    require(p.base_tail > 0.0, "cstar_estimate: probe point beyond the support");
    p.ratio = p.conv_tail / p.base_tail;
    pts.push_back(p);
  }
  require(!pts.empty(), "cstar_estimate: no probe point within table coverage");
  return cstar_from_points(pts);
}

TFunctional t_functional(const NumericConv& conv, double x) {
  require(conv.order() == 2, "t_functional: table must be an order-2 fold");
  require(std::isfinite(x) && x > 0.0, "t_functional: x must be positive finite");
  require(x <= conv.coverage_max(), "t_functional: x beyond tabulated coverage");
  TFunctional out;
  out.conv_tail = conv.tail_at(x);
  out.conv_tail_err = conv.tail_err_at(x);

  // composite panels over the table cells intersecting [x/2, x]
  const auto& g = conv.grid();
  std::vector<double> nodes{0.5 * x};
  for (double gx : g) {
    if (gx > 0.5 * x && gx < x) nodes.push_back(gx);
  }
  nodes.push_back(x);
  auto integrand = [&](double y) { return conv.tail_at(x - y) * conv.density_at(y); };
  QuadConfig cell_cfg;
  cell_cfg.max_subdivisions = 16;
  for (size_t i = 0; i + 1 < nodes.size(); ++i) {
    auto r = integrate(integrand, nodes[i], nodes[i + 1], {}, cell_cfg);
    out.t_value += r.value;
    out.t_err += r.err;
    out.reliable = out.reliable && r.reliable;
    // table-uncertainty channel, midpoint rule is plenty for an error bound
    const double mid = 0.5 * (nodes[i] + nodes[i + 1]);
    const double w = nodes[i + 1] - nodes[i];
    out.t_err += w * (conv.tail_err_at(x - mid) * conv.density_at(mid) +
                      conv.tail_at(x - mid) * conv.density_err_at(mid));
  }
  out.ratio = out.conv_tail > 0.0 ? out.t_value / out.conv_tail : kNaN;
  return out;
}

TFunctional t_functional(const PiecewiseDist& f, const NumericConv& conv, double x) {
  require(conv.base() && std::string(conv.base()->kind()) == f.kind(),
          "t_functional: table was built over a different distribution");
  return t_functional(conv, x);
}

}  // namespace htl
