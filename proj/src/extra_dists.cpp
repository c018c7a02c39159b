#include "htl/extra_dists.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace htl {

namespace {
double edge_snap(double v) { return 1e-12 * (1.0 + std::abs(v)); }
}  // namespace

// ------------------------------------------------------------------ Pareto

Pareto::Pareto(double alpha, double x0) : alpha_(alpha), x0_(x0) {
  require(alpha > 0.0 && std::isfinite(alpha), "pareto: alpha must be positive");
  require(x0 > 0.0 && std::isfinite(x0), "pareto: x0 must be positive");
}

double Pareto::density(double x) const {
  if (!(x > x0_) || !std::isfinite(x)) return 0.0;
  return alpha_ / x0_ * std::pow(x / x0_, -alpha_ - 1.0);
}

double Pareto::tail(double x) const { return std::exp(log_tail(x)); }

double Pareto::log_tail(double x) const {
  require(!std::isnan(x), "tail: x must not be NaN");
  if (!(x > x0_)) return 0.0;
  if (x == kInf) return kNegInf;
  return -alpha_ * (std::log(x) - std::log(x0_));
}

double Pareto::log_tail_at_log(double log_x) const {
  const double lx0 = std::log(x0_);
  return log_x <= lx0 ? 0.0 : -alpha_ * (log_x - lx0);
}

std::vector<Segment> Pareto::segments() const {
  Segment s;
  s.block = 0;
  s.kind = SegKind::smooth_tail;
  s.log_lo = std::log(x0_);
  s.log_hi = kInf;
  s.log_mass = 0.0;
  s.log_tail_hi = kNegInf;
  s.form = "(x/x0)^(-alpha)";
  s.tail_coeffs = {alpha_, std::log(x0_)};
  return {s};
}

std::string Pareto::describe() const {
  std::ostringstream os;
  os << "pareto(alpha=" << alpha_ << ", x0=" << x0_ << ")";
  return os.str();
}

// -------------------------------------------------------------- ExpControl

ExpControl::ExpControl(double lambda) : lambda_(lambda) {
  require(lambda > 0.0 && std::isfinite(lambda), "exponential: lambda must be positive");
}

double ExpControl::density(double x) const {
  if (!(x >= 0.0) || !std::isfinite(x)) return 0.0;
  return lambda_ * std::exp(-lambda_ * x);
}

double ExpControl::tail(double x) const { return std::exp(log_tail(x)); }

double ExpControl::log_tail(double x) const {
  require(!std::isnan(x), "tail: x must not be NaN");
  if (!(x > 0.0)) return 0.0;
  return -lambda_ * x;
}

std::vector<Segment> ExpControl::segments() const {
  Segment s;
  s.block = 0;
  s.kind = SegKind::smooth_tail;
  s.log_lo = kNegInf;
  s.log_hi = kInf;
  s.log_mass = 0.0;
  s.log_tail_hi = kNegInf;
  s.form = "exp(-lambda x)";
  s.tail_coeffs = {lambda_};
  return {s};
}

std::string ExpControl::describe() const {
  std::ostringstream os;
  os << "exponential(lambda=" << lambda_ << ")";
  return os.str();
}

// ----------------------------------------------------------- StaircaseDist

StaircaseDist::StaircaseDist(int depth) : depth_(depth) {
  // sqrt(x_n) grows by 1 + ln 2 per step; exp(-sqrt) underflows near 745
  require(depth >= 1 && depth <= 400, "staircase: depth must lie in [1, 400]");
  sx_.resize(static_cast<size_t>(depth));
  sy_.resize(static_cast<size_t>(depth));
  double s = 1.0;  // sqrt(x_1), x_1 = 1
  for (int n = 0; n < depth; ++n) {
    sx_[static_cast<size_t>(n)] = s;
    sy_[static_cast<size_t>(n)] = s + kLn2;
    s = s + kLn2 + 1.0;
  }
}

double StaircaseDist::plateau_lo(int n) const {
  const double s = sx_.at(static_cast<size_t>(n - 1));
  return s * s;
}

double StaircaseDist::plateau_hi(int n) const {
  const double s = sy_.at(static_cast<size_t>(n - 1));
  return s * s;
}

int StaircaseDist::plateau_index(double s) const {
  const double snapped = s + edge_snap(s);
  if (snapped < sx_[0]) return -1;
  auto it = std::upper_bound(sx_.begin(), sx_.end(), snapped);
  return static_cast<int>(it - sx_.begin()) - 1;
}

double StaircaseDist::density(double x) const {
  if (!(x > 0.0) || !std::isfinite(x)) return 0.0;
  const double s = std::sqrt(x);
  const int n = plateau_index(s);
  if (n >= 0 && s < sy_[static_cast<size_t>(n)] - edge_snap(s)) return 0.0;  // plateau
  return std::exp(-s) / (2.0 * s);
}

double StaircaseDist::tail(double x) const { return std::exp(log_tail(x)); }

double StaircaseDist::log_tail(double x) const {
  require(!std::isnan(x), "tail: x must not be NaN");
  if (!(x > 0.0)) return 0.0;
  if (x == kInf) return kNegInf;
  const double s = std::sqrt(x);
  const int n = plateau_index(s);
  if (n < 0) return -s;
  if (s < sy_[static_cast<size_t>(n)] - edge_snap(s)) return -sx_[static_cast<size_t>(n)];
  return -s;
}

std::vector<Atom> StaircaseDist::atoms() const {
  std::vector<Atom> out;
  out.reserve(sy_.size());
  for (double s : sy_) out.push_back({s * s, std::exp(-s)});
  return out;
}

std::vector<Segment> StaircaseDist::segments() const {
  std::vector<Segment> out;
  auto smooth = [](double llo, double lhi, double ltail_hi) {
    Segment s;
    s.kind = SegKind::smooth_tail;
    s.log_lo = llo;
    s.log_hi = lhi;
    s.log_tail_hi = ltail_hi;
    s.form = "exp(-sqrt(x))";
    return s;
  };
  // initial smooth piece (0, x_1)
  Segment head = smooth(kNegInf, 0.0, -sx_[0]);
  head.block = 0;
  head.log_mass = log1m_exp(-sx_[0]);
  out.push_back(head);
  for (int n = 0; n < depth_; ++n) {
    const double lx = 2.0 * std::log(sx_[static_cast<size_t>(n)]);
    const double ly = 2.0 * std::log(sy_[static_cast<size_t>(n)]);
    Segment flat;
    flat.block = n + 1;
    flat.kind = SegKind::plateau;
    flat.log_lo = lx;
    flat.log_hi = ly;
    flat.log_mass = kNegInf;
    flat.log_tail_hi = -sy_[static_cast<size_t>(n)];  // level after the atom
    flat.form = "tail constant";
    flat.tail_coeffs = {-sx_[static_cast<size_t>(n)]};
    out.push_back(flat);

    Segment atom;
    atom.block = n + 1;
    atom.kind = SegKind::atom;
    atom.log_lo = ly;
    atom.log_hi = ly;
    atom.log_mass = -sy_[static_cast<size_t>(n)];
    atom.log_tail_hi = -sy_[static_cast<size_t>(n)];
    atom.form = "atom";
    out.push_back(atom);

    const bool last = n + 1 == depth_;
    const double next_lx = last ? kInf : 2.0 * std::log(sx_[static_cast<size_t>(n) + 1]);
    Segment tail_piece = smooth(ly, next_lx, last ? kNegInf : -sx_[static_cast<size_t>(n) + 1]);
    tail_piece.block = n + 1;
    tail_piece.log_mass = last ? -sy_[static_cast<size_t>(n)]
                               : log_sub(-sy_[static_cast<size_t>(n)],
                                         -sx_[static_cast<size_t>(n) + 1]);
    out.push_back(tail_piece);
  }
  return out;
}

std::string StaircaseDist::describe() const {
  std::ostringstream os;
  os << "staircase(depth=" << depth_ << ")";
  return os.str();
}

// ------------------------------------------------------- LogShavedRootExp

LogShavedRootExp::LogShavedRootExp() {
  // crossing of exp(-sqrt(x)) and log(x+2); the quotient exceeds 1 below it
  x_star_ = bisect_crossing(
      [](double x) { return std::exp(-std::sqrt(x)) - std::log(x + 2.0); }, 0.0, 1.0);
}

double LogShavedRootExp::density(double x) const {
  if (!(x > x_star_) || !std::isfinite(x)) return 0.0;
  const double s = std::sqrt(x);
  const double lg = std::log(x + 2.0);
  return std::exp(-s) * (1.0 / (2.0 * s * lg) + 1.0 / ((x + 2.0) * lg * lg));
}

double LogShavedRootExp::tail(double x) const { return std::exp(log_tail(x)); }

double LogShavedRootExp::log_tail(double x) const {
  require(!std::isnan(x), "tail: x must not be NaN");
  if (!(x > x_star_)) return 0.0;
  if (x == kInf) return kNegInf;
  return std::min(0.0, -std::sqrt(x) - std::log(std::log(x + 2.0)));
}

std::vector<Segment> LogShavedRootExp::segments() const {
  Segment s;
  s.block = 0;
  s.kind = SegKind::smooth_tail;
  s.log_lo = std::log(x_star_);
  s.log_hi = kInf;
  s.log_mass = 0.0;
  s.log_tail_hi = kNegInf;
  s.form = "exp(-sqrt(x))/log(x+2)";
  return {s};
}

std::string LogShavedRootExp::describe() const { return "log_shaved_rootexp"; }

StaircasePair build_staircase_ol_example(int depth) {
  StaircasePair pair;
  pair.f1 = std::make_shared<StaircaseDist>(depth);
  pair.f2 = std::make_shared<LogShavedRootExp>();
  return pair;
}

// --------------------------------------------------------- PlateauPowerDist

PlateauPowerDist::PlateauPowerDist(double alpha, std::vector<double> eps)
    : alpha_(alpha), eps_(std::move(eps)) {
  require(alpha > 0.0 && std::isfinite(alpha), "plateau_power: alpha must be positive");
  require(!eps_.empty(), "plateau_power: need at least one eps step");
  for (size_t i = 0; i < eps_.size(); ++i) {
    require(eps_[i] > 0.0 && eps_[i] < 1.0, "plateau_power: eps must lie in (0,1)");
    if (i > 0) require(eps_[i] < eps_[i - 1], "plateau_power: eps must decrease strictly");
  }
  const int N = static_cast<int>(eps_.size()) + 1;  // plateaus
  log_a_.resize(static_cast<size_t>(N));
  log_b_.resize(static_cast<size_t>(N));
  log_c_.resize(static_cast<size_t>(N));
  log_d_.resize(static_cast<size_t>(N));
  log_a_[0] = 0.0;  // a_1 = 1
  log_c_[0] = 0.0;  // c_1 = 1
  log_b_[0] = kLn2 / alpha_;
  for (int n = 1; n <= N; ++n) {
    // d_n closes the power piece starting at b_n: continuity c_n = d_n b_n^{-2a}
    log_d_[static_cast<size_t>(n - 1)] =
        n * kLn2 + alpha_ * log_b_[static_cast<size_t>(n - 1)];
    if (n == N) break;
    log_a_[static_cast<size_t>(n)] = (log_d_[static_cast<size_t>(n - 1)] + n * kLn2) / alpha_;
    log_c_[static_cast<size_t>(n)] = log_d_[static_cast<size_t>(n - 1)] -
                                     2.0 * alpha_ * log_a_[static_cast<size_t>(n)] +
                                     std::log(eps_[static_cast<size_t>(n - 1)]);
    log_b_[static_cast<size_t>(n)] =
        ((n + 1) * kLn2 - log_c_[static_cast<size_t>(n)]) / alpha_;
  }
  require(std::isfinite(log_a_.back()) && std::isfinite(log_b_.back()),
          "plateau_power: recursion overflowed the log domain");
}

double PlateauPowerDist::support_inf() const { return std::exp(log_b_[0]); }

double PlateauPowerDist::log_tail_lx(double lx) const {
  const double snapped = lx + edge_snap(lx);
  if (snapped < log_a_[0]) return 0.0;
  auto it = std::upper_bound(log_a_.begin(), log_a_.end(), snapped);
  const int n = static_cast<int>(it - log_a_.begin()) - 1;  // position n+1, 0-based
  if (lx <= log_b_[static_cast<size_t>(n)] + edge_snap(lx)) {
    return log_c_[static_cast<size_t>(n)];  // plateau [a, b]
  }
  return log_d_[static_cast<size_t>(n)] - 2.0 * alpha_ * lx;  // power piece
}

double PlateauPowerDist::density(double x) const {
  if (!(x > 0.0) || !std::isfinite(x)) return 0.0;
  const double lx = std::log(x);
  const double snapped = lx + edge_snap(lx);
  if (snapped < log_a_[0]) return 0.0;
  auto it = std::upper_bound(log_a_.begin(), log_a_.end(), snapped);
  const int n = static_cast<int>(it - log_a_.begin()) - 1;
  if (lx <= log_b_[static_cast<size_t>(n)] + edge_snap(lx)) return 0.0;
  return std::exp(std::log(2.0 * alpha_) + log_d_[static_cast<size_t>(n)] -
                  (2.0 * alpha_ + 1.0) * lx);
}

double PlateauPowerDist::tail(double x) const { return std::exp(log_tail(x)); }

double PlateauPowerDist::log_tail(double x) const {
  require(!std::isnan(x), "tail: x must not be NaN");
  if (!(x > 0.0)) return 0.0;
  if (x == kInf) return kNegInf;
  return log_tail_lx(std::log(x));
}

double PlateauPowerDist::log_tail_at_log(double log_x) const { return log_tail_lx(log_x); }

std::vector<Atom> PlateauPowerDist::atoms() const {
  std::vector<Atom> out;
  for (size_t n = 1; n < log_a_.size(); ++n) {
    // drop from the incoming power piece d_{n-1} x^{-2a} to the plateau c_n
    const double pre = std::exp(log_d_[n - 1] - 2.0 * alpha_ * log_a_[n]);
    out.push_back({std::exp(log_a_[n]), pre * (1.0 - eps_[n - 1])});
  }
  return out;
}

std::vector<Segment> PlateauPowerDist::segments() const {
  std::vector<Segment> out;
  const int N = static_cast<int>(log_a_.size());
  for (int n = 0; n < N; ++n) {
    Segment flat;
    flat.block = n + 1;
    flat.kind = SegKind::plateau;
    flat.log_lo = log_a_[static_cast<size_t>(n)];
    flat.log_hi = log_b_[static_cast<size_t>(n)];
    flat.log_mass = kNegInf;
    flat.log_tail_hi = log_c_[static_cast<size_t>(n)];
    flat.form = "tail constant";
    flat.tail_coeffs = {log_c_[static_cast<size_t>(n)]};
    out.push_back(flat);

    const bool last = n + 1 == N;
    Segment pw;
    pw.block = n + 1;
    pw.kind = SegKind::smooth_tail;
    pw.log_lo = log_b_[static_cast<size_t>(n)];
    pw.log_hi = last ? kInf : log_a_[static_cast<size_t>(n) + 1];
    pw.log_tail_hi =
        last ? kNegInf
             : log_d_[static_cast<size_t>(n)] - 2.0 * alpha_ * log_a_[static_cast<size_t>(n) + 1];
    pw.form = "d x^(-2 alpha)";
    pw.tail_coeffs = {log_d_[static_cast<size_t>(n)], 2.0 * alpha_};
    pw.log_mass = last ? log_c_[static_cast<size_t>(n)]
                       : log_sub(log_c_[static_cast<size_t>(n)], pw.log_tail_hi);
    out.push_back(pw);

    if (!last) {
      Segment atom;
      atom.block = n + 2;
      atom.kind = SegKind::atom;
      atom.log_lo = log_a_[static_cast<size_t>(n) + 1];
      atom.log_hi = atom.log_lo;
      const double pre = log_d_[static_cast<size_t>(n)] -
                         2.0 * alpha_ * log_a_[static_cast<size_t>(n) + 1];
      atom.log_mass = pre + std::log1p(-eps_[static_cast<size_t>(n)]);
      atom.log_tail_hi = log_c_[static_cast<size_t>(n) + 1];
      atom.form = "atom";
      out.push_back(atom);
    }
  }
  return out;
}

std::string PlateauPowerDist::describe() const {
  std::ostringstream os;
  os << "plateau_power(alpha=" << alpha_ << ", depth=" << depth() << ")";
  return os.str();
}

NonOlExample build_non_ol_example(double alpha, const std::vector<double>& eps) {
  NonOlExample ex;
  ex.f1 = std::make_shared<PlateauPowerDist>(alpha, eps);
  ex.f2 = std::make_shared<Pareto>(alpha, 1.0);
  const int N = ex.f1->depth();
  for (int n = 1; n <= N; ++n) {
    ex.witness_at_b.push_back(std::exp(ex.f1->log_c(n) + alpha * ex.f1->log_b(n)));
    if (n >= 2) {
      ex.witness_at_a.push_back(
          std::exp(ex.f1->log_d(n - 1) - alpha * ex.f1->log_a(n)));
    }
  }
  return ex;
}

// ----------------------------------------------------------- TiltedTailDist

TiltedTailDist::TiltedTailDist(DistPtr base, Tilt tilt, double factor)
    : base_(std::move(base)), tilt_(tilt), factor_(factor) {
  require(base_ != nullptr, "tilted: base distribution required");
  require(base_->atoms().empty(), "tilted: base must be atomless");
  const auto segs = base_->segments();
  for (size_t i = 0; i < segs.size(); ++i) {
    auto c = base_->chart(i);
    require(!c || !c->singular_left, "tilted: base density must be bounded");
  }
  if (tilt_ == Tilt::constant) {
    require(factor_ > 1.0 && std::isfinite(factor_), "tilted: constant factor must exceed 1");
  }
  // smallest x where base_tail * g drops to 1; the product is nonincreasing
  double lo = std::max(0.0, base_->support_inf());
  double hi = std::max(1.0, lo + 1.0);
  auto over = [&](double x) { return base_->tail(x) * tilt_at(x) - 1.0; };
  int guard = 0;
  while (over(hi) > 0.0) {
    hi *= 2.0;
    require(++guard < 512, "tilted: no crossing below overflow");
  }
  x_star_ = over(lo) <= 0.0 ? lo : bisect_crossing(over, lo, hi);
}

double TiltedTailDist::tilt_at(double x) const {
  if (tilt_ == Tilt::constant) return factor_;
  return 1.0 + 1.0 / std::log(std::numbers::e + std::max(x, 0.0));
}

double TiltedTailDist::density(double x) const {
  if (!(x > x_star_) || !std::isfinite(x)) return 0.0;
  const double f = base_->density(x);
  if (tilt_ == Tilt::constant) return f * factor_;
  const double lg = std::log(std::numbers::e + x);
  return f * (1.0 + 1.0 / lg) + base_->tail(x) / ((std::numbers::e + x) * lg * lg);
}

double TiltedTailDist::tail(double x) const {
  require(!std::isnan(x), "tail: x must not be NaN");
  if (!(x > x_star_)) return 1.0;
  return std::min(1.0, base_->tail(x) * tilt_at(x));
}

double TiltedTailDist::log_tail(double x) const {
  require(!std::isnan(x), "tail: x must not be NaN");
  if (!(x > x_star_)) return 0.0;
  return std::min(0.0, base_->log_tail(x) + std::log(tilt_at(x)));
}

std::vector<Segment> TiltedTailDist::segments() const {
  std::vector<Segment> out;
  const double lstar = x_star_ > 0.0 ? std::log(x_star_) : kNegInf;
  Segment head;
  head.block = -1;
  head.kind = SegKind::plateau;
  head.log_lo = kNegInf;
  head.log_hi = lstar;
  head.log_mass = kNegInf;
  head.log_tail_hi = 0.0;
  head.form = "tail = 1 below the tilt crossing";
  out.push_back(head);
  for (const auto& s : base_->segments()) {
    if (s.log_hi <= lstar) continue;
    Segment c = s;
    c.log_lo = std::max(s.log_lo, lstar);
    c.form = "tilted: " + s.form;
    if (tilt_ != Tilt::constant && s.kind == SegKind::plateau) {
      // a fading tilt sheds mass even where the base is flat
      c.kind = SegKind::density_block;
      c.form = "tilted plateau: density from the fading tilt alone";
    }
    c.density_coeffs.clear();
    c.tail_coeffs.clear();
    const double lt_lo = log_tail(std::exp(c.log_lo));
    const double lt_hi = c.log_hi == kInf ? kNegInf : log_tail(std::exp(c.log_hi));
    c.log_tail_hi = lt_hi;
    c.log_mass = lt_lo > lt_hi ? log_sub(lt_lo, lt_hi) : kNegInf;
    out.push_back(c);
  }
  return out;
}

std::string TiltedTailDist::describe() const {
  std::ostringstream os;
  os << "tilted(" << base_->describe() << ", "
     << (tilt_ == Tilt::constant ? "constant" : "log_fade") << ")";
  return os.str();
}

}  // namespace htl
