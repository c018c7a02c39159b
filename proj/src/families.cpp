#include "htl/families.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace htl {

namespace {

// log(C * sum_{i>=n} a_i^{-alpha}) table for n = 0..n_max+1 (last entry -inf)
std::vector<double> rest_table(const ScaleSequence& seq, double alpha, double logC) {
  std::vector<double> rest(static_cast<size_t>(seq.n_max) + 2, kNegInf);
  for (int n = seq.n_max; n >= 0; --n) {
    rest[static_cast<size_t>(n)] =
        log_add(rest[static_cast<size_t>(n) + 1], -alpha * seq.log_anchors[static_cast<size_t>(n)]);
  }
  for (auto& v : rest) v += logC;
  return rest;
}

// Block-edge classification tolerance in the log domain. Boundaries such as
// log 6 - log 3 vs ln 2 differ by ulps; snapping keeps half-open block
// membership crisp for representable edge points (density jumps there, the
// tail is continuous, so the snap only relocates a measure-zero sliver).
double edge_snap(double lx) { return 1e-12 * (1.0 + std::abs(lx)); }

void check_truncation(const ScaleSequence& seq, double alpha, double tol, const char* what) {
  const double deficit = seq.truncation_rel_error(alpha);
  if (!(deficit <= tol)) {
    std::ostringstream os;
    os << what << ": n_max=" << seq.n_max << " leaves relative truncation error " << deficit
       << " above tolerance " << tol << " (increase n_max or relax trunc_tol)";
    throw Error(os.str());
  }
}

}  // namespace

// ---------------------------------------------------------------- Family1

Family1::Family1(const Family1Params& p) : p_(p) {
  require(p.alpha >= 0.5 && p.alpha < 1.0, "family1: alpha must lie in [1/2, 1)");
  require(p.b > 0.0 && std::isfinite(p.b), "family1: b must be positive");
  require(p.t >= 1.0 && std::isfinite(p.t), "family1: t must be >= 1");
  seq_ = build_scale_sequence(p.a, p.alpha, p.t, p.n_max);
  check_truncation(seq_, p.alpha, p.trunc_tol, "family1");
  logC_ = -seq_.log_tail_sum(p.alpha, 0);
  trunc_deficit_ = seq_.truncation_rel_error(p.alpha);
  log_rest_ = rest_table(seq_, p.alpha, logC_);
}

double Family1::support_inf() const { return p_.a; }

double Family1::support_sup() const {
  return std::exp(seq_.log_anchors.back() + p_.t * kLn2);
}

double Family1::ratio_limit() const { return p_.b / p_.t * std::exp2(1.0 - p_.t) + 1.0; }

double Family1::block_top_shift_ratio(int n, double c) const {
  require(n >= 0 && n < p_.n_max, "block_top_shift_ratio: need 0 <= n < n_max");
  require(c > 0.0 && std::isfinite(c), "block_top_shift_ratio: shift must be positive");
  const double lx = seq_.log_anchor(n) + p_.t * kLn2;  // log(2^t a_n)
  const double c_over_x = c * std::exp(-lx);
  // x - c must stay inside block n, i.e. c < (1 - 2^{-t}) x
  require(c_over_x < 1.0 - std::exp2(-p_.t), "block_top_shift_ratio: shift exceeds the block");
  // u(x-c) = (2 (1 - c/x)^{1/t} - 1)^b without forming x - c
  const double sm1 = std::expm1(std::log1p(-c_over_x) / p_.t);  // (1-c/x)^{1/t} - 1
  const double one_minus_u = -std::expm1(p_.b * std::log1p(2.0 * sm1));
  // tail(x) = C sum_{k>n} a_k^{-alpha}; tail(x-c) adds m_n (1 - u(x-c))
  return 1.0 + std::exp(log_block_mass(n) - log_rest_[static_cast<size_t>(n) + 1]) * one_minus_u;
}

double Family1::log_block_mass(int n) const {
  return logC_ - p_.alpha * seq_.log_anchor(n);
}

int Family1::locate_block(double lx) const {
  const auto& la = seq_.log_anchors;
  const double snapped = lx + edge_snap(lx);
  if (snapped < la[0]) return -1;
  auto it = std::upper_bound(la.begin(), la.end(), snapped);
  return static_cast<int>(it - la.begin()) - 1;
}

double Family1::log_density_lx(double lx) const {
  const int n = locate_block(lx);
  if (n < 0) return kNegInf;
  const double la = seq_.log_anchors[static_cast<size_t>(n)];
  const double dl = std::max(0.0, lx - la);  // log(x / a_n)
  if (dl >= p_.t * kLn2 - edge_snap(lx)) return kNegInf;  // plateau after block n
  // f = C b/t x^{1/t-1} a_n^{-alpha-1/t} u^{b-1},  u = (x/a_n)^{1/t} - 1
  const double u = std::expm1(dl / p_.t);
  double lu_pow;
  if (u <= 0.0) {
    if (p_.b > 1.0) return kNegInf;  // density vanishes at the block edge
    if (p_.b == 1.0)
      lu_pow = 0.0;
    else
      return kInf;  // integrable singularity at the edge
  } else {
    lu_pow = (p_.b - 1.0) * std::log(u);
  }
  return logC_ + std::log(p_.b / p_.t) + (1.0 / p_.t - 1.0) * lx +
         (-p_.alpha - 1.0 / p_.t) * la + lu_pow;
}

double Family1::log_tail_lx(double lx) const {
  const int n = locate_block(lx);
  if (n < 0) return 0.0;  // tail = 1 below support
  const double la = seq_.log_anchors[static_cast<size_t>(n)];
  const double dl = std::max(0.0, lx - la);
  if (dl >= p_.t * kLn2 - edge_snap(lx)) return log_rest_[static_cast<size_t>(n) + 1];
  // within the block: C*(rest_{n+1} + a_n^{-alpha} (1 - u^b)), cancellation-free
  const double u = std::expm1(dl / p_.t);
  double log_one_minus_ub;
  if (u <= 0.0)
    log_one_minus_ub = 0.0;
  else
    log_one_minus_ub = log1m_exp(std::min(0.0, p_.b * std::log(u)));
  const double in_block = logC_ - p_.alpha * la + log_one_minus_ub;
  return log_add(log_rest_[static_cast<size_t>(n) + 1], in_block);
}

double Family1::density(double x) const {
  if (!(x > 0.0) || !std::isfinite(x)) return 0.0;
  const double lf = log_density_lx(std::log(x));
  return lf == kInf ? kInf : std::exp(lf);
}

double Family1::tail(double x) const { return std::exp(log_tail(x)); }

double Family1::log_tail(double x) const {
  require(!std::isnan(x), "tail: x must not be NaN");
  if (!(x > 0.0)) return 0.0;
  if (x == kInf) return kNegInf;
  return log_tail_lx(std::log(x));
}

double Family1::log_tail_at_log(double log_x) const { return log_tail_lx(log_x); }

std::vector<Segment> Family1::segments() const {
  std::vector<Segment> out;
  const double lt2 = p_.t * kLn2;
  for (int n = 0; n <= p_.n_max; ++n) {
    const double la = seq_.log_anchors[static_cast<size_t>(n)];
    Segment blk;
    blk.block = n;
    blk.kind = SegKind::density_block;
    blk.log_lo = la;
    blk.log_hi = la + lt2;
    blk.log_mass = log_block_mass(n);
    blk.log_tail_hi = log_rest_[static_cast<size_t>(n) + 1];
    blk.form = "C*b/t * x^(1/t-1) * a^(-alpha-1/t) * ((x/a)^(1/t)-1)^(b-1)";
    blk.density_coeffs = {logC_ + std::log(p_.b / p_.t) + (-p_.alpha - 1.0 / p_.t) * la,
                          1.0 / p_.t - 1.0, p_.b - 1.0, la};
    blk.tail_coeffs = {log_rest_[static_cast<size_t>(n) + 1], logC_ - p_.alpha * la, p_.b, la};
    out.push_back(blk);

    Segment flat;
    flat.block = n;
    flat.kind = SegKind::plateau;
    flat.log_lo = la + lt2;
    flat.log_hi = n < p_.n_max ? seq_.log_anchors[static_cast<size_t>(n) + 1] : kInf;
    flat.log_mass = kNegInf;
    flat.log_tail_hi = log_rest_[static_cast<size_t>(n) + 1];
    flat.form = "tail constant";
    flat.tail_coeffs = {log_rest_[static_cast<size_t>(n) + 1]};
    out.push_back(flat);
  }
  return out;
}

std::optional<PiecewiseDist::Chart> Family1::chart(size_t segment_index) const {
  if (segment_index % 2 != 0) return std::nullopt;  // plateaus carry no mass
  const int n = static_cast<int>(segment_index / 2);
  if (n > p_.n_max) return std::nullopt;
  return Chart{log_block_mass(n), p_.b < 1.0};
}

double Family1::chart_x_of_u(size_t segment_index, double u) const {
  const int n = static_cast<int>(segment_index / 2);
  const double la = seq_.log_anchor(n);
  // x = a_n (1 + u^{1/b})^t
  return std::exp(la + p_.t * std::log1p(std::pow(u, 1.0 / p_.b)));
}

double Family1::chart_u_of_x(size_t segment_index, double x) const {
  const int n = static_cast<int>(segment_index / 2);
  const double la = seq_.log_anchor(n);
  const double w = std::expm1((std::log(x) - la) / p_.t);
  if (w <= 0.0) return 0.0;
  return std::min(1.0, std::pow(w, p_.b));
}

MomentDiagnostic Family1::moment_diagnostic(double s) const {
  require(s >= 0.0, "moment_diagnostic: s must be >= 0");
  MomentDiagnostic d;
  d.s = s;
  d.threshold = p_.alpha;
  // boundary resolved as divergent within 1e-12 relative slack
  d.finite = s < d.threshold * (1.0 - 1e-12);
  double run = 0.0;
  for (int n = 0; n <= p_.n_max; ++n) {
    run += std::exp(logC_ + (s - p_.alpha) * seq_.log_anchor(n));
    d.partial_sums.push_back(run);
  }
  d.anchor_moment = run;
  return d;
}

std::string Family1::describe() const {
  std::ostringstream os;
  os << "family1(alpha=" << p_.alpha << ", b=" << p_.b << ", t=" << p_.t << ", a=" << p_.a
     << ", n_max=" << p_.n_max << ")";
  return os.str();
}

// ---------------------------------------------------------------- Family2

Family2::Family2(const Family2Params& p) : p_(p) {
  require(p.t > 1.0 && p.t < 2.0, "family2: t must lie in (1,2)");
  require(p.alpha > (p.t - 1.0) / p.t && p.alpha < 1.0 / p.t,
          "family2: alpha must lie in ((t-1)/t, 1/t)");
  seq_ = build_scale_sequence(p.a, p.alpha, p.t, p.n_max);
  check_truncation(seq_, p.alpha, p.trunc_tol, "family2");
  logC_ = -seq_.log_tail_sum(p.alpha, 0);
  trunc_deficit_ = seq_.truncation_rel_error(p.alpha);
  log_rest_ = rest_table(seq_, p.alpha, logC_);
}

double Family2::support_inf() const { return std::exp(seq_.log_anchors[0] / p_.t); }

double Family2::support_sup() const {
  return std::exp((seq_.log_anchors.back() + kLn2) / p_.t);
}

double Family2::log_block_mass(int n) const {
  return logC_ - p_.alpha * seq_.log_anchor(n);
}

std::string Family2::regime() const {
  if (p_.alpha >= 0.5) return "os";
  return "non-os";
}

int Family2::locate_block(double lx) const {
  // block n covers t*lx in [log a_n, log a_n + ln 2)
  const double tlx = p_.t * lx;
  const auto& la = seq_.log_anchors;
  const double snapped = tlx + edge_snap(tlx);
  if (snapped < la[0]) return -1;
  auto it = std::upper_bound(la.begin(), la.end(), snapped);
  return static_cast<int>(it - la.begin()) - 1;
}

double Family2::log_density_lx(double lx) const {
  const int n = locate_block(lx);
  if (n < 0) return kNegInf;
  const double la = seq_.log_anchors[static_cast<size_t>(n)];
  const double dl = std::max(0.0, p_.t * lx - la);  // log(x^t / a_n)
  if (dl >= kLn2 - edge_snap(p_.t * lx)) return kNegInf;
  // f = C t x^{t-1} a_n^{-alpha-1}
  return logC_ + std::log(p_.t) + (p_.t - 1.0) * lx + (-p_.alpha - 1.0) * la;
}

double Family2::log_tail_lx(double lx) const {
  const int n = locate_block(lx);
  if (n < 0) return 0.0;
  const double la = seq_.log_anchors[static_cast<size_t>(n)];
  const double dl = std::max(0.0, p_.t * lx - la);
  if (dl >= kLn2 - edge_snap(p_.t * lx)) return log_rest_[static_cast<size_t>(n) + 1];
  // C*(rest_{n+1} + a_n^{-alpha} (1 - w)), w = x^t/a_n - 1
  const double w = std::expm1(dl);
  const double log_one_minus_w = w <= 0.0 ? 0.0 : std::log1p(-w);
  const double in_block = logC_ - p_.alpha * la + log_one_minus_w;
  return log_add(log_rest_[static_cast<size_t>(n) + 1], in_block);
}

double Family2::density(double x) const {
  if (!(x > 0.0) || !std::isfinite(x)) return 0.0;
  return std::exp(log_density_lx(std::log(x)));
}

double Family2::tail(double x) const { return std::exp(log_tail(x)); }

double Family2::log_tail(double x) const {
  require(!std::isnan(x), "tail: x must not be NaN");
  if (!(x > 0.0)) return 0.0;
  if (x == kInf) return kNegInf;
  return log_tail_lx(std::log(x));
}

double Family2::log_tail_at_log(double log_x) const { return log_tail_lx(log_x); }

std::vector<Segment> Family2::segments() const {
  std::vector<Segment> out;
  for (int n = 0; n <= p_.n_max; ++n) {
    const double la = seq_.log_anchors[static_cast<size_t>(n)];
    Segment blk;
    blk.block = n;
    blk.kind = SegKind::density_block;
    blk.log_lo = la / p_.t;
    blk.log_hi = (la + kLn2) / p_.t;
    blk.log_mass = log_block_mass(n);
    blk.log_tail_hi = log_rest_[static_cast<size_t>(n) + 1];
    blk.form = "C*t * x^(t-1) * a^(-alpha-1)";
    blk.density_coeffs = {logC_ + std::log(p_.t) + (-p_.alpha - 1.0) * la, p_.t - 1.0, la};
    blk.tail_coeffs = {log_rest_[static_cast<size_t>(n) + 1], logC_ - p_.alpha * la, la};
    out.push_back(blk);

    Segment flat;
    flat.block = n;
    flat.kind = SegKind::plateau;
    flat.log_lo = (la + kLn2) / p_.t;
    flat.log_hi = n < p_.n_max ? seq_.log_anchors[static_cast<size_t>(n) + 1] / p_.t : kInf;
    flat.log_mass = kNegInf;
    flat.log_tail_hi = log_rest_[static_cast<size_t>(n) + 1];
    flat.form = "tail constant";
    flat.tail_coeffs = {log_rest_[static_cast<size_t>(n) + 1]};
    out.push_back(flat);
  }
  return out;
}

MomentDiagnostic Family2::moment_diagnostic(double s) const {
  require(s >= 0.0, "moment_diagnostic: s must be >= 0");
  MomentDiagnostic d;
  d.s = s;
  d.threshold = p_.t * p_.alpha;
  d.finite = s < d.threshold * (1.0 - 1e-12);
  double run = 0.0;
  for (int n = 0; n <= p_.n_max; ++n) {
    // E eta^{s/t} contributions: C a_n^{s/t - alpha}
    run += std::exp(logC_ + (s / p_.t - p_.alpha) * seq_.log_anchor(n));
    d.partial_sums.push_back(run);
  }
  d.anchor_moment = run;
  return d;
}

std::string Family2::describe() const {
  std::ostringstream os;
  os << "family2(alpha=" << p_.alpha << ", t=" << p_.t << ", a=" << p_.a
     << ", n_max=" << p_.n_max << ", regime=" << regime() << ")";
  return os.str();
}

}  // namespace htl
