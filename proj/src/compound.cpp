#include "htl/compound.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "htl/common.hpp"

namespace htl {

namespace {

// tail of a fold table with the censored-read convention of the tabulated
// adapter: 1 below coverage, last value (or exact 0) past the grid end
double table_tail(const NumericConv& nc, double x) {
  if (!(x > 0.0)) return 1.0;
  if (x > nc.coverage_max()) return nc.truncated_at_zero() ? 0.0 : nc.tail_at(nc.coverage_max());
  return nc.tail_at(x);
}

double table_tail_err(const NumericConv& nc, double x) {
  if (!(x > 0.0) || x < nc.coverage_min()) return 0.0;
  if (x > nc.coverage_max()) return nc.truncated_at_zero() ? 0.0 : nc.tail_err_at(nc.coverage_max());
  return nc.tail_err_at(x);
}

double table_density(const NumericConv& nc, double x) {
  if (!(x > 0.0) || x < nc.coverage_min() || x >= nc.coverage_max()) return 0.0;
  return nc.density_at(x);
}

double table_density_err(const NumericConv& nc, double x) {
  if (!(x > 0.0) || x < nc.coverage_min() || x >= nc.coverage_max()) return 0.0;
  return nc.density_err_at(x);
}

// sum_{j=k+1}^{infinity} j^{-beta} with the first Euler-Maclaurin corrections;
// relative error O(k^{-4}), evaluated in log space so huge k never underflows
// through the power. Valid for k >= 1.
double log_power_tail_sum(double beta, double k) {
  const double kp = k + 1.0;
  const double lead = (1.0 - beta) * std::log(kp) - std::log(beta - 1.0);
  // (1 + (beta-1)/(2 kp) + beta (beta-1)/(12 kp^2)) multiplies the leading term
  const double corr = (beta - 1.0) / (2.0 * kp) + beta * (beta - 1.0) / (12.0 * kp * kp);
  return lead + std::log1p(corr);
}

// direct summation of sum_{k=1}^inf k^{-s}, truncated when the remainder
// estimate drops below 1e-12 of the running sum; the remainder estimate is
// then added back so the result is far tighter than the stopping rule
double power_sum(double s) {
  require(s > 1.0, "power_sum: exponent must exceed 1 for a convergent series");
  double acc = 0.0;
  double k = 1.0;
  for (; k <= 1e7; ++k) {
    acc += std::pow(k, -s);
    if (k >= 64.0) {
      const double rem = std::exp(log_power_tail_sum(s, k));
      if (rem <= 1e-12 * acc) return acc + rem;
    }
  }
  return acc + std::exp(log_power_tail_sum(s, k - 1.0));
}

std::string kind_name(CountKind k) {
  switch (k) {
    case CountKind::poisson: return "poisson";
    case CountKind::geometric: return "geometric";
    case CountKind::power_law: return "power-law";
    case CountKind::finite: return "finite";
  }
  return "?";
}

}  // namespace

// ---------------------------------------------------------------------------
// counting laws
// ---------------------------------------------------------------------------

double CountingDist::log_pmf(long long k) const {
  if (k < 0) return kNegInf;
  const double kd = static_cast<double>(k);
  switch (kind) {
    case CountKind::poisson:
      if (mu == 0.0) return k == 0 ? 0.0 : kNegInf;
      return -mu + kd * std::log(mu) - std::lgamma(kd + 1.0);
    case CountKind::geometric:
      if (p == 0.0) return k == 0 ? 0.0 : kNegInf;
      return std::log(q) + kd * std::log(p);
    case CountKind::power_law:
      if (k == 0) return kNegInf;
      return std::log(K) - beta * std::log(kd);
    case CountKind::finite: {
      if (k >= static_cast<long long>(masses.size())) return kNegInf;
      const double m = masses[static_cast<size_t>(k)];
      return m > 0.0 ? std::log(m) : kNegInf;
    }
  }
  return kNegInf;
}

double CountingDist::pmf(long long k) const {
  if (kind == CountKind::finite) {
    if (k < 0 || k >= static_cast<long long>(masses.size())) return 0.0;
    return masses[static_cast<size_t>(k)];
  }
  return std::exp(log_pmf(k));
}

double CountingDist::log_tail(long long k) const {
  if (k < 0) return 0.0;  // P(tau > k) = 1
  const double kd = static_cast<double>(k);
  switch (kind) {
    case CountKind::poisson: {
      if (mu == 0.0) return kNegInf;
      // P(tau > k) = pmf(k+1) * (1 + mu/(k+2) + mu^2/((k+2)(k+3)) + ...);
      // the bracket is evaluated in the normal range, so no underflow
      double s = 1.0, term = 1.0;
      for (double j = kd + 2.0; term > 1e-18 * s && j < kd + 2e6; ++j) {
        term *= mu / j;
        s += term;
      }
      return log_pmf(k + 1) + std::log(s);
    }
    case CountKind::geometric:
      if (p == 0.0) return kNegInf;
      return (kd + 1.0) * std::log(p);
    case CountKind::power_law: {
      if (k == 0) return 0.0;  // support starts at 1 with total mass 1
      return std::log(K) + log_power_tail_sum(beta, kd);
    }
    case CountKind::finite: {
      double s = 0.0;
      for (long long j = static_cast<long long>(masses.size()) - 1; j > k; --j)
        s += masses[static_cast<size_t>(j)];
      return s > 0.0 ? std::log(s) : kNegInf;
    }
  }
  return kNegInf;
}

double CountingDist::tail(long long k) const {
  if (k < 0) return 1.0;
  if (kind == CountKind::finite) {
    double s = 0.0;
    for (long long j = static_cast<long long>(masses.size()) - 1; j > k; --j)
      s += masses[static_cast<size_t>(j)];
    return s;
  }
  return std::exp(log_tail(k));
}

double CountingDist::mean() const {
  switch (kind) {
    case CountKind::poisson: return mu;
    case CountKind::geometric: return p / q;
    case CountKind::power_law:
      require(beta > 2.0,
              "counting mean diverges for power-law exponent <= 2; use beta > 2 when a "
              "finite stopping mean is required");
      return K * power_sum(beta - 1.0);
    case CountKind::finite: {
      double s = 0.0;
      for (size_t j = 1; j < masses.size(); ++j) s += static_cast<double>(j) * masses[j];
      return s;
    }
  }
  return kNaN;
}

long long CountingDist::support_max() const {
  if (kind != CountKind::finite) return -1;
  for (long long j = static_cast<long long>(masses.size()) - 1; j >= 0; --j)
    if (masses[static_cast<size_t>(j)] > 0.0) return j;
  return 0;
}

std::string CountingDist::describe() const {
  std::ostringstream os;
  os << kind_name(kind) << " counting law";
  switch (kind) {
    case CountKind::poisson: os << ", rate " << mu; break;
    case CountKind::geometric: os << ", ratio " << p; break;
    case CountKind::power_law: os << ", exponent " << beta << ", norm " << K; break;
    case CountKind::finite: os << ", support 0.." << masses.size() - 1; break;
  }
  return os.str();
}

CountingDist poisson_counting(double mu) {
  require(std::isfinite(mu) && mu >= 0.0, "poisson_counting: rate must be finite and >= 0");
  CountingDist g;
  g.kind = CountKind::poisson;
  g.mu = mu;
  return g;
}

CountingDist geometric_counting(double p) {
  require(std::isfinite(p) && p >= 0.0 && p < 1.0, "geometric_counting: need 0 <= p < 1");
  CountingDist g;
  g.kind = CountKind::geometric;
  g.p = p;
  g.q = 1.0 - p;
  return g;
}

CountingDist power_law_counting(double beta) {
  require(std::isfinite(beta) && beta > 1.0,
          "power_law_counting: exponent must exceed 1 for a normalizable law");
  CountingDist g;
  g.kind = CountKind::power_law;
  g.beta = beta;
  g.K = 1.0 / power_sum(beta);
  return g;
}

CountingDist finite_counting(std::vector<double> masses) {
  require(!masses.empty(), "finite_counting: empty mass vector");
  double s = 0.0;
  for (double m : masses) {
    require(std::isfinite(m) && m >= 0.0, "finite_counting: masses must be finite and >= 0");
    s += m;
  }
  require(std::abs(s - 1.0) <= 1e-12, "finite_counting: masses must sum to 1 (within 1e-12)");
  CountingDist g;
  g.kind = CountKind::finite;
  g.masses = std::move(masses);
  return g;
}

// ---------------------------------------------------------------------------
// envelope
// ---------------------------------------------------------------------------

double kesten_envelope(double cstar_n, double eps0, int m) {
  require(std::isfinite(cstar_n) && cstar_n >= 2.0, "kesten_envelope: need cstar_n >= 2");
  require(std::isfinite(eps0) && eps0 > 0.0, "kesten_envelope: need eps0 > 0");
  require(m >= 1, "kesten_envelope: need m >= 1");
  return std::pow(cstar_n - 1.0 + eps0, static_cast<double>(m));
}

double calibrate_envelope_k(const std::vector<NumericConv>& ladder,
                            const std::vector<double>& probe, double cstar_n, double eps0) {
  require(ladder.size() >= 2, "calibrate_envelope_k: need at least the 2-fold table");
  require(std::isfinite(cstar_n) && cstar_n >= 2.0 && eps0 > 0.0,
          "calibrate_envelope_k: need cstar_n >= 2 and eps0 > 0");
  for (size_t i = 0; i < ladder.size(); ++i)
    require(ladder[i].order() == static_cast<int>(i) + 1,
            "calibrate_envelope_k: ladder must hold contiguous fold orders 1..k");
  const double rho = cstar_n - 1.0 + eps0;
  double k_env = 1.0 / rho;  // the m = 1 term: tail2 / (rho tail2)
  const NumericConv& two = ladder[1];
  for (size_t i = 3; i < ladder.size(); i += 2) {  // even orders 4, 6, ...
    const NumericConv& high = ladder[i];
    const double m = static_cast<double>(i + 1) / 2.0;
    const double growth = std::pow(rho, m);
    for (double x : probe) {
      const double t2 = table_tail(two, x);
      if (!(t2 > 1e-13)) continue;
      k_env = std::max(k_env, table_tail(high, x) / (growth * t2));
    }
  }
  return k_env;
}

// ---------------------------------------------------------------------------
// envelope series
// ---------------------------------------------------------------------------

SeriesCheck series_condition_check(const CountingDist& g, double cstar_n, double eps0, int n) {
  require(std::isfinite(cstar_n) && cstar_n >= 2.0, "series_condition_check: need cstar_n >= 2");
  require(std::isfinite(eps0) && eps0 > 0.0, "series_condition_check: need eps0 > 0");
  require(n >= 1, "series_condition_check: need block length n >= 1");

  SeriesCheck out;
  const double rho = cstar_n - 1.0 + eps0;
  std::ostringstream note;

  switch (g.kind) {
    case CountKind::poisson:
      out.finite = true;
      note << "finite: factorial pmf decay beats any geometric growth";
      break;
    case CountKind::geometric: {
      const double drift = std::pow(g.p, n) * rho;
      out.finite = drift < 1.0;
      note << (out.finite ? "finite" : "divergent") << ": block-to-block ratio p^n rho = "
           << drift << (out.finite ? " < 1" : " >= 1");
      break;
    }
    case CountKind::power_law:
      out.finite = false;
      note << "divergent: polynomial blocks ~ m^{-beta} against growth rho^m with rho = "
           << rho << " > 1";
      break;
    case CountKind::finite:
      out.finite = true;
      note << "finite: the counting law has bounded support, the series terminates";
      break;
  }
  out.note = note.str();

  // numeric partial sums as evidence (never the verdict)
  const double log_rho = std::log(rho);
  double acc = 0.0;
  int zero_blocks = 0;
  for (int m = 1; m <= 200; ++m) {
    double block = 0.0;
    for (long long k = static_cast<long long>(m - 1) * n + 1; k <= static_cast<long long>(m) * n;
         ++k)
      block += g.pmf(k);
    const double term = block * std::exp(static_cast<double>(m) * log_rho);
    acc += term;
    out.partial.push_back(acc);
    if (block == 0.0) {
      if (++zero_blocks >= 2) break;
    } else {
      zero_blocks = 0;
    }
    if (out.finite && m >= 8 && term <= 1e-16 * acc) break;
    if (!out.finite && (m >= 40 || acc > 1e15)) break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// stopped-sum tail bounds
// ---------------------------------------------------------------------------

ThmBounds thm_bounds(const CountingDist& g, double cstar2) {
  require(std::isfinite(cstar2) && cstar2 >= 2.0, "thm_bounds: need cstar2 >= 2");
  ThmBounds out;
  out.liminf_over_F = g.mean();  // throws when the stopping mean diverges

  // liminf floor: sum_m m (p_{2m} + p_{2m+1})   [floor(tau/2) indexing]
  {
    double acc = 0.0;
    int zero_run = 0;
    for (long long m = 1; m <= (1 << 20); ++m) {
      const double block = g.pmf(2 * m) + g.pmf(2 * m + 1);
      const double term = static_cast<double>(m) * block;
      acc += term;
      if (block == 0.0) {
        if (++zero_run >= 4 && g.kind == CountKind::finite) break;
      } else {
        zero_run = 0;
      }
      if (m >= 16 && term <= 1e-17 * acc && block > 0.0) break;
      if (m >= 16 && g.kind != CountKind::finite && term == 0.0) break;
    }
    out.liminf_over_F2 = acc;
  }

  // limsup ceiling: sum_m m (p_{2m-1} + p_{2m}) rho0^{m-1}   [ceil(tau/2)]
  const double rho0 = cstar2 - 1.0;
  const SeriesCheck gate = series_condition_check(g, cstar2, 0.1, 2);
  if (!gate.finite) {
    out.limsup_finite = false;
    out.limsup_over_F2 = kInf;
  } else {
    out.limsup_finite = true;
    const double log_rho0 = std::log(rho0);
    double acc = 0.0;
    int zero_run = 0;
    for (long long m = 1; m <= (1 << 20); ++m) {
      const double block = g.pmf(2 * m - 1) + g.pmf(2 * m);
      const double term =
          static_cast<double>(m) * block * std::exp(static_cast<double>(m - 1) * log_rho0);
      acc += term;
      if (block == 0.0) {
        if (++zero_run >= 4 && g.kind == CountKind::finite) break;
      } else {
        zero_run = 0;
      }
      if (m >= 16 && term <= 1e-17 * acc && block > 0.0) break;
      if (m >= 16 && g.kind != CountKind::finite && term == 0.0) break;
    }
    out.limsup_over_F2 = acc;
  }

  std::ostringstream note;
  note << "liminf_over_F2 uses the floor(tau/2) block indexing (p_{2m}+p_{2m+1}); the "
          "limsup series and the published closed-form lower value use the ceil(tau/2) "
          "indexing (p_{2m-1}+p_{2m}); both conventions are exposed";
  if (g.kind == CountKind::poisson) {
    const double m = g.mu;
    out.remark_lower = m + 0.5 * (-std::expm1(-2.0 * m));
    const double r = std::sqrt(rho0);
    const double ep = std::exp(m * (r - 1.0));
    const double en = std::exp(-m * (r + 1.0));
    out.remark_upper = (m + 1.0) / (2.0 * r) * (ep - en) + 0.5 * m * (ep + en);
    note << "; poisson closed forms populated (remark_upper = 2 * limsup_over_F2)";
  }
  out.note = note.str();
  return out;
}

// ---------------------------------------------------------------------------
// compound spec
// ---------------------------------------------------------------------------

CompoundSpec::CompoundSpec(DistPtr base, CountingDist counting, std::vector<NumericConv> ladder,
                           double cstar2, CompoundConfig cfg)
    : base_(std::move(base)),
      counting_(std::move(counting)),
      ladder_(std::move(ladder)),
      cfg_(cfg),
      cstar2_(cstar2) {
  require(base_ != nullptr, "CompoundSpec: null base distribution");
  require(!ladder_.empty(), "CompoundSpec: empty fold ladder");
  for (size_t i = 0; i < ladder_.size(); ++i)
    require(ladder_[i].order() == static_cast<int>(i) + 1,
            "CompoundSpec: ladder must hold contiguous fold orders 1..k");
  require(cfg_.max_quad_order >= 1, "CompoundSpec: need max_quad_order >= 1");
  require(cfg_.eps > 0.0 && cfg_.eps0 > 0.0, "CompoundSpec: need eps > 0 and eps0 > 0");

  orders_exact_ = std::min<int>(static_cast<int>(ladder_.size()), cfg_.max_quad_order);
  const long long smax = counting_.support_max();
  const bool need_envelope = (smax < 0) || (smax > orders_exact_);

  if (!need_envelope) {
    trunc_m_ = std::max<long long>(2, smax);
    return;
  }

  require(std::isfinite(cstar2_) && cstar2_ >= 2.0,
          "CompoundSpec: a counting law reaching past the fold tables needs cstar2 (the "
          "2-fold tail-ratio bound) for the order envelope; none was given");
  require(ladder_.size() >= 2, "CompoundSpec: the order envelope needs the 2-fold table");
  const SeriesCheck sc = series_condition_check(counting_, cstar2_, cfg_.eps0, 2);
  require(sc.finite,
          "CompoundSpec: the order-envelope series diverges for this counting law, so no "
          "certified truncation exists; use a lighter stopping law or finite support");

  env_rho_ = cstar2_ - 1.0 + cfg_.eps0;

  // probe for the envelope constant: a thinned copy of the 2-fold grid
  const auto& grid2 = ladder_[1].grid();
  std::vector<double> probe;
  const size_t stride = std::max<size_t>(1, grid2.size() / 256);
  for (size_t i = 0; i < grid2.size(); i += stride) probe.push_back(grid2[i]);
  env_k_ = calibrate_envelope_k(ladder_, probe, cstar2_, cfg_.eps0);

  // x-free certification: computed part >= s_low * tail2(x) pointwise, and the
  // beyond-M bound is (coefficient) * tail2(x), so the eps test divides out
  double s_low = 0.0;
  for (int n = 2; n <= orders_exact_; ++n) s_low += counting_.pmf(n);
  require(s_low > 0.0,
          "CompoundSpec: certified truncation needs counting mass on orders 2..max_quad_order");

  const double log_rho = std::log(env_rho_);
  // suffix[j] approximates sum_{n > M_j} p_n rho^{ceil(n/2)}; build the full
  // weight list first, then scan for the smallest certifiable M
  std::vector<double> w;  // w[n] for n = 0.., weight p_n rho^{ceil(n/2)}
  double total = 0.0;
  {
    int flat = 0;
    for (long long n = 0; n <= 100000; ++n) {
      const double lw = counting_.log_pmf(n) +
                        std::ceil(static_cast<double>(n) / 2.0) * log_rho;
      const double wn = std::exp(lw);
      w.push_back(wn);
      total += wn;
      if (n > 2 * orders_exact_ && (wn <= 1e-18 * total || wn == 0.0)) {
        if (++flat >= 4) break;
      } else {
        flat = 0;
      }
    }
  }
  double suffix = 0.0;
  std::vector<double> suf(w.size() + 1, 0.0);
  for (size_t i = w.size(); i-- > 0;) {
    suffix += w[i];
    suf[i] = suffix;
  }
  trunc_m_ = -1;
  const int m_lo = std::max(2, orders_exact_);
  for (int m = m_lo; m <= cfg_.max_m; ++m) {
    const double rem =
        env_k_ * (m + 1 < static_cast<int>(suf.size()) ? suf[static_cast<size_t>(m) + 1] : 0.0);
    if (rem <= cfg_.eps * s_low) {
      trunc_m_ = m;
      rem_coeff_ = rem;
      break;
    }
  }
  require(trunc_m_ >= 2,
          "CompoundSpec: no truncation point within max_m reached the certified remainder "
          "target; raise max_m or eps");
}

CompoundPoint CompoundSpec::tail(double x) const {
  require(!std::isnan(x), "CompoundSpec::tail: x must not be NaN");
  CompoundPoint out;
  out.x = x;
  out.orders_exact = orders_exact_;
  out.truncation_m = trunc_m_;
  if (x < 0.0) {  // the whole law lives on [0, inf)
    out.value_low = out.value_high = 1.0;
    out.table_err = 0.0;
    return out;
  }

  // exact part: order 1 from the closed form, orders 2.. from the tables
  double low = 0.0, err = 0.0;
  if (orders_exact_ >= 1) low += counting_.pmf(1) * base_->tail(x);
  for (int n = 2; n <= orders_exact_; ++n) {
    const NumericConv& t = ladder_[static_cast<size_t>(n) - 1];
    const double pn = counting_.pmf(n);
    low += pn * table_tail(t, x);
    err += pn * table_tail_err(t, x);
  }
  out.value_low = low;
  out.table_err = err;

  // envelope part: orders orders_exact_+1 .. M, each a bound clamped at p_n
  double env = 0.0;
  if (trunc_m_ > orders_exact_) {
    const double t2 = table_tail(ladder_[1], x);
    const double log_rho = std::log(env_rho_);
    for (int n = orders_exact_ + 1; n <= trunc_m_; ++n) {
      const double pn = counting_.pmf(n);
      if (pn == 0.0) continue;
      const double bound =
          env_k_ * std::exp(std::ceil(static_cast<double>(n) / 2.0) * log_rho) * t2;
      env += pn * std::min(1.0, bound);
    }
    out.trunc_bound = std::min(counting_.tail(trunc_m_), rem_coeff_ * t2);
  } else {
    out.trunc_bound = counting_.tail(trunc_m_);  // exactly zero for finite laws
  }
  out.envelope_part = env;
  out.value_high = out.value_low + env + out.trunc_bound;
  return out;
}

void CompoundSpec::write_csv(std::ostream& os, const std::vector<double>& xs) const {
  os << "x,log_x,density,density_err,tail,tail_err,scale_block_index,trunc_bound,"
        "orders_computed\n";
  os.precision(17);
  for (double x : xs) {
    const CompoundPoint pt = tail(x);
    double dens = 0.0, dens_err = 0.0;
    if (x > 0.0) {
      if (orders_exact_ >= 1) dens += counting_.pmf(1) * base_->density(x);
      for (int n = 2; n <= orders_exact_; ++n) {
        const NumericConv& t = ladder_[static_cast<size_t>(n) - 1];
        dens += counting_.pmf(n) * table_density(t, x);
        dens_err += counting_.pmf(n) * table_density_err(t, x);
      }
    }
    const double tail_err = pt.table_err + (pt.value_high - pt.value_low);
    os << x << ',' << (x > 0.0 ? std::log(x) : kNegInf) << ',' << dens << ',' << dens_err << ','
       << pt.value_low << ',' << tail_err << ',' << scale_block_of(*base_, x) << ','
       << pt.trunc_bound << ',' << pt.orders_exact << '\n';
  }
}

CompoundPoint compound_tail(const CompoundSpec& spec, double x) { return spec.tail(x); }

// ---------------------------------------------------------------------------
// compound Poisson
// ---------------------------------------------------------------------------

CompoundPoint levy_compound_tail(const CompoundSpec& poisson_spec, double x) {
  require(poisson_spec.counting().kind == CountKind::poisson,
          "levy_compound_tail: the spec must carry a poisson counting law");
  return poisson_spec.tail(x);
}

CompoundPoint levy_compound_tail(DistPtr dist, double mu, double x,
                                 const ConvGridSpec& grid_spec) {
  require(dist != nullptr, "levy_compound_tail: null distribution");
  std::vector<NumericConv> lad = nfold_ladder(dist, 4, {}, grid_spec);
  // spot-check overload: the 2-fold ratio bound is calibrated from the tables
  // themselves (max of tail4/tail2 over the grid), not supplied externally
  double cstar2 = 2.0;
  const NumericConv& two = lad[1];
  const NumericConv& four = lad[3];
  const auto& g = two.grid();
  for (size_t i = 0; i < g.size(); i += 7) {
    const double t2 = table_tail(two, g[i]);
    if (t2 > 1e-13) cstar2 = std::max(cstar2, table_tail(four, g[i]) / t2);
  }
  const CompoundSpec spec(std::move(dist), poisson_counting(mu), std::move(lad), cstar2);
  return spec.tail(x);
}

// ---------------------------------------------------------------------------
// mixture view
// ---------------------------------------------------------------------------

namespace {

class CompoundMixtureDist final : public PiecewiseDist {
 public:
  CompoundMixtureDist(DistPtr base, std::vector<DistPtr> comps, std::vector<double> w, double p0)
      : base_(std::move(base)), comps_(std::move(comps)), w_(std::move(w)), p0_(p0) {}

  double density(double x) const override {
    double s = 0.0;
    for (size_t i = 0; i < comps_.size(); ++i)
      if (w_[i] > 0.0) s += w_[i] * comps_[i]->density(x);
    return s;
  }
  double tail(double x) const override {
    if (x < 0.0) return 1.0;
    double s = 0.0;
    for (size_t i = 0; i < comps_.size(); ++i)
      if (w_[i] > 0.0) s += w_[i] * comps_[i]->tail(x);
    return s;
  }
  double log_tail(double x) const override { return std::log(tail(x)); }
  double support_inf() const override {
    if (p0_ > 0.0) return 0.0;
    double lo = kInf;
    for (size_t i = 0; i < comps_.size(); ++i)
      if (w_[i] > 0.0) lo = std::min(lo, comps_[i]->support_inf());
    return lo;
  }
  double support_sup() const override {
    double hi = 0.0;
    for (size_t i = 0; i < comps_.size(); ++i)
      if (w_[i] > 0.0) hi = std::max(hi, comps_[i]->support_sup());
    return hi;
  }
  // the deepest fold dominates every deep tail window, so its scale segments
  // are the ones the classifier probes should follow
  std::vector<Segment> segments() const override {
    for (size_t i = comps_.size(); i-- > 0;)
      if (w_[i] > 0.0) return comps_[i]->segments();
    return {};
  }
  std::vector<Atom> atoms() const override {
    std::vector<Atom> out;
    if (p0_ > 0.0) out.push_back(Atom{0.0, p0_});
    for (size_t i = 0; i < comps_.size(); ++i)
      for (const Atom& a : comps_[i]->atoms()) out.push_back(Atom{a.x, w_[i] * a.mass});
    return out;
  }
  const char* kind() const override { return "compound-mixture"; }
  std::string describe() const override {
    std::ostringstream os;
    os << "stopped-sum mixture over fold orders 1.." << comps_.size() << ", atom at 0 of mass "
       << p0_;
    return os.str();
  }

 private:
  DistPtr base_;
  std::vector<DistPtr> comps_;
  std::vector<double> w_;
  double p0_;
};

}  // namespace

DistPtr compound_as_dist(const CompoundSpec& spec) {
  const CountingDist& g = spec.counting();
  const long long smax = g.support_max();
  require(smax >= 0, "compound_as_dist: needs a finite counting law");
  require(smax <= spec.orders_exact(),
          "compound_as_dist: counting support must fit inside the computed fold orders");
  require(smax >= 1, "compound_as_dist: the mixture needs mass on order >= 1");
  std::vector<DistPtr> comps;
  std::vector<double> w;
  for (long long n = 1; n <= smax; ++n) {
    w.push_back(g.pmf(n));
    comps.push_back(n == 1 ? spec.base()
                           : make_tabulated(spec.ladder()[static_cast<size_t>(n) - 1]));
  }
  return std::make_shared<CompoundMixtureDist>(spec.base(), std::move(comps), std::move(w),
                                               g.pmf(0));
}

// ---------------------------------------------------------------------------
// growth margin
// ---------------------------------------------------------------------------

std::vector<double> counting_growth_margin(const CountingDist& g, const NumericConv& conv2,
                                           double a, const std::vector<double>& xs) {
  require(std::isfinite(a) && a > 0.0, "counting_growth_margin: need a > 0");
  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs) {
    require(x > 0.0, "counting_growth_margin: probe points must be positive");
    const double t2 = table_tail(conv2, x);
    if (!(t2 > 0.0)) {
      out.push_back(kNegInf);
      continue;
    }
    const long long k = static_cast<long long>(std::floor(a * x));
    out.push_back(g.log_tail(k) - 0.5 * std::log(x) - std::log(t2));
  }
  return out;
}

}  // namespace htl
