#pragma once

#include "htl/dist.hpp"
#include "htl/scale_sequence.hpp"

namespace htl {

// Blockwise moment diagnostic: anchor-moment contributions C * a_n^{s-K} and
// the analytic verdict on finiteness of E xi^s.
struct MomentDiagnostic {
  bool finite = false;
  double s = 0;
  double threshold = 0;              // moments exist iff s < threshold
  double anchor_moment = kNaN;       // C * sum a_n^{s-alpha} over retained blocks
  std::vector<double> partial_sums;  // running blockwise sums (divergence is visible)
};

struct Family1Params {
  double alpha = 0.5;  // tail exponent, in [1/2, 1)
  double b = 1.0;      // shape of the in-block profile, > 0
  double t = 1.0;      // block width exponent (blocks end at 2^t a_n), >= 1
  double a = 3.0;      // anchor base
  int n_max = 6;       // last retained scale
  double trunc_tol = 1e-12;  // certified cap on dropped relative mass
};

// Multi-scale spike family: xi = eta * (1 + U^{1/b})^t with P(eta = a_n)
// proportional to a_n^{-alpha}. Density blocks [a_n, 2^t a_n), flat tail on
// [2^t a_n, a_{n+1}). Truncated at n_max and renormalized to total mass 1.
class Family1 final : public PiecewiseDist {
 public:
  explicit Family1(const Family1Params& p);

  double density(double x) const override;
  double tail(double x) const override;
  double log_tail(double x) const override;
  double log_tail_at_log(double log_x) const override;
  double support_inf() const override;
  double support_sup() const override;
  std::vector<Segment> segments() const override;
  const char* kind() const override { return "family1"; }
  std::string describe() const override;

  std::optional<Chart> chart(size_t segment_index) const override;
  double chart_x_of_u(size_t segment_index, double u) const override;
  double chart_u_of_x(size_t segment_index, double x) const override;

  MomentDiagnostic moment_diagnostic(double s) const;

  const Family1Params& params() const { return p_; }
  const ScaleSequence& scales() const { return seq_; }
  double norm_const() const { return std::exp(logC_); }
  double log_norm_const() const { return logC_; }
  // dropped-mass bound of the untruncated series relative to the retained sum
  double truncation_deficit() const { return trunc_deficit_; }
  // closed-form limit of tail(x-1)/tail(x) along block tops: b/t * 2^{1-t} + 1
  double ratio_limit() const;
  // exact shifted-tail ratio tail(2^t a_n - c) / tail(2^t a_n) at the top of
  // block n, evaluated via expm1/log1p so it stays exact at anchors where
  // x - c is no longer representable in double. Requires n < n_max (the last
  // block's top has zero tail) and c smaller than the block width.
  double block_top_shift_ratio(int n, double c) const;
  double log_block_mass(int n) const;  // log(C a_n^{-alpha})
  int block_count() const { return p_.n_max + 1; }

 private:
  Family1Params p_;
  ScaleSequence seq_;
  double logC_;
  double trunc_deficit_;
  std::vector<double> log_rest_;  // log(C * sum_{i>=n} a_i^{-alpha}), n = 0..n_max+1

  // segment index layout: 2n = density block n, 2n+1 = plateau after block n
  int locate_block(double lx) const;  // largest n with log a_n <= lx, or -1
  double log_tail_lx(double lx) const;
  double log_density_lx(double lx) const;
};

struct Family2Params {
  double alpha = 0.4;  // tail exponent, in ((t-1)/t, 1/t)
  double t = 1.5;      // in (1, 2)
  double a = 3.0;
  int n_max = 6;
  double trunc_tol = 1e-12;
};

// Compressed-block spike family: xi = (eta * (1 + U))^{1/t}. Density blocks
// [a_n^{1/t}, (2 a_n)^{1/t}) with density C t x^{t-1} a_n^{-alpha-1}.
class Family2 final : public PiecewiseDist {
 public:
  explicit Family2(const Family2Params& p);

  double density(double x) const override;
  double tail(double x) const override;
  double log_tail(double x) const override;
  double log_tail_at_log(double log_x) const override;
  double support_inf() const override;
  double support_sup() const override;
  std::vector<Segment> segments() const override;
  const char* kind() const override { return "family2"; }
  std::string describe() const override;

  MomentDiagnostic moment_diagnostic(double s) const;

  const Family2Params& params() const { return p_; }
  const ScaleSequence& scales() const { return seq_; }
  double norm_const() const { return std::exp(logC_); }
  double log_norm_const() const { return logC_; }
  double truncation_deficit() const { return trunc_deficit_; }
  int block_count() const { return p_.n_max + 1; }
  double log_block_mass(int n) const;

  // Regime metadata. The source construction prints two different parameter
  // intervals; both are exposed rather than silently choosing one.
  // regime: "os" when alpha in [1/2, 1/t), "non-os" when alpha in ((t-1)/t, 1/2).
  std::string regime() const;
  double interval_left_consistent() const { return (p_.t - 1.0) / p_.t; }
  double interval_left_printed() const { return (1.0 - p_.t) / p_.t; }
  bool interval_discrepancy_flag() const { return true; }

 private:
  Family2Params p_;
  ScaleSequence seq_;
  double logC_;
  double trunc_deficit_;
  std::vector<double> log_rest_;

  int locate_block(double lx) const;  // block via t*lx against log a_n
  double log_tail_lx(double lx) const;
  double log_density_lx(double lx) const;
};

}  // namespace htl
