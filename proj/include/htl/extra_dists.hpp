#pragma once

#include "htl/dist.hpp"

namespace htl {

// Reference power tail: P(X > x) = (x/x0)^{-alpha} for x >= x0.
class Pareto final : public PiecewiseDist {
 public:
  Pareto(double alpha, double x0 = 1.0);
  double density(double x) const override;
  double tail(double x) const override;
  double log_tail(double x) const override;
  double log_tail_at_log(double log_x) const override;
  double support_inf() const override { return x0_; }
  std::vector<Segment> segments() const override;
  const char* kind() const override { return "pareto"; }
  std::string describe() const override;
  double alpha() const { return alpha_; }

 private:
  double alpha_, x0_;
};

// Light-tailed control: P(X > x) = e^{-lambda x}. Deliberately outside the
// heavy-tailed scope of every probe; used to exercise "out of scope" paths.
class ExpControl final : public PiecewiseDist {
 public:
  explicit ExpControl(double lambda = 1.0);
  double density(double x) const override;
  double tail(double x) const override;
  double log_tail(double x) const override;
  double support_inf() const override { return 0.0; }
  std::vector<Segment> segments() const override;
  const char* kind() const override { return "exponential"; }
  std::string describe() const override;
  double lambda() const { return lambda_; }

 private:
  double lambda_;
};

// Staircase flattening of the Weibull-type tail G(x) = exp(-sqrt(x)):
// flat on [x_n, y_n) at level G(x_n) = 2 G(y_n), an atom of mass G(y_n) at
// y_n, and the smooth tail elsewhere. sqrt(y_n) = sqrt(x_n) + ln 2,
// sqrt(x_{n+1}) = sqrt(y_n) + 1, x_1 = 1. One-step tail ratios stay bounded
// (the atoms force ratio 2) yet never settle to 1.
class StaircaseDist final : public PiecewiseDist {
 public:
  explicit StaircaseDist(int depth = 64);
  double density(double x) const override;
  double tail(double x) const override;
  double log_tail(double x) const override;
  double support_inf() const override { return 0.0; }
  std::vector<Segment> segments() const override;
  std::vector<Atom> atoms() const override;
  const char* kind() const override { return "staircase"; }
  std::string describe() const override;

  int depth() const { return depth_; }
  double plateau_lo(int n) const;  // x_n, 1-based
  double plateau_hi(int n) const;  // y_n

 private:
  int depth_;
  std::vector<double> sx_, sy_;  // sqrt(x_n), sqrt(y_n), 1-based at index 0
  int plateau_index(double s) const;  // containing/preceding plateau for sqrt(x)
};

// Companion tail G(x)/log(x+2) capped at 1; support starts at the crossing
// point x* where exp(-sqrt(x)) = log(x+2) (approx 0.0915).
class LogShavedRootExp final : public PiecewiseDist {
 public:
  LogShavedRootExp();
  double density(double x) const override;
  double tail(double x) const override;
  double log_tail(double x) const override;
  double support_inf() const override { return x_star_; }
  std::vector<Segment> segments() const override;
  const char* kind() const override { return "log_shaved_rootexp"; }
  std::string describe() const override;

 private:
  double x_star_;
};

struct StaircasePair {
  DistPtr f1;  // StaircaseDist
  DistPtr f2;  // LogShavedRootExp; tail is o(f1 tail)
};

StaircasePair build_staircase_ol_example(int depth = 64);

// Plateau/power hybrid whose one-step tail ratio at the plateau starts a_n
// equals 1/eps_{n-1} and blows up as eps -> 0. Tail: c_n on [a_n, b_n],
// d_n x^{-2 alpha} on (b_n, a_{n+1}), an atom at each a_{n+1}; the final power
// piece continues to infinity. Against the x^{-alpha} reference the tail
// oscillates between 2^n (at b_n) and 2^{-n+1} (at a_n-).
class PlateauPowerDist final : public PiecewiseDist {
 public:
  PlateauPowerDist(double alpha, std::vector<double> eps);
  double density(double x) const override;
  double tail(double x) const override;
  double log_tail(double x) const override;
  double log_tail_at_log(double log_x) const override;
  double support_inf() const override;
  std::vector<Segment> segments() const override;
  std::vector<Atom> atoms() const override;
  const char* kind() const override { return "plateau_power"; }
  std::string describe() const override;

  int depth() const { return static_cast<int>(log_c_.size()); }  // number of plateaus
  // recursion outputs, 1-based via index n-1
  double log_a(int n) const { return log_a_.at(static_cast<size_t>(n - 1)); }
  double log_b(int n) const { return log_b_.at(static_cast<size_t>(n - 1)); }
  double log_c(int n) const { return log_c_.at(static_cast<size_t>(n - 1)); }
  double log_d(int n) const { return log_d_.at(static_cast<size_t>(n - 1)); }

 private:
  double alpha_;
  std::vector<double> eps_;
  std::vector<double> log_a_, log_b_, log_c_, log_d_;
  double log_tail_lx(double lx) const;
};

struct NonOlExample {
  std::shared_ptr<const PlateauPowerDist> f1;
  std::shared_ptr<const Pareto> f2;  // the x^{-alpha} yardstick
  // recorded witness ratios F1/F2, 1-based position n
  std::vector<double> witness_at_b;  // = 2^n, exact by construction
  std::vector<double> witness_at_a;  // = 2^{-n+1} at a_n- (n >= 2)
};

NonOlExample build_non_ol_example(double alpha, const std::vector<double>& eps);

// Tail tilt L(x) = min(1, base_tail(x) * g(x)). With g(x) = 1 + 1/log(e+x)
// the tilt fades and L stays tail-equivalent to the base; with constant
// g = factor > 1 equivalence fails by design (precondition-violation probe).
class TiltedTailDist final : public PiecewiseDist {
 public:
  enum class Tilt { log_fade, constant };
  TiltedTailDist(DistPtr base, Tilt tilt, double factor = 2.0);
  double density(double x) const override;
  double tail(double x) const override;
  double log_tail(double x) const override;
  double support_inf() const override { return x_star_; }
  double support_sup() const override { return base_->support_sup(); }
  std::vector<Segment> segments() const override;
  const char* kind() const override { return "tilted"; }
  std::string describe() const override;

  double crossing_point() const { return x_star_; }
  double tilt_at(double x) const;

 private:
  DistPtr base_;
  Tilt tilt_;
  double factor_;
  double x_star_;  // smallest x with base_tail * g <= 1
};

}  // namespace htl
