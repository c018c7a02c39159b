#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "htl/common.hpp"
#include "htl/extra_dists.hpp"
#include "htl/families.hpp"

namespace htl {

// Monte Carlo ground truth. Every law in this module is sampled through its
// defining random variables (block index + in-block uniform for the spike
// families, the smooth root-exponential variable swept onto atoms for the
// staircase), never by inverting the tabulated tail. That keeps the sampler
// an independent witness: when empirical tails match the closed forms and the
// quadrature tables, two unrelated computations agree.

// Deterministic 64-bit stream. The engine is the standard library's 64-bit
// Mersenne generator, whose output sequence is pinned bit-for-bit by the
// C++ standard, and the uniform mapping below is explicit arithmetic, so the
// uniform stream is identical on every platform; batches replay bit-exactly
// under a fixed toolchain (transformed values pass through libm, which may
// differ across platforms in the last ulp). Period 2^19937-1 with
// 311-dimensional equidistribution at 64-bit resolution, far past the 2^128
// floor this module's determinism contract asks for.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t bits() { return eng_(); }

  // Uniform on (0,1]: top 53 bits, shifted so 0 is excluded. log(u), log1p(u)
  // and u^(1/b) all stay finite; the missing endpoint 0 has measure zero.
  double u01() { return static_cast<double>((eng_() >> 11) + 1) * 0x1p-53; }

 private:
  std::mt19937_64 eng_;
};

// Decorrelated seed for sub-stream `index` of a base seed, via the splitmix64
// finalizer. Distinct indices give seeds with no low-dimensional structure,
// so parallel batches can be drawn from disjoint streams and merged.
std::uint64_t substream_seed(std::uint64_t base, std::uint64_t index);

// ---------------------------------------------------------------- samplers

// One-draw view of a samplable law. draw_log is always valid; draw (linear
// domain) is valid only when linear_ok(), i.e. when the top of the support
// is representable in double. Deep truncation depths push the last blocks
// past double range, in which case batches are kept in the log domain.
class XiSampler {
 public:
  virtual ~XiSampler() = default;
  virtual double draw_log(Rng& g) const = 0;  // log of one sample
  virtual bool linear_ok() const = 0;
  virtual double renormalization() const = 0;  // normalizing constant of the law
  virtual std::string describe() const = 0;
  // Linear-domain draw; throws when !linear_ok(). Default exponentiates
  // draw_log; laws with atoms override it so atom samples land bit-exactly on
  // the atom abscissa (a rounded atom would smear positive mass off a point
  // that tail thresholds compare against exactly).
  virtual double draw(Rng& g) const;
};

using SamplerPtr = std::shared_ptr<const XiSampler>;

SamplerPtr make_sampler(const Family1& f);
SamplerPtr make_sampler(const Family2& f);
SamplerPtr make_sampler(const StaircaseDist& d);

// ----------------------------------------------------------------- batches

// A reproducible draw: identical (seed, law parameters, n_samples) give a
// bit-identical batch. Draw order is preserved. Acceptance-grade statistics
// use n_samples >= 10^4; smaller batches are allowed for plumbing tests.
struct SampleBatch {
  std::uint64_t seed = 0;
  std::uint64_t n_samples = 0;
  bool log_domain = false;      // values hold log(sample) instead of sample
  double renormalization = 1.0; // normalizing constant of the truncated law
  std::string provenance;       // law, parameters, domain, stream layout
  std::vector<double> values;
};

SampleBatch sample_from(const SamplerPtr& s, std::uint64_t seed, std::uint64_t n_samples);

// Defining-variable samplers: block index eta from the cumulative normalized
// block masses (the same truncated, renormalized law the closed forms use;
// the constant is recorded), then one uniform shapes the in-block position.
SampleBatch sample_xi(const Family1& f, std::uint64_t seed, std::uint64_t n_samples);
SampleBatch sample_xi(const Family2& f, std::uint64_t seed, std::uint64_t n_samples);
SampleBatch sample_xi(const Family1Params& p, std::uint64_t seed, std::uint64_t n_samples);
SampleBatch sample_xi(const Family2Params& p, std::uint64_t seed, std::uint64_t n_samples);

// Staircase draw: W with tail exp(-sqrt(w)) via W = log(1/U)^2; a W landing
// inside a flattened band (x_n, y_n] is swept up to the atom at y_n, exactly
// the mass transport that defines the staircase law.
SampleBatch sample_staircase(const StaircaseDist& d, std::uint64_t seed,
                             std::uint64_t n_samples);

// Concatenation of sub-batches drawn from disjoint seed streams. Estimates
// over the merged batch are counts, so the part order does not matter; the
// merged seed records the first part's seed and provenance lists all parts.
SampleBatch merge_batches(const std::vector<SampleBatch>& parts);

// ------------------------------------------------------------- estimation

// Empirical tail P(X > x) with a 5-sigma binomial half-width.
//   interior:        ci = 5 * sqrt(p(1-p)/n)
//   no sample above: estimate 0, ci = 5/n   (one-sided bound, flagged)
//   every sample above: estimate 1, ci = 0  (x sits below the sampled range;
//                                            flagged one-sided)
// The zero-count bound 5/n continuously extends the interior width at one
// observed hit (~5/n) and is the honest reading of "nothing landed there".
struct TailEstimate {
  double x = kNaN;          // threshold, linear domain (+inf if past double range)
  double estimate = kNaN;   // fraction of samples strictly above x
  double ci_halfwidth = kNaN;
  std::uint64_t count = 0;  // samples above x
  bool one_sided = false;   // estimate hit 0 or 1
};

TailEstimate empirical_tail(const SampleBatch& b, double x);
// Threshold given in the log domain, for probing blocks past double range.
TailEstimate empirical_tail_at_log(const SampleBatch& b, double log_x);
// Whole curve against one sort of the batch; thresholds in linear domain.
std::vector<TailEstimate> empirical_tail_curve(const SampleBatch& b,
                                               const std::vector<double>& xs);

// ------------------------------------------------------ sums and compounds

// Number of summands for one compound draw. Called exactly once per sample,
// before the summand draws, so a constant counter consumes no randomness and
// the compound stream with tau == n is bit-identical to the plain n-fold one.
using CountSampler = std::function<std::uint64_t(Rng&)>;

// Batch of S = X_1 + ... + X_tau sums (linear domain; throws when the base
// law needs log-domain sampling, sums are desk-scale only).
SampleBatch sample_sum(const SamplerPtr& s, const CountSampler& draw_count,
                       std::uint64_t seed, std::uint64_t n_samples);

struct EmpiricalCurve {
  std::uint64_t seed = 0;
  std::uint64_t n_samples = 0;
  std::string provenance;
  std::vector<TailEstimate> points;
};

// Tail of the n-fold i.i.d. sum on x_grid. The independent cross-check for
// the quadrature tables. Requires n >= 2.
EmpiricalCurve empirical_conv_tail(const Family1& f, int n, std::uint64_t seed,
                                   std::uint64_t n_samples, const std::vector<double>& x_grid);
EmpiricalCurve empirical_conv_tail(const Family2& f, int n, std::uint64_t seed,
                                   std::uint64_t n_samples, const std::vector<double>& x_grid);
EmpiricalCurve empirical_conv_tail(const SamplerPtr& s, int n, std::uint64_t seed,
                                   std::uint64_t n_samples, const std::vector<double>& x_grid);

// Tail of the randomly-stopped sum S_tau on x_grid.
EmpiricalCurve empirical_compound_tail(const SamplerPtr& s, const CountSampler& draw_count,
                                       std::uint64_t seed, std::uint64_t n_samples,
                                       const std::vector<double>& x_grid);

// --------------------------------------------------------- bucket checks

// Coarse chi-square uniformity check over equal-width buckets of [lo, hi):
// within one density block of the step family (b=1, t=1) the law is uniform,
// so bucket counts should be flat. zscore = (stat - dof)/sqrt(2 dof); a
// healthy sampler stays within |zscore| <= 5.
struct Chi2Result {
  double stat = 0;
  int dof = 0;
  double zscore = 0;
  std::uint64_t total = 0;           // samples that landed in [lo, hi)
  std::vector<std::uint64_t> counts; // per-bucket occupancy
};

Chi2Result uniform_bucket_check(const SampleBatch& b, double lo, double hi, int buckets);

// ------------------------------------------------------------------ export

// Binary columnar batch: fixed header (magic, version, seed, count, domain
// flag, renormalization, provenance) followed by the raw value column.
// Host-endian working artifact, not an interchange format; read_batch
// validates magic, version and length and round-trips bit-exactly.
void write_batch(const std::string& path, const SampleBatch& b);
SampleBatch read_batch(const std::string& path);

// CSV tail summary of a batch at the given thresholds:
// x,estimate,ci_halfwidth,count,one_sided
void write_tail_csv(const std::string& path, const SampleBatch& b,
                    const std::vector<double>& xs);

}  // namespace htl
