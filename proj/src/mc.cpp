#include "htl/mc.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace htl {

std::uint64_t substream_seed(std::uint64_t base, std::uint64_t index) {
  // splitmix64 finalizer on the index-shifted seed: the standard recipe for
  // carving decorrelated engine seeds out of one reproducibility token
  std::uint64_t z = base + (index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double XiSampler::draw(Rng& g) const {
  require(linear_ok(), "draw: law extends past double range; use draw_log");
  return std::exp(draw_log(g));
}

// ---------------------------------------------------------------- samplers

namespace {

// cumulative masses of the discrete anchor law; the last entry is 1 up to
// summation rounding, and draws falling past it land in the last block
std::vector<double> cumulative_masses(const std::vector<double>& log_masses) {
  std::vector<double> cum(log_masses.size());
  double acc = 0.0;
  for (size_t i = 0; i < log_masses.size(); ++i) {
    acc += std::exp(log_masses[i]);
    cum[i] = acc;
  }
  return cum;
}

int pick_block(const std::vector<double>& cum, double u) {
  const auto it = std::lower_bound(cum.begin(), cum.end(), u);
  if (it == cum.end()) return static_cast<int>(cum.size()) - 1;
  return static_cast<int>(it - cum.begin());
}

class Family1Sampler final : public XiSampler {
 public:
  explicit Family1Sampler(Family1 f) : f_(std::move(f)) {
    std::vector<double> lm;
    lm.reserve(static_cast<size_t>(f_.block_count()));
    for (int n = 0; n < f_.block_count(); ++n) lm.push_back(f_.log_block_mass(n));
    cum_ = cumulative_masses(lm);
    linear_ok_ = std::isfinite(f_.support_sup());
  }

  double draw_log(Rng& g) const override {
    const int n = pick_block(cum_, g.u01());
    const double u = g.u01();
    const auto& p = f_.params();
    const double root = p.b == 1.0 ? u : std::pow(u, 1.0 / p.b);
    return f_.scales().log_anchor(n) + p.t * std::log1p(root);
  }

  bool linear_ok() const override { return linear_ok_; }
  double renormalization() const override { return f_.norm_const(); }

  std::string describe() const override {
    std::ostringstream os;
    os.precision(17);
    os << f_.describe() << " | C=" << f_.norm_const()
       << ", dropped-mass bound=" << f_.truncation_deficit()
       << " | block from cumulative anchor masses, then x = a_n (1+u^(1/b))^t";
    return os.str();
  }

 private:
  Family1 f_;
  std::vector<double> cum_;
  bool linear_ok_ = true;
};

class Family2Sampler final : public XiSampler {
 public:
  explicit Family2Sampler(Family2 f) : f_(std::move(f)) {
    std::vector<double> lm;
    lm.reserve(static_cast<size_t>(f_.block_count()));
    for (int n = 0; n < f_.block_count(); ++n) lm.push_back(f_.log_block_mass(n));
    cum_ = cumulative_masses(lm);
    linear_ok_ = std::isfinite(f_.support_sup());
  }

  double draw_log(Rng& g) const override {
    const int n = pick_block(cum_, g.u01());
    const double u = g.u01();
    return (f_.scales().log_anchor(n) + std::log1p(u)) / f_.params().t;
  }

  bool linear_ok() const override { return linear_ok_; }
  double renormalization() const override { return f_.norm_const(); }

  std::string describe() const override {
    std::ostringstream os;
    os.precision(17);
    os << f_.describe() << " | C=" << f_.norm_const()
       << ", dropped-mass bound=" << f_.truncation_deficit()
       << " | block from cumulative anchor masses, then x = (a_n (1+u))^(1/t)";
    return os.str();
  }

 private:
  Family2 f_;
  std::vector<double> cum_;
  bool linear_ok_ = true;
};

class StaircaseSampler final : public XiSampler {
 public:
  explicit StaircaseSampler(const StaircaseDist& d) : desc_(d.describe()) {
    const int depth = d.depth();
    slo_.reserve(static_cast<size_t>(depth));
    shi_.reserve(static_cast<size_t>(depth));
    atom_.reserve(static_cast<size_t>(depth));
    for (int n = 1; n <= depth; ++n) {
      slo_.push_back(std::sqrt(d.plateau_lo(n)));
      shi_.push_back(std::sqrt(d.plateau_hi(n)));
      atom_.push_back(d.plateau_hi(n));
    }
  }

  // W = log(1/u)^2 has tail exp(-sqrt(w)); a draw inside the flattened band
  // (x_n, y_n] is swept up to the atom at y_n (compared in the sqrt domain
  // where the band edges are stored exactly)
  double draw(Rng& g) const override {
    const double s = -std::log(g.u01());
    const auto it = std::lower_bound(shi_.begin(), shi_.end(), s);
    if (it != shi_.end()) {
      const size_t i = static_cast<size_t>(it - shi_.begin());
      if (s > slo_[i]) return atom_[i];
    }
    return s * s;
  }

  double draw_log(Rng& g) const override { return std::log(draw(g)); }
  bool linear_ok() const override { return true; }
  double renormalization() const override { return 1.0; }

  std::string describe() const override {
    return desc_ + " | W = log(1/u)^2 with plateau bands swept onto their atoms";
  }

 private:
  std::string desc_;
  std::vector<double> slo_, shi_, atom_;
};

}  // namespace

SamplerPtr make_sampler(const Family1& f) { return std::make_shared<Family1Sampler>(f); }
SamplerPtr make_sampler(const Family2& f) { return std::make_shared<Family2Sampler>(f); }
SamplerPtr make_sampler(const StaircaseDist& d) { return std::make_shared<StaircaseSampler>(d); }

// ----------------------------------------------------------------- batches

SampleBatch sample_from(const SamplerPtr& s, std::uint64_t seed, std::uint64_t n_samples) {
  require(s != nullptr, "sample_from: null sampler");
  require(n_samples >= 1, "sample_from: need at least one sample");
  SampleBatch b;
  b.seed = seed;
  b.n_samples = n_samples;
  b.log_domain = !s->linear_ok();
  b.renormalization = s->renormalization();
  b.values.resize(n_samples);
  Rng g(seed);
  if (b.log_domain) {
    for (auto& v : b.values) v = s->draw_log(g);
  } else {
    for (auto& v : b.values) v = s->draw(g);
  }
  std::ostringstream os;
  os << s->describe() << " | seed=" << seed << ", n=" << n_samples
     << (b.log_domain ? ", log-domain values" : ", linear values");
  b.provenance = os.str();
  return b;
}

SampleBatch sample_xi(const Family1& f, std::uint64_t seed, std::uint64_t n_samples) {
  return sample_from(make_sampler(f), seed, n_samples);
}

SampleBatch sample_xi(const Family2& f, std::uint64_t seed, std::uint64_t n_samples) {
  return sample_from(make_sampler(f), seed, n_samples);
}

SampleBatch sample_xi(const Family1Params& p, std::uint64_t seed, std::uint64_t n_samples) {
  return sample_xi(Family1(p), seed, n_samples);
}

SampleBatch sample_xi(const Family2Params& p, std::uint64_t seed, std::uint64_t n_samples) {
  return sample_xi(Family2(p), seed, n_samples);
}

SampleBatch sample_staircase(const StaircaseDist& d, std::uint64_t seed,
                             std::uint64_t n_samples) {
  return sample_from(make_sampler(d), seed, n_samples);
}

SampleBatch merge_batches(const std::vector<SampleBatch>& parts) {
  require(!parts.empty(), "merge_batches: no parts");
  SampleBatch out;
  out.seed = parts.front().seed;
  out.log_domain = parts.front().log_domain;
  out.renormalization = parts.front().renormalization;
  std::uint64_t total = 0;
  std::ostringstream os;
  os << "merge of " << parts.size() << " batches, seeds:";
  for (const auto& p : parts) {
    require(p.values.size() == p.n_samples, "merge_batches: inconsistent part");
    require(p.log_domain == out.log_domain, "merge_batches: mixed value domains");
    require(p.renormalization == out.renormalization,
            "merge_batches: parts come from different laws");
    total += p.n_samples;
    os << ' ' << p.seed;
  }
  out.n_samples = total;
  out.values.reserve(total);
  for (const auto& p : parts)
    out.values.insert(out.values.end(), p.values.begin(), p.values.end());
  os << " | " << parts.front().provenance;
  out.provenance = os.str();
  return out;
}

// ------------------------------------------------------------- estimation

namespace {

void check_batch(const SampleBatch& b, const char* who) {
  require(b.n_samples >= 1 && b.values.size() == b.n_samples,
          std::string(who) + ": empty or inconsistent batch");
}

// threshold expressed in the batch's value domain
double domain_threshold(const SampleBatch& b, double x) {
  if (!b.log_domain) return x;
  return x <= 0.0 ? kNegInf : std::log(x);
}

TailEstimate finish_estimate(const SampleBatch& b, double x, std::uint64_t above) {
  TailEstimate e;
  e.x = x;
  e.count = above;
  const double n = static_cast<double>(b.n_samples);
  if (above == b.n_samples) {
    e.estimate = 1.0;  // x sits below every draw: the batch pins nothing finer
    e.ci_halfwidth = 0.0;
    e.one_sided = true;
  } else if (above == 0) {
    e.estimate = 0.0;  // one-sided: true tail <= 5/n at the band's confidence
    e.ci_halfwidth = 5.0 / n;
    e.one_sided = true;
  } else {
    const double p = static_cast<double>(above) / n;
    e.estimate = p;
    e.ci_halfwidth = 5.0 * std::sqrt(p * (1.0 - p) / n);
  }
  return e;
}

}  // namespace

TailEstimate empirical_tail(const SampleBatch& b, double x) {
  check_batch(b, "empirical_tail");
  const double thr = domain_threshold(b, x);
  std::uint64_t above = 0;
  for (double v : b.values) above += v > thr ? 1u : 0u;
  return finish_estimate(b, x, above);
}

TailEstimate empirical_tail_at_log(const SampleBatch& b, double log_x) {
  check_batch(b, "empirical_tail_at_log");
  const double thr = b.log_domain ? log_x : std::exp(log_x);
  std::uint64_t above = 0;
  for (double v : b.values) above += v > thr ? 1u : 0u;
  return finish_estimate(b, std::exp(log_x), above);
}

std::vector<TailEstimate> empirical_tail_curve(const SampleBatch& b,
                                               const std::vector<double>& xs) {
  check_batch(b, "empirical_tail_curve");
  std::vector<double> sorted = b.values;
  std::sort(sorted.begin(), sorted.end());
  std::vector<TailEstimate> out;
  out.reserve(xs.size());
  for (double x : xs) {
    const double thr = domain_threshold(b, x);
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), thr);
    out.push_back(finish_estimate(b, x, static_cast<std::uint64_t>(sorted.end() - it)));
  }
  return out;
}

// ------------------------------------------------------ sums and compounds

SampleBatch sample_sum(const SamplerPtr& s, const CountSampler& draw_count,
                       std::uint64_t seed, std::uint64_t n_samples) {
  require(s != nullptr, "sample_sum: null sampler");
  require(static_cast<bool>(draw_count), "sample_sum: counting sampler required");
  require(n_samples >= 1, "sample_sum: need at least one sample");
  require(s->linear_ok(),
          "sample_sum: law extends past double range; sums are desk-scale only");
  SampleBatch b;
  b.seed = seed;
  b.n_samples = n_samples;
  b.renormalization = s->renormalization();
  b.values.resize(n_samples);
  Rng g(seed);
  for (auto& v : b.values) {
    const std::uint64_t k = draw_count(g);
    double acc = 0.0;
    for (std::uint64_t i = 0; i < k; ++i) acc += s->draw(g);
    v = acc;
  }
  std::ostringstream os;
  os << s->describe() << " | stopped sums, seed=" << seed << ", n=" << n_samples;
  b.provenance = os.str();
  return b;
}

namespace {

EmpiricalCurve sum_curve(const SamplerPtr& s, const CountSampler& draw_count,
                         std::uint64_t seed, std::uint64_t n_samples,
                         const std::vector<double>& x_grid, const std::string& label) {
  const SampleBatch b = sample_sum(s, draw_count, seed, n_samples);
  EmpiricalCurve out;
  out.seed = seed;
  out.n_samples = n_samples;
  out.provenance = label + " | " + b.provenance;
  out.points = empirical_tail_curve(b, x_grid);
  return out;
}

}  // namespace

EmpiricalCurve empirical_conv_tail(const SamplerPtr& s, int n, std::uint64_t seed,
                                   std::uint64_t n_samples,
                                   const std::vector<double>& x_grid) {
  require(n >= 2, "empirical_conv_tail: fold count must be >= 2");
  const std::uint64_t k = static_cast<std::uint64_t>(n);
  return sum_curve(
      s, [k](Rng&) { return k; }, seed, n_samples, x_grid,
      "i.i.d. " + std::to_string(n) + "-fold sum");
}

EmpiricalCurve empirical_conv_tail(const Family1& f, int n, std::uint64_t seed,
                                   std::uint64_t n_samples,
                                   const std::vector<double>& x_grid) {
  return empirical_conv_tail(make_sampler(f), n, seed, n_samples, x_grid);
}

EmpiricalCurve empirical_conv_tail(const Family2& f, int n, std::uint64_t seed,
                                   std::uint64_t n_samples,
                                   const std::vector<double>& x_grid) {
  return empirical_conv_tail(make_sampler(f), n, seed, n_samples, x_grid);
}

EmpiricalCurve empirical_compound_tail(const SamplerPtr& s, const CountSampler& draw_count,
                                       std::uint64_t seed, std::uint64_t n_samples,
                                       const std::vector<double>& x_grid) {
  return sum_curve(s, draw_count, seed, n_samples, x_grid, "randomly stopped sum");
}

// --------------------------------------------------------- bucket checks

Chi2Result uniform_bucket_check(const SampleBatch& b, double lo, double hi, int buckets) {
  check_batch(b, "uniform_bucket_check");
  require(buckets >= 2, "uniform_bucket_check: need at least two buckets");
  require(std::isfinite(lo) && std::isfinite(hi) && lo < hi,
          "uniform_bucket_check: bad range");
  Chi2Result r;
  r.counts.assign(static_cast<size_t>(buckets), 0);
  r.dof = buckets - 1;
  const double width = (hi - lo) / buckets;
  for (double v : b.values) {
    const double x = b.log_domain ? std::exp(v) : v;
    if (x < lo || x >= hi) continue;
    const int j = std::min(buckets - 1, static_cast<int>((x - lo) / width));
    ++r.counts[static_cast<size_t>(j)];
    ++r.total;
  }
  require(r.total > 0, "uniform_bucket_check: no samples in [lo, hi)");
  const double expected = static_cast<double>(r.total) / buckets;
  for (std::uint64_t c : r.counts) {
    const double d = static_cast<double>(c) - expected;
    r.stat += d * d / expected;
  }
  r.zscore = (r.stat - r.dof) / std::sqrt(2.0 * r.dof);
  return r;
}

// ------------------------------------------------------------------ export

namespace {

constexpr char kMagic[8] = {'H', 'T', 'L', 'B', 'A', 'T', 'C', 'H'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
void get(std::istream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof v);
}

}  // namespace

void write_batch(const std::string& path, const SampleBatch& b) {
  require(b.values.size() == b.n_samples, "write_batch: inconsistent batch");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(os.good(), "write_batch: cannot open " + path);
  os.write(kMagic, sizeof kMagic);
  put(os, kVersion);
  const std::uint32_t flags = b.log_domain ? 1u : 0u;
  put(os, flags);
  put(os, b.seed);
  put(os, b.n_samples);
  put(os, b.renormalization);
  const std::uint32_t plen = static_cast<std::uint32_t>(b.provenance.size());
  put(os, plen);
  os.write(b.provenance.data(), plen);
  os.write(reinterpret_cast<const char*>(b.values.data()),
           static_cast<std::streamsize>(sizeof(double) * b.values.size()));
  require(os.good(), "write_batch: write failed for " + path);
}

SampleBatch read_batch(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "read_batch: cannot open " + path);
  char magic[8] = {};
  is.read(magic, sizeof magic);
  require(is.good() && std::memcmp(magic, kMagic, sizeof kMagic) == 0,
          "read_batch: not a batch file: " + path);
  std::uint32_t version = 0;
  get(is, version);
  require(is.good() && version == kVersion, "read_batch: unsupported version");
  std::uint32_t flags = 0;
  SampleBatch b;
  get(is, flags);
  get(is, b.seed);
  get(is, b.n_samples);
  get(is, b.renormalization);
  std::uint32_t plen = 0;
  get(is, plen);
  require(is.good() && b.n_samples >= 1 && b.n_samples <= (1ull << 33) &&
              plen <= (1u << 20),
          "read_batch: corrupt header");
  b.log_domain = (flags & 1u) != 0;
  b.provenance.resize(plen);
  is.read(b.provenance.data(), plen);
  b.values.resize(b.n_samples);
  is.read(reinterpret_cast<char*>(b.values.data()),
          static_cast<std::streamsize>(sizeof(double) * b.n_samples));
  require(is.good(), "read_batch: truncated file");
  is.peek();
  require(is.eof(), "read_batch: trailing bytes after value column");
  return b;
}

void write_tail_csv(const std::string& path, const SampleBatch& b,
                    const std::vector<double>& xs) {
  const auto curve = empirical_tail_curve(b, xs);
  std::ofstream os(path, std::ios::trunc);
  require(os.good(), "write_tail_csv: cannot open " + path);
  os.precision(17);
  os << "x,estimate,ci_halfwidth,count,one_sided\n";
  for (const auto& e : curve) {
    os << e.x << ',' << e.estimate << ',' << e.ci_halfwidth << ',' << e.count << ','
       << (e.one_sided ? 1 : 0) << '\n';
  }
  require(os.good(), "write_tail_csv: write failed for " + path);
}

}  // namespace htl
