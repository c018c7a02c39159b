#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "htl/classlab.hpp"
#include "htl/conv.hpp"
#include "htl/extra_dists.hpp"
#include "htl/families.hpp"

using namespace htl;

namespace {

std::shared_ptr<Family1> f1_ref() {
  static auto f = [] {
    Family1Params p;
    p.n_max = 3;
    return std::make_shared<Family1>(p);
  }();
  return f;
}

// order-2 self-fold over the full default range: classify + crosscheck grade
const NumericConv& conv2_full() {
  static NumericConv c = [] {
    ConvGridSpec spec;
    spec.points_per_block = 192;
    return convolve_pair(f1_ref(), f1_ref(), make_conv_grid(*f1_ref(), 2, spec), spec);
  }();
  return c;
}

// short-range table at full density: pointwise probe + transfer grade
const NumericConv& conv2_dense() {
  static NumericConv c = [] {
    ConvGridSpec spec;
    spec.points_per_block = 256;
    spec.x_max = 4.0e5;
    return convolve_pair(f1_ref(), f1_ref(), make_conv_grid(*f1_ref(), 2, spec), spec);
  }();
  return c;
}

std::shared_ptr<ExpControl> exp_ref() {
  static auto e = std::make_shared<ExpControl>(1.0);
  return e;
}

ClassifyConfig exp_config() {
  ClassifyConfig cfg;
  cfg.windows = {{1, 2}, {2, 4}, {4, 8}, {8, 16}};
  return cfg;
}

const NumericConv& exp_conv2() {
  static NumericConv c = [] {
    std::vector<double> g;
    for (int i = 0; i <= 800; ++i)
      g.push_back(std::exp(std::log(0.05) + (std::log(40.0) - std::log(0.05)) * i / 800.0));
    ConvGridSpec spec;
    spec.points_per_block = 192;
    return convolve_pair(exp_ref(), exp_ref(), g, spec);
  }();
  return c;
}

std::shared_ptr<Family2> f2_spread() {  // alpha below 1/2: the fold stays unbounded
  static auto f = [] {
    Family2Params p;
    p.alpha = 0.4;
    p.n_max = 3;
    return std::make_shared<Family2>(p);
  }();
  return f;
}

std::shared_ptr<Family2> f2_folding() {  // alpha above 1/2 needs a wider base step
  static auto f = [] {
    Family2Params p;
    p.alpha = 0.55;
    p.a = 5.0;
    p.n_max = 3;
    return std::make_shared<Family2>(p);
  }();
  return f;
}

const NumericConv& f2_fold(const std::shared_ptr<Family2>& f) {
  auto build = [](const std::shared_ptr<Family2>& b) {
    ConvGridSpec spec;
    spec.points_per_block = 128;
    return convolve_pair(b, b, make_conv_grid(*b, 2, spec), spec);
  };
  static NumericConv spread = build(f2_spread());
  static NumericConv folding = build(f2_folding());
  return f.get() == f2_spread().get() ? spread : folding;
}

const ClassReport& rep_f1() {
  static ClassReport r = classify(*f1_ref(), {});
  return r;
}

const ClassReport& rep_conv2() {
  static ClassReport r = classify(conv2_full(), {});
  return r;
}

const ClassReport& rep_exp() {
  static ClassReport r = classify(*exp_ref(), exp_config());
  return r;
}

const ClassReport& rep_gamma2() {
  static ClassReport r = classify(exp_conv2(), exp_config());
  return r;
}

const std::vector<ScaleMax>& maxima(const ClassReport& r, const char* cls) {
  const ClassVerdict* v = r.find(cls);
  REQUIRE(v != nullptr);
  return v->scale_maxima;
}

Verdict verdict_of(const ClassReport& r, const char* cls) {
  const ClassVerdict* v = r.find(cls);
  REQUIRE(v != nullptr);
  return v->verdict;
}

bool contains_near(const std::vector<double>& xs, double x, double tol) {
  return std::any_of(xs.begin(), xs.end(), [&](double v) { return std::fabs(v - x) <= tol; });
}

ClassReport synthetic_report(Verdict l, Verdict os) {
  ClassReport r;
  r.subject = "synthetic";
  ClassVerdict vl;
  vl.cls = "L";
  vl.verdict = l;
  ClassVerdict vos;
  vos.cls = "OS";
  vos.verdict = os;
  r.verdicts = {vl, vos};
  return r;
}

}  // namespace

TEST_CASE("verdict labels and report lookup") {
  CHECK(std::string(to_string(Verdict::consistent)) == "consistent");
  CHECK(std::string(to_string(Verdict::inconsistent)) == "inconsistent");
  CHECK(std::string(to_string(Verdict::inconclusive)) == "inconclusive");

  const ClassReport& r = rep_f1();
  CHECK(r.find("L") != nullptr);
  CHECK(r.find("OL") != nullptr);
  CHECK(r.find("OS") != nullptr);
  CHECK(r.find("D") != nullptr);
  CHECK(r.find("nope") == nullptr);
  CHECK(r.subject == f1_ref()->describe());
}

TEST_CASE("scale windows derive from the block ladder") {
  auto w = scale_windows(*f1_ref(), 0, 2);
  REQUIRE(w.size() == 3);
  CHECK(w[0].lo == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(w[0].hi == doctest::Approx(27.0).epsilon(1e-12));
  CHECK(w[1].hi == doctest::Approx(19683.0).epsilon(1e-12));
  CHECK(w[2].hi == doctest::Approx(7625597484987.0).epsilon(1e-12));

  // a terminal zero-tail run-out has no finite extent: the window must clamp
  // to the last abscissa that still carries tail mass
  Family2Params p;
  p.n_max = 2;
  p.trunc_tol = 1e-6;
  Family2 f2(p);
  auto w2 = scale_windows(f2, 0, 2);
  REQUIRE(w2.size() == 3);
  const double top = std::exp((std::log(2.0) + 12.25 * std::log(3.0)) / 1.5);
  CHECK(w2[2].hi == doctest::Approx(top).epsilon(1e-12));

  CHECK_THROWS(scale_windows(*f1_ref(), 2, 0));
  CHECK_THROWS(scale_windows(*f1_ref(), 0, 99));
}

TEST_CASE("window probe grid hits edges, offsets, and the deepest top") {
  auto w = scale_windows(*f1_ref(), 0, 2);
  auto g = window_probe_grid(*f1_ref(), w, 64, {1.0, 2.0, 4.0});
  REQUIRE(!g.empty());
  CHECK(std::is_sorted(g.begin(), g.end()));
  CHECK(std::adjacent_find(g.begin(), g.end()) == g.end());
  CHECK(g.front() >= 3.0 - 1e-9);

  // block-top edges and their shifted neighbours are probe points
  for (double x : {6.0, 5.0, 7.0, 2.0, 10.0, 54.0, 50.0, 58.0, 39366.0, 39362.0, 39370.0}) {
    if (x < 3.0) continue;
    CHECK(contains_near(g, x, 1e-6 * x));
  }
  // the deepest window owns its closing edge: no deeper window covers it
  CHECK(g.back() == doctest::Approx(7625597484987.0).epsilon(1e-12));

  auto capped = window_probe_grid(*f1_ref(), w, 64, {1.0}, 1.0e4);
  CHECK(capped.back() <= 1.0e4);

  CHECK_THROWS(window_probe_grid(*f1_ref(), w, 1, {1.0}));
  std::vector<ProbeWindow> bad = {{5.0, 2.0}};
  CHECK_THROWS(window_probe_grid(*f1_ref(), bad, 8, {1.0}));
  std::vector<ProbeWindow> overlap = {{1.0, 4.0}, {3.0, 9.0}};
  CHECK_THROWS(window_probe_grid(*f1_ref(), overlap, 8, {1.0}));

  // an uncovered closing edge joins its own window's grid
  auto we = exp_config().windows;
  auto ge = window_probe_grid(*exp_ref(), we, 8, {1.0});
  CHECK(ge.back() == doctest::Approx(16.0).epsilon(1e-15));
}

TEST_CASE("shifted ratios stay in the log domain") {
  auto w = scale_windows(*f1_ref(), 0, 2);
  auto g = window_probe_grid(*f1_ref(), w, 64, {1.0, 2.0, 4.0});
  auto tr = ratio_sweep(*f1_ref(), 1.0, g, w);
  REQUIRE(!tr.empty());
  for (const auto& p : tr) {
    CHECK(p.ratio >= 1.0);  // nonincreasing tail, positive shift
    CHECK(p.err == 0.0);    // analytic evaluation carries no table error
    CHECK(p.c == 1.0);
  }

  // plateau points are exactly shift-invariant, even at depth where naive
  // subtraction of tails would be pure cancellation noise
  auto flat = ratio_sweep(*f1_ref(), 1.0, {20.0, 1.0e6}, w);
  REQUIRE(flat.size() == 2);
  CHECK(flat[0].ratio == 1.0);
  CHECK(flat[1].ratio == 1.0);
  CHECK(flat[0].window == 0);
  CHECK(flat[1].window == 2);

  // table-backed sweep agrees with direct table reads and carries error bars
  auto tc = ratio_sweep(conv2_dense(), 1.0, {39368.0}, w);
  REQUIRE(tc.size() == 1);
  const double direct = conv2_dense().tail_at(39367.0) / conv2_dense().tail_at(39368.0);
  CHECK(tc[0].ratio == doctest::Approx(direct).epsilon(1e-12));
  CHECK(tc[0].err > 0.0);
}

TEST_CASE("per-window maxima keep the argmax and honor the deviation flag") {
  std::vector<RatioPoint> tr = {
      {5.0, 1.0, 0, 1.2, 0.0}, {6.0, 1.0, 0, 0.7, 0.0}, {30.0, 1.0, 1, 1.05, 0.0}};
  auto mx = per_window_maxima(tr, /*deviation=*/false);
  REQUIRE(mx.size() == 2);
  CHECK(mx[0].value == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(mx[0].arg == 5.0);
  CHECK(mx[1].value == doctest::Approx(1.05).epsilon(1e-15));

  auto dmx = per_window_maxima(tr, /*deviation=*/true);
  CHECK(dmx[0].value == doctest::Approx(0.3).epsilon(1e-12));  // |0.7 - 1|
  CHECK(dmx[0].arg == 6.0);
  CHECK(dmx[1].value == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("reference family classifies against every class") {
  const ClassReport& r = rep_f1();
  REQUIRE(r.verdicts.size() == 4);

  // shift ratios at block tops approach the closed-form limit but never decay:
  // deviations hold at a fixed level across scales
  CHECK(verdict_of(r, "L") == Verdict::inconsistent);
  const auto& lm = maxima(r, "L");
  REQUIRE(lm.size() == 3);
  CHECK(lm[0].value == doctest::Approx(0.96428396461782828).epsilon(1e-12));
  CHECK(lm[1].value == doctest::Approx(0.99994919731761356).epsilon(1e-12));
  CHECK(lm[2].value == doctest::Approx(1.0000000000301554).epsilon(1e-12));
  CHECK(lm[0].arg == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(lm[2].arg == doctest::Approx(39366.0).epsilon(1e-12));
  CHECK(r.find("L")->note.find("persist") != std::string::npos);

  // yet every fixed shift keeps a bounded ratio: the c-probes settle at
  // exp-free levels 1 + c * limit_deviation
  CHECK(verdict_of(r, "OL") == Verdict::consistent);
  const auto& om = maxima(r, "OL");
  REQUIRE(om.size() == 3);
  CHECK(om[0].value == doctest::Approx(3.8928518938534822).epsilon(1e-12));
  CHECK(om[1].value == doctest::Approx(4.9997967892704587).epsilon(1e-12));
  CHECK(om[2].value == doctest::Approx(4.9999999999982645).epsilon(1e-12));
  CHECK(om[2].value == doctest::Approx(5.0).epsilon(1e-11));

  // the fold-to-tail ratio grows without bound across scales
  CHECK(verdict_of(r, "OS") == Verdict::inconsistent);
  const auto& sm = maxima(r, "OS");
  REQUIRE(sm.size() == 3);
  CHECK(sm[0].value == doctest::Approx(3.8928518938534746).epsilon(1e-10));
  CHECK(sm[1].value == doctest::Approx(15.366286236753453).epsilon(1e-10));
  CHECK(sm[2].value == doctest::Approx(209.33017812596634).epsilon(1e-10));
  CHECK(r.find("OS")->note.find("grow") != std::string::npos);

  // halving the abscissa jumps across a whole block: ratio ~ the block mass
  // over the next block's tail, growing like the anchors themselves
  CHECK(verdict_of(r, "D") == Verdict::inconsistent);
  const auto& dm = maxima(r, "D");
  REQUIRE(dm.size() == 3);
  CHECK(dm[1].value == doctest::Approx(27.998628327575688).epsilon(1e-12));
  CHECK(dm[2].value == doctest::Approx(19684.000000000025).epsilon(1e-10));
  CHECK(dm[2].value == doctest::Approx(1.0 + std::pow(3.0, 9.0)).epsilon(1e-10));

  // every verdict records its witnesses
  for (const auto& v : r.verdicts) {
    CHECK(!v.scale_maxima.empty());
    CHECK(!v.witness_x.empty());
    CHECK(!v.trace.empty());
    CHECK(!v.note.empty());
  }
}

TEST_CASE("self-fold of the reference family classifies long-tailed") {
  CHECK(conv2_full().flagged_count() == 0);
  CHECK(conv2_full().coverage_min() == doctest::Approx(6.0).epsilon(1e-12));

  const ClassReport& r = rep_conv2();

  // shift-ratio deviations now fall by better than half per scale: the fold
  // has washed out the block cliffs
  CHECK(verdict_of(r, "L") == Verdict::consistent);
  const auto& lm = maxima(r, "L");
  REQUIRE(lm.size() == 3);
  CHECK(lm[0].value == doctest::Approx(0.27079494349242639).epsilon(1e-9));
  CHECK(lm[1].value == doctest::Approx(0.13771177615333641).epsilon(1e-9));
  CHECK(lm[2].value == doctest::Approx(0.011666298829992927).epsilon(1e-9));
  CHECK(lm[1].value <= 0.51 * lm[0].value);
  CHECK(lm[2].value <= 0.70 * lm[1].value);
  CHECK(r.find("L")->note.find("fall") != std::string::npos);

  CHECK(verdict_of(r, "OL") == Verdict::consistent);
  const auto& om = maxima(r, "OL");
  CHECK(om[0].value == doctest::Approx(2.047009168029144).epsilon(1e-9));
  CHECK(om[2].value == doctest::Approx(1.0366861859509413).epsilon(1e-9));

  // the order-4 over order-2 ratio settles instead of growing: fold-bounded
  CHECK(verdict_of(r, "OS") == Verdict::consistent);
  const auto& sm = maxima(r, "OS");
  REQUIRE(sm.size() == 3);
  CHECK(sm[0].value == doctest::Approx(2.2310327406601678).epsilon(1e-9));
  CHECK(sm[1].value == doctest::Approx(5.9645166309807101).epsilon(1e-9));
  CHECK(sm[2].value == doctest::Approx(5.4309154784221052).epsilon(1e-9));
  const double settle = sm[1].value / sm[2].value;
  CHECK(settle > 1.0);
  CHECK(settle <= 1.5);
  CHECK(r.find("OS")->note.find("settle") != std::string::npos);

  // halving still jumps blocks: the fold keeps the scale ladder
  CHECK(verdict_of(r, "D") == Verdict::inconsistent);
  const auto& dm = maxima(r, "D");
  CHECK(dm[2].value == doctest::Approx(371.5427562342).epsilon(1e-8));
}

TEST_CASE("fold-boundedness crosscheck on the reference family") {
  RootCrosscheck rc = convolution_root_crosscheck(rep_f1(), rep_conv2());
  CHECK(!rc.applicable);  // the base is not fold-bounded
  CHECK(rc.anomaly);      // fold long-tailed while the base is not
  CHECK(rc.verdict == Verdict::consistent);
  CHECK(rc.pattern.find("base: L=inconsistent") != std::string::npos);
  CHECK(rc.pattern.find("fold: L=consistent") != std::string::npos);
  CHECK(rc.note.find("permitted") != std::string::npos);
}

TEST_CASE("memoryless control classifies against every class") {
  const ClassReport& r = rep_exp();

  // the shift ratio is exactly e^c at every abscissa: deviation e - 1 forever
  CHECK(verdict_of(r, "L") == Verdict::inconsistent);
  for (const auto& m : maxima(r, "L"))
    CHECK(m.value == doctest::Approx(std::expm1(1.0)).epsilon(1e-14));

  // bounded though: e^c is a constant, so the O-shift probe settles
  CHECK(verdict_of(r, "OL") == Verdict::consistent);
  const auto& om = maxima(r, "OL");
  REQUIRE(om.size() == 4);
  CHECK(om[2].value == doctest::Approx(std::exp(4.0)).epsilon(1e-12));
  CHECK(om[3].value == doctest::Approx(std::exp(4.0)).epsilon(1e-12));

  // fold over tail is exactly 1 + x: unbounded growth
  CHECK(verdict_of(r, "OS") == Verdict::inconsistent);
  const auto& sm = maxima(r, "OS");
  REQUIRE(sm.size() == 4);
  CHECK(sm[2].value == doctest::Approx(9.0).epsilon(1e-12));
  CHECK(sm[2].arg == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(sm[3].value == doctest::Approx(17.0).epsilon(1e-12));
  CHECK(sm[3].arg == doctest::Approx(16.0).epsilon(1e-12));

  // halving ratio e^{x/2} grows without bound
  CHECK(verdict_of(r, "D") == Verdict::inconsistent);
  const auto& dm = maxima(r, "D");
  CHECK(dm[2].value == doctest::Approx(std::exp(4.0)).epsilon(1e-10));
  CHECK(dm[3].value == doctest::Approx(std::exp(8.0)).epsilon(1e-10));
}

TEST_CASE("gamma control classifies like its base") {
  CHECK(exp_conv2().flagged_count() == 0);
  const ClassReport& r = rep_gamma2();

  // shift deviation e * x / (1 + x) - 1 climbs toward e - 1: never decays
  CHECK(verdict_of(r, "L") == Verdict::inconsistent);
  const auto& lm = maxima(r, "L");
  REQUIRE(lm.size() == 4);
  CHECK(lm[0].value == doctest::Approx(0.80563383265048927).epsilon(1e-9));
  CHECK(lm[3].value == doctest::Approx(16.0 * std::exp(1.0) / 17.0 - 1.0).epsilon(1e-6));

  CHECK(verdict_of(r, "OL") == Verdict::consistent);
  const auto& om = maxima(r, "OL");
  CHECK(om[3].value == doctest::Approx(std::exp(4.0) * 13.0 / 17.0).epsilon(1e-6));

  CHECK(verdict_of(r, "OS") == Verdict::inconsistent);
  const auto& sm = maxima(r, "OS");
  CHECK(sm[3].value == doctest::Approx(48.701854446274503).epsilon(1e-6));
  // order-4 Erlang over order-2 at the window top, up to table error
  const double x = 16.0;
  const double erlang = (1.0 + x + x * x / 2.0 + x * x * x / 6.0) / (1.0 + x);
  CHECK(sm[3].value == doctest::Approx(erlang).epsilon(1e-3));

  CHECK(verdict_of(r, "D") == Verdict::inconsistent);
  CHECK(maxima(r, "D")[3].value == doctest::Approx(std::exp(8.0) * 9.0 / 17.0).epsilon(1e-6));

  // light tails sit outside the heavy-tail law's scope: no anomaly, no scope
  RootCrosscheck rc = convolution_root_crosscheck(rep_exp(), rep_gamma2());
  CHECK(!rc.applicable);
  CHECK(!rc.anomaly);
  CHECK(rc.verdict == Verdict::inconclusive);
  CHECK(rc.note.find("out of class scope") != std::string::npos);
}

TEST_CASE("plateau family blows up at every block top") {
  CHECK(f2_spread()->describe().find("regime=non-os") != std::string::npos);
  ClassReport r = classify(*f2_spread(), {});

  // the deepest probed block top: density mass piles against a tail that has
  // already collapsed to the next anchor's remainder
  const double top = std::exp((std::log(2.0) + 12.25 * std::log(3.0)) / 1.5);

  CHECK(verdict_of(r, "L") == Verdict::inconsistent);
  const auto& lm = maxima(r, "L");
  REQUIRE(lm.size() == 3);
  CHECK(lm[2].value == doctest::Approx(167.75328508079195).epsilon(1e-9));
  CHECK(lm[2].arg == doctest::Approx(top).epsilon(1e-12));
  // limit form of the same blow-up: t * 2^{(t-1)/t} * a2^{1/3} / (a3/a2)^{-alpha}
  const double limit_dev = 1.5 * std::cbrt(2.0) * std::pow(3.0, 12.25 / 3.0);
  CHECK(lm[2].value == doctest::Approx(limit_dev).epsilon(2e-4));

  CHECK(verdict_of(r, "OL") == Verdict::inconsistent);
  const auto& om = maxima(r, "OL");
  CHECK(om[2].value == doctest::Approx(671.9729007748216).epsilon(1e-9));
  CHECK(om[2].arg == doctest::Approx(top).epsilon(1e-12));
  CHECK(r.find("OL")->note.find("c=4: inconsistent") != std::string::npos);

  CHECK(verdict_of(r, "OS") == Verdict::inconsistent);
  CHECK(maxima(r, "OS")[2].value == doctest::Approx(5813.0769340777115).epsilon(1e-8));
  CHECK(verdict_of(r, "D") == Verdict::inconsistent);
  CHECK(maxima(r, "D")[2].value == doctest::Approx(699416.68951748812).epsilon(1e-8));
}

TEST_CASE("plateau family fold is long-tailed while its base is not") {
  const NumericConv& fold = f2_fold(f2_spread());
  CHECK(fold.flagged_count() == 0);
  ClassReport base = classify(*f2_spread(), {});
  ClassReport r = classify(fold, {});

  CHECK(verdict_of(r, "L") == Verdict::consistent);
  const auto& lm = maxima(r, "L");
  REQUIRE(lm.size() == 3);
  CHECK(lm[0].value == doctest::Approx(0.71040834845032874).epsilon(1e-9));
  CHECK(lm[1].value == doctest::Approx(0.49003934253501136).epsilon(1e-9));
  CHECK(lm[2].value == doctest::Approx(0.075891043623630194).epsilon(1e-9));
  CHECK(lm[1].value <= 0.7 * lm[0].value);
  CHECK(lm[2].value <= 0.7 * lm[1].value);

  // spread regime (alpha < 1/2): even the fold keeps growing fold-ratios
  CHECK(verdict_of(r, "OS") == Verdict::inconsistent);
  CHECK(verdict_of(r, "D") == Verdict::inconsistent);
  // the shift probe at fixed c stays unresolved here: rises then collapses
  CHECK(verdict_of(r, "OL") == Verdict::inconclusive);

  RootCrosscheck rc = convolution_root_crosscheck(base, r);
  CHECK(!rc.applicable);
  CHECK(rc.anomaly);
  CHECK(rc.verdict == Verdict::consistent);
  CHECK(rc.note.find("permitted") != std::string::npos);
}

TEST_CASE("folding-regime plateau family shows the same anomaly") {
  CHECK(f2_folding()->describe().find("regime=os") != std::string::npos);
  ClassReport base = classify(*f2_folding(), {});
  CHECK(verdict_of(base, "L") == Verdict::inconsistent);
  CHECK(verdict_of(base, "OL") == Verdict::inconsistent);
  CHECK(verdict_of(base, "OS") == Verdict::inconsistent);
  CHECK(verdict_of(base, "D") == Verdict::inconsistent);
  // deepest witness sits at the block-top edge of the widened ladder
  const double r2 = (31.0 / 11.0) * (31.0 / 11.0);
  const double top = std::exp((std::log(2.0) + r2 * std::log(5.0)) / 1.5);
  CHECK(maxima(base, "OL")[2].arg == doctest::Approx(top).epsilon(1e-12));
  CHECK(maxima(base, "OL")[2].value == doctest::Approx(536.65029471725643).epsilon(1e-9));

  ClassReport r = classify(f2_fold(f2_folding()), {});
  CHECK(verdict_of(r, "L") == Verdict::consistent);
  const auto& lm = maxima(r, "L");
  CHECK(lm[0].value == doctest::Approx(0.80288789401810878).epsilon(1e-9));
  CHECK(lm[1].value == doctest::Approx(0.48335787781642181).epsilon(1e-9));
  CHECK(lm[2].value == doctest::Approx(0.15623806021326514).epsilon(1e-9));
  CHECK(lm[1].value <= 0.65 * lm[0].value);
  CHECK(lm[2].value <= 0.65 * lm[1].value);

  RootCrosscheck rc = convolution_root_crosscheck(base, r);
  CHECK(rc.anomaly);
  CHECK(rc.verdict == Verdict::consistent);
}

TEST_CASE("verdicts stable under coarser probing") {
  ClassifyConfig coarse;
  coarse.per_window = 16;
  coarse.conv_per_window = 8;

  ClassReport a = classify(*f1_ref(), coarse);
  for (const auto& v : rep_f1().verdicts) {
    const ClassVerdict* c = a.find(v.cls);
    REQUIRE(c != nullptr);
    CHECK(c->verdict == v.verdict);
  }

  ClassReport b = classify(conv2_full(), coarse);
  for (const auto& v : rep_conv2().verdicts) {
    const ClassVerdict* c = b.find(v.cls);
    REQUIRE(c != nullptr);
    CHECK(c->verdict == v.verdict);
  }
}

TEST_CASE("synthetic crosscheck patterns") {
  const auto C = Verdict::consistent;
  const auto X = Verdict::inconsistent;
  const auto U = Verdict::inconclusive;

  // fold-bounded base loses its long tail in the fold: the law is broken
  RootCrosscheck rc = convolution_root_crosscheck(synthetic_report(X, C), synthetic_report(C, U));
  CHECK(rc.applicable);
  CHECK(rc.anomaly);
  CHECK(rc.verdict == Verdict::inconsistent);

  // base long-tailed, fold not, within scope: closure under folding broken
  rc = convolution_root_crosscheck(synthetic_report(C, C), synthetic_report(X, U));
  CHECK(rc.applicable);
  CHECK(!rc.anomaly);
  CHECK(rc.verdict == Verdict::inconsistent);

  // both long-tailed within scope: exactly the law's content
  rc = convolution_root_crosscheck(synthetic_report(C, C), synthetic_report(C, U));
  CHECK(rc.verdict == Verdict::consistent);
  CHECK(rc.note.find("agree") != std::string::npos);

  // in scope but unresolved probes: no call either way
  rc = convolution_root_crosscheck(synthetic_report(U, C), synthetic_report(C, U));
  CHECK(rc.verdict == Verdict::inconclusive);

  // a report without the required verdicts is rejected
  ClassReport empty;
  empty.subject = "empty";
  CHECK_THROWS(convolution_root_crosscheck(empty, synthetic_report(C, U)));
}

TEST_CASE("insensitivity probes") {
  auto w = scale_windows(*f1_ref(), 0, 2);
  auto logh = [](double x) { return std::log(x); };

  // block tops of the base: increments stay macroscopic at every scale
  for (int n = 0; n <= 2; ++n) {
    const double x = 2.0 * std::pow(3.0, std::pow(3.0, n));
    auto one = insensitivity_probe(*f1_ref(), logh, {x}, w);
    REQUIRE(one.size() == 1);
    const double expected[] = {1.7277649246287632, 3.9887813954747391, 10.580657778556187};
    CHECK(one[0].value == doctest::Approx(expected[n]).epsilon(1e-10));
    CHECK(one[0].value >= 0.45);
  }

  // on a plateau the increment vanishes identically ...
  auto flat = insensitivity_probe(*f1_ref(), [](double) { return 1e-9; }, {12.0}, w);
  CHECK(flat.at(0).value == 0.0);
  // ... and inside a density block it scales away with the half-width
  auto dens = insensitivity_probe(*f1_ref(), [](double) { return 1e-9; }, {30.0}, w);
  CHECK(dens.at(0).value < 1e-9);
  CHECK(dens.at(0).value >= 0.0);

  // the fold's increments fade across scales
  auto grid = window_probe_grid(*f1_ref(), w, 64, {1.0, 2.0, 4.0}, conv2_dense().coverage_max());
  auto tr = insensitivity_probe(conv2_dense(), logh, grid, w);
  auto mx = per_window_maxima(tr);
  REQUIRE(mx.size() == 3);
  CHECK(mx[0].value == doctest::Approx(0.81304048638846982).epsilon(1e-9));
  CHECK(mx[1].value == doctest::Approx(0.79918722820211063).epsilon(1e-9));
  CHECK(mx[2].value == doctest::Approx(0.13976168490813673).epsilon(1e-9));
  CHECK(mx[0].value > mx[1].value);
  CHECK(mx[1].value > mx[2].value);

  // the half-width must stay inside (0, x)
  CHECK_THROWS(insensitivity_probe(*f1_ref(), [](double x) { return 2.0 * x; }, {12.0}, w));
}

TEST_CASE("density-to-tail ratios") {
  // memoryless control: the hazard is exactly the rate
  auto dte = density_o_tail_probe(*exp_ref(), {1.0, 5.0, 11.0}, exp_config().windows);
  REQUIRE(dte.size() == 3);
  for (const auto& p : dte) CHECK(p.value == doctest::Approx(1.0).epsilon(1e-13));

  // the fold's hazard collapses across scales: density = o(tail) evidence
  auto w = scale_windows(*f1_ref(), 0, 2);
  auto grid = window_probe_grid(*f1_ref(), w, 64, {1.0, 2.0, 4.0}, conv2_dense().coverage_max());
  auto dt = density_o_tail_probe(conv2_dense(), grid, w);
  auto mx = per_window_maxima(dt);
  REQUIRE(mx.size() == 3);
  CHECK(mx[0].value == doctest::Approx(0.25428721395607673).epsilon(1e-9));
  CHECK(mx[1].value == doctest::Approx(0.12164431904076722).epsilon(1e-9));
  CHECK(mx[2].value == doctest::Approx(0.0096522519216931911).epsilon(1e-9));
  CHECK(mx[1].value <= 0.7 * mx[0].value);
  CHECK(mx[2].value <= 0.7 * mx[1].value);
}

TEST_CASE("cross-distribution increments against the fold tail") {
  auto w = scale_windows(*f1_ref(), 0, 2);
  auto grid = window_probe_grid(*f1_ref(), w, 64, {1.0, 2.0, 4.0}, conv2_dense().coverage_max());

  std::vector<ProbePoint> cross;
  for (double x : grid) {
    if (x + 1.0 > conv2_dense().coverage_max()) continue;
    const double den = conv2_dense().tail_at(x);
    if (den <= 0.0) continue;
    const double lo = x - 1.0 <= f1_ref()->support_inf() ? 1.0 : f1_ref()->tail(x - 1.0);
    ProbePoint p;
    p.x = x;
    p.value = (lo - f1_ref()->tail(x + 1.0)) / den;
    for (size_t i = 0; i < w.size(); ++i)
      if (x >= w[i].lo && x < w[i].hi) p.window = static_cast<int>(i);
    cross.push_back(p);
  }
  auto mx = per_window_maxima(cross);
  REQUIRE(mx.size() == 3);
  CHECK(mx[0].value == doctest::Approx(0.4954126131232266).epsilon(1e-9));
  CHECK(mx[1].value == doctest::Approx(0.11868030865907063).epsilon(1e-9));
  CHECK(mx[2].value == doctest::Approx(0.0094940159391249095).epsilon(1e-9));
  CHECK(mx[0].value > mx[1].value);
  CHECK(mx[1].value > mx[2].value);
}

TEST_CASE("tail equivalence transfer") {
  auto w = scale_windows(*f1_ref(), 0, 2);
  auto grid = window_probe_grid(*f1_ref(), w, 24, {1.0, 2.0, 4.0}, conv2_dense().coverage_max());

  SUBCASE("substituting the law for itself changes nothing beyond the table") {
    TransferReport tr = tail_equivalence_transfer(f1_ref(), f1_ref(), conv2_dense(), grid, w);
    CHECK(tr.precondition_ok);
    CHECK(tr.converging);
    CHECK(tr.note.find("within table resolution") != std::string::npos);
    REQUIRE(tr.deviation_maxima.size() == 3);
    CHECK(tr.deviation_maxima[0].value < 1e-4);
    for (const auto& m : tr.deviation_maxima) CHECK(m.value < 0.05);
    for (const auto& m : tr.equivalence_maxima) CHECK(m.value == 0.0);
  }

  SUBCASE("a log-faded equivalent transfers one scale behind") {
    auto tilt = std::make_shared<TiltedTailDist>(f1_ref(), TiltedTailDist::Tilt::log_fade);
    TransferReport tr = tail_equivalence_transfer(f1_ref(), tilt, conv2_dense(), grid, w);
    CHECK(tr.precondition_ok);
    REQUIRE(tr.equivalence_maxima.size() == 3);
    CHECK(tr.equivalence_maxima[0].value == doctest::Approx(0.49762756489839255).epsilon(1e-9));
    CHECK(tr.equivalence_maxima[1].value == doctest::Approx(0.29483197235971254).epsilon(1e-9));
    CHECK(tr.equivalence_maxima[2].value == doctest::Approx(0.101136279331956).epsilon(1e-9));

    REQUIRE(tr.deviation_maxima.size() == 3);
    CHECK(tr.deviation_maxima[0].value == doctest::Approx(0.25587446541602565).epsilon(1e-9));
    CHECK(tr.deviation_maxima[1].value == doctest::Approx(0.31105318332386211).epsilon(1e-9));
    CHECK(tr.deviation_maxima[2].value == doctest::Approx(0.13183096210951084).epsilon(1e-9));

    // the lag law itself: fold deviation under the previous equivalence gap
    CHECK(tr.deviation_maxima[1].value <= 1.25 * tr.equivalence_maxima[0].value);
    CHECK(tr.deviation_maxima[2].value <= 1.25 * tr.equivalence_maxima[1].value);
    CHECK(tr.converging);
    CHECK(tr.note.find("one scale behind") != std::string::npos);
  }

  SUBCASE("a constant tail multiple is rejected at the precondition") {
    auto twice = std::make_shared<TiltedTailDist>(f1_ref(), TiltedTailDist::Tilt::constant, 2.0);
    TransferReport tr = tail_equivalence_transfer(f1_ref(), twice, conv2_dense(), grid, w);
    CHECK(!tr.precondition_ok);
    CHECK(!tr.converging);
    CHECK(tr.trace.empty());
    for (const auto& m : tr.equivalence_maxima)
      CHECK(m.value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(tr.note.find("not established") != std::string::npos);
  }

  SUBCASE("the self-fold handle must be order 2") {
    ConvGridSpec spec;
    spec.points_per_block = 64;
    spec.x_max = 1.0e4;
    auto ladder = nfold_ladder(f1_ref(), 3, {}, spec);
    CHECK_THROWS(tail_equivalence_transfer(f1_ref(), f1_ref(), ladder[2], grid, w));
  }
}

TEST_CASE("concentration of repeated folds") {
  ConvGridSpec spec;
  spec.points_per_block = 160;
  spec.x_max = 3.0e5;
  auto ladder = nfold_ladder(f1_ref(), 4, {}, spec);
  auto cp = concentration_sweep(ladder, 3.0, ladder.back().grid());
  REQUIRE(cp.size() == 4);

  const double expected[] = {0.24770619751075584, 0.23861929526493433, 0.17549464074430585,
                             0.13374268212047813};
  for (int i = 0; i < 4; ++i) {
    CHECK(cp[i].order == i + 1);
    CHECK(cp[i].sup == doctest::Approx(expected[i]).epsilon(1e-9));
  }
  // unit-increment mass sqrt-normalized never concentrates with the order
  for (int i = 1; i < 4; ++i) CHECK(cp[i].sup < cp[i - 1].sup);
  for (int i = 0; i < 4; ++i) CHECK(cp[i].sup <= 2.0 * cp[0].sup);

  // the order-1 sup is the first block's unit step at the block top
  CHECK(cp[0].arg == doctest::Approx(6.0).epsilon(1e-6));
  CHECK(cp[0].sup == doctest::Approx(0.743118919685 / 3.0).epsilon(1e-5));

  const double t1 = concentration_threshold(ladder[1], 0.5, 1.0e5);
  const double t2 = concentration_threshold(ladder[1], 0.05, 1.0e5);
  CHECK(t1 == doctest::Approx(7.03972).epsilon(1e-4));
  CHECK(t2 == doctest::Approx(60.0).epsilon(1e-3));
  CHECK(t2 > t1);

  CHECK_THROWS(concentration_sweep(ladder, 1.0, ladder.back().grid()));
}

TEST_CASE("reports serialize to JSON") {
  const std::string js = rep_f1().to_json(4);
  auto j = nlohmann::json::parse(js);

  CHECK(j["subject"].get<std::string>() == f1_ref()->describe());
  REQUIRE(j["verdicts"].size() == 4);
  CHECK(j["config"]["windows"].size() == 3);
  CHECK(j["config"]["per_window"].get<int>() == 64);

  for (const auto& v : j["verdicts"]) {
    const std::string verdict = v["verdict"].get<std::string>();
    CHECK((verdict == "consistent" || verdict == "inconsistent" || verdict == "inconclusive"));
    CHECK(v["trace"].size() <= 4);
    CHECK(v["trace_total"].get<size_t>() >= v["trace"].size());
    CHECK(!v["scale_maxima"].empty());
  }

  // round-trip of a pinned number through the serialization
  CHECK(j["verdicts"][0]["class"].get<std::string>() == "L");
  CHECK(j["verdicts"][0]["scale_maxima"][0]["value"].get<double>() ==
        doctest::Approx(0.96428396461782828).epsilon(1e-12));

  // uncapped serialization carries the full trace
  auto j2 = nlohmann::json::parse(rep_f1().to_json());
  CHECK(j2["verdicts"][0]["trace"].size() ==
        j2["verdicts"][0]["trace_total"].get<size_t>());
}
