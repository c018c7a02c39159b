#include <doctest.h>

#include <cmath>

#include "htl/extra_dists.hpp"
#include "htl/families.hpp"

using namespace htl;

TEST_CASE("pareto basics") {
  Pareto p(2.0, 1.0);
  CHECK(p.tail(0.5) == 1.0);
  CHECK(p.tail(1.0) == 1.0);
  CHECK(p.tail(10.0) == doctest::Approx(0.01).epsilon(1e-14));
  CHECK(p.density(10.0) == doctest::Approx(2e-3).epsilon(1e-14));
  CHECK(p.density(0.5) == 0.0);
  CHECK(p.log_tail_at_log(100.0) == doctest::Approx(-200.0));
  CHECK(p.segments().size() == 1);
  CHECK_THROWS_AS(Pareto(-1.0), Error);
  CHECK_THROWS_AS(Pareto(1.0, 0.0), Error);
}

TEST_CASE("exponential control basics") {
  ExpControl e(1.0);
  CHECK(e.tail(0.0) == 1.0);
  CHECK(e.tail(2.0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));
  CHECK(e.density(2.0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));
  // memoryless: density/tail ratio is identically lambda
  for (double x : {0.5, 3.0, 40.0}) CHECK(e.density(x) / e.tail(x) == doctest::Approx(1.0));
  CHECK_THROWS_AS(ExpControl(0.0), Error);
}

TEST_CASE("staircase plateau geometry") {
  StaircaseDist f(8);
  CHECK(f.plateau_lo(1) == doctest::Approx(1.0));
  CHECK(f.plateau_hi(1) == doctest::Approx(2.8667473750381).epsilon(1e-12));
  CHECK(f.plateau_lo(2) == doctest::Approx(7.253041736158).epsilon(1e-12));
  CHECK(f.plateau_hi(2) == doctest::Approx(11.466989500152).epsilon(1e-12));
  CHECK_THROWS_AS(StaircaseDist(0), Error);
  CHECK_THROWS_AS(StaircaseDist(401), Error);
}

TEST_CASE("staircase tail: smooth, flat, atom-dropped") {
  StaircaseDist f(8);
  CHECK(f.tail(0.0) == 1.0);
  CHECK(f.tail(0.25) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));  // smooth below x_1
  CHECK(f.tail(1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));   // plateau start
  CHECK(f.tail(2.5) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));   // flat
  // right-continuous at the atom: tail(y_1) is already the dropped level
  CHECK(f.tail(f.plateau_hi(1)) == doctest::Approx(0.18393972058572).epsilon(1e-12));
  CHECK(f.tail(f.plateau_hi(1) - 1e-9) / f.tail(f.plateau_hi(1)) ==
        doctest::Approx(2.0).epsilon(1e-8));
  CHECK(f.tail(4.0) == doctest::Approx(0.13533528323661).epsilon(1e-12));  // smooth again
  CHECK(f.tail(f.plateau_lo(2)) == doctest::Approx(0.067667641618306).epsilon(1e-12));
}

TEST_CASE("staircase density vanishes exactly on plateaus") {
  StaircaseDist f(8);
  CHECK(f.density(1.0) == 0.0);
  CHECK(f.density(2.0) == 0.0);
  CHECK(f.density(4.0) == doctest::Approx(std::exp(-2.0) / 4.0).epsilon(1e-13));
  CHECK(f.density(0.25) == doctest::Approx(std::exp(-0.5)).epsilon(1e-13));
  CHECK(f.density(f.plateau_lo(2)) == 0.0);
}

TEST_CASE("staircase atom table") {
  StaircaseDist f(8);
  auto atoms = f.atoms();
  REQUIRE(atoms.size() == 8);
  CHECK(atoms[0].x == doctest::Approx(2.8667473750381).epsilon(1e-12));
  CHECK(atoms[0].mass == doctest::Approx(0.18393972058572).epsilon(1e-12));
  // each atom carries exactly the post-drop tail level
  for (const auto& a : atoms) CHECK(a.mass == doctest::Approx(f.tail(a.x)).epsilon(1e-12));
  CHECK(f.segments().size() == 1 + 3 * 8);
}

TEST_CASE("shaved companion tail and the dominance trend") {
  auto pair = build_staircase_ol_example(8);
  CHECK(pair.f2->support_inf() == doctest::Approx(0.092145122747642).epsilon(1e-10));
  CHECK(pair.f2->tail(0.05) == 1.0);
  CHECK(pair.f2->density(0.05) == 0.0);
  CHECK(pair.f2->tail(1.0) == doctest::Approx(0.33485829802381).epsilon(1e-12));
  CHECK(pair.f2->density(1.0) == doctest::Approx(0.26902953508616).epsilon(1e-12));
  // tail continuous at the crossing
  CHECK(pair.f2->tail(pair.f2->support_inf() * 1.000001) == doctest::Approx(1.0).epsilon(1e-5));
  // F2 tail is o(F1 tail): the ratio at plateau starts decreases steadily
  auto* f1 = dynamic_cast<const StaircaseDist*>(pair.f1.get());
  REQUIRE(f1 != nullptr);
  double prev = kInf;
  for (int n = 1; n <= 8; ++n) {
    const double x = f1->plateau_lo(n);
    const double ratio = pair.f2->tail(x) / pair.f1->tail(x);
    CHECK(ratio < prev);
    prev = ratio;
  }
  CHECK(prev < 0.2);  // already well on its way to 0 by n=8
}

TEST_CASE("plateau-power recursion reproduces the exact rationals") {
  // alpha = 1, eps = 1/2, 1/4: everything collapses to powers of two
  auto ex = build_non_ol_example(1.0, {0.5, 0.25});
  const auto& f = *ex.f1;
  CHECK(std::exp(f.log_a(1)) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(std::exp(f.log_b(1)) == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(std::exp(f.log_d(1)) == doctest::Approx(4.0).epsilon(1e-13));
  CHECK(std::exp(f.log_a(2)) == doctest::Approx(8.0).epsilon(1e-13));
  CHECK(std::exp(f.log_c(2)) == doctest::Approx(1.0 / 32.0).epsilon(1e-13));
  CHECK(std::exp(f.log_b(2)) == doctest::Approx(128.0).epsilon(1e-13));
  CHECK(std::exp(f.log_d(2)) == doctest::Approx(512.0).epsilon(1e-13));
  CHECK(std::exp(f.log_a(3)) == doctest::Approx(2048.0).epsilon(1e-13));
  CHECK(std::exp(f.log_c(3)) == doctest::Approx(1.0 / 32768.0).epsilon(1e-13));
  CHECK(std::exp(f.log_b(3)) == doctest::Approx(262144.0).epsilon(1e-13));
}

TEST_CASE("plateau-power witness ratios against the power yardstick") {
  auto ex = build_non_ol_example(1.0, {0.5, 0.25});
  REQUIRE(ex.witness_at_b.size() == 3);
  CHECK(ex.witness_at_b[0] == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(ex.witness_at_b[1] == doctest::Approx(4.0).epsilon(1e-13));
  CHECK(ex.witness_at_b[2] == doctest::Approx(8.0).epsilon(1e-13));
  REQUIRE(ex.witness_at_a.size() == 2);
  CHECK(ex.witness_at_a[0] == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(ex.witness_at_a[1] == doctest::Approx(0.25).epsilon(1e-13));
  // the recorded witnesses equal live tail-ratio evaluations
  const auto& f1 = *ex.f1;
  const auto& f2 = *ex.f2;
  for (int n = 1; n <= 3; ++n) {
    const double b = std::exp(f1.log_b(n));
    CHECK(f1.tail(b) / f2.tail(b) ==
          doctest::Approx(ex.witness_at_b[static_cast<size_t>(n - 1)]).epsilon(1e-12));
  }
  // non-flat half of the oscillation: just left of a_n the ratio is 2^{-n+1}
  const double a2 = std::exp(f1.log_a(2));
  CHECK(f1.tail(a2 * (1 - 1e-10)) / f2.tail(a2) == doctest::Approx(0.5).epsilon(1e-8));
  // fractional alpha keeps the witnesses on the same ladder
  auto ex2 = build_non_ol_example(0.7, {0.3, 0.2, 0.1});
  for (size_t i = 0; i < ex2.witness_at_b.size(); ++i) {
    CHECK(ex2.witness_at_b[i] ==
          doctest::Approx(std::exp2(static_cast<double>(i + 1))).epsilon(1e-12));
  }
}

TEST_CASE("plateau-power step solves agree with direct bisection") {
  auto ex = build_non_ol_example(1.0, {0.5, 0.25});
  const auto& f1 = *ex.f1;
  // b_1: where the reference tail x^{-alpha} halves
  const double b1 = bisect_crossing(
      [&](double x) { return ex.f2->tail(x) - 0.5; }, 1.0, 16.0);
  CHECK(b1 == doctest::Approx(std::exp(f1.log_b(1))).epsilon(1e-12));
  // a_2: where the first power piece meets the 2^{-1} witness level
  const double a2 = bisect_crossing(
      [&](double x) { return 4.0 / x - 0.5; }, 2.0, 64.0);
  CHECK(a2 == doctest::Approx(std::exp(f1.log_a(2))).epsilon(1e-12));
}

TEST_CASE("plateau-power tail, density, atoms") {
  auto ex = build_non_ol_example(1.0, {0.5, 0.25});
  const auto& f = *ex.f1;
  CHECK(f.support_inf() == doctest::Approx(2.0));
  CHECK(f.tail(0.5) == 1.0);
  CHECK(f.tail(1.5) == 1.0);  // plateau c_1 = 1
  CHECK(f.tail(4.0) == doctest::Approx(0.25).epsilon(1e-13));
  CHECK(f.tail(8.0) == doctest::Approx(1.0 / 32.0).epsilon(1e-13));
  CHECK(f.tail(100.0) == doctest::Approx(1.0 / 32.0).epsilon(1e-13));  // still the c_2 plateau
  CHECK(f.tail(200.0) == doctest::Approx(512.0 / 4e4).epsilon(1e-13));
  CHECK(f.tail(2048.0) == doctest::Approx(1.0 / 32768.0).epsilon(1e-13));
  CHECK(f.tail(3e5) == doctest::Approx(2097152.0 / 9e10).epsilon(1e-12));  // final piece
  CHECK(f.density(1.5) == 0.0);
  CHECK(f.density(4.0) == doctest::Approx(8.0 / 64.0).epsilon(1e-13));
  CHECK(f.density(1000.0) == doctest::Approx(1024.0 / 1e9).epsilon(1e-12));
  auto atoms = f.atoms();
  REQUIRE(atoms.size() == 2);
  CHECK(atoms[0].x == doctest::Approx(8.0).epsilon(1e-13));
  CHECK(atoms[0].mass == doctest::Approx(1.0 / 32.0).epsilon(1e-12));
  CHECK(atoms[1].x == doctest::Approx(2048.0).epsilon(1e-13));
  CHECK(atoms[1].mass == doctest::Approx(9.1552734375e-05).epsilon(1e-12));
  // one-step ratio at the plateau start equals 1/eps
  CHECK(f.tail(7.99999) / f.tail(8.0) == doctest::Approx(2.0).epsilon(1e-4));
  CHECK(f.tail(2047.99) / f.tail(2048.0) == doctest::Approx(4.0).epsilon(1e-4));
}

TEST_CASE("plateau-power validation") {
  CHECK_THROWS_AS(build_non_ol_example(0.0, {0.5}), Error);
  CHECK_THROWS_AS(build_non_ol_example(1.0, {}), Error);
  CHECK_THROWS_AS(build_non_ol_example(1.0, {1.5}), Error);
  CHECK_THROWS_AS(build_non_ol_example(1.0, {0.5, 0.5}), Error);
  CHECK_THROWS_AS(build_non_ol_example(1.0, {0.5, 0.6}), Error);
}

namespace {
DistPtr f1_ref_ptr() {
  Family1Params p;
  p.n_max = 3;
  return std::make_shared<Family1>(p);
}
}  // namespace

TEST_CASE("fading tilt stays tail-equivalent to its base") {
  auto base = f1_ref_ptr();
  TiltedTailDist L(base, TiltedTailDist::Tilt::log_fade);
  CHECK(L.crossing_point() == doctest::Approx(4.364913489969).epsilon(1e-10));
  CHECK(L.tail(4.3) == 1.0);
  CHECK(L.density(4.3) == 0.0);
  CHECK(L.tail(4.365) < 1.0);
  CHECK(L.tilt_at(6.0) == doctest::Approx(1.4618037115403).epsilon(1e-12));
  CHECK(L.tail(6.0) == doctest::Approx(0.37550971662919).epsilon(1e-11));
  // plateau of the base: only the tilt-decay term contributes to the density
  CHECK(L.density(6.5) == doctest::Approx(0.0056482152534901).epsilon(1e-11));
  // equivalence: the ratio to the base tail tightens toward 1 with depth
  const double r_mid = L.tail(54.0) / base->tail(54.0);
  const double r_deep = L.tail(39366.0) / base->tail(39366.0);
  CHECK(r_mid > 1.0);
  CHECK(r_deep > 1.0);
  CHECK(r_deep < r_mid);
  CHECK(r_deep == doctest::Approx(1.0 + 1.0 / std::log(std::exp(1.0) + 39366.0)).epsilon(1e-12));
  // monotone tail across the crossing and block structure
  double prev = 1.0000000001;
  for (double x : {4.0, 4.5, 5.0, 5.5, 6.0, 10.0, 27.0, 40.0, 54.0, 100.0}) {
    CHECK(L.tail(x) <= prev);
    prev = L.tail(x);
  }
  CHECK(L.describe().find("tilted") != std::string::npos);
}

TEST_CASE("constant tilt violates tail equivalence by design") {
  auto base = f1_ref_ptr();
  TiltedTailDist L(base, TiltedTailDist::Tilt::constant, 2.0);
  CHECK(L.crossing_point() == doctest::Approx(5.0185194593567).epsilon(1e-10));
  CHECK(L.tail(6.0) == doctest::Approx(2.0 * 0.256881080315).epsilon(1e-11));
  CHECK(L.tail(1e4) / base->tail(1e4) == doctest::Approx(2.0).epsilon(1e-13));
  CHECK_THROWS_AS(TiltedTailDist(base, TiltedTailDist::Tilt::constant, 1.0), Error);
}

TEST_CASE("tilt wrapper rejects unsupported bases") {
  auto stairs = std::make_shared<StaircaseDist>(4);
  CHECK_THROWS_AS(TiltedTailDist(stairs, TiltedTailDist::Tilt::log_fade), Error);
  Family1Params p;
  p.b = 0.5;  // unbounded density at block edges
  p.n_max = 3;
  auto singular = std::make_shared<Family1>(p);
  CHECK_THROWS_AS(TiltedTailDist(singular, TiltedTailDist::Tilt::log_fade), Error);
}

TEST_CASE("tilted segment table clips at the crossing") {
  auto base = f1_ref_ptr();
  TiltedTailDist L(base, TiltedTailDist::Tilt::log_fade);
  auto segs = L.segments();
  REQUIRE(segs.size() >= 2);
  CHECK(segs[0].kind == SegKind::plateau);
  CHECK(segs[0].log_tail_hi == 0.0);
  CHECK(std::exp(segs[1].log_lo) == doctest::Approx(L.crossing_point()).epsilon(1e-10));
  // clipped first block keeps its upper edge
  CHECK(std::exp(segs[1].log_hi) == doctest::Approx(6.0).epsilon(1e-12));
  // masses over all segments sum to 1
  double mass = 0.0;
  for (const auto& s : segs) {
    if (s.log_mass != kNegInf) mass += std::exp(s.log_mass);
  }
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
}
