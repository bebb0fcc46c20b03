#include "doctest.h"

#include "widthlab/scaling.hpp"

#include <set>
#include <stdexcept>
#include <vector>

using namespace widthlab;

namespace {

Scaling shallow(Rat q_sigma, Rat qt_a, Rat qt_w, Optimizer opt = Optimizer::GradientDescent) {
  Scaling s;
  s.q_sigma = q_sigma;
  s.qt_a = qt_a;
  s.qt_w = qt_w;
  s.depth_H = 0;
  s.optimizer = opt;
  return s;
}

Scaling deep(Rat q_sigma, Rat qt_a, std::vector<Rat> qt_v, Rat qt_w, Optimizer opt = Optimizer::GradientDescent) {
  Scaling s;
  s.q_sigma = q_sigma;
  s.qt_a = qt_a;
  s.qt_v = std::move(qt_v);
  s.qt_w = qt_w;
  s.depth_H = static_cast<int>(s.qt_v.size());
  s.optimizer = opt;
  return s;
}

const std::set<DecompTerm> kAllTerms = {DecompTerm::Empty, DecompTerm::A, DecompTerm::W, DecompTerm::Cross};

}  // namespace

// ---------------------------------------------------------------------------
// Scaling validation
// ---------------------------------------------------------------------------

TEST_CASE("Scaling validation enforces the depth/exponent-count contract") {
  CHECK_NOTHROW(shallow(rat(-1, 2), rat(0), rat(0)).validate());
  CHECK_NOTHROW(deep(rat(-1), rat(1), {rat(2), rat(2)}, rat(1)).validate());

  Scaling bad_depth = shallow(rat(0), rat(0), rat(0));
  bad_depth.depth_H = -1;
  CHECK_THROWS_AS(bad_depth.validate(), std::invalid_argument);

  Scaling mismatched = shallow(rat(0), rat(0), rat(0));
  mismatched.qt_v.push_back(rat(1));  // depth_H still 0
  CHECK_THROWS_AS(mismatched.validate(), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// First-step increment exponents
// ---------------------------------------------------------------------------

TEST_CASE("first-step exponents at depth 0 add the rate and scale exponents") {
  const ExponentState kernel = first_step_exponents(shallow(rat(-1, 2), rat(0), rat(0)));
  CHECK(kernel.step_k == 1);
  CHECK(kernel.q_a == rat(-1, 2));
  CHECK(kernel.q_w == rat(-1, 2));
  CHECK(kernel.q_v.empty());
  CHECK(kernel.exactness == Exactness::Exact);

  const ExponentState all_zero = first_step_exponents(shallow(rat(0), rat(0), rat(0)));
  CHECK(all_zero.q_a == rat(0));
  CHECK(all_zero.q_w == rat(0));
}

TEST_CASE("first-step exponents for deep nets include the depth offsets") {
  // q_{a/w} = qt + (H+1) q_sigma + H/2, q_{v^h} = qt_v + (H+1) q_sigma + (H-1)/2.
  const ExponentState st = first_step_exponents(deep(rat(-1), rat(1), {rat(2), rat(2)}, rat(1)));
  CHECK(st.q_a == rat(-1));
  REQUIRE(st.q_v.size() == 2);
  CHECK(st.q_v[0] == rat(-1, 2));
  CHECK(st.q_v[1] == rat(-1, 2));
  CHECK(st.q_w == rat(-1));
  CHECK(st.exactness == Exactness::UpperBound);
}

TEST_CASE("first-step exponents reject RMSProp scalings") {
  CHECK_THROWS_AS(first_step_exponents(shallow(rat(-1), rat(0), rat(0), Optimizer::RMSProp)),
                  std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Exponent recursion (depth 0)
// ---------------------------------------------------------------------------

TEST_CASE("a fixed point of the recursion stays fixed") {
  const Scaling s = shallow(rat(-1, 2), rat(0), rat(0));
  const ExponentState first = first_step_exponents(s);
  const ExponentState second = step_exponents(first, first, s);
  CHECK(second.step_k == 2);
  CHECK(second.q_a == rat(-1, 2));
  CHECK(second.q_w == rat(-1, 2));
  CHECK(second.same_exponents(first));
}

TEST_CASE("an unbalanced first step drags the other group to a fixed point") {
  const Scaling s = shallow(rat(-1, 2), rat(1), rat(0));  // first step (1/2, -1/2)
  const ExponentState first = first_step_exponents(s);
  REQUIRE(first.q_a == rat(1, 2));
  REQUIRE(first.q_w == rat(-1, 2));

  const ExponentState k2 = step_exponents(first, first, s);
  CHECK(k2.q_a == rat(1, 2));
  CHECK(k2.q_w == rat(0));

  const ExponentState k3 = step_exponents(k2, first, s);
  CHECK(k3.q_a == rat(1, 2));
  CHECK(k3.q_w == rat(0));
}

TEST_CASE("a positive-sum first step grows without bound") {
  const Scaling s = shallow(rat(1, 4), rat(0), rat(0));  // first step (1/4, 1/4)
  const ExponentState first = first_step_exponents(s);
  REQUIRE(first.q_a == rat(1, 4));

  ExponentState st = first;
  st = step_exponents(st, first, s);
  CHECK(st.q_a == rat(1, 2));
  CHECK(st.q_w == rat(1, 2));
  st = step_exponents(st, first, s);
  CHECK(st.q_a == rat(3, 4));
  st = step_exponents(st, first, s);
  CHECK(st.q_a == rat(1));
  CHECK(st.q_w == rat(1));
}

TEST_CASE("RMSProp increment exponents equal the rate exponents for every step") {
  const ExponentState st =
      rmsprop_increment_exponents(deep(rat(-1), rat(0), {rat(0), rat(0)}, rat(0), Optimizer::RMSProp));
  CHECK(st.q_a == rat(0));
  CHECK(st.q_v == std::vector<Rat>{rat(0), rat(0)});
  CHECK(st.q_w == rat(0));
  CHECK(st.exactness == Exactness::Exact);

  const ExponentState neg =
      rmsprop_increment_exponents(shallow(rat(-1, 2), rat(-1), rat(1, 3), Optimizer::RMSProp));
  CHECK(neg.q_a == rat(-1));
  CHECK(neg.q_w == rat(1, 3));

  CHECK_THROWS_AS(rmsprop_increment_exponents(shallow(rat(0), rat(0), rat(0))), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Concentration exponents (kappa)
// ---------------------------------------------------------------------------

namespace {

ExponentState state_h0(Rat q_a, Rat q_w, int k = 1) {
  ExponentState st;
  st.step_k = k;
  st.q_a = q_a;
  st.q_w = q_w;
  return st;
}

}  // namespace

TEST_CASE("both groups vanishing gives CLT cancellation on empty and cross terms") {
  const ExponentState first = state_h0(rat(-1, 2), rat(-1, 2));
  const KappaAssignment k = kappa_terms(first, first);
  CHECK(k.case_tag == ConcentrationCase::BothNegative);
  CHECK(k.kappa_empty == rat(1, 2));
  CHECK(k.kappa_a == rat(1));
  CHECK(k.kappa_w == rat(1));
  CHECK(k.kappa_cross == rat(1, 2));
}

TEST_CASE("both groups order-one gives coherent sums everywhere") {
  const ExponentState first = state_h0(rat(0), rat(0));
  const KappaAssignment k = kappa_terms(first, first);
  CHECK(k.case_tag == ConcentrationCase::BothZero);
  CHECK(k.kappa_empty == rat(1));
  CHECK(k.kappa_a == rat(1));
  CHECK(k.kappa_w == rat(1));
  CHECK(k.kappa_cross == rat(1));
}

TEST_CASE("order-one output with vanishing input keeps frozen-gate cancellation") {
  const ExponentState first = state_h0(rat(0), rat(-1));
  const KappaAssignment k = kappa_terms(first, first);
  CHECK(k.case_tag == ConcentrationCase::OutputZeroInputNegative);
  CHECK(k.kappa_a == rat(1));
  CHECK(k.kappa_empty == rat(1, 2));
  CHECK(k.kappa_cross == rat(1));  // 1 + max(0, -1) clamps to 1
}

TEST_CASE("cross-term kappa interpolates between CLT and coherent rates") {
  // kappa_cross = clamp(1 + max(q_a, q_w), [1/2, 1]).
  CHECK(kappa_terms(state_h0(rat(-1, 4), rat(-1, 4)), state_h0(rat(-1, 4), rat(-1, 4))).kappa_cross ==
        rat(3, 4));
  CHECK(kappa_terms(state_h0(rat(-2), rat(-2)), state_h0(rat(-2), rat(-2))).kappa_cross == rat(1, 2));
  CHECK(kappa_terms(state_h0(rat(-1, 2), rat(-1, 2)), state_h0(rat(-1, 2), rat(-1, 2))).kappa_cross ==
        rat(1, 2));
}

TEST_CASE("kappa ranges hold over a grid of sign patterns") {
  const std::vector<Rat> grid = {rat(-2), rat(-1), rat(-1, 2), rat(-1, 4), rat(0), rat(1, 2), rat(1)};
  for (const Rat& qa : grid) {
    for (const Rat& qw : grid) {
      const ExponentState st = state_h0(qa, qw);
      const KappaAssignment k = kappa_terms(st, st);
      for (const Rat& kappa : {k.kappa_empty, k.kappa_a, k.kappa_w, k.kappa_cross}) {
        CHECK(kappa >= rat(1, 2));
        CHECK(kappa <= rat(1));
      }
      CHECK(k.kappa_a == rat(1));
      CHECK(k.kappa_w == rat(1));
      // Frozen input features imply CLT cancellation of the init term and vice versa.
      CHECK((k.kappa_empty == rat(1, 2)) == (st.q_w < rat(0)));
    }
  }
}

// ---------------------------------------------------------------------------
// Decomposition-term exponents
// ---------------------------------------------------------------------------

TEST_CASE("kernel-scaling decomposition exponents are (0, 0, 0, -1)") {
  const Scaling s = shallow(rat(-1, 2), rat(0), rat(0));
  const ExponentState first = first_step_exponents(s);
  const DecompositionExponents d = decomposition_exponents(s, first, kappa_terms(first, first));
  CHECK(d.qf_empty == rat(0));
  CHECK(d.qf_a == rat(0));
  CHECK(d.qf_w == rat(0));
  CHECK(d.qf_cross == rat(-1));
  CHECK(d.max_exponent() == rat(0));
}

TEST_CASE("mean-field decomposition exponents are all zero") {
  const Scaling s = shallow(rat(-1), rat(1), rat(1));
  const ExponentState first = first_step_exponents(s);
  REQUIRE(first.q_a == rat(0));
  REQUIRE(first.q_w == rat(0));
  const DecompositionExponents d = decomposition_exponents(s, first, kappa_terms(first, first));
  CHECK(d.qf_empty == rat(0));
  CHECK(d.qf_a == rat(0));
  CHECK(d.qf_w == rat(0));
  CHECK(d.qf_cross == rat(0));
}

TEST_CASE("decomposition exponents interpolate at q_sigma = -3/4") {
  const Scaling s = shallow(rat(-3, 4), rat(1, 2), rat(1, 2));
  const ExponentState first = first_step_exponents(s);
  REQUIRE(first.q_a == rat(-1, 4));
  const DecompositionExponents d = decomposition_exponents(s, first, kappa_terms(first, first));
  CHECK(d.qf_empty == rat(-1, 4));
  CHECK(d.qf_a == rat(0));
  CHECK(d.qf_w == rat(0));
  CHECK(d.qf_cross == rat(-1, 2));
}

TEST_CASE("decomposition exponents are affine in a kappa shift") {
  const Scaling s = shallow(rat(-1, 2), rat(0), rat(0));
  const ExponentState st = first_step_exponents(s);
  KappaAssignment k = kappa_terms(st, st);
  const DecompositionExponents base = decomposition_exponents(s, st, k);
  const Rat shift = rat(1, 8);
  k.kappa_empty += shift;
  k.kappa_a += shift;
  k.kappa_w += shift;
  k.kappa_cross += shift;
  const DecompositionExponents bumped = decomposition_exponents(s, st, k);
  CHECK(bumped.qf_empty == base.qf_empty + shift);
  CHECK(bumped.qf_a == base.qf_a + shift);
  CHECK(bumped.qf_w == base.qf_w + shift);
  CHECK(bumped.qf_cross == base.qf_cross + shift);
}

TEST_CASE("non-triviality checks both boundedness and actual movement") {
  DecompositionExponents kernel;
  kernel.qf_empty = rat(0);
  kernel.qf_a = rat(0);
  kernel.qf_w = rat(0);
  kernel.qf_cross = rat(-1);
  CHECK(check_nontrivial(kernel, rat(-1, 2)));

  DecompositionExponents vanishing;
  vanishing.qf_empty = rat(-1);
  vanishing.qf_a = rat(-1);
  vanishing.qf_w = rat(-1);
  vanishing.qf_cross = rat(-1);
  CHECK(!check_nontrivial(vanishing, rat(-1)));

  DecompositionExponents divergent;
  divergent.qf_empty = rat(1);
  divergent.qf_a = rat(0);
  divergent.qf_w = rat(0);
  divergent.qf_cross = rat(0);
  CHECK(!check_nontrivial(divergent, rat(0)));

  // Init term alive while features still rotate counts as movement.
  DecompositionExponents init_only;
  init_only.qf_empty = rat(0);
  init_only.qf_a = rat(-1);
  init_only.qf_w = rat(-1);
  init_only.qf_cross = rat(-1);
  CHECK(check_nontrivial(init_only, rat(0)));
  CHECK(!check_nontrivial(init_only, rat(-1, 2)));
}

// ---------------------------------------------------------------------------
// Classification: the anchor scalings
// ---------------------------------------------------------------------------

TEST_CASE("kernel anchor classifies with three surviving terms") {
  const RegimeReport r = classify_scaling(shallow(rat(-1, 2), rat(0), rat(0)));
  CHECK(r.kind == RegimeKind::KernelRegime);
  CHECK(r.surviving_terms == std::set<DecompTerm>{DecompTerm::Empty, DecompTerm::A, DecompTerm::W});
  CHECK(r.reached_fixed_point);
  REQUIRE(r.decomposition.has_value());
  CHECK(r.decomposition->qf_empty == rat(0));
  CHECK(r.decomposition->qf_a == rat(0));
  CHECK(r.decomposition->qf_w == rat(0));
  CHECK(r.decomposition->qf_cross == rat(-1));
  REQUIRE(r.kappa.has_value());
  CHECK(r.kappa->kappa_empty == rat(1, 2));
  CHECK(r.kappa->kappa_cross == rat(1, 2));
}

TEST_CASE("mean-field anchor keeps all four terms alive") {
  const RegimeReport r = classify_scaling(shallow(rat(-1), rat(1), rat(1)));
  CHECK(r.kind == RegimeKind::MeanFieldRegime);
  CHECK(r.surviving_terms == kAllTerms);
  REQUIRE(r.decomposition.has_value());
  CHECK(r.decomposition->max_exponent() == rat(0));
  CHECK(r.decomposition->qf_cross == rat(0));
}

TEST_CASE("interpolating anchor keeps only the learned linear terms") {
  const RegimeReport r = classify_scaling(shallow(rat(-3, 4), rat(1, 2), rat(1, 2)));
  CHECK(r.kind == RegimeKind::IntermediateRegime);
  CHECK(r.surviving_terms == std::set<DecompTerm>{DecompTerm::A, DecompTerm::W});
  REQUIRE(r.decomposition.has_value());
  CHECK(r.decomposition->qf_empty == rat(-1, 4));
  CHECK(r.decomposition->qf_cross == rat(-1, 2));
}

TEST_CASE("the constant-rate default scaling diverges") {
  const RegimeReport r = classify_scaling(shallow(rat(-1, 2), rat(1), rat(0)));
  CHECK(r.kind == RegimeKind::Divergent);
  CHECK(r.reached_fixed_point);
  REQUIRE(!r.exponent_history.empty());
  CHECK(r.exponent_history.front().q_a == rat(1, 2));
  CHECK(r.exponent_history.front().q_w == rat(-1, 2));
  CHECK(r.exponent_history.back().q_a == rat(1, 2));
  CHECK(r.exponent_history.back().q_w == rat(0));
  REQUIRE(r.decomposition.has_value());
  CHECK(r.decomposition->qf_empty == rat(1, 2));
  CHECK(r.decomposition->qf_a == rat(1));
  CHECK(r.decomposition->qf_w == rat(1, 2));
  CHECK(r.decomposition->qf_cross == rat(1));
}

TEST_CASE("growing exponents without a fixed point classify divergent without a profile") {
  const RegimeReport r = classify_scaling(shallow(rat(1, 4), rat(0), rat(0)));
  CHECK(r.kind == RegimeKind::Divergent);
  CHECK(!r.reached_fixed_point);
  CHECK(r.surviving_terms.empty());
  CHECK(!r.kappa.has_value());
  CHECK(!r.decomposition.has_value());
  CHECK(!r.notes.empty());
}

TEST_CASE("strongly negative scale certifies a vanishing limit") {
  const RegimeReport r = classify_scaling(shallow(rat(-2), rat(0), rat(0)));
  CHECK(r.kind == RegimeKind::TrivialVanishing);
  REQUIRE(r.decomposition.has_value());
  CHECK(r.decomposition->max_exponent() < rat(0));
}

TEST_CASE("bounded but motionless scalings are reported frozen at initialization") {
  const RegimeReport r = classify_scaling(shallow(rat(-1, 2), rat(-5), rat(-5)));
  CHECK(r.kind == RegimeKind::TrivialVanishing);
  CHECK(r.surviving_terms == std::set<DecompTerm>{DecompTerm::Empty});
  CHECK(r.notes.find("frozen") != std::string::npos);
}

// ---------------------------------------------------------------------------
// Classification: one-sided regimes
// ---------------------------------------------------------------------------

TEST_CASE("output-rate-only scaling learns the output layer alone") {
  const RegimeReport r = classify_scaling(shallow(rat(-1), rat(1), rat(0)));
  CHECK(r.kind == RegimeKind::OutputOnlyRegime);
  CHECK(r.surviving_terms == std::set<DecompTerm>{DecompTerm::A});
}

TEST_CASE("input-rate-only scaling keeps the init and input terms") {
  const RegimeReport r = classify_scaling(shallow(rat(-1), rat(0), rat(1)));
  CHECK(r.kind == RegimeKind::InputOnlyRegime);
  CHECK(r.surviving_terms == std::set<DecompTerm>{DecompTerm::Empty, DecompTerm::W});
}

TEST_CASE("a growing output group balanced by strong downscaling keeps the cross term") {
  const RegimeReport r = classify_scaling(shallow(rat(-3, 2), rat(2), rat(1)));
  CHECK(r.kind == RegimeKind::OutputPlusCrossRegime);
  CHECK(r.surviving_terms == std::set<DecompTerm>{DecompTerm::A, DecompTerm::Cross});
  REQUIRE(r.kappa.has_value());
  CHECK(r.kappa->case_tag == ConcentrationCase::OutputGrowsSumNonpositive);
}

TEST_CASE("a growing input group balanced by strong downscaling mirrors to the input side") {
  const RegimeReport r = classify_scaling(shallow(rat(-3, 2), rat(1), rat(2)));
  CHECK(r.kind == RegimeKind::InputOnlyRegime);
  CHECK(r.surviving_terms == std::set<DecompTerm>{DecompTerm::W, DecompTerm::Cross});
  CHECK(!r.notes.empty());
}

// ---------------------------------------------------------------------------
// Classification: RMSProp
// ---------------------------------------------------------------------------

TEST_CASE("RMSProp mean-field scaling is mean-field at depth 0") {
  const RegimeReport r = classify_scaling(canonical_scaling(CanonicalLimit::MeanField, 0, Optimizer::RMSProp));
  CHECK(r.kind == RegimeKind::MeanFieldRegime);
  CHECK(r.surviving_terms == kAllTerms);
}

TEST_CASE("RMSProp kernel scaling overshoots because increments stay order-one") {
  const RegimeReport r = classify_scaling(canonical_scaling(CanonicalLimit::Kernel, 0, Optimizer::RMSProp));
  CHECK(r.kind == RegimeKind::Divergent);
  REQUIRE(r.decomposition.has_value());
  CHECK(r.decomposition->qf_empty == rat(1, 2));
  REQUIRE(r.kappa.has_value());
  CHECK(r.kappa->case_tag == ConcentrationCase::BothZero);
}

// ---------------------------------------------------------------------------
// Classification: deep nets
// ---------------------------------------------------------------------------

TEST_CASE("deep mean-field gradient descent certifies a vanishing limit at depth 2") {
  const RegimeReport r = classify_scaling(canonical_scaling(CanonicalLimit::MeanField, 2, Optimizer::GradientDescent));
  CHECK(r.kind == RegimeKind::TrivialVanishing);
  CHECK(r.reached_fixed_point);
  REQUIRE(!r.exponent_history.empty());
  const ExponentState& first = r.exponent_history.front();
  CHECK(first.q_a == rat(-1));
  CHECK(first.q_v == std::vector<Rat>{rat(-1, 2), rat(-1, 2)});
  CHECK(first.q_w == rat(-1));
  CHECK(first.exactness == Exactness::UpperBound);
  CHECK(!r.kappa.has_value());
  CHECK(!r.decomposition.has_value());
}

TEST_CASE("depth-1 mean-field gradient descent stays unresolved") {
  const RegimeReport r = classify_scaling(canonical_scaling(CanonicalLimit::MeanField, 1, Optimizer::GradientDescent));
  CHECK(r.kind == RegimeKind::NotProvablyTrivial);
  REQUIRE(!r.exponent_history.empty());
  CHECK(r.exponent_history.front().q_v == std::vector<Rat>{rat(0)});
}

TEST_CASE("deep kernel gradient descent stays unresolved because the init term is order-one") {
  for (int depth : {1, 2, 3}) {
    const RegimeReport r =
        classify_scaling(canonical_scaling(CanonicalLimit::Kernel, depth, Optimizer::GradientDescent));
    CHECK(r.kind == RegimeKind::NotProvablyTrivial);
  }
}

TEST_CASE("deep RMSProp mean-field keeps order-one increments and stays unresolved") {
  const RegimeReport r = classify_scaling(canonical_scaling(CanonicalLimit::MeanField, 2, Optimizer::RMSProp));
  CHECK(r.kind == RegimeKind::NotProvablyTrivial);
  REQUIRE(!r.exponent_history.empty());
  CHECK(r.exponent_history.back().q_a == rat(0));
}

TEST_CASE("deep mean-field exponent bounds never exceed their first-step values") {
  // At the mean-field scaling the first step gives q_{a/w} = -H/2 and
  // q_v = (1-H)/2; the bound recursion must stay at or below those levels.
  for (int depth : {2, 3, 4}) {
    const Scaling s = canonical_scaling(CanonicalLimit::MeanField, depth, Optimizer::GradientDescent);
    ExponentState first = first_step_exponents(s);
    const Rat aw_cap = rat(-depth, 2);
    const Rat v_cap = rat(1 - depth, 2);
    REQUIRE(first.q_a == aw_cap);
    REQUIRE(first.q_v.front() == v_cap);
    ExponentState st = first;
    for (int k = 1; k <= 50; ++k) {
      st = step_exponents(st, first, s);
      CHECK(st.q_a <= aw_cap);
      CHECK(st.q_w <= aw_cap);
      for (const Rat& qv : st.q_v) CHECK(qv <= v_cap);
    }
  }
}

// ---------------------------------------------------------------------------
// Recursion invariants over an exponent grid
// ---------------------------------------------------------------------------

namespace {

std::vector<Rat> exponent_grid() {
  return {rat(-2), rat(-1), rat(-3, 4), rat(-1, 2), rat(-1, 4), rat(0), rat(1, 4), rat(1, 2), rat(1), rat(2)};
}

}  // namespace

TEST_CASE("nonpositive first steps reach a fixed point by the second step") {
  for (const Rat& qa : exponent_grid()) {
    for (const Rat& qw : exponent_grid()) {
      if (qa > rat(0) || qw > rat(0)) continue;
      const Scaling s = shallow(rat(0), qa, qw);  // first step = (qa, qw) directly
      const ExponentState first = first_step_exponents(s);
      const ExponentState k2 = step_exponents(first, first, s);
      const ExponentState k3 = step_exponents(k2, first, s);
      CHECK(k3.same_exponents(k2));
    }
  }
}

TEST_CASE("increment exponents are non-decreasing in the step count") {
  for (const Rat& qa : exponent_grid()) {
    for (const Rat& qw : exponent_grid()) {
      const Scaling s = shallow(rat(0), qa, qw);
      const ExponentState first = first_step_exponents(s);
      ExponentState st = first;
      for (int k = 1; k <= 20; ++k) {
        const ExponentState next = step_exponents(st, first, s);
        CHECK(next.q_a >= st.q_a);
        CHECK(next.q_w >= st.q_w);
        st = next;
      }
    }
  }
}

TEST_CASE("the recursion either grows past any bound or settles by the third step") {
  for (const Rat& qa : exponent_grid()) {
    for (const Rat& qw : exponent_grid()) {
      const Scaling s = shallow(rat(0), qa, qw);
      const ExponentState first = first_step_exponents(s);
      const bool growing = (qa + qw > rat(0)) && (std::max(qa, qw) > rat(0));
      ExponentState st = first;
      for (int k = 1; k < 40; ++k) st = step_exponents(st, first, s);
      if (growing) {
        CHECK(st.q_a + st.q_w >= rat(10));  // far past any plausible fixed point
      } else {
        ExponentState ref = first;
        ref = step_exponents(ref, first, s);
        ref = step_exponents(ref, first, s);
        CHECK(st.same_exponents(ref));
      }
    }
  }
}

TEST_CASE("surviving terms are exactly the decomposition terms with exponent zero") {
  for (const Rat& qs : {rat(-3, 2), rat(-1), rat(-3, 4), rat(-1, 2), rat(0)}) {
    for (const Rat& qa : exponent_grid()) {
      for (const Rat& qw : exponent_grid()) {
        const RegimeReport r = classify_scaling(shallow(qs, qa, qw));
        if (!r.decomposition.has_value()) {
          CHECK(r.surviving_terms.empty());
          continue;
        }
        if (r.decomposition->max_exponent() != rat(0)) {
          // Divergent or uniformly vanishing profiles carry no limit terms.
          CHECK(r.surviving_terms.empty());
          continue;
        }
        std::set<DecompTerm> expect;
        if (r.decomposition->qf_empty == rat(0)) expect.insert(DecompTerm::Empty);
        if (r.decomposition->qf_a == rat(0)) expect.insert(DecompTerm::A);
        if (r.decomposition->qf_w == rat(0)) expect.insert(DecompTerm::W);
        if (r.decomposition->qf_cross == rat(0)) expect.insert(DecompTerm::Cross);
        CHECK(r.surviving_terms == expect);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Canonical and interpolating scalings
// ---------------------------------------------------------------------------

TEST_CASE("canonical scalings carry the published exponents") {
  const Scaling mf0 = canonical_scaling(CanonicalLimit::MeanField, 0, Optimizer::GradientDescent);
  CHECK(mf0.q_sigma == rat(-1));
  CHECK(mf0.qt_a == rat(1));
  CHECK(mf0.qt_v.empty());
  CHECK(mf0.qt_w == rat(1));

  const Scaling mf2 = canonical_scaling(CanonicalLimit::MeanField, 2, Optimizer::GradientDescent);
  CHECK(mf2.q_sigma == rat(-1));
  CHECK(mf2.qt_a == rat(1));
  CHECK(mf2.qt_v == std::vector<Rat>{rat(2), rat(2)});
  CHECK(mf2.qt_w == rat(1));

  const Scaling ntk1 = canonical_scaling(CanonicalLimit::Kernel, 1, Optimizer::GradientDescent);
  CHECK(ntk1.q_sigma == rat(-1, 2));
  CHECK(ntk1.qt_a == rat(0));
  CHECK(ntk1.qt_v == std::vector<Rat>{rat(0)});
  CHECK(ntk1.qt_w == rat(0));

  const Scaling rk0 = canonical_scaling(CanonicalLimit::Kernel, 0, Optimizer::RMSProp);
  CHECK(rk0.q_sigma == rat(-1, 2));
  CHECK(rk0.qt_a == rat(0));
  CHECK(rk0.qt_w == rat(0));
  CHECK(rk0.optimizer == Optimizer::RMSProp);

  const Scaling rmf2 = canonical_scaling(CanonicalLimit::MeanField, 2, Optimizer::RMSProp);
  CHECK(rmf2.q_sigma == rat(-1));
  CHECK(rmf2.qt_a == rat(0));
  CHECK(rmf2.qt_v == std::vector<Rat>{rat(0), rat(0)});
  CHECK(rmf2.qt_w == rat(0));
}

TEST_CASE("shallow canonical scalings classify to their own regimes") {
  CHECK(classify_scaling(canonical_scaling(CanonicalLimit::Kernel, 0, Optimizer::GradientDescent)).kind ==
        RegimeKind::KernelRegime);
  CHECK(classify_scaling(canonical_scaling(CanonicalLimit::MeanField, 0, Optimizer::GradientDescent)).kind ==
        RegimeKind::MeanFieldRegime);
  CHECK(classify_scaling(canonical_scaling(CanonicalLimit::MeanField, 0, Optimizer::RMSProp)).kind ==
        RegimeKind::MeanFieldRegime);
}

TEST_CASE("interpolating scalings classify intermediate across the open interval") {
  for (const Rat& qs : {rat(-99, 100), rat(-7, 8), rat(-3, 4), rat(-5, 8), rat(-51, 100)}) {
    const Scaling s = interpolating_scaling(qs);
    CHECK(s.q_sigma == qs);
    CHECK(s.qt_a == rat(-1) - rat(2) * qs);
    CHECK(s.qt_w == s.qt_a);
    CHECK(classify_scaling(s).kind == RegimeKind::IntermediateRegime);
  }
  CHECK_THROWS_AS(interpolating_scaling(rat(-1, 2)), std::invalid_argument);
  CHECK_THROWS_AS(interpolating_scaling(rat(-1)), std::invalid_argument);
  CHECK_THROWS_AS(interpolating_scaling(rat(0)), std::invalid_argument);
}

TEST_CASE("enum labels render to their published names") {
  CHECK(std::string(to_string(RegimeKind::KernelRegime)) == "NTK");
  CHECK(std::string(to_string(RegimeKind::MeanFieldRegime)) == "MeanField");
  CHECK(std::string(to_string(DecompTerm::Empty)) == "empty");
  CHECK(std::string(to_string(DecompTerm::Cross)) == "aw");
  CHECK(std::string(to_string(ConcentrationCase::BothNegative)) == "BothNegative");
  CHECK(std::string(to_string(Optimizer::RMSProp)) == "rmsprop");
}
