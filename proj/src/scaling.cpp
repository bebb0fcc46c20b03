#include "widthlab/scaling.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace widthlab {

namespace {

Rat rat_max(const Rat& a, const Rat& b) { return a < b ? b : a; }

Rat max_over(const std::vector<Rat>& values, const Rat& fallback) {
  Rat best = fallback;
  for (const Rat& v : values) best = rat_max(best, v);
  return best;
}

// Largest per-layer increment exponent; the cross-layer coupling terms in the
// deep bound recursions are controlled by the worst layer.
Rat qv_max_of(const ExponentState& state) {
  Rat best = state.q_v.empty() ? Rat(0) : state.q_v.front();
  for (const Rat& v : state.q_v) best = rat_max(best, v);
  return best;
}

}  // namespace

const char* to_string(Optimizer opt) {
  switch (opt) {
    case Optimizer::GradientDescent: return "gd";
    case Optimizer::RMSProp: return "rmsprop";
  }
  return "?";
}

const char* to_string(ConcentrationCase c) {
  switch (c) {
    case ConcentrationCase::BothNegative: return "BothNegative";
    case ConcentrationCase::BothZero: return "BothZero";
    case ConcentrationCase::OutputZeroInputNegative: return "OutputZeroInputNegative";
    case ConcentrationCase::InputZeroOutputNegative: return "InputZeroOutputNegative";
    case ConcentrationCase::OutputGrowsSumNonpositive: return "OutputGrowsSumNonpositive";
    case ConcentrationCase::InputGrowsSumNonpositive: return "InputGrowsSumNonpositive";
    case ConcentrationCase::PositiveSum: return "PositiveSum";
  }
  return "?";
}

std::optional<Optimizer> parse_optimizer(std::string_view text) {
  if (text == "gd" || text == "sgd" || text == "gradient-descent") return Optimizer::GradientDescent;
  if (text == "rmsprop") return Optimizer::RMSProp;
  return std::nullopt;
}

const char* to_string(DecompTerm term) {
  switch (term) {
    case DecompTerm::Empty: return "empty";
    case DecompTerm::A: return "a";
    case DecompTerm::W: return "w";
    case DecompTerm::Cross: return "aw";
  }
  return "?";
}

const char* to_string(RegimeKind kind) {
  switch (kind) {
    case RegimeKind::KernelRegime: return "NTK";
    case RegimeKind::MeanFieldRegime: return "MeanField";
    case RegimeKind::IntermediateRegime: return "Intermediate";
    case RegimeKind::OutputOnlyRegime: return "OutputOnly";
    case RegimeKind::InputOnlyRegime: return "InputOnly";
    case RegimeKind::OutputPlusCrossRegime: return "OutputPlusCross";
    case RegimeKind::Divergent: return "Divergent";
    case RegimeKind::TrivialVanishing: return "TrivialVanishing";
    case RegimeKind::NotProvablyTrivial: return "NotProvablyTrivial";
  }
  return "?";
}

void Scaling::validate() const {
  if (depth_H < 0) throw std::invalid_argument("Scaling: depth_H must be >= 0");
  if (static_cast<int>(qt_v.size()) != depth_H) {
    throw std::invalid_argument("Scaling: qt_v must have exactly depth_H entries");
  }
}

ExponentState first_step_exponents(const Scaling& s) {
  s.validate();
  if (s.optimizer != Optimizer::GradientDescent) {
    throw std::invalid_argument(
        "first_step_exponents applies to gradient descent; use rmsprop_increment_exponents for RMSProp");
  }
  const int H = s.depth_H;
  ExponentState out;
  out.step_k = 1;
  if (H == 0) {
    out.q_a = s.qt_a + s.q_sigma;
    out.q_w = s.qt_w + s.q_sigma;
    out.exactness = Exactness::Exact;
    return out;
  }
  // Each backward pass through a width-d layer contributes a sqrt(d) factor
  // from the zero-mean sum over units; the output multiplier contributes
  // sigma^{H+1}. The hidden-to-hidden groups see one fewer random sum.
  const Rat depth_sigma = Rat(H + 1) * s.q_sigma;
  out.q_a = s.qt_a + depth_sigma + Rat(H, 2);
  out.q_w = s.qt_w + depth_sigma + Rat(H, 2);
  out.q_v.reserve(H);
  for (int h = 0; h < H; ++h) out.q_v.push_back(s.qt_v[h] + depth_sigma + Rat(H - 1, 2));
  out.exactness = Exactness::UpperBound;
  return out;
}

ExponentState step_exponents(const ExponentState& state, const ExponentState& first, const Scaling& s) {
  s.validate();
  const int H = s.depth_H;
  ExponentState out = state;
  out.step_k = state.step_k + 1;
  if (H == 0) {
    // A step moves each group by (its first-step magnitude) amplified by
    // however far the other group has already wandered from init.
    out.q_a = rat_max(state.q_a, first.q_a + rat_max(Rat(0), state.q_w));
    out.q_w = rat_max(state.q_w, first.q_w + rat_max(Rat(0), state.q_a));
    out.exactness = Exactness::Exact;
    return out;
  }
  // Deep case: each candidate below bounds one way a step-k gradient can pick
  // up width factors — through untouched initialization (the H/2 terms) or
  // through already-moved groups (each moved group trades a sqrt(d)
  // cancellation for a coherent d factor times its increment exponent).
  const Rat ds = Rat(H + 1) * s.q_sigma;
  const Rat qa = state.q_a;
  const Rat qw = state.q_w;
  const Rat qv = qv_max_of(state);

  out.q_w = rat_max(state.q_w,
                    s.qt_w + ds +
                        max_over({Rat(H + 1, 2) + qa, Rat(H + 1, 2) + qv, Rat(H) + qa + qv, Rat(H) + qv + qv},
                                 Rat(H, 2)));
  out.q_a = rat_max(state.q_a,
                    s.qt_a + ds +
                        max_over({Rat(H + 1, 2) + qw, Rat(H + 1, 2) + qv, Rat(H) + qw + qv, Rat(H) + qv + qv},
                                 Rat(H, 2)));
  for (int h = 0; h < H; ++h) {
    out.q_v[h] = rat_max(
        state.q_v[h],
        s.qt_v[h] + ds +
            max_over({Rat(H, 2) + qa, Rat(H, 2) + qw, Rat(H, 2) + qv, Rat(H - 1) + qa + qw, Rat(H - 1) + qw + qv,
                      Rat(H - 1) + qa + qv},
                     Rat(H - 1, 2)));
  }
  out.exactness = Exactness::UpperBound;
  return out;
}

ExponentState rmsprop_increment_exponents(const Scaling& s) {
  s.validate();
  if (s.optimizer != Optimizer::RMSProp) {
    throw std::invalid_argument("rmsprop_increment_exponents requires an RMSProp scaling");
  }
  // Normalized updates move every coordinate by exactly +-eta_hat per step,
  // so increment magnitudes track the learning-rate exponents at every k.
  ExponentState out;
  out.step_k = 1;
  out.q_a = s.qt_a;
  out.q_v = s.qt_v;
  out.q_w = s.qt_w;
  out.exactness = Exactness::Exact;
  return out;
}

KappaAssignment kappa_terms(const ExponentState& first, const ExponentState& state_k) {
  const Rat zero(0);
  KappaAssignment out;

  const Rat& a1 = first.q_a;
  const Rat& w1 = first.q_w;
  if (a1 < zero && w1 < zero) {
    out.case_tag = ConcentrationCase::BothNegative;
  } else if (a1 == zero && w1 == zero) {
    out.case_tag = ConcentrationCase::BothZero;
  } else if (a1 == zero && w1 < zero) {
    out.case_tag = ConcentrationCase::OutputZeroInputNegative;
  } else if (w1 == zero && a1 < zero) {
    out.case_tag = ConcentrationCase::InputZeroOutputNegative;
  } else if (a1 > zero && a1 + w1 <= zero) {
    out.case_tag = ConcentrationCase::OutputGrowsSumNonpositive;
  } else if (w1 > zero && a1 + w1 <= zero) {
    out.case_tag = ConcentrationCase::InputGrowsSumNonpositive;
  } else {
    out.case_tag = ConcentrationCase::PositiveSum;
  }

  // Increment sums align with the training signal: no cancellation.
  out.kappa_a = Rat(1);
  out.kappa_w = Rat(1);
  // The init term keeps its central-limit sqrt(d) scale only while the
  // activation gates converge back to their initial values.
  out.kappa_empty = state_k.q_w < zero ? Rat(1, 2) : Rat(1);
  // Cross term: zero-mean at leading order, plus a coherent second-order
  // piece carrying one extra increment factor from the larger-moving group.
  out.kappa_cross = std::min(Rat(1), rat_max(Rat(1, 2), Rat(1) + rat_max(state_k.q_a, state_k.q_w)));
  return out;
}

Rat DecompositionExponents::max_exponent() const {
  return std::max({qf_empty, qf_a, qf_w, qf_cross});
}

DecompositionExponents decomposition_exponents(const Scaling& s, const ExponentState& state,
                                               const KappaAssignment& kappa) {
  if (s.depth_H != 0) {
    throw std::invalid_argument("decomposition_exponents is defined for depth_H == 0 networks");
  }
  DecompositionExponents out;
  out.step_k = state.step_k;
  out.qf_empty = s.q_sigma + kappa.kappa_empty;
  out.qf_a = state.q_a + s.q_sigma + kappa.kappa_a;
  out.qf_w = state.q_w + s.q_sigma + kappa.kappa_w;
  out.qf_cross = state.q_a + state.q_w + s.q_sigma + kappa.kappa_cross;
  return out;
}

bool check_nontrivial(const DecompositionExponents& d, const Rat& q_w_k) {
  const Rat zero(0);
  const bool bounded = d.max_exponent() == zero;
  const bool moves = std::max({d.qf_a, d.qf_w, d.qf_cross}) == zero || (d.qf_empty == zero && q_w_k >= zero);
  return bounded && moves;
}

namespace {

std::string format_state(const ExponentState& st) {
  std::ostringstream os;
  os << "(q_a=" << to_string(st.q_a);
  for (std::size_t h = 0; h < st.q_v.size(); ++h) os << ", q_v" << h + 1 << "=" << to_string(st.q_v[h]);
  os << ", q_w=" << to_string(st.q_w) << ")";
  return os.str();
}

bool all_negative(const ExponentState& st) {
  const Rat zero(0);
  if (!(st.q_a < zero) || !(st.q_w < zero)) return false;
  for (const Rat& v : st.q_v) {
    if (!(v < zero)) return false;
  }
  return true;
}

Rat max_exponent_of(const ExponentState& st) {
  Rat best = rat_max(st.q_a, st.q_w);
  for (const Rat& v : st.q_v) best = rat_max(best, v);
  return best;
}

RegimeReport classify_shallow(const Scaling& s, int k_max) {
  RegimeReport rep;

  ExponentState first;
  if (s.optimizer == Optimizer::GradientDescent) {
    first = first_step_exponents(s);
    rep.exponent_history.push_back(first);
    ExponentState state = first;
    while (static_cast<int>(rep.exponent_history.size()) < k_max) {
      ExponentState next = step_exponents(state, first, s);
      if (next.same_exponents(state)) {
        rep.reached_fixed_point = true;
        break;
      }
      rep.exponent_history.push_back(next);
      state = next;
    }
  } else {
    first = rmsprop_increment_exponents(s);
    rep.exponent_history.push_back(first);
    rep.reached_fixed_point = true;  // increments have the same exponents at every step
  }
  const ExponentState& state = rep.exponent_history.back();

  if (!rep.reached_fixed_point) {
    rep.kind = RegimeKind::Divergent;
    rep.notes =
        "increment exponents grow without bound across steps (output-weight and input-weight motion amplify "
        "each other; last bound " +
        format_state(state) +
        " at k=" + std::to_string(state.step_k) +
        "); no width works unless gradient saturation intervenes";
    return rep;
  }

  rep.kappa = kappa_terms(first, state);
  rep.decomposition = decomposition_exponents(s, state, *rep.kappa);
  const DecompositionExponents& dec = *rep.decomposition;
  const Rat zero(0);
  const Rat maxqf = dec.max_exponent();

  auto term_list_with = [&](const Rat& value) {
    std::string names;
    for (auto [term, qf] : {std::pair{DecompTerm::Empty, dec.qf_empty}, {DecompTerm::A, dec.qf_a},
                            {DecompTerm::W, dec.qf_w}, {DecompTerm::Cross, dec.qf_cross}}) {
      if (qf == value) {
        if (!names.empty()) names += ", ";
        names += to_string(term);
      }
    }
    return names;
  };

  if (maxqf > zero) {
    rep.kind = RegimeKind::Divergent;
    rep.notes = "output diverges with width: decomposition term(s) {" + term_list_with(maxqf) + "} scale as d^" +
                to_string(maxqf);
    return rep;
  }
  if (maxqf < zero) {
    rep.kind = RegimeKind::TrivialVanishing;
    rep.notes = "output vanishes as d -> infinity (largest decomposition exponent " + to_string(maxqf) + ")";
    return rep;
  }

  for (auto [term, qf] : {std::pair{DecompTerm::Empty, dec.qf_empty}, {DecompTerm::A, dec.qf_a},
                          {DecompTerm::W, dec.qf_w}, {DecompTerm::Cross, dec.qf_cross}}) {
    if (qf == zero) rep.surviving_terms.insert(term);
  }

  if (!check_nontrivial(dec, state.q_w)) {
    rep.kind = RegimeKind::TrivialVanishing;
    rep.notes =
        "frozen at initialization: only the init term stays Theta(1) while every increment-driven term "
        "vanishes; the limit function never changes across steps";
    return rep;
  }

  switch (rep.kappa->case_tag) {
    case ConcentrationCase::BothNegative:
      if (s.q_sigma == Rat(-1, 2)) {
        rep.kind = RegimeKind::KernelRegime;
        rep.notes =
            "lazy regime: increments vanish but contribute Theta(1) through the linear terms; init term "
            "survives; cross term decays as d^" +
            to_string(dec.qf_cross);
      } else {
        rep.kind = RegimeKind::IntermediateRegime;
        rep.notes =
            "kernel-driven dynamics with identically-zero limit initialization (init term decays as d^" +
            to_string(dec.qf_empty) + ")";
      }
      return rep;
    case ConcentrationCase::BothZero:
      rep.kind = RegimeKind::MeanFieldRegime;
      rep.notes = "all weight groups move Theta(1); every decomposition term survives; feature learning regime";
      return rep;
    case ConcentrationCase::OutputZeroInputNegative:
      rep.kind = RegimeKind::OutputOnlyRegime;
      rep.notes = "only output-weight motion survives: random-feature regression on frozen input features";
      return rep;
    case ConcentrationCase::InputZeroOutputNegative:
      rep.kind = RegimeKind::InputOnlyRegime;
      rep.notes = "only input-weight motion survives (plus the init term): features move, readout stays random";
      return rep;
    case ConcentrationCase::OutputGrowsSumNonpositive:
      if (dec.qf_cross == zero) {
        rep.kind = RegimeKind::OutputPlusCrossRegime;
        rep.notes =
            "output-weight increments grow with width yet contribute Theta(1); the cross term survives "
            "alongside the output term";
      } else {
        rep.kind = RegimeKind::OutputOnlyRegime;
        rep.notes =
            "output-weight increments grow with width yet contribute Theta(1); every other term vanishes";
      }
      return rep;
    case ConcentrationCase::InputGrowsSumNonpositive:
      rep.kind = RegimeKind::InputOnlyRegime;
      rep.notes = dec.qf_cross == zero
                      ? "input-weight increments grow with width yet contribute Theta(1); the cross term also "
                        "survives (mirror of the output-plus-cross case)"
                      : "input-weight increments grow with width yet contribute Theta(1); every other term "
                        "vanishes";
      return rep;
    case ConcentrationCase::PositiveSum:
      break;  // unreachable: positive-sum scalings never reach a bounded profile
  }
  rep.kind = RegimeKind::Divergent;
  rep.notes = "increment exponents sum positive; no bounded limit profile";
  return rep;
}

RegimeReport classify_deep(const Scaling& s, int k_max) {
  RegimeReport rep;
  const int H = s.depth_H;

  if (s.optimizer == Optimizer::GradientDescent) {
    ExponentState first = first_step_exponents(s);
    rep.exponent_history.push_back(first);
    ExponentState state = first;
    while (static_cast<int>(rep.exponent_history.size()) < k_max) {
      ExponentState next = step_exponents(state, first, s);
      if (next.same_exponents(state)) {
        rep.reached_fixed_point = true;
        break;
      }
      rep.exponent_history.push_back(next);
      state = next;
    }
  } else {
    rep.exponent_history.push_back(rmsprop_increment_exponents(s));
    rep.reached_fixed_point = true;
  }
  const ExponentState& state = rep.exponent_history.back();

  // Three sign conditions certify a vanishing limit; each is sufficient-only,
  // so their failure yields "not provably trivial" rather than a
  // non-trivial/divergent verdict.
  const bool increments_vanish = rep.reached_fixed_point && all_negative(state);
  const Rat init_exponent = Rat(H + 1) * (s.q_sigma + Rat(1, 2));
  const bool init_vanishes = init_exponent < Rat(0);
  const Rat change_bound = Rat(H + 1) * (s.q_sigma + Rat(1)) + max_exponent_of(state);
  const bool change_vanishes = rep.reached_fixed_point && change_bound < Rat(0);

  if (increments_vanish && init_vanishes && change_vanishes) {
    rep.kind = RegimeKind::TrivialVanishing;
    rep.notes = "certified vanishing limit: increment exponents stay strictly negative (fixed point " +
                format_state(state) + "), the init output scales as d^" + to_string(init_exponent) +
                ", and every weight-motion contribution is bounded by d^" + to_string(change_bound);
    return rep;
  }

  rep.kind = RegimeKind::NotProvablyTrivial;
  std::string reason;
  if (!rep.reached_fixed_point) {
    reason = "increment-exponent bounds keep growing through k=" + std::to_string(state.step_k);
  } else if (!increments_vanish) {
    reason = "some increment-exponent bound is >= 0 at the fixed point " + format_state(state);
  } else if (!init_vanishes) {
    reason = "the init output stays Theta(d^" + to_string(init_exponent) + ")";
  } else {
    reason = "the coarse weight-motion bound d^" + to_string(change_bound) + " does not vanish";
  }
  rep.notes = "the available upper bounds cannot certify a trivial limit: " + reason +
              "; numerical sweeps must decide";
  return rep;
}

}  // namespace

RegimeReport classify_scaling(const Scaling& s, int k_max) {
  s.validate();
  if (k_max < 2) throw std::invalid_argument("classify_scaling requires k_max >= 2");
  return s.depth_H == 0 ? classify_shallow(s, k_max) : classify_deep(s, k_max);
}

Scaling canonical_scaling(CanonicalLimit limit, int depth_H, Optimizer opt) {
  if (depth_H < 0) throw std::invalid_argument("canonical_scaling: depth_H must be >= 0");
  Scaling s;
  s.depth_H = depth_H;
  s.optimizer = opt;
  const bool mf = limit == CanonicalLimit::MeanField;
  s.q_sigma = mf ? Rat(-1) : Rat(-1, 2);
  if (opt == Optimizer::GradientDescent) {
    s.qt_a = mf ? Rat(1) : Rat(0);
    s.qt_w = s.qt_a;
    s.qt_v.assign(depth_H, mf ? Rat(2) : Rat(0));
  } else {
    // Normalized updates already strip the gradient's width scale; constant
    // effective learning rates pair with either init scale.
    s.qt_a = Rat(0);
    s.qt_w = Rat(0);
    s.qt_v.assign(depth_H, Rat(0));
  }
  return s;
}

Scaling interpolating_scaling(const Rat& q_sigma) {
  if (!(Rat(-1) < q_sigma && q_sigma < Rat(-1, 2))) {
    throw std::invalid_argument("interpolating_scaling: q_sigma must lie strictly between -1 and -1/2");
  }
  Scaling s;
  s.depth_H = 0;
  s.optimizer = Optimizer::GradientDescent;
  s.q_sigma = q_sigma;
  s.qt_a = Rat(-1) - Rat(2) * q_sigma;
  s.qt_w = s.qt_a;
  return s;
}

}  // namespace widthlab
