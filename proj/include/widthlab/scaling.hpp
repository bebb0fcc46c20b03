// Symbolic calculus over width-scaling exponents.
//
// A Scaling fixes how the output multiplier and the per-group learning rates
// grow with network width d (each as an exact rational power of d). From
// those choices alone — no training, no floating point — this module derives
// how far each weight group moves after k steps, how large each term of the
// output decomposition stays as d -> infinity, and which infinite-width
// regime the configuration lands in.
//
// Conventions used throughout:
//  * Networks are parameterized so every weight is a unit-variance "hat"
//    variable times a group scale; the output carries a multiplier
//    sigma^(H+1) where sigma ~ d^{q_sigma}.
//  * Effective learning rates eta_hat_theta ~ d^{qt_theta} act directly on
//    the hat variables.
//  * depth_H counts the d x d hidden-to-hidden matrices; H = 0 is the
//    single-hidden-layer network with input weights w and output weights a.
//  * "Exponent of X" always means: the infimum q such that X = O(d^q) holds
//    (componentwise, for typical coordinates), so statements like
//    "increments vanish" translate to "exponent < 0".
#pragma once

#include "widthlab/rational.hpp"

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace widthlab {

enum class Optimizer { GradientDescent, RMSProp };

const char* to_string(Optimizer opt);
std::optional<Optimizer> parse_optimizer(std::string_view text);

// A width-scaling law: sigma ~ d^{q_sigma}, eta_hat_a ~ d^{qt_a},
// eta_hat_{v^h} ~ d^{qt_v[h-1]}, eta_hat_w ~ d^{qt_w}.
struct Scaling {
  Rat q_sigma;
  Rat qt_a;
  std::vector<Rat> qt_v;  // one entry per hidden-to-hidden layer; empty iff depth_H == 0
  Rat qt_w;
  int depth_H = 0;
  Optimizer optimizer = Optimizer::GradientDescent;

  // Throws std::invalid_argument when depth_H < 0 or qt_v.size() != depth_H.
  void validate() const;

  bool operator==(const Scaling&) const = default;
};

// Whether derived exponents are exact rates or one-sided upper bounds.
// Deep gradient-descent dynamics compound nonlinearly, so only bounds are
// available there; everything else is exact.
enum class Exactness { Exact, UpperBound };

// Exponents of the accumulated weight increments after step_k optimizer
// steps: |a_hat(k) - a_hat(0)| = O(d^{q_a}) and so on.
struct ExponentState {
  int step_k = 1;
  Rat q_a;
  std::vector<Rat> q_v;  // per hidden-to-hidden layer, empty iff H == 0
  Rat q_w;
  Exactness exactness = Exactness::Exact;

  bool same_exponents(const ExponentState& other) const {
    return q_a == other.q_a && q_v == other.q_v && q_w == other.q_w;
  }
};

// First-step increment exponents under gradient descent (exact).
ExponentState first_step_exponents(const Scaling& s);

// One induction step: given the exponents after k steps and the first-step
// exponents, produce the exponents after k+1 steps. Exact for H == 0,
// an upper bound for H >= 1.
ExponentState step_exponents(const ExponentState& state, const ExponentState& first, const Scaling& s);

// RMSProp increments are +-eta_hat per coordinate regardless of gradient
// size, so the k-step exponents equal the learning-rate exponents exactly
// (for every k >= 1).
ExponentState rmsprop_increment_exponents(const Scaling& s);

// ---------------------------------------------------------------------------
// Output decomposition (H == 0).
//
// Writing each weight as init + increment splits the network output into
// four terms: neither group moved (Empty), only the output weights moved
// (A), only the input weights moved (W), or both moved (Cross). Each term
// is a sum of d unit contributions times sigma; whether the sum enjoys
// sqrt(d) cancellation (kappa = 1/2) or adds coherently (kappa = 1) depends
// on which factors are zero-mean at large width.
// ---------------------------------------------------------------------------

enum class DecompTerm { Empty, A, W, Cross };

const char* to_string(DecompTerm term);

// Sign pattern of the first-step exponents (q_a^(1), q_w^(1)) that drives
// the cancellation analysis. Cases whose increments grow with width fall
// back on the conservative kappa = 1 (coherent-sum) values.
enum class ConcentrationCase {
  BothNegative,       // both groups' increments vanish
  BothZero,           // both stay Theta(1)
  OutputZeroInputNegative,  // q_a^(1) = 0,  q_w^(1) < 0
  InputZeroOutputNegative,  // q_w^(1) = 0,  q_a^(1) < 0
  OutputGrowsSumNonpositive,  // q_a^(1) > 0, q_a^(1) + q_w^(1) <= 0
  InputGrowsSumNonpositive,   // q_w^(1) > 0, q_a^(1) + q_w^(1) <= 0
  PositiveSum,        // q_a^(1) + q_w^(1) > 0 (divergent territory)
};
const char* to_string(ConcentrationCase c);

// All kappa values lie in [1/2, 1]: 1/2 when the d summands stay zero-mean
// and independent enough for sqrt(d) cancellation, 1 when they add
// coherently, and strictly between when a subleading coherent correction
// overtakes the cancelling leading order part-way.
struct KappaAssignment {
  Rat kappa_empty;
  Rat kappa_a;
  Rat kappa_w;
  Rat kappa_cross;
  ConcentrationCase case_tag;
};

// Concentration exponents for the four decomposition terms. `first` supplies
// the sign pattern; `state_k` supplies the current increment exponents:
//  * kappa_a = kappa_w = 1 (increments align with the loss gradient, so
//    those sums never cancel);
//  * kappa_empty = 1/2 while input weights stay asymptotically frozen
//    (q_w^(k) < 0), else 1 (moved gates correlate the summands);
//  * kappa_cross = min(1, max(1/2, 1 + max(q_a^(k), q_w^(k)))): the leading
//    cross contribution is zero-mean (1/2), but each group's increment also
//    carries a coherent second-order part proportional to the other group's
//    motion, and that part dominates once increments shrink slower than
//    d^{-1/2}.
KappaAssignment kappa_terms(const ExponentState& first, const ExponentState& state_k);

// Exponents of the four decomposition terms after k steps:
//   f_Empty = O(d^{qf_empty}), etc.
struct DecompositionExponents {
  int step_k = 1;
  Rat qf_empty;
  Rat qf_a;
  Rat qf_w;
  Rat qf_cross;

  Rat max_exponent() const;
};

DecompositionExponents decomposition_exponents(const Scaling& s, const ExponentState& state, const KappaAssignment& kappa);

// Non-triviality of the infinite-width dynamics (H == 0): the output neither
// vanishes nor diverges (the largest term exponent is exactly 0), and the
// function actually changes across steps (a term involving increments is
// Theta(1), or the init term is Theta(1) while input features still rotate,
// q_w^(k) >= 0).
bool check_nontrivial(const DecompositionExponents& d, const Rat& q_w_k);

// ---------------------------------------------------------------------------
// Classification.
// ---------------------------------------------------------------------------

enum class RegimeKind {
  KernelRegime,        // lazy: features frozen, output moves via the cross/linear terms
  MeanFieldRegime,     // all groups move Theta(1); nonlinear feature learning
  IntermediateRegime,  // increments vanish yet the learned part dominates the init
  OutputOnlyRegime,    // only output-weight motion survives (random-feature regression)
  InputOnlyRegime,     // only input-weight motion survives
  OutputPlusCrossRegime,  // output motion and the cross term both survive
  Divergent,           // some exponent grows without bound, or a term blows up
  TrivialVanishing,    // the learned function change vanishes as d -> infinity
  NotProvablyTrivial,  // deep case: the available bounds cannot certify vanishing
};

const char* to_string(RegimeKind kind);

struct RegimeReport {
  RegimeKind kind;
  // Decomposition terms that remain Theta(1) in the limit (H == 0 only;
  // empty when the limit is degenerate with no finite fixed-point profile).
  std::set<DecompTerm> surviving_terms;
  std::string notes;
  // Increment exponents at k = 1, 2, ... until the fixed point (inclusive)
  // or until the iteration cap when no fixed point is reached.
  std::vector<ExponentState> exponent_history;
  bool reached_fixed_point = false;
  std::optional<KappaAssignment> kappa;                  // H == 0 only
  std::optional<DecompositionExponents> decomposition;   // H == 0 only
};

// Runs the full pipeline: iterate increment exponents to their fixed point
// (capped at k_max), assign concentration exponents, form the decomposition
// exponents, test non-triviality, and name the regime.
RegimeReport classify_scaling(const Scaling& s, int k_max = 32);

// Canonical scalings for the two classical limits at a given depth.
enum class CanonicalLimit { MeanField, Kernel };
Scaling canonical_scaling(CanonicalLimit limit, int depth_H, Optimizer opt);

// The one-parameter family between kernel and mean-field at H == 0 under
// gradient descent: pick q_sigma in (-1, -1/2) and this returns the matching
// learning-rate exponents qt_a = qt_w = -1 - 2 q_sigma that keep the learned
// terms Theta(1).
Scaling interpolating_scaling(const Rat& q_sigma);

}  // namespace widthlab
