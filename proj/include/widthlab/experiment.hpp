// Experiment orchestration: JSON configs (with exact rational exponents),
// width x seed x scaling sweeps with CSV emission, the exponent-fitting
// stage that joins sweep output with calculus predictions, SVG reports, and
// the kernel-dynamics / measure-convergence studies.
#pragma once

#include "widthlab/dataset.hpp"
#include "widthlab/net.hpp"
#include "widthlab/scaling.hpp"
#include "widthlab/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace widthlab {

struct DatasetSpec {
  std::string kind = "synthetic";  // "synthetic" | "cifar2"
  int n_train = 256;
  int n_test = 256;
  int d0 = 20;              // synthetic feature count (cifar2 fixes 3072)
  double separation = 3.0;  // synthetic class-mean offset
  std::uint64_t seed = 7;   // synthetic generation seed
  std::string path;         // cifar2 source file
};

// One scaling entry of a sweep. `name` selects a family:
//   "mf" / "ntk"     canonical limits for the configured depth and optimizer
//   "intermediate"   interpolating family (depth 0, gradient descent),
//                    exponent taken from q_sigma (default -3/4)
//   "default"        q_sigma = -1/2 with (qt_a, qt_w) = (1, 0) — the naive
//                    constant-rate choice (depth 0)
//   "custom"         exponents given explicitly
// `label` is the run-id token and defaults to the name.
struct ScalingChoice {
  std::string label;
  std::string name;
  Scaling scaling;  // fully expanded exponents
};

struct KernelStudyConfig {
  int n_mc = 1 << 20;             // Monte-Carlo draws for the limit kernel
  int n_query = 64;               // tracked test points
  std::uint64_t mc_seed = 9001;   // limit-kernel draw stream
  int record_every = 10;          // trajectory rows every this many steps
};

struct MfStudyConfig {
  int transition_steps = 10;          // k: GD steps before comparing measures
  int d_ref = 4096;                   // fine reference width
  std::uint64_t subsample_seed = 4242;  // reference-atom subsample stream
  InitDist init = InitDist::SymmetricUniform;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  int depth_H = 0;
  double alpha = 0.2;  // leaky-ReLU slope, in (0, 1)
  Optimizer optimizer = Optimizer::GradientDescent;
  std::vector<ScalingChoice> scalings;
  ReferenceConfig reference;      // rates, d_star, steps, batch size
  std::vector<int> widths;        // ascending
  std::vector<std::uint64_t> seeds;  // distinct
  std::vector<int> probe_steps;   // empty = {0, reference.steps}
  int eval_points = 64;           // inputs used for decomposition variances
  KernelStudyConfig kernel_study;
  MfStudyConfig mf_study;
  std::string out_dir = "out";

  // Throws DataFormatError on violated invariants (unsorted widths,
  // duplicate seeds, depth/exponent mismatches, ...).
  void validate() const;
};

// JSON round trip. Exponents travel as rational strings ("-3/4"), so
// parse -> serialize -> parse is the identity. Parse failures throw
// DataFormatError.
ExperimentConfig parse_config(const std::string& json_text);
std::string serialize_config(const ExperimentConfig& cfg);
ExperimentConfig load_config_file(const std::filesystem::path& path);

// "{label}-H{H}-{opt}-d{width:05}-s{seed}"; fixed-width d keeps rows sorted.
std::string run_id(const std::string& scaling_label, int depth_H, Optimizer opt, int width,
                   std::uint64_t seed);

// Train/test pair for a dataset spec (synthetic generation or cifar2 load).
std::pair<Dataset, Dataset> build_dataset(const DatasetSpec& spec);

// Runs every scaling x width x seed combination and writes runs.csv,
// decomp.csv, increments.csv, and the expanded config.json into out_dir
// (rows sorted by run_id then step; reruns are byte-identical). Diverged
// runs are flagged, never fatal.
struct SweepResult {
  int n_runs = 0;
  int n_diverged = 0;
};
SweepResult execute_sweep(const ExperimentConfig& cfg);

// Theory prediction for one fitted observable ("increment_a", "var_aw",
// "var_f", ...) under a scaling: the exponent of d the observable's
// underlying quantity should follow, exact or upper bound. nullopt when the
// calculus pins nothing (no fixed point, or per-term exponents at depth >= 1).
struct Prediction {
  Rat exponent;
  bool is_upper_bound = false;
};
std::optional<Prediction> predict_observable(const Scaling& s, const std::string& observable);

// Joins the sweep CSVs in out_dir, fits every observable's width slope per
// seed (halving variance slopes), attaches predictions, and writes fits.csv.
// Returns the number of rows written. `tol` is the Match tolerance.
int execute_fit(const std::filesystem::path& out_dir, double tol = 0.15);

// Renders SVG charts from the CSVs in out_dir and returns the files written:
// final-loss-vs-width, loss-vs-step, and per-scaling log-log charts of
// decomposition variances and increment norms with theory guide lines.
std::vector<std::filesystem::path> execute_report(const std::filesystem::path& out_dir);

// Kernel-dynamics study (depth 0, kernel scaling, gradient descent): trains
// a net per width x seed with a single shared hat rate, runs the limit-kernel
// dynamics from the net's own initial outputs, and writes kernel_dyn.csv
// (d,seed,step,point,f_net,f_kernel) on the query points.
void execute_kernel_study(const ExperimentConfig& cfg);

// Measure-convergence study (depth 0): width-coupled inits, k transition
// steps at the mean-field scaling, exact W2 against a subsampled fine
// reference; writes wasserstein.csv (k,d,d_ref,w2; w2 averaged over seeds).
void execute_mf_study(const ExperimentConfig& cfg);

}  // namespace widthlab
