// lab — command-line front end for the width-scaling laboratory.
//
//   lab analyze  --q-sigma=-1/2 --qt-a=0 --qt-w=0      symbolic classification
//   lab sweep    --config cfg.json [--out DIR]         width x seed x scaling runs
//   lab fit      --out DIR [--tol 0.15]                slope fits + theory verdicts
//   lab report   --out DIR                             SVG charts from the CSVs
//   lab kernel   --config cfg.json [--out DIR]         kernel-dynamics study
//   lab mf       --config cfg.json [--out DIR]         measure-convergence study
//   lab train    --config cfg.json --scaling L --width W --seed S [--out DIR]
//
// Exit codes: 0 success, 2 usage error, 3 data/format error, 4 numerical
// divergence in a single-run command.

#include "CLI11.hpp"

#include "widthlab/csv.hpp"
#include "widthlab/dataset.hpp"
#include "widthlab/experiment.hpp"
#include "widthlab/rational.hpp"
#include "widthlab/scaling.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using Json = nlohmann::ordered_json;
using namespace widthlab;

// Thrown to carry a specific process exit code out of a subcommand body.
struct CliExit {
  int code;
};

Rat parse_exponent_flag(const std::string& text, const std::string& flag) {
  std::optional<Rat> value = parse_rational(text);
  if (!value) {
    throw CLI::ValidationError(flag, "expected a rational exponent like -3/4, got '" + text + "'");
  }
  return *value;
}

Json exponent_state_json(const ExponentState& state) {
  Json j;
  j["step_k"] = state.step_k;
  j["q_a"] = to_string(state.q_a);
  Json qv = Json::array();
  for (const Rat& q : state.q_v) qv.push_back(to_string(q));
  j["q_v"] = qv;
  j["q_w"] = to_string(state.q_w);
  j["exact"] = state.exactness == Exactness::Exact;
  return j;
}

Json analyze_json(const Scaling& s, const RegimeReport& report) {
  Json j;
  j["optimizer"] = to_string(s.optimizer);
  j["depth_H"] = s.depth_H;
  Json exps;
  exps["q_sigma"] = to_string(s.q_sigma);
  exps["qt_a"] = to_string(s.qt_a);
  Json qtv = Json::array();
  for (const Rat& q : s.qt_v) qtv.push_back(to_string(q));
  exps["qt_v"] = qtv;
  exps["qt_w"] = to_string(s.qt_w);
  j["exponents"] = exps;

  j["class"] = to_string(report.kind);
  Json surviving = Json::array();
  for (DecompTerm term : report.surviving_terms) surviving.push_back(to_string(term));
  j["surviving_terms"] = surviving;
  j["reached_fixed_point"] = report.reached_fixed_point;

  Json history = Json::array();
  for (const ExponentState& state : report.exponent_history) history.push_back(exponent_state_json(state));
  j["increment_exponents"] = history;

  if (report.kappa) {
    Json k;
    k["case"] = to_string(report.kappa->case_tag);
    k["empty"] = to_string(report.kappa->kappa_empty);
    k["a"] = to_string(report.kappa->kappa_a);
    k["w"] = to_string(report.kappa->kappa_w);
    k["cross"] = to_string(report.kappa->kappa_cross);
    j["kappa"] = k;
  }
  if (report.decomposition) {
    Json d;
    d["empty"] = to_string(report.decomposition->qf_empty);
    d["a"] = to_string(report.decomposition->qf_a);
    d["w"] = to_string(report.decomposition->qf_w);
    d["cross"] = to_string(report.decomposition->qf_cross);
    d["max"] = to_string(report.decomposition->max_exponent());
    j["term_exponents"] = d;
  }
  j["notes"] = report.notes;
  return j;
}

ExperimentConfig load_config_with_override(const std::string& config_path, const std::string& out_override) {
  ExperimentConfig cfg = load_config_file(config_path);
  if (!out_override.empty()) {
    cfg.out_dir = out_override;
    cfg.validate();
  }
  return cfg;
}

void run_analyze(const std::string& q_sigma_text, const std::string& qt_a_text,
                 const std::vector<std::string>& qt_v_texts, const std::string& qt_w_text,
                 std::optional<int> depth_flag, const std::string& optimizer_text, int k_max) {
  Scaling s;
  s.q_sigma = parse_exponent_flag(q_sigma_text, "--q-sigma");
  s.qt_a = parse_exponent_flag(qt_a_text, "--qt-a");
  for (const std::string& text : qt_v_texts) s.qt_v.push_back(parse_exponent_flag(text, "--qt-v"));
  s.qt_w = parse_exponent_flag(qt_w_text, "--qt-w");
  s.depth_H = depth_flag ? *depth_flag : static_cast<int>(s.qt_v.size());
  std::optional<Optimizer> opt = parse_optimizer(optimizer_text);
  if (!opt) throw CLI::ValidationError("--optimizer", "expected gd or rmsprop, got '" + optimizer_text + "'");
  s.optimizer = *opt;
  s.validate();  // invalid_argument -> usage error

  RegimeReport report = classify_scaling(s, k_max);
  std::cout << analyze_json(s, report).dump(2) << "\n";
}

void run_sweep(const std::string& config_path, const std::string& out_override) {
  ExperimentConfig cfg = load_config_with_override(config_path, out_override);
  SweepResult result = execute_sweep(cfg);
  std::cout << "sweep complete: " << result.n_runs << " runs (" << result.n_diverged
            << " diverged) -> " << cfg.out_dir << "\n";
}

void run_fit(const std::string& out_dir, double tol) {
  int rows = execute_fit(out_dir, tol);
  std::cout << "fit complete: " << rows << " rows -> " << (std::filesystem::path(out_dir) / "fits.csv").string()
            << "\n";
}

void run_report(const std::string& out_dir) {
  std::vector<std::filesystem::path> files = execute_report(out_dir);
  std::cout << "report complete: " << files.size() << " charts\n";
  for (const auto& path : files) std::cout << "  " << path.string() << "\n";
}

void run_kernel(const std::string& config_path, const std::string& out_override) {
  ExperimentConfig cfg = load_config_with_override(config_path, out_override);
  execute_kernel_study(cfg);
  std::cout << "kernel study complete -> " << (std::filesystem::path(cfg.out_dir) / "kernel_dyn.csv").string()
            << "\n";
}

void run_mf(const std::string& config_path, const std::string& out_override) {
  ExperimentConfig cfg = load_config_with_override(config_path, out_override);
  execute_mf_study(cfg);
  std::cout << "mf study complete -> " << (std::filesystem::path(cfg.out_dir) / "wasserstein.csv").string()
            << "\n";
}

void run_train(const std::string& config_path, const std::string& scaling_label, int width,
               std::uint64_t seed, const std::string& out_override) {
  ExperimentConfig cfg = load_config_with_override(config_path, out_override);

  std::vector<ScalingChoice> matched;
  for (const ScalingChoice& choice : cfg.scalings) {
    if (choice.label == scaling_label) matched.push_back(choice);
  }
  if (matched.empty()) {
    throw std::invalid_argument("train: no scaling labelled '" + scaling_label + "' in " + config_path);
  }
  cfg.scalings = matched;
  cfg.widths = {width};
  cfg.seeds = {seed};
  cfg.validate();

  SweepResult result = execute_sweep(cfg);
  const std::string id = run_id(scaling_label, cfg.depth_H, cfg.optimizer, width, seed);

  CsvTable runs = read_csv(std::filesystem::path(cfg.out_dir) / "runs.csv");
  const std::size_t id_col = runs.column("run_id");
  const std::size_t step_col = runs.column("step");
  const std::size_t train_col = runs.column("train_loss");
  const std::size_t test_col = runs.column("test_loss");
  const std::size_t acc_col = runs.column("test_acc");
  const std::vector<std::string>* last = nullptr;
  for (const auto& row : runs.rows) {
    if (row[id_col] == id) last = &row;  // rows are sorted by step
  }
  if (last) {
    std::cout << id << ": step " << (*last)[step_col] << " train_loss " << (*last)[train_col]
              << " test_loss " << (*last)[test_col] << " test_acc " << (*last)[acc_col] << "\n";
  }
  if (result.n_diverged > 0) {
    std::cerr << "lab train: run " << id << " diverged\n";
    throw CliExit{4};
  }
  std::cout << "train complete -> " << cfg.out_dir << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"width-scaling laboratory: symbolic regime analysis and width-sweep experiments"};
  app.require_subcommand(1);

  // analyze ----------------------------------------------------------------
  auto* analyze = app.add_subcommand("analyze", "classify a scaling symbolically and print a JSON report");
  std::string q_sigma_text, qt_a_text, qt_w_text;
  std::vector<std::string> qt_v_texts;
  std::optional<int> depth_flag;
  std::string optimizer_text = "gd";
  int k_max = 32;
  analyze->add_option("--q-sigma", q_sigma_text, "output-scale exponent (rational, e.g. -1/2)")->required();
  analyze->add_option("--qt-a", qt_a_text, "output-weight rate exponent")->required();
  analyze->add_option("--qt-v", qt_v_texts, "hidden-layer rate exponents (repeat per layer)");
  analyze->add_option("--qt-w", qt_w_text, "input-weight rate exponent")->required();
  analyze->add_option("--depth", depth_flag, "hidden-to-hidden layer count (default: number of --qt-v)");
  analyze->add_option("--optimizer", optimizer_text, "gd or rmsprop")->capture_default_str();
  analyze->add_option("--k-max", k_max, "iteration cap for the exponent fixed point")->capture_default_str();

  // file-driven subcommands --------------------------------------------------
  std::string config_path, out_override, fit_dir, report_dir;
  double fit_tol = 0.15;
  std::string train_scaling;
  int train_width = 0;
  std::uint64_t train_seed = 0;

  auto* sweep = app.add_subcommand("sweep", "run every scaling x width x seed and write CSVs");
  sweep->add_option("--config", config_path, "experiment config JSON")->required();
  sweep->add_option("--out", out_override, "override the config's output directory");

  auto* fit = app.add_subcommand("fit", "fit width slopes from sweep CSVs and attach theory verdicts");
  fit->add_option("--out", fit_dir, "sweep output directory")->required();
  fit->add_option("--tol", fit_tol, "match tolerance on fitted slopes")->capture_default_str();

  auto* report = app.add_subcommand("report", "render SVG charts from sweep CSVs");
  report->add_option("--out", report_dir, "sweep output directory")->required();

  auto* kernel = app.add_subcommand("kernel", "kernel-dynamics tracking study");
  kernel->add_option("--config", config_path, "experiment config JSON")->required();
  kernel->add_option("--out", out_override, "override the config's output directory");

  auto* mf = app.add_subcommand("mf", "particle-measure convergence study");
  mf->add_option("--config", config_path, "experiment config JSON")->required();
  mf->add_option("--out", out_override, "override the config's output directory");

  auto* train = app.add_subcommand("train", "train a single run from a config");
  train->add_option("--config", config_path, "experiment config JSON")->required();
  train->add_option("--scaling", train_scaling, "scaling label from the config")->required();
  train->add_option("--width", train_width, "network width d")->required();
  train->add_option("--seed", train_seed, "run seed")->required();
  train->add_option("--out", out_override, "override the config's output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (analyze->parsed()) {
      run_analyze(q_sigma_text, qt_a_text, qt_v_texts, qt_w_text, depth_flag, optimizer_text, k_max);
    } else if (sweep->parsed()) {
      run_sweep(config_path, out_override);
    } else if (fit->parsed()) {
      run_fit(fit_dir, fit_tol);
    } else if (report->parsed()) {
      run_report(report_dir);
    } else if (kernel->parsed()) {
      run_kernel(config_path, out_override);
    } else if (mf->parsed()) {
      run_mf(config_path, out_override);
    } else if (train->parsed()) {
      run_train(config_path, train_scaling, train_width, train_seed, out_override);
    }
  } catch (const CliExit& e) {
    return e.code;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "lab: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "lab: " << e.what() << "\n";
    return 2;
  } catch (const DataFormatError& e) {
    std::cerr << "lab: " << e.what() << "\n";
    return 3;
  } catch (const InsufficientDataError& e) {
    std::cerr << "lab: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "lab: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
