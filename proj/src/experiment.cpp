#include "widthlab/experiment.hpp"

#include "widthlab/csv.hpp"
#include "widthlab/meanfield.hpp"
#include "widthlab/powerlaw.hpp"
#include "widthlab/probes.hpp"
#include "widthlab/rng.hpp"
#include "widthlab/svg.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace widthlab {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

const char* optimizer_name(Optimizer opt) {
  return opt == Optimizer::GradientDescent ? "gd" : "rmsprop";
}

Optimizer parse_optimizer(const std::string& text) {
  if (text == "gd") return Optimizer::GradientDescent;
  if (text == "rmsprop") return Optimizer::RMSProp;
  throw DataFormatError("config: unknown optimizer '" + text + "' (use \"gd\" or \"rmsprop\")");
}

const char* init_name(InitDist dist) {
  return dist == InitDist::StdNormal ? "std_normal" : "symmetric_uniform";
}

InitDist parse_init(const std::string& text) {
  if (text == "std_normal") return InitDist::StdNormal;
  if (text == "symmetric_uniform") return InitDist::SymmetricUniform;
  throw DataFormatError("config: unknown init '" + text + "'");
}

// Exponents travel as exact rational strings; bare JSON integers are also
// exact and accepted. Anything else would silently round.
Rat parse_exponent(const Json& j, const std::string& key) {
  const Json& v = j.at(key);
  if (v.is_string()) {
    const auto parsed = parse_rational(v.get<std::string>());
    if (!parsed) throw DataFormatError("config: malformed rational in '" + key + "'");
    return *parsed;
  }
  if (v.is_number_integer()) return Rat(v.get<long long>());
  throw DataFormatError("config: exponent '" + key + "' must be a rational string or integer");
}

bool has_all_exponents(const Json& j, bool needs_v) {
  return j.contains("q_sigma") && j.contains("qt_a") && j.contains("qt_w") &&
         (!needs_v || j.contains("qt_v"));
}

Scaling explicit_scaling(const Json& j, int depth_H, Optimizer opt) {
  Scaling s;
  s.q_sigma = parse_exponent(j, "q_sigma");
  s.qt_a = parse_exponent(j, "qt_a");
  s.qt_w = parse_exponent(j, "qt_w");
  if (depth_H > 0) {
    const Json& arr = j.at("qt_v");
    if (!arr.is_array() || static_cast<int>(arr.size()) != depth_H) {
      throw DataFormatError("config: qt_v must be an array with one entry per hidden-to-hidden layer");
    }
    for (int h = 0; h < depth_H; ++h) {
      Json wrap;
      wrap["qt_v"] = arr[static_cast<std::size_t>(h)];
      s.qt_v.push_back(parse_exponent(wrap, "qt_v"));
    }
  } else if (j.contains("qt_v") && !j.at("qt_v").empty()) {
    throw DataFormatError("config: qt_v must be empty when depth_H is 0");
  }
  s.depth_H = depth_H;
  s.optimizer = opt;
  return s;
}

ScalingChoice expand_scaling(const Json& j, int depth_H, Optimizer opt) {
  ScalingChoice choice;
  if (!j.contains("name")) throw DataFormatError("config: each scaling needs a name");
  choice.name = j.at("name").get<std::string>();
  choice.label = j.value("label", choice.name);

  if (choice.name == "custom") {
    if (!has_all_exponents(j, depth_H > 0)) {
      throw DataFormatError("config: custom scaling requires q_sigma, qt_a, qt_w (and qt_v when deep)");
    }
    choice.scaling = explicit_scaling(j, depth_H, opt);
  } else if (choice.name == "mf") {
    choice.scaling = canonical_scaling(CanonicalLimit::MeanField, depth_H, opt);
  } else if (choice.name == "ntk") {
    choice.scaling = canonical_scaling(CanonicalLimit::Kernel, depth_H, opt);
  } else if (choice.name == "intermediate") {
    if (depth_H != 0 || opt != Optimizer::GradientDescent) {
      throw DataFormatError("config: the interpolating family is defined for depth 0, gradient descent");
    }
    Rat q_sigma(-3, 4);
    if (j.contains("q_sigma")) q_sigma = parse_exponent(j, "q_sigma");
    choice.scaling = interpolating_scaling(q_sigma);
  } else if (choice.name == "default") {
    if (depth_H != 0) throw DataFormatError("config: the 'default' scaling is defined for depth 0");
    choice.scaling =
        Scaling{Rat(-1, 2), Rat(1), {}, Rat(0), 0, opt};
  } else {
    throw DataFormatError("config: unknown scaling name '" + choice.name + "'");
  }

  // A named scaling may restate exponents, but they must agree.
  if (choice.name != "custom" && choice.name != "intermediate" && has_all_exponents(j, depth_H > 0)) {
    if (!(explicit_scaling(j, depth_H, opt) == choice.scaling)) {
      throw DataFormatError("config: scaling '" + choice.name + "' restates exponents that disagree");
    }
  }
  return choice;
}

Json scaling_to_json(const ScalingChoice& choice) {
  Json j;
  j["label"] = choice.label;
  j["name"] = choice.name;
  j["q_sigma"] = to_string(choice.scaling.q_sigma);
  j["qt_a"] = to_string(choice.scaling.qt_a);
  Json arr = Json::array();
  for (const Rat& q : choice.scaling.qt_v) arr.push_back(to_string(q));
  j["qt_v"] = arr;
  j["qt_w"] = to_string(choice.scaling.qt_w);
  return j;
}

// Evenly spaced subset of a dataset, used as the decomposition-probe inputs.
Dataset eval_subset(const Dataset& full, int count) {
  if (count >= full.n()) return full;
  Dataset out;
  out.d0 = full.d0;
  out.name = full.name + "-eval";
  out.inputs.resize(count, full.d0);
  out.labels.resize(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int src = static_cast<int>((static_cast<long long>(i) * full.n()) / count);
    out.inputs.row(i) = full.inputs.row(src);
    out.labels[static_cast<std::size_t>(i)] = full.labels[static_cast<std::size_t>(src)];
  }
  return out;
}

std::vector<int> effective_probe_steps(const ExperimentConfig& cfg) {
  if (!cfg.probe_steps.empty()) return cfg.probe_steps;
  return {0, cfg.reference.steps};
}

struct SortableRow {
  std::string id;
  int step = 0;
  std::size_t ord = 0;
  std::vector<std::string> cells;
};

void sort_rows(std::vector<SortableRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const SortableRow& a, const SortableRow& b) {
    if (a.id != b.id) return a.id < b.id;
    if (a.step != b.step) return a.step < b.step;
    return a.ord < b.ord;
  });
}

std::vector<std::vector<std::string>> strip_keys(std::vector<SortableRow>& rows) {
  sort_rows(rows);
  std::vector<std::vector<std::string>> out;
  out.reserve(rows.size());
  for (auto& r : rows) out.push_back(std::move(r.cells));
  return out;
}

Rat max_state_exponent(const ExponentState& state) {
  Rat best = state.q_a > state.q_w ? state.q_a : state.q_w;
  for (const Rat& q : state.q_v) {
    if (q > best) best = q;
  }
  return best;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (dataset.kind != "synthetic" && dataset.kind != "cifar2") {
    throw DataFormatError("config: dataset.kind must be 'synthetic' or 'cifar2'");
  }
  if (dataset.kind == "synthetic" && (dataset.n_train < 2 || dataset.n_test < 2 || dataset.d0 < 1)) {
    throw DataFormatError("config: synthetic dataset needs n_train, n_test >= 2 and d0 >= 1");
  }
  if (dataset.kind == "cifar2" && dataset.path.empty()) {
    throw DataFormatError("config: cifar2 dataset needs a path");
  }
  if (depth_H < 0 || depth_H > 3) {
    throw DataFormatError("config: depth_H must lie in [0, 3] (decomposition-probe range)");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw DataFormatError("config: alpha must lie strictly between 0 and 1");
  }
  if (scalings.empty()) throw DataFormatError("config: need at least one scaling");
  std::set<std::string> labels;
  for (const ScalingChoice& sc : scalings) {
    if (sc.label.empty()) throw DataFormatError("config: scaling labels must be nonempty");
    for (char c : sc.label) {
      if (std::isalnum(static_cast<unsigned char>(c)) == 0 && c != '_') {
        throw DataFormatError("config: scaling label '" + sc.label + "' may use [A-Za-z0-9_] only");
      }
    }
    if (!labels.insert(sc.label).second) {
      throw DataFormatError("config: duplicate scaling label '" + sc.label + "'");
    }
    if (sc.scaling.depth_H != depth_H || sc.scaling.optimizer != optimizer) {
      throw DataFormatError("config: scaling '" + sc.label + "' disagrees with depth_H/optimizer");
    }
    sc.scaling.validate();
  }
  if (widths.empty()) throw DataFormatError("config: need at least one width");
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (widths[i] < 1) throw DataFormatError("config: widths must be >= 1");
    if (i > 0 && widths[i] <= widths[i - 1]) {
      throw DataFormatError("config: widths must be strictly ascending");
    }
  }
  if (seeds.empty()) throw DataFormatError("config: need at least one seed");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw DataFormatError("config: seeds must be distinct");
  }
  if (reference.d_star < 1 || reference.steps < 0 || reference.batch_size < 0) {
    throw DataFormatError("config: reference needs d_star >= 1, steps >= 0, batch_size >= 0");
  }
  const int effective_d0 = dataset.kind == "cifar2" ? 3072 : dataset.d0;
  if (reference.input_dim != effective_d0) {
    throw DataFormatError("config: reference.input_dim must equal the dataset input dimension");
  }
  if (!(reference.eta_star_a > 0.0 && reference.eta_star_v > 0.0 && reference.eta_star_w > 0.0)) {
    throw DataFormatError("config: reference rates must be positive");
  }
  if (reference.sigma_star && !(*reference.sigma_star > 0.0)) {
    throw DataFormatError("config: sigma_star must be positive when given");
  }
  for (int p : probe_steps) {
    if (p < 0 || p > reference.steps) {
      throw DataFormatError("config: probe_steps must lie in [0, steps]");
    }
  }
  if (eval_points < 2) throw DataFormatError("config: eval_points must be >= 2");
  if (kernel_study.n_mc < 2 || kernel_study.n_query < 1 || kernel_study.record_every < 1) {
    throw DataFormatError("config: kernel_study needs n_mc >= 2, n_query >= 1, record_every >= 1");
  }
  if (mf_study.transition_steps < 0 || mf_study.d_ref < 1 || mf_study.d_ref > 4096) {
    throw DataFormatError("config: mf_study needs transition_steps >= 0 and d_ref in [1, 4096]");
  }
  if (out_dir.empty()) throw DataFormatError("config: out_dir must be nonempty");
}

ExperimentConfig parse_config(const std::string& json_text) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw DataFormatError(std::string("config: invalid JSON: ") + e.what());
  }
  try {
    ExperimentConfig cfg;
    if (j.contains("dataset")) {
      const Json& d = j.at("dataset");
      cfg.dataset.kind = d.value("kind", cfg.dataset.kind);
      cfg.dataset.n_train = d.value("n_train", cfg.dataset.n_train);
      cfg.dataset.n_test = d.value("n_test", cfg.dataset.n_test);
      cfg.dataset.d0 = d.value("d0", cfg.dataset.d0);
      cfg.dataset.separation = d.value("separation", cfg.dataset.separation);
      cfg.dataset.seed = d.value("seed", cfg.dataset.seed);
      cfg.dataset.path = d.value("path", cfg.dataset.path);
    }
    cfg.depth_H = j.value("depth_H", cfg.depth_H);
    cfg.alpha = j.value("alpha", cfg.alpha);
    if (j.contains("optimizer")) cfg.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());

    if (j.contains("reference")) {
      const Json& r = j.at("reference");
      cfg.reference.d_star = r.value("d_star", cfg.reference.d_star);
      if (r.contains("eta_star")) {
        const double common = r.at("eta_star").get<double>();
        cfg.reference.eta_star_a = common;
        cfg.reference.eta_star_v = common;
        cfg.reference.eta_star_w = common;
      }
      cfg.reference.eta_star_a = r.value("eta_star_a", cfg.reference.eta_star_a);
      cfg.reference.eta_star_v = r.value("eta_star_v", cfg.reference.eta_star_v);
      cfg.reference.eta_star_w = r.value("eta_star_w", cfg.reference.eta_star_w);
      if (r.contains("sigma_star") && !r.at("sigma_star").is_null()) {
        cfg.reference.sigma_star = r.at("sigma_star").get<double>();
      }
      cfg.reference.beta = r.value("beta", cfg.reference.beta);
      cfg.reference.eps = r.value("eps", cfg.reference.eps);
      cfg.reference.steps = r.value("steps", cfg.reference.steps);
      cfg.reference.batch_size = r.value("batch_size", cfg.reference.batch_size);
    }
    cfg.reference.input_dim = cfg.dataset.kind == "cifar2" ? 3072 : cfg.dataset.d0;
    if (j.contains("reference") && j.at("reference").contains("input_dim")) {
      if (j.at("reference").at("input_dim").get<int>() != cfg.reference.input_dim) {
        throw DataFormatError("config: reference.input_dim must equal the dataset input dimension");
      }
    }

    if (j.contains("scalings")) {
      for (const Json& s : j.at("scalings")) {
        cfg.scalings.push_back(expand_scaling(s, cfg.depth_H, cfg.optimizer));
      }
    }
    if (j.contains("widths")) cfg.widths = j.at("widths").get<std::vector<int>>();
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("probe_steps")) cfg.probe_steps = j.at("probe_steps").get<std::vector<int>>();
    cfg.eval_points = j.value("eval_points", cfg.eval_points);

    if (j.contains("kernel_study")) {
      const Json& k = j.at("kernel_study");
      cfg.kernel_study.n_mc = k.value("n_mc", cfg.kernel_study.n_mc);
      cfg.kernel_study.n_query = k.value("n_query", cfg.kernel_study.n_query);
      cfg.kernel_study.mc_seed = k.value("mc_seed", cfg.kernel_study.mc_seed);
      cfg.kernel_study.record_every = k.value("record_every", cfg.kernel_study.record_every);
    }
    if (j.contains("mf_study")) {
      const Json& m = j.at("mf_study");
      cfg.mf_study.transition_steps = m.value("transition_steps", cfg.mf_study.transition_steps);
      cfg.mf_study.d_ref = m.value("d_ref", cfg.mf_study.d_ref);
      cfg.mf_study.subsample_seed = m.value("subsample_seed", cfg.mf_study.subsample_seed);
      if (m.contains("init")) cfg.mf_study.init = parse_init(m.at("init").get<std::string>());
    }
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.validate();
    return cfg;
  } catch (const Json::exception& e) {
    throw DataFormatError(std::string("config: ") + e.what());
  }
}

std::string serialize_config(const ExperimentConfig& cfg) {
  Json j;
  Json d;
  d["kind"] = cfg.dataset.kind;
  d["n_train"] = cfg.dataset.n_train;
  d["n_test"] = cfg.dataset.n_test;
  d["d0"] = cfg.dataset.d0;
  d["separation"] = cfg.dataset.separation;
  d["seed"] = cfg.dataset.seed;
  d["path"] = cfg.dataset.path;
  j["dataset"] = d;
  j["depth_H"] = cfg.depth_H;
  j["alpha"] = cfg.alpha;
  j["optimizer"] = optimizer_name(cfg.optimizer);

  Json scalings = Json::array();
  for (const ScalingChoice& sc : cfg.scalings) scalings.push_back(scaling_to_json(sc));
  j["scalings"] = scalings;

  Json r;
  r["d_star"] = cfg.reference.d_star;
  r["input_dim"] = cfg.reference.input_dim;
  r["eta_star_a"] = cfg.reference.eta_star_a;
  r["eta_star_v"] = cfg.reference.eta_star_v;
  r["eta_star_w"] = cfg.reference.eta_star_w;
  if (cfg.reference.sigma_star) {
    r["sigma_star"] = *cfg.reference.sigma_star;
  } else {
    r["sigma_star"] = nullptr;
  }
  r["beta"] = cfg.reference.beta;
  r["eps"] = cfg.reference.eps;
  r["steps"] = cfg.reference.steps;
  r["batch_size"] = cfg.reference.batch_size;
  j["reference"] = r;

  j["widths"] = cfg.widths;
  j["seeds"] = cfg.seeds;
  j["probe_steps"] = cfg.probe_steps;
  j["eval_points"] = cfg.eval_points;

  Json k;
  k["n_mc"] = cfg.kernel_study.n_mc;
  k["n_query"] = cfg.kernel_study.n_query;
  k["mc_seed"] = cfg.kernel_study.mc_seed;
  k["record_every"] = cfg.kernel_study.record_every;
  j["kernel_study"] = k;

  Json m;
  m["transition_steps"] = cfg.mf_study.transition_steps;
  m["d_ref"] = cfg.mf_study.d_ref;
  m["subsample_seed"] = cfg.mf_study.subsample_seed;
  m["init"] = init_name(cfg.mf_study.init);
  j["mf_study"] = m;

  j["out_dir"] = cfg.out_dir;
  return j.dump(2) + "\n";
}

ExperimentConfig load_config_file(const fs::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw DataFormatError("config: cannot open " + path.string());
  std::ostringstream text;
  text << file.rdbuf();
  return parse_config(text.str());
}

std::string run_id(const std::string& scaling_label, int depth_H, Optimizer opt, int width,
                   std::uint64_t seed) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%s-H%d-%s-d%05d-s%llu", scaling_label.c_str(), depth_H,
                optimizer_name(opt), width, static_cast<unsigned long long>(seed));
  return buf;
}

std::pair<Dataset, Dataset> build_dataset(const DatasetSpec& spec) {
  if (spec.kind == "synthetic") {
    Dataset train = gen_synthetic(spec.n_train, spec.d0, spec.separation, mix_seed(spec.seed, 1));
    Dataset test = gen_synthetic(spec.n_test, spec.d0, spec.separation, mix_seed(spec.seed, 2));
    return {std::move(train), std::move(test)};
  }
  if (spec.kind == "cifar2") {
    return load_cifar2(spec.path, spec.n_train, spec.n_test);
  }
  throw DataFormatError("config: dataset.kind must be 'synthetic' or 'cifar2'");
}

SweepResult execute_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  const auto [train_ds, test_ds] = build_dataset(cfg.dataset);
  const Dataset eval_ds = eval_subset(test_ds, cfg.eval_points);

  ProbeSchedule schedule;
  schedule.at_steps = effective_probe_steps(cfg);
  schedule.decomposition_variances = true;
  schedule.increment_norms = true;
  schedule.eval_points = &eval_ds;

  std::vector<SortableRow> run_rows, decomp_rows, incr_rows;
  std::size_t ord = 0;
  SweepResult result;

  for (const ScalingChoice& sc : cfg.scalings) {
    for (int width : cfg.widths) {
      for (std::uint64_t seed : cfg.seeds) {
        const std::string id = run_id(sc.label, cfg.depth_H, cfg.optimizer, width, seed);
        const ScaledHyperparams hp = scale_hyperparams(cfg.reference, sc.scaling, width);
        NetState net = init_network(cfg.depth_H, width, cfg.reference.input_dim, cfg.alpha, hp.sigma,
                                    seed, InitDist::StdNormal);
        const TrainRecord record =
            train(net, train_ds, test_ds, cfg.reference, sc.scaling, schedule,
                  LossKind::BinaryCrossEntropy, seed);
        ++result.n_runs;
        if (record.diverged) ++result.n_diverged;

        const std::string diverged = record.diverged ? "1" : "0";
        for (const StepMetrics& sm : record.metrics) {
          run_rows.push_back({id, sm.step, ord++,
                              {id, sc.label, std::to_string(cfg.depth_H), optimizer_name(cfg.optimizer),
                               std::to_string(width), std::to_string(seed), std::to_string(sm.step),
                               format_csv_number(sm.train_loss), format_csv_number(sm.test_loss),
                               format_csv_number(sm.test_acc), diverged}});
        }
        for (const DecompVarianceRow& row : record.decomposition_rows) {
          decomp_rows.push_back({id, row.step, ord++,
                                 {id, std::to_string(row.step), row.term,
                                  format_csv_number(row.variance)}});
        }
        for (const IncrementNormRow& row : record.increment_rows) {
          incr_rows.push_back({id, row.step, ord++,
                               {id, std::to_string(row.step), row.group,
                                format_csv_number(row.avg_norm)}});
        }
      }
    }
  }

  const fs::path out(cfg.out_dir);
  write_csv(out / "runs.csv",
            {"run_id", "scaling", "H", "optimizer", "d", "seed", "step", "train_loss", "test_loss",
             "test_acc", "diverged"},
            strip_keys(run_rows));
  write_csv(out / "decomp.csv", {"run_id", "step", "term", "variance"}, strip_keys(decomp_rows));
  write_csv(out / "increments.csv", {"run_id", "step", "group", "avg_norm"}, strip_keys(incr_rows));

  std::ofstream cfg_file(out / "config.json", std::ios::binary | std::ios::trunc);
  if (!cfg_file) throw std::runtime_error("sweep: cannot write config.json");
  cfg_file << serialize_config(cfg);
  return result;
}

std::optional<Prediction> predict_observable(const Scaling& s, const std::string& observable) {
  const RegimeReport report = classify_scaling(s);
  if (!report.reached_fixed_point || report.exponent_history.empty()) return std::nullopt;
  const ExponentState& state = report.exponent_history.back();
  const bool bound = state.exactness == Exactness::UpperBound;

  if (observable.rfind("increment_", 0) == 0) {
    const std::string group = observable.substr(10);
    if (group == "a") return Prediction{state.q_a, bound};
    if (group == "w") return Prediction{state.q_w, bound};
    if (group.size() >= 2 && group[0] == 'v') {
      const int h = std::atoi(group.c_str() + 1);
      if (h >= 1 && h <= static_cast<int>(state.q_v.size())) {
        return Prediction{state.q_v[static_cast<std::size_t>(h - 1)], bound};
      }
    }
    return std::nullopt;
  }

  if (observable.rfind("var_", 0) == 0) {
    const std::string term = observable.substr(4);
    if (s.depth_H == 0 && report.decomposition) {
      const DecompositionExponents& dec = *report.decomposition;
      if (term == "empty") return Prediction{dec.qf_empty, false};
      if (term == "a") return Prediction{dec.qf_a, false};
      if (term == "w") return Prediction{dec.qf_w, false};
      if (term == "aw") return Prediction{dec.qf_cross, false};
      if (term == "f") return Prediction{dec.max_exponent(), false};
      return std::nullopt;
    }
    if (s.depth_H >= 1 && term == "f") {
      // The output is bounded by its initialization scale and by the total
      // movement the increments can produce.
      const Rat init_exponent = Rat(s.depth_H + 1) * (s.q_sigma + Rat(1, 2));
      const Rat change_exponent = Rat(s.depth_H + 1) * (s.q_sigma + Rat(1)) + max_state_exponent(state);
      const Rat exponent = init_exponent > change_exponent ? init_exponent : change_exponent;
      return Prediction{exponent, s.optimizer == Optimizer::GradientDescent};
    }
    return std::nullopt;
  }
  return std::nullopt;
}

namespace {

struct RunKey {
  std::string label;
  int width = 0;
  std::uint64_t seed = 0;
  bool diverged = false;
};

// run_id -> (label, width, seed, diverged) from runs.csv.
std::map<std::string, RunKey> index_runs(const CsvTable& runs) {
  const int c_id = runs.column("run_id");
  const int c_label = runs.column("scaling");
  const int c_d = runs.column("d");
  const int c_seed = runs.column("seed");
  const int c_div = runs.column("diverged");
  std::map<std::string, RunKey> index;
  for (const auto& row : runs.rows) {
    RunKey& key = index[row[static_cast<std::size_t>(c_id)]];
    key.label = row[static_cast<std::size_t>(c_label)];
    key.width = static_cast<int>(csv_to_double(row[static_cast<std::size_t>(c_d)], "d"));
    key.seed = static_cast<std::uint64_t>(csv_to_double(row[static_cast<std::size_t>(c_seed)], "seed"));
    if (row[static_cast<std::size_t>(c_div)] == "1") key.diverged = true;
  }
  return index;
}

// (label, observable) -> seed -> width -> value at the last probed step.
using SeriesMap = std::map<std::pair<std::string, std::string>,
                           std::map<std::uint64_t, std::map<int, double>>>;

void collect_final_values(const CsvTable& table, const std::map<std::string, RunKey>& runs,
                          const std::string& name_column, const std::string& value_column,
                          const std::string& observable_prefix, SeriesMap& series,
                          std::vector<std::string>& observable_order) {
  const int c_id = table.column("run_id");
  const int c_step = table.column("step");
  const int c_name = table.column(name_column);
  const int c_value = table.column(value_column);

  std::map<std::string, int> final_step;
  for (const auto& row : table.rows) {
    const std::string& id = row[static_cast<std::size_t>(c_id)];
    const int step = static_cast<int>(csv_to_double(row[static_cast<std::size_t>(c_step)], "step"));
    auto [it, inserted] = final_step.try_emplace(id, step);
    if (!inserted && step > it->second) it->second = step;
  }

  std::set<std::string> seen;
  for (const auto& row : table.rows) {
    const std::string& id = row[static_cast<std::size_t>(c_id)];
    const auto run = runs.find(id);
    if (run == runs.end() || run->second.diverged) continue;
    const int step = static_cast<int>(csv_to_double(row[static_cast<std::size_t>(c_step)], "step"));
    if (step != final_step.at(id)) continue;
    const std::string observable = observable_prefix + row[static_cast<std::size_t>(c_name)];
    if (seen.insert(observable).second) observable_order.push_back(observable);
    const double value = csv_to_double(row[static_cast<std::size_t>(c_value)], value_column);
    series[{run->second.label, observable}][run->second.seed][run->second.width] = value;
  }
}

}  // namespace

int execute_fit(const fs::path& out_dir, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("execute_fit: tolerance must be positive");
  const ExperimentConfig cfg = load_config_file(out_dir / "config.json");
  const CsvTable runs = read_csv(out_dir / "runs.csv");
  const CsvTable decomp = read_csv(out_dir / "decomp.csv");
  const CsvTable incr = read_csv(out_dir / "increments.csv");
  const auto run_index = index_runs(runs);

  SeriesMap series;
  std::vector<std::string> observable_order;
  collect_final_values(incr, run_index, "group", "avg_norm", "increment_", series, observable_order);
  collect_final_values(decomp, run_index, "term", "variance", "var_", series, observable_order);

  std::vector<std::vector<std::string>> rows;
  for (const ScalingChoice& sc : cfg.scalings) {
    for (const std::string& observable : observable_order) {
      const auto it = series.find({sc.label, observable});
      if (it == series.end()) continue;
      const auto prediction = predict_observable(sc.scaling, observable);
      if (!prediction) continue;

      std::vector<std::vector<std::pair<double, double>>> per_seed;
      for (std::uint64_t seed : cfg.seeds) {
        const auto seed_it = it->second.find(seed);
        if (seed_it == it->second.end()) continue;
        std::vector<std::pair<double, double>> points;
        for (const auto& [width, value] : seed_it->second) {
          points.emplace_back(static_cast<double>(width), value);
        }
        per_seed.push_back(std::move(points));
      }
      if (per_seed.size() < 2) continue;
      const auto aggregate = aggregate_seeds(per_seed);
      if (!aggregate) continue;

      // Variance observables measure the squared quantity.
      const bool is_variance = observable.rfind("var_", 0) == 0;
      const double fitted = is_variance ? 0.5 * aggregate->mean_slope : aggregate->mean_slope;
      const double spread = is_variance ? 0.5 * aggregate->std_slope : aggregate->std_slope;

      const double predicted = to_double(prediction->exponent);
      const bool match = prediction->is_upper_bound ? fitted <= predicted + tol
                                                    : std::abs(fitted - predicted) <= tol;
      const std::string predicted_text = (prediction->is_upper_bound ? "<=" : "") +
                                         to_string(prediction->exponent);
      rows.push_back({sc.label, std::to_string(cfg.depth_H), optimizer_name(cfg.optimizer), observable,
                      predicted_text, format_csv_number(fitted), format_csv_number(spread),
                      to_string(match ? Verdict::Match : Verdict::Mismatch)});
    }
  }

  write_csv(out_dir / "fits.csv",
            {"scaling", "H", "optimizer", "observable", "predicted_q", "fitted_q", "stderr", "verdict"},
            rows);
  return static_cast<int>(rows.size());
}

namespace {

// Mean across seeds of a per-(width or step) value collection.
std::vector<std::pair<double, double>> seed_mean_series(
    const std::map<double, std::pair<double, int>>& sums) {
  std::vector<std::pair<double, double>> series;
  for (const auto& [x, sum_count] : sums) {
    series.emplace_back(x, sum_count.first / sum_count.second);
  }
  return series;
}

}  // namespace

std::vector<fs::path> execute_report(const fs::path& out_dir) {
  std::vector<std::string> missing;
  for (const char* name : {"config.json", "runs.csv", "decomp.csv", "increments.csv"}) {
    if (!fs::exists(out_dir / name)) missing.emplace_back(name);
  }
  if (!missing.empty()) {
    std::string text = "report: missing inputs in " + out_dir.string() + ":";
    for (const std::string& name : missing) text += " " + name;
    throw DataFormatError(text);
  }

  const ExperimentConfig cfg = load_config_file(out_dir / "config.json");
  const CsvTable runs = read_csv(out_dir / "runs.csv");
  const CsvTable decomp = read_csv(out_dir / "decomp.csv");
  const CsvTable incr = read_csv(out_dir / "increments.csv");
  const auto run_index = index_runs(runs);

  std::vector<fs::path> written;

  // Final test loss vs width and test loss vs step at the largest width.
  {
    const int c_id = runs.column("run_id");
    const int c_step = runs.column("step");
    const int c_loss = runs.column("test_loss");
    std::map<std::string, int> final_step;
    for (const auto& row : runs.rows) {
      const std::string& id = row[static_cast<std::size_t>(c_id)];
      const int step = static_cast<int>(csv_to_double(row[static_cast<std::size_t>(c_step)], "step"));
      auto [it, inserted] = final_step.try_emplace(id, step);
      if (!inserted && step > it->second) it->second = step;
    }

    std::map<std::string, std::map<double, std::pair<double, int>>> loss_by_width;  // label ->
    std::map<std::string, std::map<double, std::pair<double, int>>> loss_by_step;
    const int top_width = cfg.widths.back();
    for (const auto& row : runs.rows) {
      const std::string& id = row[static_cast<std::size_t>(c_id)];
      const RunKey& key = run_index.at(id);
      if (key.diverged) continue;
      const int step = static_cast<int>(csv_to_double(row[static_cast<std::size_t>(c_step)], "step"));
      const double loss = csv_to_double(row[static_cast<std::size_t>(c_loss)], "test_loss");
      if (step == final_step.at(id)) {
        auto& cell = loss_by_width[key.label][static_cast<double>(key.width)];
        cell.first += loss;
        ++cell.second;
      }
      if (key.width == top_width) {
        auto& cell = loss_by_step[key.label][static_cast<double>(step)];
        cell.first += loss;
        ++cell.second;
      }
    }

    SvgChartSpec by_width;
    by_width.title = "Final test loss vs width";
    by_width.x_label = "width d";
    by_width.y_label = "test loss";
    by_width.log2_x = true;
    for (const ScalingChoice& sc : cfg.scalings) {
      if (loss_by_width.count(sc.label) == 0) continue;
      by_width.series.push_back({sc.label, seed_mean_series(loss_by_width.at(sc.label))});
    }
    write_svg(out_dir / "loss_vs_width.svg", by_width);
    written.push_back(out_dir / "loss_vs_width.svg");

    SvgChartSpec by_step;
    by_step.title = "Test loss vs step at d = " + std::to_string(top_width);
    by_step.x_label = "step";
    by_step.y_label = "test loss";
    for (const ScalingChoice& sc : cfg.scalings) {
      if (loss_by_step.count(sc.label) == 0) continue;
      by_step.series.push_back({sc.label, seed_mean_series(loss_by_step.at(sc.label))});
    }
    write_svg(out_dir / "loss_vs_step.svg", by_step);
    written.push_back(out_dir / "loss_vs_step.svg");
  }

  // Per-scaling log-log charts with theory guides.
  SeriesMap series;
  std::vector<std::string> observable_order;
  collect_final_values(incr, run_index, "group", "avg_norm", "increment_", series, observable_order);
  collect_final_values(decomp, run_index, "term", "variance", "var_", series, observable_order);

  for (const ScalingChoice& sc : cfg.scalings) {
    for (const bool variances : {false, true}) {
      SvgChartSpec chart;
      chart.log2_x = true;
      chart.log2_y = true;
      chart.title = (variances ? "Output-term variances, " : "Weight-increment norms, ") + sc.label;
      chart.x_label = "width d";
      chart.y_label = variances ? "Var over inputs" : "mean increment norm";
      const std::string prefix = variances ? "var_" : "increment_";
      for (const std::string& observable : observable_order) {
        if (observable.rfind(prefix, 0) != 0) continue;
        const auto it = series.find({sc.label, observable});
        if (it == series.end()) continue;
        std::map<double, std::pair<double, int>> sums;
        for (const auto& [seed, by_width] : it->second) {
          for (const auto& [width, value] : by_width) {
            auto& cell = sums[static_cast<double>(width)];
            cell.first += value;
            ++cell.second;
          }
        }
        const auto mean_series = seed_mean_series(sums);
        chart.series.push_back({observable.substr(prefix.size()), mean_series});

        const auto prediction = predict_observable(sc.scaling, observable);
        if (prediction && !mean_series.empty() && mean_series.back().second > 0.0) {
          const Rat chart_exponent =
              variances ? Rat(2) * prediction->exponent : prediction->exponent;
          SvgGuideLine guide;
          guide.slope = to_double(chart_exponent);
          guide.x0 = mean_series.back().first;
          guide.y0 = mean_series.back().second;
          guide.label = observable.substr(prefix.size()) + " ~ d^" +
                        (prediction->is_upper_bound ? "<=" : "") + to_string(chart_exponent);
          chart.guides.push_back(guide);
        }
      }
      if (chart.series.empty()) continue;
      const fs::path path =
          out_dir / ((variances ? "decomp_var_" : "increments_") + sc.label + ".svg");
      write_svg(path, chart);
      written.push_back(path);
    }
  }
  return written;
}

void execute_kernel_study(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.depth_H != 0 || cfg.optimizer != Optimizer::GradientDescent) {
    throw DataFormatError("kernel study: defined for depth 0 under gradient descent");
  }
  fs::create_directories(cfg.out_dir);
  const auto [train_ds, test_ds] = build_dataset(cfg.dataset);
  const int n_train = train_ds.n();
  const int n_query = std::min(cfg.kernel_study.n_query, test_ds.n());

  Eigen::MatrixXd points(n_train + n_query, train_ds.d0);
  points.topRows(n_train) = train_ds.inputs;
  points.bottomRows(n_query) = test_ds.inputs.topRows(n_query);

  // Equal-split reference: one hat rate drives both weight groups, so the
  // net's one-step change is exactly the single-rate tangent kernel.
  const Scaling scaling = canonical_scaling(CanonicalLimit::Kernel, 0, Optimizer::GradientDescent);
  const double sigma_star = sigma_star_of(cfg.reference, 0);
  const double eta_hat_star = cfg.reference.eta_star_a / sigma_star;
  const double eta_hat_sigma2 =
      eta_hat_star * sigma_star * sigma_star * static_cast<double>(cfg.reference.d_star);

  const Eigen::MatrixXd gram = ntk_limit_gram(points, eta_hat_sigma2, cfg.alpha,
                                              cfg.kernel_study.n_mc, cfg.kernel_study.mc_seed);
  const Eigen::MatrixXd gram_train = gram.topRows(n_train);

  const int steps = cfg.reference.steps;
  std::vector<SortableRow> rows;
  std::size_t ord = 0;
  for (int width : cfg.widths) {
    const double sigma =
        sigma_star * std::pow(static_cast<double>(width) / cfg.reference.d_star,
                              to_double(scaling.q_sigma));
    ScaledHyperparams hp;
    hp.sigma = sigma;
    hp.eta_hat_a = eta_hat_star;
    hp.eta_hat_w = eta_hat_star;
    for (std::uint64_t seed : cfg.seeds) {
      NetState net = init_network(0, width, train_ds.d0, cfg.alpha, sigma, seed, InitDist::StdNormal);

      const Eigen::VectorXd init_f = forward_batch(net, points).f;
      const Eigen::MatrixXd kernel_traj =
          kernel_dynamics(init_f, gram_train, train_ds.labels, LossKind::BinaryCrossEntropy, steps);

      std::vector<int> batch(static_cast<std::size_t>(n_train));
      for (int i = 0; i < n_train; ++i) batch[static_cast<std::size_t>(i)] = i;
      Eigen::MatrixXd net_traj(steps + 1, n_query);
      net_traj.row(0) = forward_batch(net, points.bottomRows(n_query)).f.transpose();
      for (int k = 1; k <= steps; ++k) {
        const WeightSet grads = gradients(net, train_ds, batch, LossKind::BinaryCrossEntropy);
        gd_step(net, grads, hp);
        net_traj.row(k) = forward_batch(net, points.bottomRows(n_query)).f.transpose();
      }

      const std::string id_prefix = std::to_string(width) + "-" + std::to_string(seed);
      for (int k = 0; k <= steps; k += cfg.kernel_study.record_every) {
        for (int p = 0; p < n_query; ++p) {
          rows.push_back({id_prefix, k, ord++,
                          {std::to_string(width), std::to_string(seed), std::to_string(k),
                           std::to_string(p), format_csv_number(net_traj(k, p)),
                           format_csv_number(kernel_traj(k, n_train + p))}});
        }
      }
    }
  }
  write_csv(fs::path(cfg.out_dir) / "kernel_dyn.csv",
            {"d", "seed", "step", "point", "f_net", "f_kernel"}, strip_keys(rows));
}

void execute_mf_study(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.depth_H != 0 || cfg.optimizer != Optimizer::GradientDescent) {
    throw DataFormatError("mf study: defined for depth 0 under gradient descent");
  }
  for (int width : cfg.widths) {
    if (width > cfg.mf_study.d_ref) {
      throw DataFormatError("mf study: widths must not exceed the reference width");
    }
  }
  fs::create_directories(cfg.out_dir);
  const auto [train_ds, test_ds] = build_dataset(cfg.dataset);

  const Scaling scaling = canonical_scaling(CanonicalLimit::MeanField, 0, Optimizer::GradientDescent);
  ReferenceConfig ref = cfg.reference;
  ref.steps = cfg.mf_study.transition_steps;
  ref.batch_size = 0;  // the transition operator is a full-batch step

  std::vector<int> all_widths = cfg.widths;
  all_widths.push_back(cfg.mf_study.d_ref);

  std::map<int, std::vector<double>> w2_by_width;  // width -> per-seed values
  for (std::uint64_t seed : cfg.seeds) {
    std::map<int, ParticleMeasure> measures;
    for (int width : all_widths) {
      const ScaledHyperparams hp = scale_hyperparams(ref, scaling, width);
      NetState net =
          init_network(0, width, train_ds.d0, cfg.alpha, hp.sigma, seed, cfg.mf_study.init);
      train(net, train_ds, test_ds, ref, scaling, {}, LossKind::BinaryCrossEntropy, seed);
      measures.emplace(width, measure_of(net));
    }
    const ParticleMeasure& reference = measures.at(cfg.mf_study.d_ref);
    for (int width : cfg.widths) {
      const ParticleMeasure sub =
          subsample_atoms(reference, width, mix_seed(cfg.mf_study.subsample_seed, width));
      w2_by_width[width].push_back(wasserstein2(measures.at(width), sub));
    }
  }

  std::vector<std::vector<std::string>> rows;
  for (int width : cfg.widths) {
    const std::vector<double>& values = w2_by_width.at(width);
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    rows.push_back({std::to_string(cfg.mf_study.transition_steps), std::to_string(width),
                    std::to_string(cfg.mf_study.d_ref), format_csv_number(mean)});
  }
  write_csv(fs::path(cfg.out_dir) / "wasserstein.csv", {"k", "d", "d_ref", "w2"}, rows);
}

}  // namespace widthlab
