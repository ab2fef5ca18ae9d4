/*
 * Copyright 2026 The HetNoise Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "hetnoise/cli.hpp"

#include "hetnoise/eval.hpp"
#include "hetnoise/json_io.hpp"
#include "hetnoise/noisegen.hpp"
#include "hetnoise/sweep.hpp"
#include "hetnoise/train.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <sstream>

namespace fs = std::filesystem;

namespace hetnoise {
namespace {

// Bad flag values or combinations; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<double> parse_number_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError(flag + ": '" + item + "' is not a number");
    }
  }
  if (out.empty()) throw UsageError(flag + " is empty");
  return out;
}

std::vector<int> parse_int_list(const std::string& text, const std::string& flag) {
  std::vector<int> out;
  if (text.empty() || text == "none") return out;
  for (double v : parse_number_list(text, flag)) {
    if (v != static_cast<int>(v) || v < 1) throw UsageError(flag + " needs positive integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

fs::path resolve_data(const std::string& path, const char* default_name) {
  fs::path p(path);
  if (fs::is_directory(p)) p /= default_name;
  if (!fs::exists(p)) throw FormatError("data file not found: " + p.string());
  return p;
}

NoisyDataset load_dataset(const fs::path& path) { return dataset_from_jsonl(read_text_file(path)); }

struct Manifest {
  std::string command;
  Json config = Json::object();
  Json seeds = Json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
};

void append_manifest(const fs::path& dir, const Manifest& m, const std::vector<std::string>& argv,
                     std::chrono::steady_clock::time_point started) {
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  Json doc = {
      {"command", m.command},
      {"toolkit_version", toolkit_version()},
      {"argv", argv},
      {"config", m.config},
      {"seeds", m.seeds},
      {"inputs", m.inputs},
      {"outputs", m.outputs},
      {"wall_clock_seconds", seconds},
  };
  append_text_file(dir / "manifest.jsonl", dump_json(doc) + "\n");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw FormatError("cannot create output directory " + dir.string());
}

struct GenerateArgs {
  int n = 1000;
  int dim = 2;
  int classes = 2;
  std::string profile = "uniform_flip";
  double base_scale = 1.0;
  std::uint64_t seed = 0;
  std::string out;
  std::string splits = "0.7,0.2,0.1";
  double separation = 4.0;
  double blob_std = 1.0;
  bool multilabel = false;
  std::map<std::string, double> field_params;
};

struct TrainingArgs {
  std::string hidden = "16";
  std::string activation = "relu";
  std::string optimizer = "adam";
  int epochs = 20;
  double lr = 1e-3;
  int batch = 32;
  int mc_samples = 1000;
  int train_mc_samples = 0;  // 0: same as mc_samples
  std::uint64_t seed = 0;
};

struct TrainArgs {
  std::string data;
  std::string head = "prob";
  double tau = 1.0;
  std::string out;
  TrainingArgs t;
};

struct SweepArgs {
  std::string data;
  std::string grid = "default";
  std::string metric = "auprc";
  std::string out;
  TrainingArgs t;
};

struct EvaluateArgs {
  std::string model;
  std::string data;
  std::string against = "noisy";
  std::string fractions = "default";
  int mc_samples = 0;  // 0: from the model file
  std::uint64_t seed = 0;
  std::string out;
};

void add_training_flags(CLI::App* cmd, TrainingArgs& t) {
  cmd->add_option("--hidden", t.hidden, "Comma-separated hidden widths, or 'none'")->capture_default_str();
  cmd->add_option("--activation", t.activation, "relu | tanh")->capture_default_str();
  cmd->add_option("--optimizer", t.optimizer, "adam | sgd")->capture_default_str();
  cmd->add_option("--epochs", t.epochs)->capture_default_str();
  cmd->add_option("--lr", t.lr)->capture_default_str();
  cmd->add_option("--batch", t.batch)->capture_default_str();
  cmd->add_option("--mc-samples", t.mc_samples, "MC samples at prediction time")->capture_default_str();
  cmd->add_option("--train-mc-samples", t.train_mc_samples, "MC samples per training step (default: --mc-samples)");
  cmd->add_option("--seed", t.seed)->capture_default_str();
}

TrainConfig train_config(const TrainingArgs& t) {
  TrainConfig cfg;
  cfg.learning_rate = t.lr;
  cfg.batch_size = t.batch;
  cfg.epochs = t.epochs;
  cfg.seed = t.seed;
  cfg.train_mc_samples = t.train_mc_samples > 0 ? t.train_mc_samples : t.mc_samples;
  if (t.optimizer == "adam") {
    cfg.optimizer = OptimizerKind::adam;
  } else if (t.optimizer == "sgd") {
    cfg.optimizer = OptimizerKind::sgd;
  } else {
    throw UsageError("--optimizer must be adam or sgd");
  }
  try {
    cfg.validate();
  } catch (const InvalidConfig& e) {
    throw UsageError(e.what());
  }
  if (t.mc_samples < 1) throw UsageError("--mc-samples must be >= 1");
  return cfg;
}

Json training_json(const TrainingArgs& t, const TrainConfig& cfg) {
  return {{"hidden", parse_int_list(t.hidden, "--hidden")},
          {"activation", t.activation},
          {"optimizer", t.optimizer},
          {"epochs", cfg.epochs},
          {"learning_rate", cfg.learning_rate},
          {"batch_size", cfg.batch_size},
          {"mc_samples", t.mc_samples},
          {"train_mc_samples", cfg.train_mc_samples}};
}

Activation parse_activation(const std::string& name) {
  try {
    return activation_from_string(name);
  } catch (const InvalidConfig& e) {
    throw UsageError(e.what());
  }
}

int cmd_generate(const GenerateArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto started = std::chrono::steady_clock::now();
  NoiseProfile profile;
  CleanTaskConfig task_cfg;
  try {
    profile = NoiseProfile::make(noise_kind_from_string(a.profile), a.base_scale, a.field_params);
    task_cfg.n = a.n;
    task_cfg.dim = a.dim;
    task_cfg.num_classes = a.classes;
    task_cfg.separation = a.separation;
    task_cfg.blob_std = a.blob_std;
    task_cfg.mode = a.multilabel ? LabelMode::multilabel : LabelMode::multiclass;
    task_cfg.seed = a.seed;
    if (a.n < 1) throw InvalidConfig("--n must be >= 1");
    if (profile.kind == NoiseKind::stochastic_event && profile.field.params.at("event_class") >= a.classes)
      throw InvalidConfig("--event-class exceeds --classes");
  } catch (const InvalidConfig& e) {
    throw UsageError(e.what());
  }
  const bool do_split = a.splits != "none";
  std::array<double, 3> fractions{};
  if (do_split) {
    const auto f = parse_number_list(a.splits, "--splits");
    if (f.size() != 3) throw UsageError("--splits needs three fractions");
    fractions = {f[0], f[1], f[2]};
    try {
      split_sizes(a.n, fractions);
    } catch (const InvalidConfig& e) {
      throw UsageError(std::string("--splits: ") + e.what());
    }
  }

  const CleanTask task = make_clean_task(task_cfg);
  const NoisyDataset full = corrupt(task.features, task.clean_labels, task.true_logits, profile, task.mode,
                                    task.num_classes, a.seed);
  const fs::path dir(a.out);
  ensure_dir(dir);
  Manifest m;
  m.command = "generate";
  if (do_split) {
    const DatasetSplits parts = split(full, fractions, a.seed);
    for (const auto* part : {&parts.train, &parts.val, &parts.test}) {
      const fs::path file = dir / (to_string(part->split_tag) + ".jsonl");
      write_text_file(file, dataset_to_jsonl(*part));
      m.outputs.push_back(file.string());
      out << file.string() << ": " << part->size() << " samples\n";
    }
  } else {
    const fs::path file = dir / "all.jsonl";
    write_text_file(file, dataset_to_jsonl(full));
    m.outputs.push_back(file.string());
    out << file.string() << ": " << full.size() << " samples\n";
  }
  Json params = Json::object();
  for (const auto& [k, v] : profile.field.params) params[k] = v;
  m.config = {{"n", a.n},
              {"dim", a.dim},
              {"classes", a.classes},
              {"label_mode", to_string(task_cfg.mode)},
              {"profile", a.profile},
              {"base_scale", a.base_scale},
              {"scale_field_params", params},
              {"separation", a.separation},
              {"blob_std", a.blob_std},
              {"splits", a.splits}};
  m.seeds = {{"seed", a.seed}};
  append_manifest(dir, m, argv, started);
  return 0;
}

int cmd_train(const TrainArgs& a, bool tau_given, const std::vector<std::string>& argv, std::ostream& out) {
  const auto started = std::chrono::steady_clock::now();
  if (a.head != "prob" && a.head != "het" && a.head != "det") throw UsageError("--head must be prob, het or det");
  if (a.head == "det" && tau_given) throw UsageError("--tau does not apply to --head det");
  if (a.head == "het" && tau_given) throw UsageError("--head het fixes tau = 1; drop --tau or use --head prob");
  const double tau = a.head == "prob" ? a.tau : 1.0;
  if (!(tau > 0.0) || !std::isfinite(tau)) throw UsageError("--tau must be positive");
  const TrainConfig cfg = train_config(a.t);
  const std::vector<int> hidden = parse_int_list(a.t.hidden, "--hidden");
  const Activation act = parse_activation(a.t.activation);

  const fs::path data_path = resolve_data(a.data, "train.jsonl");
  const NoisyDataset data = load_dataset(data_path);
  HeadMode head;
  if (a.head == "det") {
    head = data.mode == LabelMode::multiclass ? HeadMode::deterministic : HeadMode::deterministic_multilabel;
  } else {
    head = data.mode == LabelMode::multiclass ? HeadMode::multiclass : HeadMode::multilabel;
  }
  MCConfig mc;
  mc.temperature = tau;
  mc.num_samples = a.t.mc_samples;
  mc.seed = a.t.seed;
  const HetModel init = make_model(static_cast<int>(data.dim()), hidden, data.num_classes, act, head, mc, a.t.seed);
  const FitResult fitted = fit(init, data, cfg);

  const fs::path dir(a.out);
  ensure_dir(dir);
  write_text_file(dir / "model.json", serialize_model(fitted.model));
  write_text_file(dir / "train_log.csv", training_log_to_csv(fitted.log));
  for (const auto& e : fitted.log) out << "epoch " << e.epoch << " train_loss " << format_double(e.train_loss) << "\n";

  Manifest m;
  m.command = "train";
  m.config = training_json(a.t, cfg);
  m.config["head"] = a.head;
  m.config["head_mode"] = to_string(head);
  m.config["tau"] = tau;
  m.seeds = {{"init_seed", a.t.seed}, {"train_seed", cfg.seed}, {"mc_seed", mc.seed}};
  m.inputs = {data_path.string()};
  m.outputs = {(dir / "model.json").string(), (dir / "train_log.csv").string()};
  append_manifest(dir, m, argv, started);
  return 0;
}

int cmd_sweep(const SweepArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto started = std::chrono::steady_clock::now();
  const std::vector<double> grid = a.grid == "default" ? default_grid() : parse_number_list(a.grid, "--grid");
  try {
    validate_grid(grid);
  } catch (const InvalidConfig& e) {
    throw UsageError(std::string("--grid: ") + e.what());
  }
  SelectionMetric metric;
  try {
    metric = selection_metric_from_string(a.metric);
  } catch (const InvalidConfig& e) {
    throw UsageError(e.what());
  }
  const TrainConfig cfg = train_config(a.t);
  ModelTemplate tmpl;
  tmpl.hidden = parse_int_list(a.t.hidden, "--hidden");
  tmpl.activation = parse_activation(a.t.activation);
  tmpl.mc.num_samples = a.t.mc_samples;
  tmpl.mc.seed = a.t.seed;
  tmpl.init_seed = a.t.seed;

  const fs::path train_path = resolve_data(a.data, "train.jsonl");
  fs::path val_dir = fs::is_directory(a.data) ? fs::path(a.data) : fs::path(a.data).parent_path();
  if (val_dir.empty()) val_dir = ".";
  const fs::path val_path = resolve_data(val_dir.string(), "val.jsonl");
  const NoisyDataset train_set = load_dataset(train_path);
  const NoisyDataset val_set = load_dataset(val_path);
  tmpl.head_mode = train_set.mode == LabelMode::multiclass ? HeadMode::multiclass : HeadMode::multilabel;

  const SweepOutcome outcome = run_sweep(train_set, val_set, tmpl, cfg, grid, metric);
  const fs::path dir(a.out);
  ensure_dir(dir);
  write_text_file(dir / "sweep.json", dump_json(sweep_to_json(outcome.result), 2) + "\n");
  Manifest m;
  m.outputs = {(dir / "sweep.json").string()};
  if (outcome.best_model) {
    write_text_file(dir / "model.json", serialize_model(*outcome.best_model));
    m.outputs.push_back((dir / "model.json").string());
  }
  out << "tau_star " << format_double(outcome.result.tau_star) << "\n";

  m.command = "sweep";
  m.config = training_json(a.t, cfg);
  m.config["grid"] = grid;
  m.config["metric"] = a.metric;
  m.seeds = {{"init_seed", tmpl.init_seed}, {"train_seed", cfg.seed}, {"mc_seed", tmpl.mc.seed}};
  m.inputs = {train_path.string(), val_path.string()};
  append_manifest(dir, m, argv, started);
  return 0;
}

int cmd_evaluate(const EvaluateArgs& a, bool seed_given, const std::vector<std::string>& argv, std::ostream& out) {
  const auto started = std::chrono::steady_clock::now();
  if (a.against != "noisy" && a.against != "clean") throw UsageError("--against must be noisy or clean");
  std::vector<double> fractions = a.fractions == "default" ? default_discard_fractions()
                                                           : parse_number_list(a.fractions, "--fractions");
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (!(fractions[i] >= 0.0 && fractions[i] < 1.0) || (i > 0 && !(fractions[i] > fractions[i - 1])))
      throw UsageError("--fractions must be increasing values in [0, 1)");
  }
  if (fractions.size() < 2) throw UsageError("--fractions needs at least two values");
  if (a.mc_samples < 0) throw UsageError("--mc-samples must be >= 1");

  const fs::path model_path(a.model);
  const HetModel model = deserialize_model(read_text_file(model_path));
  const fs::path data_path = resolve_data(a.data, "test.jsonl");
  const NoisyDataset data = load_dataset(data_path);
  const EvalTarget target = a.against == "clean" ? EvalTarget::clean : EvalTarget::noisy;
  if (target == EvalTarget::clean && !data.has_clean_labels)
    throw FormatError("--against clean needs clean labels, but " + data_path.string() +
                      " has none (clean_label is null)");

  MCConfig mc = model.mc;
  if (a.mc_samples > 0) mc.num_samples = a.mc_samples;
  if (seed_given) mc.seed = a.seed;
  PredictionSet preds = predict_dataset(model, data, mc);
  rescore(preds, target);
  const EvalReport report = evaluate(preds, &data, fractions);

  const fs::path dir(a.out);
  ensure_dir(dir);
  write_text_file(dir / "report.json", dump_json(report_to_json(report), 2) + "\n");
  write_text_file(dir / "discard.csv", discard_to_csv(report.discard));
  write_text_file(dir / "density_values.csv", density_values_to_csv(report));
  write_text_file(dir / "density_histograms.csv", density_histograms_to_csv(report));
  out << "f1 " << format_double(report.f1) << "\n";
  if (report.auprc) out << "auprc " << format_double(*report.auprc) << "\n";
  out << "mf " << format_double(report.discard.mf) << "\ndi " << format_double(report.discard.di) << "\n";

  Manifest m;
  m.command = "evaluate";
  m.config = {{"against", a.against}, {"fractions", fractions}, {"mc_samples", mc.num_samples},
              {"temperature", mc.temperature}};
  m.seeds = {{"mc_seed", mc.seed}};
  m.inputs = {model_path.string(), data_path.string()};
  m.outputs = {(dir / "report.json").string(), (dir / "discard.csv").string(),
               (dir / "density_values.csv").string(), (dir / "density_histograms.csv").string()};
  append_manifest(dir, m, argv, started);
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Heteroscedastic label-noise toolkit", "hetnoise"};
  app.require_subcommand(1);
  app.set_version_flag("--version", toolkit_version());

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Generate a synthetic noisy dataset");
  generate->add_option("--n", gen.n, "Number of samples")->capture_default_str();
  generate->add_option("--dim", gen.dim, "Feature dimension")->capture_default_str();
  generate->add_option("--classes", gen.classes, "Number of classes")->capture_default_str();
  generate->add_option("--profile", gen.profile,
                       "uniform_flip | region_ambiguity | stochastic_event | boundary_misalignment")
      ->capture_default_str();
  generate->add_option("--base-scale", gen.base_scale, "Noise scale")->capture_default_str();
  generate->add_option("--seed", gen.seed)->capture_default_str();
  generate->add_option("--out", gen.out, "Output directory")->required();
  generate->add_option("--splits", gen.splits, "train,val,test fractions or 'none'")->capture_default_str();
  generate->add_option("--separation", gen.separation)->capture_default_str();
  generate->add_option("--blob-std", gen.blob_std)->capture_default_str();
  generate->add_flag("--multilabel", gen.multilabel, "Multi-hot labels");
  double margin = 0, background = 0, event_class = 0, width = 0;
  auto* margin_opt = generate->add_option("--margin", margin, "region_ambiguity margin");
  auto* background_opt = generate->add_option("--background", background, "region_ambiguity background scale");
  auto* event_opt = generate->add_option("--event-class", event_class, "stochastic_event class");
  auto* width_opt = generate->add_option("--width", width, "boundary_misalignment width");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--data", tr.data, "Training JSONL file or dataset directory")->required();
  train->add_option("--head", tr.head, "prob | het | det")->capture_default_str();
  auto* tau_opt = train->add_option("--tau", tr.tau, "Temperature (prob head)");
  train->add_option("--out", tr.out, "Output directory")->required();
  add_training_flags(train, tr.t);

  SweepArgs sw;
  auto* sweep = app.add_subcommand("sweep", "Select the temperature on the validation split");
  sweep->add_option("--data", sw.data, "Dataset directory with train.jsonl and val.jsonl")->required();
  sweep->add_option("--grid", sw.grid, "'default' or comma-separated temperatures")->capture_default_str();
  sweep->add_option("--metric", sw.metric, "auprc | f1 | val_loss")->capture_default_str();
  sweep->add_option("--out", sw.out, "Output directory")->required();
  add_training_flags(sweep, sw.t);

  EvaluateArgs ev;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Evaluate a model and its uncertainties");
  evaluate_cmd->add_option("--model", ev.model, "Model JSON")->required();
  evaluate_cmd->add_option("--data", ev.data, "Test JSONL file or dataset directory")->required();
  evaluate_cmd->add_option("--against", ev.against, "noisy | clean")->capture_default_str();
  evaluate_cmd->add_option("--fractions", ev.fractions, "'default' or comma-separated discard fractions")
      ->capture_default_str();
  evaluate_cmd->add_option("--mc-samples", ev.mc_samples, "Override the model's MC sample count");
  auto* eval_seed_opt = evaluate_cmd->add_option("--seed", ev.seed, "Override the model's MC seed");
  evaluate_cmd->add_option("--out", ev.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  std::vector<std::string> args(argv, argv + argc);
  try {
    if (generate->parsed()) {
      if (margin_opt->count()) gen.field_params["margin"] = margin;
      if (background_opt->count()) gen.field_params["background"] = background;
      if (event_opt->count()) gen.field_params["event_class"] = event_class;
      if (width_opt->count()) gen.field_params["width"] = width;
      return cmd_generate(gen, args, out);
    }
    if (train->parsed()) return cmd_train(tr, tau_opt->count() > 0, args, out);
    if (sweep->parsed()) return cmd_sweep(sw, args, out);
    if (evaluate_cmd->parsed()) return cmd_evaluate(ev, eval_seed_opt->count() > 0, args, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace hetnoise
