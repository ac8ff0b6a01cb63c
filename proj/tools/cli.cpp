#include "cli.hpp"

#include <fstream>
#include <set>

#include <CLI11.hpp>

#include "semamba/data/png_io.hpp"
#include "semamba/eval/report.hpp"
#include "semamba/nets/checkpoint.hpp"
#include "semamba/train/trainer.hpp"

namespace semamba::cli {

namespace fs = std::filesystem;

namespace {

nlohmann::json synth_to_json(const data::SynthOptions& s) {
  return {{"cases", s.cases},
          {"slices_per_case", s.slices_per_case},
          {"classes", s.classes},
          {"seed", s.seed},
          {"image_size", s.image_size},
          {"labelled_fraction", s.labelled_fraction},
          {"validation_fraction", s.validation_fraction},
          {"test_fraction", s.test_fraction},
          {"noise", s.noise}};
}

data::SynthOptions synth_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {
      "cases",     "slices_per_case",   "classes",   "seed", "image_size", "labelled_fraction",
      "validation_fraction", "test_fraction", "noise"};
  if (!j.is_object()) throw ConfigError("synth section must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError("synth: unknown key '" + key + "'");
  }
  data::SynthOptions s;
  auto read = [&](const char* key, auto& dst) {
    if (j.contains(key)) dst = j.at(key).get<std::decay_t<decltype(dst)>>();
  };
  read("cases", s.cases);
  read("slices_per_case", s.slices_per_case);
  read("classes", s.classes);
  read("seed", s.seed);
  read("image_size", s.image_size);
  read("labelled_fraction", s.labelled_fraction);
  read("validation_fraction", s.validation_fraction);
  read("test_fraction", s.test_fraction);
  read("noise", s.noise);
  return s;
}

// Flag storage shared by the subcommands; CLI11 records which were given.
struct Flags {
  std::string config, out, data, manifest, checkpoint, predictions, subset, method;
  std::vector<std::string> metrics;
  uint64_t seed = 0;
  int64_t iterations = 0, batch_size = 0, labelled_batch = 0, validate_every = 0,
          input_size = 0, projector_grid = 0, eval_batch = 0;
  double learning_rate = 0, momentum = 0, weight_decay = 0;
  int cases = 0, slices = 0, classes = 0;
  int64_t image_size = 0;
  double labelled_fraction = 0, validation_fraction = 0, test_fraction = 0, noise = 0;
};

bool given(const CLI::App* app, const std::string& name) {
  const auto* opt = app->get_option_no_throw(name);
  return opt != nullptr && opt->count() > 0;
}

void add_shared(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON run configuration");
  sub->add_option("--seed", f.seed, "Random seed (training and synthesis)");
  sub->add_option("--out", f.out, "Output directory");
  sub->add_flag("--deterministic", "Single-threaded, reproducible execution");
}

void add_data(CLI::App* sub, Flags& f) {
  sub->add_option("--data", f.data, "Dataset root directory");
  sub->add_option("--manifest", f.manifest, "Split manifest (default: <data>/manifest.json)");
}

void add_selection(CLI::App* sub, Flags& f) {
  sub->add_option("--subset", f.subset, "Samples to use: test, validation or all")
      ->check(CLI::IsMember({"test", "validation", "all"}));
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  return RunConfig::from_json(j);
}

RunConfig resolve(const CLI::App* sub, const Flags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : load_config_file(f.config);
  c.command = sub->get_name();
  if (given(sub, "--out")) c.out_dir = f.out;
  if (given(sub, "--data")) c.data_root = f.data;
  if (given(sub, "--manifest")) c.manifest = f.manifest;
  if (given(sub, "--checkpoint")) c.checkpoint = f.checkpoint;
  if (given(sub, "--predictions")) c.predictions = f.predictions;
  if (given(sub, "--subset")) c.subset = f.subset;
  if (given(sub, "--method")) c.method = f.method;
  if (given(sub, "--metrics")) c.metrics = f.metrics;
  if (given(sub, "--svg")) c.svg = true;
  if (given(sub, "--seed")) {
    c.train.seed = f.seed;
    c.synth.seed = f.seed;
  }
  if (given(sub, "--deterministic")) c.train.deterministic = true;

  auto& t = c.train;
  if (given(sub, "--iterations")) t.iterations = f.iterations;
  if (given(sub, "--batch-size")) t.batch_size = f.batch_size;
  if (given(sub, "--labelled-batch")) t.labelled_batch = f.labelled_batch;
  if (given(sub, "--validate-every")) t.validate_every = f.validate_every;
  if (given(sub, "--projector-grid")) t.projector_grid = f.projector_grid;
  if (given(sub, "--eval-batch")) t.eval_batch = f.eval_batch;
  if (given(sub, "--lr")) t.learning_rate = f.learning_rate;
  if (given(sub, "--momentum")) t.momentum = f.momentum;
  if (given(sub, "--weight-decay")) t.weight_decay = f.weight_decay;
  if (given(sub, "--input-size")) t.net1.input_size = t.net2.input_size = f.input_size;
  if (given(sub, "--no-sup")) t.losses.sup = false;
  if (given(sub, "--no-semi")) t.losses.semi = false;
  if (given(sub, "--no-contra")) t.losses.contra = false;
  if (given(sub, "--no-augment")) t.augment = false;

  auto& s = c.synth;
  if (given(sub, "--cases")) s.cases = f.cases;
  if (given(sub, "--slices")) s.slices_per_case = f.slices;
  if (given(sub, "--image-size")) s.image_size = f.image_size;
  if (given(sub, "--labelled-fraction")) s.labelled_fraction = f.labelled_fraction;
  if (given(sub, "--validation-fraction")) s.validation_fraction = f.validation_fraction;
  if (given(sub, "--test-fraction")) s.test_fraction = f.test_fraction;
  if (given(sub, "--noise")) s.noise = f.noise;
  if (given(sub, "--classes")) {
    if (c.command == "synth") {
      s.classes = f.classes;
    } else {
      t.net1.classes = t.net2.classes = f.classes;
    }
  }
  return c;
}

fs::path require_out(const RunConfig& c) {
  if (c.out_dir.empty()) throw ConfigError(c.command + ": --out is required");
  return c.out_dir;
}

void write_snapshot(const RunConfig& c, const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw DataError("cannot create " + out.string() + ": " + ec.message());
  std::ofstream f(out / kResolvedConfig, std::ios::trunc);
  if (!f) throw DataError("cannot write " + (out / kResolvedConfig).string());
  f << c.to_json().dump(2) << '\n';
}

fs::path manifest_path(const RunConfig& c) {
  if (!c.manifest.empty()) return c.manifest;
  if (c.data_root.empty()) return {};
  const auto guess = fs::path(c.data_root) / "manifest.json";
  return fs::exists(guess) ? guess : fs::path{};
}

// Samples a command operates on: the chosen manifest subset, or every sample
// when no manifest is available.
std::vector<data::Sample> select_samples(const RunConfig& c, int classes) {
  if (c.data_root.empty()) throw ConfigError(c.command + ": --data is required");
  auto samples = data::load_dataset(c.data_root, classes);
  const auto manifest = manifest_path(c);
  const std::string subset = c.subset.empty() ? (manifest.empty() ? "all" : "test") : c.subset;
  if (subset == "all") return samples;
  if (manifest.empty()) throw ConfigError(c.command + ": --subset " + subset + " needs a manifest");
  auto parts = data::split(samples, data::SplitManifest::load(manifest));
  return subset == "test" ? parts.test : parts.validation;
}

int cmd_synth(const RunConfig& c, std::ostream& out) {
  c.synth.validate();
  const auto dir = require_out(c);
  data::synth_generate(c.synth, dir);
  write_snapshot(c, dir);
  out << (dir / "manifest.json").string() << '\n';
  return kSuccess;
}

int cmd_train(RunConfig c, std::ostream& out, std::ostream& err) {
  c.train.validate();
  if (c.data_root.empty()) throw ConfigError("train: --data is required");
  const auto dir = require_out(c);
  const auto manifest = manifest_path(c);
  if (manifest.empty()) throw ConfigError("train: no manifest given and none found in --data");
  c.manifest = manifest.string();
  write_snapshot(c, dir);

  train::TrainHooks hooks;
  hooks.on_step = [&err](const train::LogEntry& e) {
    if (!e.val_dice_f1) return;
    err << "iter " << e.iteration << "  " << loss::to_string(e.losses) << "  val_dice_f1 "
        << *e.val_dice_f1 << "  val_dice_f2 " << *e.val_dice_f2 << '\n';
  };
  const auto result = train::train(c.train, c.data_root, manifest, dir, hooks);
  out << result.best.to_json().dump(2) << '\n';
  return kSuccess;
}

Mask read_prediction(const fs::path& root, const data::Sample& s, int classes) {
  const auto path = root / s.case_id / ("slice_" + std::to_string(s.slice_index) + "_mask.png");
  if (!fs::exists(path)) throw DataError("missing prediction " + path.string());
  const auto raw = data::read_png_gray(path);
  Mask m(raw.height, raw.width);
  for (std::size_t i = 0; i < raw.data.size(); ++i) {
    if (raw.data[i] >= classes) throw DataError("prediction " + path.string() + " has class out of range");
    m.data[i] = static_cast<uint8_t>(raw.data[i]);
  }
  return m;
}

int cmd_eval(const RunConfig& c, std::ostream& out) {
  const auto dir = require_out(c);
  eval::MethodEvaluation result;
  if (!c.predictions.empty()) {
    const int classes = static_cast<int>(c.train.net1.classes);
    const auto samples = select_samples(c, classes);
    std::vector<Mask> preds;
    for (const auto& s : samples) preds.push_back(read_prediction(c.predictions, s, classes));
    write_snapshot(c, dir);
    result = {c.method.empty() ? "predictions" : c.method,
              eval::evaluate_predictions(preds, samples, classes)};
  } else {
    if (c.checkpoint.empty()) throw ConfigError("eval: --checkpoint or --predictions is required");
    auto loaded = nets::load_checkpoint(c.checkpoint);
    const auto samples = select_samples(c, static_cast<int>(loaded.network->spec().classes));
    write_snapshot(c, dir);
    train::apply_determinism(c.train.deterministic);
    result = {c.method.empty() ? std::string(nets::to_string(loaded.network->spec().variant))
                               : c.method,
              eval::evaluate_testset(*loaded.network, samples, c.train.eval_batch)};
  }
  eval::emit_report({result}, dir, c.svg);
  const auto& a = result.evaluation.aggregate;
  out << "method " << result.method << "  images " << result.evaluation.images.size()
      << "\ndice " << a.dice << "  accuracy " << a.accuracy << "  precision " << a.precision
      << "  sensitivity " << a.sensitivity << "  specificity " << a.specificity << "\nhd95 "
      << a.hd95 << "  asd " << a.asd << "  mean_iou " << result.evaluation.mean_iou << '\n';
  return kSuccess;
}

int cmd_predict(const RunConfig& c, std::ostream& out) {
  const auto dir = require_out(c);
  if (c.checkpoint.empty()) throw ConfigError("predict: --checkpoint is required");
  auto loaded = nets::load_checkpoint(c.checkpoint);
  const auto samples = select_samples(c, static_cast<int>(loaded.network->spec().classes));
  write_snapshot(c, dir);
  train::apply_determinism(c.train.deterministic);
  const auto masks = eval::predict_masks(*loaded.network, samples, c.train.eval_batch);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto case_dir = dir / samples[i].case_id;
    fs::create_directories(case_dir);
    data::write_png_gray8(case_dir / ("slice_" + std::to_string(samples[i].slice_index) + "_mask.png"),
                          masks[i]);
  }
  out << "wrote " << masks.size() << " masks to " << dir.string() << '\n';
  return kSuccess;
}

int cmd_report(const RunConfig& c, std::ostream& out) {
  const auto dir = require_out(c);
  if (c.metrics.empty()) throw ConfigError("report: at least one --metrics file is required");
  std::vector<eval::MethodEvaluation> methods;
  for (const auto& path : c.metrics) {
    for (auto& m : eval::read_metrics_csv(path)) methods.push_back(std::move(m));
  }
  write_snapshot(c, dir);
  eval::emit_report(methods, dir, c.svg);
  out << "report for " << methods.size() << " method(s) written to " << dir.string() << '\n';
  return kSuccess;
}

}  // namespace

nlohmann::json RunConfig::to_json() const {
  return {{"command", command},     {"data_root", data_root},     {"manifest", manifest},
          {"out_dir", out_dir},     {"checkpoint", checkpoint},   {"predictions", predictions},
          {"subset", subset},       {"method", method},           {"metrics", metrics},
          {"svg", svg},             {"train", train.to_json()},   {"synth", synth_to_json(synth)}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {"command", "data_root", "manifest", "out_dir",
                                              "checkpoint", "predictions", "subset", "method",
                                              "metrics", "svg", "train", "synth"};
  if (!j.is_object()) throw ConfigError("run configuration must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError("run configuration: unknown key '" + key + "'");
  }
  RunConfig c;
  try {
    auto read = [&](const char* key, auto& dst) {
      if (j.contains(key)) dst = j.at(key).get<std::decay_t<decltype(dst)>>();
    };
    read("command", c.command);
    read("data_root", c.data_root);
    read("manifest", c.manifest);
    read("out_dir", c.out_dir);
    read("checkpoint", c.checkpoint);
    read("predictions", c.predictions);
    read("subset", c.subset);
    read("method", c.method);
    read("metrics", c.metrics);
    read("svg", c.svg);
    if (j.contains("train")) c.train = train::TrainConfig::from_json(j.at("train"));
    if (j.contains("synth")) c.synth = synth_from_json(j.at("synth"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run configuration: ") + e.what());
  }
  if (!c.subset.empty() && c.subset != "test" && c.subset != "validation" && c.subset != "all") {
    throw ConfigError("run configuration: subset must be test, validation or all");
  }
  return c;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semi-supervised segmentation with a Mamba UNet and a CNN UNet"};
  app.name("semamba");
  app.require_subcommand(1);
  Flags f;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic labelled dataset");
  add_shared(synth, f);
  synth->add_option("--cases", f.cases, "Number of cases");
  synth->add_option("--slices", f.slices, "Slices per case");
  synth->add_option("--classes", f.classes, "2 or 4");
  synth->add_option("--image-size", f.image_size, "Side length in pixels");
  synth->add_option("--labelled-fraction", f.labelled_fraction);
  synth->add_option("--validation-fraction", f.validation_fraction);
  synth->add_option("--test-fraction", f.test_fraction);
  synth->add_option("--noise", f.noise, "Std-dev of additive intensity noise");

  auto* train_cmd = app.add_subcommand("train", "Train both networks semi-supervised");
  add_shared(train_cmd, f);
  add_data(train_cmd, f);
  train_cmd->add_option("--iterations", f.iterations);
  train_cmd->add_option("--batch-size", f.batch_size);
  train_cmd->add_option("--labelled-batch", f.labelled_batch, "Labelled samples per batch");
  train_cmd->add_option("--lr", f.learning_rate, "Learning rate");
  train_cmd->add_option("--momentum", f.momentum);
  train_cmd->add_option("--weight-decay", f.weight_decay);
  train_cmd->add_option("--validate-every", f.validate_every);
  train_cmd->add_option("--input-size", f.input_size, "Network input side length");
  train_cmd->add_option("--projector-grid", f.projector_grid);
  train_cmd->add_option("--eval-batch", f.eval_batch);
  train_cmd->add_option("--classes", f.classes);
  train_cmd->add_flag("--no-sup", "Disable the supervised terms");
  train_cmd->add_flag("--no-semi", "Disable cross pseudo supervision");
  train_cmd->add_flag("--no-contra", "Disable the contrastive term");
  train_cmd->add_flag("--no-augment", "Disable rotation/flip augmentation");

  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint or a predictions directory");
  add_shared(eval_cmd, f);
  add_data(eval_cmd, f);
  add_selection(eval_cmd, f);
  eval_cmd->add_option("--checkpoint", f.checkpoint);
  eval_cmd->add_option("--predictions", f.predictions,
                       "Directory with <case>/slice_<k>_mask.png predictions");
  eval_cmd->add_option("--method", f.method, "Method name used in the report");
  eval_cmd->add_option("--classes", f.classes, "Class count for --predictions");
  eval_cmd->add_option("--eval-batch", f.eval_batch);
  eval_cmd->add_flag("--svg", "Also render SVG plots");

  auto* predict = app.add_subcommand("predict", "Write predicted masks as PNG files");
  add_shared(predict, f);
  add_data(predict, f);
  add_selection(predict, f);
  predict->add_option("--checkpoint", f.checkpoint);
  predict->add_option("--eval-batch", f.eval_batch);

  auto* report = app.add_subcommand("report", "Build histogram and box-plot data from metrics files");
  add_shared(report, f);
  report->add_option("--metrics", f.metrics, "metrics.csv files written by eval");
  report->add_flag("--svg", "Also render SVG plots");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kConfigError;
  }

  try {
    for (auto* sub : app.get_subcommands()) {
      const auto config = resolve(sub, f);
      const auto& name = sub->get_name();
      if (name == "synth") return cmd_synth(config, out);
      if (name == "train") return cmd_train(config, out, err);
      if (name == "eval") return cmd_eval(config, out);
      if (name == "predict") return cmd_predict(config, out);
      if (name == "report") return cmd_report(config, out);
    }
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"semamba"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace semamba::cli
