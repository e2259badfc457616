// SPDX-License-Identifier: Apache-2.0
// viptt: command line front end for preprocessing, training and evaluation.
#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "viptt/checkpoint.hpp"
#include "viptt/dataset.hpp"
#include "viptt/error.hpp"
#include "viptt/metrics.hpp"
#include "viptt/model.hpp"
#include "viptt/preprocess.hpp"
#include "viptt/synthetic.hpp"
#include "viptt/train.hpp"
#include "viptt/volume_io.hpp"

namespace fs = std::filesystem;

namespace {

void log_line(const std::string& msg) { std::cerr << "viptt: " << msg << '\n'; }

std::string join(const std::vector<double>& v) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << ']';
  return os.str();
}

std::string shape_text(std::size_t d, std::size_t h, std::size_t w, std::size_t k) {
  return "(" + std::to_string(d) + ", " + std::to_string(h) + ", " + std::to_string(w) + ") K=" + std::to_string(k);
}

// Flat `key=value` file turned into `--key=value` arguments. They are placed
// before the command line flags so that explicit flags win.
std::vector<std::string> config_file_args(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw viptt::Error(viptt::ErrorCode::IoFailure, "cannot read config " + path.string());
  std::vector<std::string> args;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw viptt::Error(viptt::ErrorCode::BadConfig,
                         path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    if (key.empty() || key == "config") {
      throw viptt::Error(viptt::ErrorCode::BadConfig, path.string() + ":" + std::to_string(line_no) + ": bad key");
    }
    args.push_back("--" + key + "=" + trim(line.substr(eq + 1)));
  }
  return args;
}

std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::optional<fs::path> cfg;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) cfg = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) cfg = args[i].substr(9);
  }
  if (!cfg || args.empty()) return args;
  auto extra = config_file_args(*cfg);
  args.insert(args.begin() + 1, extra.begin(), extra.end());
  return args;
}

std::size_t worker_count(std::size_t jobs) {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("VIPTT_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) n = std::min(n, static_cast<std::size_t>(v));
  }
  return std::max<std::size_t>(1, std::min(n, jobs));
}

struct CommonOptions {
  std::uint64_t seed = 0;
  std::string config;
};

struct ModelOptions {
  std::string extractor = "tiny";
  std::size_t feature_dim = viptt::ModelConfig{}.feature_dim;
  std::size_t lstm_units = viptt::ModelConfig{}.lstm_units;
  std::size_t dense_units = viptt::ModelConfig{}.dense_units;
};

struct TrainOptions {
  viptt::TrainConfig cfg;
  double train_fraction = 0.8;
  std::string val_manifest;
  std::string history;
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--seed", o.seed, "Seed for splits, initialization and batch order");
  app->add_option("--config", o.config, "Flat key=value file; explicit flags override it");
}

void add_model(CLI::App* app, ModelOptions& o) {
  app->add_option("--extractor", o.extractor, "Per-frame feature extractor")
      ->check(CLI::IsMember({"tiny", "vgg16"}));
  app->add_option("--feature-dim", o.feature_dim, "Extractor output width (tiny)");
  app->add_option("--lstm-units", o.lstm_units, "LSTM hidden size");
  app->add_option("--dense-units", o.dense_units, "Hidden dense layer width");
}

void add_train(CLI::App* app, TrainOptions& o) {
  app->add_option("--lr", o.cfg.lr_init, "Initial learning rate");
  app->add_option("--batch-size", o.cfg.batch_size, "Mini-batch size");
  app->add_option("--max-epochs", o.cfg.max_epochs, "Epoch budget");
  app->add_option("--plateau-factor", o.cfg.plateau_factor, "Learning rate multiplier on plateau");
  app->add_option("--plateau-patience", o.cfg.plateau_patience, "Stale epochs before a learning rate cut");
  app->add_option("--early-stop-patience", o.cfg.early_stop_patience, "Stale epochs before stopping");
  app->add_option("--min-delta", o.cfg.min_delta, "Smallest validation loss decrease that counts");
  app->add_option("--train-fraction", o.train_fraction, "Per-class share of samples used for training");
  app->add_option("--val-manifest", o.val_manifest, "Validate on this manifest and train on all of --manifest");
  app->add_option("--history", o.history, "History CSV path (default: <out>.history.csv)");
}

void log_resolved(const CLI::App* app) {
  std::istringstream lines(app->config_to_str(true, false));
  std::string line;
  log_line("resolved config for " + app->get_name() + ":");
  while (std::getline(lines, line)) log_line("  " + line);
}

viptt::ModelConfig model_config_for(const ModelOptions& o, const viptt::Volume& sample, std::size_t k) {
  viptt::ModelConfig cfg;
  cfg.depth = sample.depth;
  cfg.height = sample.height;
  cfg.width = sample.width;
  cfg.extractor = viptt::parse_extractor_kind(o.extractor);
  cfg.feature_dim = o.feature_dim;
  cfg.lstm_units = o.lstm_units;
  cfg.dense_units = o.dense_units;
  cfg.num_classes = k;
  cfg.validate();
  return cfg;
}

void require_compatible(const viptt::ModelConfig& cfg, const viptt::Volume& sample, std::size_t k) {
  if (cfg.depth == sample.depth && cfg.height == sample.height && cfg.width == sample.width &&
      cfg.num_classes == k) {
    return;
  }
  throw viptt::Error(viptt::ErrorCode::ConfigMismatch,
                     "checkpoint expects " + shape_text(cfg.depth, cfg.height, cfg.width, cfg.num_classes) +
                         " but data is " + shape_text(sample.depth, sample.height, sample.width, k));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw viptt::Error(viptt::ErrorCode::IoFailure, "cannot write " + path.string());
}

void write_reports(const std::string& prefix, const viptt::ConfusionMatrix& cm) {
  write_text(prefix + ".txt", viptt::format_report_text(cm));
  write_text(prefix + ".csv", viptt::format_report_csv(cm));
  log_line("wrote " + prefix + ".txt and " + prefix + ".csv");
}

viptt::TrainHooks logging_hooks() {
  viptt::TrainHooks hooks;
  hooks.on_epoch = [](const viptt::EpochRecord& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "epoch %zu train_loss=%.6f val_loss=%.6f lr=%g val_kappa=%.4f", r.epoch,
                  r.train_loss, r.val_loss, r.lr, r.val_kappa);
    log_line(buf);
  };
  return hooks;
}

// Stratified split of `ds` unless a separate validation manifest is given.
std::pair<viptt::Dataset, viptt::Dataset> train_val(const viptt::Dataset& ds, const TrainOptions& opts) {
  if (opts.val_manifest.empty()) return viptt::stratified_split(ds, opts.train_fraction, opts.cfg.seed);
  return {ds, viptt::load_manifest(opts.val_manifest, ds.num_classes)};
}

viptt::TrainResult run_training(viptt::Model model, const viptt::Dataset& ds, const TrainOptions& opts,
                                const std::string& out) {
  const auto [train_ds, val_ds] = train_val(ds, opts);
  log_line("split: " + std::to_string(train_ds.size()) + " train, " + std::to_string(val_ds.size()) + " validation");
  auto result = viptt::train(std::move(model), viptt::preload(train_ds), viptt::preload(val_ds), opts.cfg,
                             logging_hooks());
  viptt::save_checkpoint(result.model, out);
  const std::string history = opts.history.empty() ? out + ".history.csv" : opts.history;
  viptt::write_history_csv(history, result.history);
  log_line("best epoch " + std::to_string(result.history.best_epoch) + "; wrote " + out + " and " + history);
  return result;
}

// ---- subcommands ----

struct PreprocessArgs {
  std::string manifest;
  std::string out_dir;
  std::size_t depth = 70;
  std::size_t size = 224;
  std::string order = "linear";
  double hu_lo = viptt::HuWindow{}.lo;
  double hu_hi = viptt::HuWindow{}.hi;
};

int cmd_preprocess(const PreprocessArgs& a) {
  const auto ds = viptt::load_manifest(a.manifest);
  fs::create_directories(a.out_dir);
  viptt::ResizeSpec spec{a.depth, a.size, a.size, a.order == "cubic" ? viptt::SplineOrder::Cubic
                                                                     : viptt::SplineOrder::Linear};
  const viptt::HuWindow window{a.hu_lo, a.hu_hi};
  std::vector<std::string> errors(ds.size());
  std::vector<fs::path> outputs(ds.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < ds.size(); i = next++) {
      const auto& rec = ds.records[i];
      try {
        viptt::Volume v = viptt::read_volume_file(rec.data_path);
        if (v.domain == viptt::ValueDomain::Hounsfield) v = viptt::hu_normalize(v, window);
        v = viptt::siz_resize(v, spec);
        char name[32];
        std::snprintf(name, sizeof name, "%05zu_", i);
        const fs::path out = fs::path(a.out_dir) / (name + rec.data_path.stem().string() + ".vpt");
        viptt::write_tensor(out, v.to_tensor());
        outputs[i] = out;
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const std::size_t workers = worker_count(ds.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  viptt::Dataset out_ds;
  out_ds.num_classes = ds.num_classes;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!errors[i].empty()) {
      ++failed;
      log_line("error: row " + std::to_string(i + 1) + " (" + ds.records[i].data_path.string() + "): " + errors[i]);
      continue;
    }
    out_ds.records.push_back({outputs[i], ds.records[i].label, nullptr});
  }
  const fs::path manifest = fs::path(a.out_dir) / "manifest.csv";
  viptt::write_manifest(manifest, out_ds);
  log_line("preprocessed " + std::to_string(out_ds.size()) + " of " + std::to_string(ds.size()) + " volumes to " +
           shape_text(a.depth, a.size, a.size, ds.num_classes) + "; manifest " + manifest.string());
  return failed == 0 ? 0 : 1;
}

struct PretrainArgs {
  std::string manifest;
  std::string out;
  std::size_t classes = 10;
  ModelOptions model;
  TrainOptions train;
};

int cmd_pretrain(PretrainArgs& a, const CommonOptions& c) {
  const auto ds = viptt::load_manifest(a.manifest, a.classes);
  const auto first = viptt::load_sample(ds.records.at(0));
  auto model = viptt::Model::build(model_config_for(a.model, first, a.classes), c.seed);
  model.set_trainable(viptt::Component::Extractor, false);
  a.train.cfg.seed = c.seed;
  a.train.cfg.augment.reset();
  a.train.cfg.class_weights.clear();
  run_training(std::move(model), ds, a.train, a.out);
  return 0;
}

struct FinetuneArgs {
  std::string manifest;
  std::string init;
  bool no_init = false;
  std::string out;
  std::string report;
  std::size_t classes = 5;
  bool class_weights = false;
  bool augment = false;
  ModelOptions model;
  TrainOptions train;
};

int cmd_finetune(FinetuneArgs& a, const CommonOptions& c) {
  const auto ds = viptt::load_manifest(a.manifest, a.classes);
  const auto first = viptt::load_sample(ds.records.at(0));
  std::optional<viptt::Model> model;
  if (a.no_init) {
    model.emplace(viptt::Model::build(model_config_for(a.model, first, a.classes), c.seed));
  } else {
    if (a.init.empty()) throw viptt::Error(viptt::ErrorCode::BadConfig, "--init is required unless --no-init is set");
    auto loaded = viptt::load_checkpoint(a.init);
    const auto& cfg = loaded.config();
    require_compatible(cfg, first, cfg.num_classes);
    model.emplace(viptt::replace_head(loaded, a.classes, c.seed));
  }
  for (auto comp : {viptt::Component::ChannelMapper, viptt::Component::Extractor, viptt::Component::Lstm,
                    viptt::Component::Head}) {
    model->set_trainable(comp, true);
  }
  a.train.cfg.seed = c.seed;
  if (a.augment) a.train.cfg.augment = viptt::AugmentSpec{};
  if (a.class_weights) {
    const auto [train_ds, val_ds] = train_val(ds, a.train);
    const auto labels = train_ds.labels();
    a.train.cfg.class_weights = viptt::class_weights(labels, a.classes);
    log_line("class weights " + join(a.train.cfg.class_weights));
  }
  auto result = run_training(std::move(*model), ds, a.train, a.out);
  const auto [train_ds, val_ds] = train_val(ds, a.train);
  const auto eval = viptt::evaluate(result.model, viptt::preload(val_ds));
  write_reports(a.report.empty() ? a.out + ".report" : a.report, eval.confusion);
  return 0;
}

struct EvaluateArgs {
  std::string manifest;
  std::string checkpoint;
  std::string report;
  std::optional<std::size_t> classes;
};

int cmd_evaluate(const EvaluateArgs& a) {
  auto model = viptt::load_checkpoint(a.checkpoint);
  const auto ds = viptt::load_manifest(a.manifest, a.classes);
  if (ds.empty()) throw viptt::Error(viptt::ErrorCode::EmptyDataset, a.manifest + " lists no samples");
  require_compatible(model.config(), viptt::load_sample(ds.records.front()), ds.num_classes);
  const auto eval = viptt::evaluate(model, viptt::preload(ds));
  write_reports(a.report, eval.confusion);
  const auto kappa = viptt::cohen_kappa(eval.confusion);
  char buf[96];
  std::snprintf(buf, sizeof buf, "accuracy=%.6f kappa=%.6f loss=%.6f", viptt::accuracy(eval.confusion), kappa.kappa,
                eval.loss);
  std::cout << buf << '\n';
  return 0;
}

struct PredictArgs {
  std::string input;
  std::string checkpoint;
};

int cmd_predict(const PredictArgs& a) {
  auto model = viptt::load_checkpoint(a.checkpoint);
  const auto& cfg = model.config();
  const auto vol = viptt::read_volume_file(a.input);
  require_compatible(cfg, vol, cfg.num_classes);
  viptt::Tensor input({1, vol.depth, vol.height, vol.width}, vol.data);
  const auto probs = model.forward(input, false);
  const int best = viptt::argmax_row(probs, 0);
  std::ostringstream os;
  os.precision(17);
  os << "class=" << viptt::class_name(static_cast<std::size_t>(best), cfg.num_classes) << " probs=[";
  for (std::size_t k = 0; k < cfg.num_classes; ++k) os << (k ? "," : "") << probs.at({0, k});
  os << ']';
  std::cout << os.str() << '\n';
  return 0;
}

struct SyntheticArgs {
  std::string out_dir;
  std::string family = "blob";
  std::string counts = "10,10,10";
  std::size_t depth = 8;
  std::size_t size = 32;
  double noise = viptt::SyntheticSpec{}.noise_std;
};

std::vector<std::size_t> parse_counts(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long v = std::stol(item, &used);
      if (used != item.size() || v <= 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw viptt::Error(viptt::ErrorCode::BadConfig, "bad class count '" + item + "' in --counts");
    }
  }
  if (out.empty()) throw viptt::Error(viptt::ErrorCode::BadConfig, "--counts lists no classes");
  return out;
}

int cmd_gen_synthetic(const SyntheticArgs& a, const CommonOptions& c) {
  viptt::SyntheticSpec spec;
  spec.samples_per_class = parse_counts(a.counts);
  spec.depth = a.depth;
  spec.height = a.size;
  spec.width = a.size;
  spec.family = a.family == "lesion" ? viptt::SignalFamily::Lesion : viptt::SignalFamily::MovingBlob;
  spec.noise_std = a.noise;
  fs::create_directories(a.out_dir);
  const auto ds = viptt::gen_synthetic_dataset(spec, c.seed, a.out_dir);
  log_line("wrote " + std::to_string(ds.size()) + " samples and manifest.csv to " + a.out_dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ViPTT-Net: CNN-LSTM classification of volumetric scans with transfer learning"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  CommonOptions common;

  PreprocessArgs pre;
  auto* sp = app.add_subcommand("preprocess", "Normalize and resize every volume in a manifest");
  add_common(sp, common);
  sp->add_option("--manifest", pre.manifest, "Input manifest (path,label)")->required();
  sp->add_option("--out-dir", pre.out_dir, "Output directory for tensors and manifest.csv")->required();
  sp->add_option("--depth", pre.depth, "Target slice count");
  sp->add_option("--size", pre.size, "Target height and width");
  sp->add_option("--order", pre.order, "Spline order")->check(CLI::IsMember({"linear", "cubic"}));
  sp->add_option("--hu-lo", pre.hu_lo, "Lower Hounsfield clip");
  sp->add_option("--hu-hi", pre.hu_hi, "Upper Hounsfield clip");

  PretrainArgs pt;
  auto* spt = app.add_subcommand("pretrain", "Train on the source task with a frozen extractor");
  add_common(spt, common);
  spt->add_option("--manifest", pt.manifest, "Preprocessed manifest")->required();
  spt->add_option("--out", pt.out, "Checkpoint to write")->required();
  spt->add_option("--classes", pt.classes, "Number of source classes");
  add_model(spt, pt.model);
  add_train(spt, pt.train);

  FinetuneArgs ft;
  auto* sft = app.add_subcommand("finetune", "Swap the head and train every layer on the target task");
  add_common(sft, common);
  sft->add_option("--manifest", ft.manifest, "Preprocessed manifest")->required();
  sft->add_option("--init", ft.init, "Pretrained checkpoint");
  sft->add_flag("--no-init", ft.no_init, "Train from scratch instead of loading --init");
  sft->add_option("--out", ft.out, "Checkpoint to write")->required();
  sft->add_option("--report", ft.report, "Report prefix (default: <out>.report)");
  sft->add_option("--classes", ft.classes, "Number of target classes");
  sft->add_flag("--class-weights", ft.class_weights, "Weight the loss by inverse class frequency");
  sft->add_flag("--augment", ft.augment, "Random axial rotation augmentation");
  add_model(sft, ft.model);
  add_train(sft, ft.train);

  EvaluateArgs ev;
  auto* sev = app.add_subcommand("evaluate", "Score a checkpoint on a manifest");
  add_common(sev, common);
  sev->add_option("--manifest", ev.manifest, "Preprocessed manifest")->required();
  sev->add_option("--checkpoint", ev.checkpoint, "Checkpoint to evaluate")->required();
  sev->add_option("--report", ev.report, "Report prefix; writes <prefix>.txt and <prefix>.csv")->required();
  sev->add_option("--classes", ev.classes, "Class count (default: max label + 1)");

  PredictArgs pr;
  auto* spr = app.add_subcommand("predict", "Classify one preprocessed volume");
  add_common(spr, common);
  spr->add_option("--input", pr.input, "Volume file (VPT1 or NIfTI)")->required();
  spr->add_option("--checkpoint", pr.checkpoint, "Checkpoint to use")->required();

  SyntheticArgs syn;
  auto* ssy = app.add_subcommand("gen-synthetic", "Write a synthetic frame-stack dataset");
  add_common(ssy, common);
  ssy->add_option("--out-dir", syn.out_dir, "Output directory")->required();
  ssy->add_option("--family", syn.family, "Signal family")->check(CLI::IsMember({"blob", "lesion"}));
  ssy->add_option("--counts", syn.counts, "Samples per class, comma separated");
  ssy->add_option("--depth", syn.depth, "Frames per sample");
  ssy->add_option("--size", syn.size, "Frame height and width");
  ssy->add_option("--noise", syn.noise, "Gaussian noise standard deviation");

  try {
    auto args = expand_config(argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    log_line(std::string("error: ") + e.what());
    return 1;
  }

  try {
    for (auto* sub : app.get_subcommands()) log_resolved(sub);
    if (sp->parsed()) return cmd_preprocess(pre);
    if (spt->parsed()) return cmd_pretrain(pt, common);
    if (sft->parsed()) return cmd_finetune(ft, common);
    if (sev->parsed()) return cmd_evaluate(ev);
    if (spr->parsed()) return cmd_predict(pr);
    if (ssy->parsed()) return cmd_gen_synthetic(syn, common);
  } catch (const std::exception& e) {
    log_line(std::string("error: ") + e.what());
    return 1;
  }
  return 0;
}
