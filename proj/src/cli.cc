// Copyright (c) 2026 The dfmamba Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dfm/cli.h"

#include <Eigen/Core>
#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <span>
#include <sstream>

#include "CLI11.hpp"
#include "dfm/dataset.h"
#include "dfm/error.h"
#include "dfm/grad_suite.h"
#include "dfm/tape.h"
#include "dfm/trainer.h"
#include "json.hpp"

namespace dfm {

namespace {

using Json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

constexpr const char* kThreadsEnv = "DFM_NUM_THREADS";

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Raised for command-line mistakes that CLI11 cannot see (bad values that
// parse fine as strings).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

// Report shared by every subcommand.
struct RunReport {
  std::string command;
  std::uint64_t seed = 0;
  Json config = Json::object();
  Json timings = Json::object();
  Json metrics = Json::object();
  Json flags = Json::object();
  bool ok = true;

  Json to_json() const {
    Json j;
    j["tool"] = "dfmamba";
    j["version"] = kToolVersion;
    j["command"] = command;
    j["seed"] = seed;
    j["config"] = config;
    j["timings"] = timings;
    j["metrics"] = metrics;
    j["flags"] = flags;
    j["ok"] = ok;
    return j;
  }
  void write(const std::string& path) const {
    if (path.empty()) return;
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream f(p);
    if (!f) throw std::runtime_error("cannot write report " + path);
    f << std::setw(2) << to_json() << "\n";
  }
};

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// Options shared by the model-building subcommands.
struct ModelFlags {
  std::string arch = "CCDGDG";
  std::string preset = "tiny";
  int anchors = 9;
  std::uint64_t seed = 0;

  void add(CLI::App* app) {
    app->add_option("--arch", arch, "six stage kinds over {C, D, G}")->capture_default_str();
    app->add_option("--preset", preset, "width/depth preset")
        ->check(CLI::IsMember({"tiny", "default"}))
        ->capture_default_str();
    app->add_option("--anchors", anchors, "deformable anchors per scan position")
        ->check(CLI::IsMember({1, 9, 25}))
        ->capture_default_str();
    app->add_option("--seed", seed, "initialization seed")->capture_default_str();
  }
  ArchSpec spec() const {
    ArchSpec s;
    try {
      s = parse_arch(arch, preset);
    } catch (const ArchParseError& e) {
      throw UsageError(std::string("--arch: ") + e.what());
    }
    s.mixer.anchors = anchor_variant_from_count(anchors);
    return s;
  }
  Json to_json() const {
    return {{"arch", arch}, {"preset", preset}, {"anchors", anchors}, {"seed", seed}};
  }
};

// ---- gen -------------------------------------------------------------------

struct GenFlags {
  std::int64_t count = 500;
  std::uint64_t seed = 0;
  std::int64_t size = 128;
  std::string out;
  std::string report;
};

int cmd_gen(const GenFlags& f, std::ostream& out) {
  if (f.count < 1) throw UsageError("--count must be positive");
  const auto t0 = Clock::now();
  SynthConfig cfg;
  cfg.image_size = f.size;
  const auto samples = generate_dataset(f.count, f.seed, cfg);
  write_dataset(samples, f.out);
  RunReport r;
  r.command = "gen";
  r.seed = f.seed;
  r.config = {{"count", f.count}, {"seed", f.seed}, {"size", f.size}, {"out", f.out}};
  r.timings["total_seconds"] = seconds_since(t0);
  r.metrics["samples"] = f.count;
  r.write(f.report.empty() ? (std::filesystem::path(f.out) / "gen_report.json").string()
                           : f.report);
  out << "command=gen count=" << f.count << " seed=" << f.seed << " size=" << f.size
      << " out=" << f.out << "\n";
  return kExitOk;
}

// ---- train -----------------------------------------------------------------

struct TrainFlags {
  ModelFlags model;
  std::string data;
  std::string out;
  std::string resume;
  std::string report;
  int epochs = 20;
  double lr = 5e-4;
  double weight_decay = 1e-4;
  int batch = 8;
  std::int64_t train_count = 400;
  std::int64_t head_width = 32;
  bool freeze_offsets = false;
};

Json history_json(const std::vector<EpochRecord>& history) {
  Json h = Json::array();
  for (const auto& e : history)
    h.push_back({{"epoch", e.epoch},
                 {"train_loss", e.train_loss},
                 {"heldout_mpjpe", e.heldout_mpjpe},
                 {"heldout_epe", e.heldout_epe},
                 {"heldout_auc", e.heldout_auc}});
  return h;
}

int cmd_train(const TrainFlags& f, std::ostream& out) {
  TrainConfig cfg;
  cfg.arch = f.model.arch;
  cfg.preset = f.model.preset;
  cfg.anchors = f.model.anchors;
  cfg.seed = f.model.seed;
  cfg.epochs = f.epochs;
  cfg.lr = f.lr;
  cfg.weight_decay = f.weight_decay;
  cfg.batch_size = f.batch;
  cfg.train_count = f.train_count;
  cfg.head_width = f.head_width;
  cfg.freeze_offsets = f.freeze_offsets;
  f.model.spec();  // reports a malformed --arch as a usage error
  try {
    cfg.validate();
  } catch (const ContractViolation& e) {
    throw UsageError(e.what());
  }

  const auto t0 = Clock::now();
  const auto samples = read_dataset(f.data);
  const std::filesystem::path dir(f.out);
  std::filesystem::create_directories(dir);
  std::ofstream log(dir / "train_log.txt", std::ios::app);

  TrainOptions opts;
  opts.best_path = (dir / "best.ckpt").string();
  if (!f.resume.empty()) opts.resume = load_checkpoint(f.resume);
  opts.on_epoch = [&](const EpochRecord& e) {
    std::ostringstream line;
    line << "epoch=" << e.epoch << " train_loss=" << fmt(e.train_loss)
         << " heldout_mpjpe=" << fmt(e.heldout_mpjpe) << " heldout_epe=" << fmt(e.heldout_epe)
         << " heldout_auc=" << fmt(e.heldout_auc) << " seconds=" << fmt(seconds_since(t0));
    out << line.str() << "\n" << std::flush;
    log << line.str() << "\n" << std::flush;
  };
  const TrainResult result = train(cfg, samples, opts);
  save_checkpoint(result.last, dir / "last.ckpt");

  RunReport r;
  r.command = "train";
  r.seed = cfg.seed;
  r.config = Json::parse(cfg.to_json());
  r.config["data"] = f.data;
  r.timings["total_seconds"] = seconds_since(t0);
  r.metrics["untrained_mpjpe"] = result.untrained_mpjpe;
  r.metrics["best_epoch"] = result.best_epoch;
  r.metrics["best_mpjpe"] = result.best_mpjpe;
  r.metrics["final_mpjpe"] = result.history.empty() ? result.untrained_mpjpe
                                                    : result.history.back().heldout_mpjpe;
  r.metrics["history"] = history_json(result.history);
  r.flags["halved_mpjpe"] = r.metrics["final_mpjpe"].get<double>() < 0.5 * result.untrained_mpjpe;
  r.write(f.report.empty() ? (dir / "train_report.json").string() : f.report);
  out << "command=train untrained_mpjpe=" << fmt(result.untrained_mpjpe)
      << " best_epoch=" << result.best_epoch << " best_mpjpe=" << fmt(result.best_mpjpe)
      << " checkpoint=" << opts.best_path << "\n";
  return kExitOk;
}

// ---- eval ------------------------------------------------------------------

struct EvalFlags {
  std::string ckpt;
  std::string data;
  std::string split = "heldout";
  std::string report;
};

int cmd_eval(const EvalFlags& f, std::ostream& out) {
  const auto t0 = Clock::now();
  const Checkpoint ckpt = load_checkpoint(f.ckpt);
  const TrainConfig cfg = TrainConfig::from_json(ckpt.config_text);
  PoseModel model(cfg);
  AdamState adam;
  restore(ckpt, model, adam);
  const auto samples = read_dataset(f.data);
  std::span<const SkeletonSample> subset(samples);
  if (f.split == "heldout") {
    if (cfg.train_count >= static_cast<std::int64_t>(samples.size()))
      throw UsageError("dataset has no samples beyond the training split of " +
                       std::to_string(cfg.train_count));
    subset = subset.subspan(static_cast<std::size_t>(cfg.train_count));
  }
  const EvalMetrics m = evaluate(model, subset);
  const bool reproduces = std::abs(m.mpjpe - ckpt.heldout_mpjpe) <= 1e-9;

  RunReport r;
  r.command = "eval";
  r.seed = cfg.seed;
  r.config = Json::parse(cfg.to_json());
  r.config["checkpoint"] = f.ckpt;
  r.config["data"] = f.data;
  r.config["split"] = f.split;
  r.timings["total_seconds"] = seconds_since(t0);
  r.metrics = {{"samples", subset.size()},  {"mpjpe", m.mpjpe},
               {"epe", m.epe},              {"auc", m.auc},
               {"checkpoint_epoch", ckpt.epoch}, {"checkpoint_mpjpe", ckpt.heldout_mpjpe}};
  r.flags["reproduces_checkpoint_mpjpe"] = reproduces;
  r.write(f.report);
  out << "command=eval samples=" << subset.size() << " mpjpe=" << fmt(m.mpjpe)
      << " epe=" << fmt(m.epe) << " auc=" << fmt(m.auc)
      << " checkpoint_mpjpe=" << fmt(ckpt.heldout_mpjpe)
      << " reproduces=" << (reproduces ? 1 : 0) << "\n";
  return kExitOk;
}

// ---- gradcheck -------------------------------------------------------------

struct GradFlags {
  ModelFlags model;
  double eps = 1e-5;
  double tolerance = 1e-4;
  std::string report;
};

int cmd_gradcheck(const GradFlags& f, std::ostream& out) {
  const auto t0 = Clock::now();
  const ArchSpec spec = f.model.spec();
  auto entries = run_op_grad_suite(f.model.seed, f.eps);
  auto blocks = run_block_grad_suite(spec, f.model.seed + 1, f.eps);
  entries.insert(entries.end(), blocks.begin(), blocks.end());

  RunReport r;
  r.command = "gradcheck";
  r.seed = f.model.seed;
  r.config = f.model.to_json();
  r.config["eps"] = f.eps;
  r.config["tolerance"] = f.tolerance;
  bool all_ok = true;
  for (const auto& e : entries) {
    const bool ok = e.result.max_rel_error < f.tolerance;
    all_ok &= ok;
    r.metrics[e.name] = {{"max_rel_error", e.result.max_rel_error},
                         {"coordinates", e.result.coordinates},
                         {"worst_param", e.result.worst_param}};
    r.flags[e.name] = ok;
    out << "case=" << e.name << " max_rel_error=" << e.result.max_rel_error
        << " coordinates=" << e.result.coordinates << " ok=" << (ok ? 1 : 0) << "\n";
  }
  r.ok = all_ok;
  r.timings["total_seconds"] = seconds_since(t0);
  r.write(f.report);
  out << "command=gradcheck cases=" << entries.size() << " all_ok=" << (all_ok ? 1 : 0)
      << " seconds=" << fmt(seconds_since(t0)) << "\n";
  return all_ok ? kExitOk : kExitFailure;
}

// ---- bench -----------------------------------------------------------------

struct BenchFlags {
  ModelFlags model;
  std::int64_t input = 256;
  int iters = 50;
  int warmup = 1;
  std::int64_t batch = 1;
  std::string report;
};

int cmd_bench(const BenchFlags& f, std::ostream& out) {
  if (f.iters < 1 || f.warmup < 0 || f.batch < 1) throw UsageError("--iters and --batch must be positive");
  if (f.input < 32 || f.input % 32 != 0) throw UsageError("--input must be a positive multiple of 32");
  const ArchSpec spec = f.model.spec();
  const auto t0 = Clock::now();
  Backbone model(spec, 3, f.model.seed);
  Rng rng(f.model.seed + 7);
  const Tensor image = rng.uniform_tensor({f.batch, 3, f.input, f.input}, 0.0, 1.0);
  NoGrad no_grad;
  for (int i = 0; i < f.warmup; ++i) model.forward_pyramid(image, Mode::kEval);
  const auto t1 = Clock::now();
  bool finite = true;
  for (int i = 0; i < f.iters; ++i) finite &= model.forward_pyramid(image, Mode::kEval).flat.all_finite();
  const double elapsed = seconds_since(t1);
  const double per_iter = elapsed / f.iters;
  const double throughput = static_cast<double>(f.batch) / per_iter;

  RunReport r;
  r.command = "bench";
  r.seed = f.model.seed;
  r.config = f.model.to_json();
  r.config["input"] = f.input;
  r.config["iters"] = f.iters;
  r.config["warmup"] = f.warmup;
  r.config["batch"] = f.batch;
  r.timings = {{"total_seconds", seconds_since(t0)}, {"timed_seconds", elapsed}};
  r.metrics = {{"ms_per_iter", 1e3 * per_iter},
               {"images_per_second", throughput},
               {"params", count_params(model)}};
  r.flags["finite_outputs"] = finite;
  r.ok = finite;
  r.write(f.report);
  out << "command=bench arch=" << spec.stage_kinds << " preset=" << f.model.preset
      << " input=" << f.input << " iters=" << f.iters << " ms_per_iter=" << fmt(1e3 * per_iter)
      << " images_per_second=" << fmt(throughput) << " params=" << count_params(model) << "\n";
  return finite ? kExitOk : kExitFailure;
}

// ---- inspect ---------------------------------------------------------------

struct InspectFlags {
  ModelFlags model;
  std::int64_t input = 256;
  std::string report;
};

int cmd_inspect(const InspectFlags& f, std::ostream& out) {
  if (f.input < 32 || f.input % 32 != 0) throw UsageError("--input must be a positive multiple of 32");
  const ArchSpec spec = f.model.spec();
  Backbone model(spec, 3, f.model.seed);
  const auto shapes = model.stage_shapes(f.input);
  const auto params = count_params(model);
  RunReport r;
  r.command = "inspect";
  r.seed = f.model.seed;
  r.config = f.model.to_json();
  r.config["input"] = f.input;
  out << spec.describe() << "\n";
  Json stages = Json::array();
  for (std::size_t s = 0; s < shapes.size(); ++s) {
    out << "stage=" << s + 1 << " kind=" << spec.stage_kinds[s]
        << " depth=" << spec.stage_depths[s] << " shape=" << shape_str(shapes[s]) << "\n";
    stages.push_back({{"stage", s + 1}, {"kind", std::string(1, spec.stage_kinds[s])},
                      {"shape", shapes[s]}});
  }
  out << "params=" << params << "\n";
  r.metrics = {{"params", params}, {"stages", stages}};
  r.write(f.report);
  return kExitOk;
}

// Rejects unknown --flags before CLI11 sees them so the message can name
// the nearest valid flag.
void check_flags(const CLI::App& app, const std::vector<std::string>& args) {
  if (args.empty()) return;
  const CLI::App* sub = nullptr;
  std::vector<std::string> sub_names;
  for (const auto* s : app.get_subcommands([](const CLI::App*) { return true; }))
    sub_names.push_back(s->get_name());
  std::size_t i = 0;
  for (; i < args.size(); ++i) {
    if (args[i].rfind("-", 0) == 0) continue;
    for (const auto* s : app.get_subcommands([](const CLI::App*) { return true; }))
      if (s->get_name() == args[i]) sub = s;
    if (!sub) {
      const auto hint = nearest(args[i], sub_names);
      throw UsageError("unknown subcommand '" + args[i] + "'" +
                       (hint.empty() ? "" : "; did you mean '" + hint + "'?"));
    }
    break;
  }
  if (!sub) return;
  std::vector<std::string> known{"--help"};
  for (const auto* opt : sub->get_options())
    for (const auto& name : opt->get_lnames()) known.push_back("--" + name);
  for (std::size_t j = i + 1; j < args.size(); ++j) {
    const auto& a = args[j];
    if (a.rfind("--", 0) != 0) continue;
    const auto flag = a.substr(0, a.find('='));
    if (std::find(known.begin(), known.end(), flag) != known.end()) continue;
    const auto hint = nearest(flag, known);
    throw UsageError("unknown flag '" + flag + "' for '" + sub->get_name() + "'" +
                     (hint.empty() ? "" : "; did you mean '" + hint + "'?"));
  }
}

// CLI11 only reads config files attached to the top-level app, so the
// subcommand `--config FILE` is expanded here: every key the command line
// does not already set becomes `--key value` (underscores may stand in for
// dashes, boolean keys become bare flags).
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  std::string file;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      file = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      file = args[i].substr(9);
    } else {
      out.push_back(args[i]);
    }
  }
  if (file.empty() || out.empty()) return out;
  if (!std::filesystem::exists(file)) throw UsageError("--config: no such file '" + file + "'");
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_file(file);
  } catch (const CLI::ParseError& e) {
    throw UsageError("--config: " + std::string(e.what()));
  }
  auto given = [&](const std::string& flag) {
    return std::any_of(out.begin(), out.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
  };
  const std::string& command = out.front();
  std::vector<std::string> extra;
  for (const auto& item : items) {
    if (!item.parents.empty() && item.parents != std::vector<std::string>{"default"} &&
        item.parents != std::vector<std::string>{command})
      continue;
    std::string flag = "--" + item.name;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (given(flag)) continue;
    if (item.inputs.size() == 1 && (item.inputs[0] == "true" || item.inputs[0] == "false")) {
      if (item.inputs[0] == "true") extra.push_back(flag);
      continue;
    }
    extra.push_back(flag);
    extra.insert(extra.end(), item.inputs.begin(), item.inputs.end());
  }
  out.insert(out.end(), extra.begin(), extra.end());
  return out;
}

void apply_thread_env() {
  const char* value = std::getenv(kThreadsEnv);
  if (!value || !*value) return;
  char* end = nullptr;
  const long n = std::strtol(value, &end, 10);
  if (*end != '\0' || n < 1)
    throw UsageError(std::string(kThreadsEnv) + " must be a positive integer, got '" + value +
                     "'");
  Eigen::setNbThreads(static_cast<int>(n));
}

}  // namespace

std::string nearest(const std::string& word, const std::vector<std::string>& candidates) {
  std::string best;
  std::size_t best_distance = 4;
  for (const auto& c : candidates) {
    const auto d = edit_distance(word, c);
    if (d < best_distance) {
      best_distance = d;
      best = c;
    }
  }
  return best;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"dfmamba: deformable state-space hand-pose toolkit", "dfmamba"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  GenFlags gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic hand dataset");
  gen_cmd->add_option("--count", gen.count, "number of samples")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "seed of the first sample")->capture_default_str();
  gen_cmd->add_option("--size", gen.size, "image side in pixels")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "output directory")->required();
  gen_cmd->add_option("--report", gen.report, "report path (default <out>/gen_report.json)");

  TrainFlags tr;
  auto* train_cmd = app.add_subcommand("train", "train backbone and head on a dataset");
  std::string config_file;
  const char* config_help = "TOML file with option defaults, e.g. arch = \"CCGGGG\"";
  train_cmd->add_option("--config", config_file, config_help);
  tr.model.add(train_cmd);
  train_cmd->add_option("--data", tr.data, "dataset directory")->required();
  train_cmd->add_option("--out", tr.out, "run directory for checkpoints and logs")->required();
  train_cmd->add_option("--epochs", tr.epochs)->capture_default_str();
  train_cmd->add_option("--lr", tr.lr)->capture_default_str();
  train_cmd->add_option("--weight-decay", tr.weight_decay)->capture_default_str();
  train_cmd->add_option("--batch", tr.batch)->capture_default_str();
  train_cmd->add_option("--train-count", tr.train_count, "leading samples used for training")
      ->capture_default_str();
  train_cmd->add_option("--head-width", tr.head_width)->capture_default_str();
  train_cmd->add_flag("--freeze-offsets", tr.freeze_offsets, "keep deformable offsets at zero");
  train_cmd->add_option("--resume", tr.resume, "checkpoint to continue from");
  train_cmd->add_option("--report", tr.report, "report path (default <out>/train_report.json)");

  EvalFlags ev;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--ckpt", ev.ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--data", ev.data, "dataset directory")->required();
  eval_cmd->add_option("--split", ev.split, "heldout or all")
      ->check(CLI::IsMember({"heldout", "all"}))
      ->capture_default_str();
  eval_cmd->add_option("--report", ev.report, "report path");

  GradFlags gc;
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  grad_cmd->add_option("--config", config_file, config_help);
  gc.model.add(grad_cmd);
  grad_cmd->add_option("--eps", gc.eps)->capture_default_str();
  grad_cmd->add_option("--tol", gc.tolerance, "maximum relative error")->capture_default_str();
  grad_cmd->add_option("--report", gc.report, "report path");

  BenchFlags bf;
  bf.model.preset = "default";
  auto* bench_cmd = app.add_subcommand("bench", "backbone forward throughput");
  bench_cmd->add_option("--config", config_file, config_help);
  bf.model.add(bench_cmd);
  bench_cmd->add_option("--input", bf.input, "input side")->capture_default_str();
  bench_cmd->add_option("--iters", bf.iters)->capture_default_str();
  bench_cmd->add_option("--warmup", bf.warmup)->capture_default_str();
  bench_cmd->add_option("--batch", bf.batch)->capture_default_str();
  bench_cmd->add_option("--report", bf.report, "report path");

  InspectFlags in;
  in.model.preset = "default";
  auto* inspect_cmd = app.add_subcommand("inspect", "print architecture, shapes and size");
  inspect_cmd->add_option("--config", config_file, config_help);
  in.model.add(inspect_cmd);
  inspect_cmd->add_option("--input", in.input, "input side")->capture_default_str();
  inspect_cmd->add_option("--report", in.report, "report path");

  try {
    apply_thread_env();
    check_flags(app, args);
    const auto expanded = expand_config(args);
    check_flags(app, expanded);
    std::vector<const char*> argv{"dfmamba"};
    for (const auto& a : expanded) argv.push_back(a.c_str());
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::Success& e) {
      app.exit(e, out, err);
      return kExitOk;
    } catch (const CLI::ParseError& e) {
      app.exit(e, out, err);
      return kExitUsage;
    }
    if (gen_cmd->parsed()) return cmd_gen(gen, out);
    if (train_cmd->parsed()) return cmd_train(tr, out);
    if (eval_cmd->parsed()) return cmd_eval(ev, out);
    if (grad_cmd->parsed()) return cmd_gradcheck(gc, out);
    if (bench_cmd->parsed()) return cmd_bench(bf, out);
    if (inspect_cmd->parsed()) return cmd_inspect(in, out);
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace dfm
