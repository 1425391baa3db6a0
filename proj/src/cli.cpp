#include "lrcl/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "lrcl/adapters.hpp"
#include "lrcl/checkpoint.hpp"
#include "lrcl/config.hpp"
#include "lrcl/log.hpp"

namespace lrcl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::string data;
  std::string validation;
  std::string checkpoint;
  std::string kind;
  std::string dataset;
  std::string adapter_config;
  std::string split = "train";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> latent_size;
  std::optional<std::size_t> labels_per_class;
  std::optional<double> temperature;
  std::optional<double> lr;
  std::optional<std::string> side;
  std::optional<std::string> freeze;
  std::optional<std::string> input;
};

void write_text(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write '" + path + "'");
  f << text;
  if (!f) throw DataError("failed writing '" + path + "'");
}

RunConfig effective_config(const Flags& f, bool pretraining) {
  RunConfig c = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  if (f.seed) c.data.seed = c.pretrain.seed = c.finetune.seed = *f.seed;
  if (f.jobs) c.eval.jobs = *f.jobs;
  if (f.epochs) (pretraining ? c.pretrain.epochs : c.finetune.epochs) = *f.epochs;
  if (f.batch_size) (pretraining ? c.pretrain.batch_size : c.finetune.batch_size) = *f.batch_size;
  if (f.lr) (pretraining ? c.pretrain.base_lr : c.finetune.lr) = *f.lr;
  if (f.latent_size) c.pretrain.latent_size = *f.latent_size;
  if (f.temperature) c.pretrain.temperature = *f.temperature;
  if (f.labels_per_class) c.data.labels_per_class = *f.labels_per_class;
  if (f.side) {
    c.eval.side = parse_input_policy(*f.side);
    c.pretrain.simclr_side = c.eval.side;
  }
  if (f.freeze) c.finetune.freeze = parse_freeze_policy(*f.freeze);
  if (f.input) c.finetune.input = parse_input_policy(*f.input);
  if (!f.out.empty()) c.output.dir = f.out;
  return c;
}

void require(const std::string& value, const char* flag, const char* command) {
  if (value.empty()) throw ConfigError(std::string(command) + ": " + flag + " is required");
}

void write_trace(const std::string& ckpt_path, const LossTrace& trace) {
  write_text(ckpt_path + ".loss.csv", trace.to_csv());
}

int cmd_synth(const Flags& f, std::ostream& out) {
  require(f.out, "--out", "synth");
  RunConfig c = effective_config(f, false);
  c.data.source = "synth";
  const ExperimentData d = load_experiment_data(c.data);
  const WindowedDataset* pick = nullptr;
  if (f.split == "train") pick = &d.train;
  else if (f.split == "validation") pick = &d.validation;
  else if (f.split == "test") pick = &d.test;
  else throw ConfigError("synth: --split must be train, validation or test");
  WindowedDataset ds = *pick;
  ds.provenance = "synth seed=" + std::to_string(c.data.seed) + " split=" + f.split;
  write_canonical(ds, f.out);
  out << "wrote " << ds.size() << " windows to " << f.out << "\n";
  return kExitOk;
}

int cmd_ingest(const Flags& f, std::ostream& out) {
  require(f.out, "--out", "ingest");
  require(f.adapter_config, "--adapter-config", "ingest");
  std::ifstream in(f.adapter_config);
  if (!in) throw ConfigError("ingest: cannot open '" + f.adapter_config + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("ingest: '" + f.adapter_config + "' is not valid JSON: " + e.what());
  }
  fs::create_directories(f.out);
  if (f.dataset == "mmfit") {
    const MmfitIngest ing = adapt_mmfit(mmfit_config_from_json(j));
    for (const auto& [role, ds] : ing.splits) {
      const std::string path = (fs::path(f.out) / (role + ".lrw")).string();
      write_canonical(ds, path);
      out << role << ": " << ds.size() << " windows -> " << path << "\n";
    }
  } else if (f.dataset == "opportunity") {
    const OpportunityIngest ing = adapt_opportunity(opportunity_config_from_json(j));
    write_canonical(ing.train, (fs::path(f.out) / "train.lrw").string());
    write_canonical(ing.test, (fs::path(f.out) / "test.lrw").string());
    out << "train: " << ing.train.size() << " windows, test: " << ing.test.size() << " windows, dropped "
        << ing.dropped_null_windows << " null windows\n";
  } else {
    throw ConfigError("ingest: --dataset must be mmfit or opportunity");
  }
  return kExitOk;
}

ExperimentData data_for(const Flags& f, const RunConfig& c) {
  if (f.data.empty()) return load_experiment_data(c.data);
  ExperimentData d;
  d.train = read_canonical(f.data);
  d.unlabeled = d.train;
  for (auto& p : d.unlabeled.pairs) p.label = kUnlabeled;
  if (!f.validation.empty()) d.validation = read_canonical(f.validation);
  return d;
}

int cmd_pretrain(const Flags& f, std::ostream& out, bool simclr) {
  const char* name = simclr ? "pretrain-simclr" : "pretrain";
  require(f.out, "--out", name);
  const RunConfig c = effective_config(f, true);
  const ExperimentData d = data_for(f, c);
  Rng init = Rng(c.pretrain.seed).fork(7);
  EncoderParams encoder = init_encoder(init);
  HeadParams head = init_head(init, c.pretrain.latent_size);
  const PretrainResult r = simclr ? pretrain_simclr(d.unlabeled, encoder, head, c.pretrain)
                                  : pretrain_lr_ssl(d.unlabeled, encoder, head, c.pretrain);
  Checkpoint ckpt;
  ckpt.model.encoder = std::move(encoder);
  ckpt.model.head = std::move(head);
  ckpt.config = to_json(c);
  ckpt.config["command"] = name;
  ckpt.seed = c.pretrain.seed;
  save_checkpoint(f.out, ckpt);
  write_trace(f.out, r.trace);
  out << name << ": " << r.steps << " steps, final epoch loss " << r.trace.train_epoch.back() << ", wrote " << f.out
      << "\n";
  return kExitOk;
}

int cmd_finetune(const Flags& f, std::ostream& out, bool supervised) {
  const char* name = supervised ? "supervised" : "finetune";
  require(f.out, "--out", name);
  if (!supervised) require(f.checkpoint, "--checkpoint", name);
  if (!f.data.empty()) require(f.validation, "--validation", name);
  const RunConfig c = effective_config(f, false);
  const ExperimentData d = data_for(f, c);
  const WindowedDataset labeled = label_subset(d.train, c.data.labels_per_class, c.finetune.seed);
  FinetuneResult r;
  if (supervised) {
    r = train_supervised(labeled, d.validation, c.finetune);
  } else {
    const Checkpoint base = load_checkpoint(f.checkpoint);
    if (!base.model.encoder) throw ConfigError("finetune: checkpoint '" + f.checkpoint + "' has no encoder");
    Rng init = Rng(c.finetune.seed).fork(8);
    r = finetune(*base.model.encoder, init_classifier(init, d.train.num_classes()), labeled, d.validation,
                 c.finetune);
  }
  Checkpoint ckpt;
  ckpt.model.encoder = r.encoder;
  ckpt.model.classifier = r.classifier;
  ckpt.config = to_json(c);
  ckpt.config["command"] = name;
  ckpt.config["class_names"] = d.train.class_names;
  ckpt.seed = c.finetune.seed;
  save_checkpoint(f.out, ckpt);
  write_trace(f.out, r.trace);
  out << name << ": " << r.epochs_run << " epochs, best epoch " << r.best_epoch << ", wrote " << f.out << "\n";
  return kExitOk;
}

int cmd_evaluate(const Flags& f, std::ostream& out) {
  require(f.checkpoint, "--checkpoint", "evaluate");
  require(f.data, "--data", "evaluate");
  const RunConfig c = effective_config(f, false);
  const Checkpoint ckpt = load_checkpoint(f.checkpoint);
  if (!ckpt.model.encoder || !ckpt.model.classifier) {
    throw ConfigError("evaluate: checkpoint '" + f.checkpoint + "' needs an encoder and a classifier");
  }
  const WindowedDataset test = read_canonical(f.data);
  const RunReport report = evaluate(*ckpt.model.encoder, *ckpt.model.classifier, test, c.eval.side);
  json j = report.to_json();
  j["checkpoint"] = f.checkpoint;
  j["data"] = f.data;
  j["seed"] = ckpt.seed;
  if (!f.out.empty()) {
    write_text(f.out, j.dump(2) + "\n");
    write_text(f.out + ".confusion.csv", report.confusion.to_csv());
  }
  out << "accuracy " << report.metrics.accuracy << " macro_f1 " << report.metrics.macro_f1 << " weighted_f1 "
      << report.metrics.weighted_f1 << " (" << report.evaluated << " windows)\n";
  return kExitOk;
}

int cmd_experiment(const Flags& f, std::ostream& out) {
  const RunConfig c = effective_config(f, true);
  const ExperimentData d = load_experiment_data(c.data);
  const fs::path dir(c.output.dir);
  fs::create_directories(dir);
  write_text((dir / "config.json").string(), to_json(c).dump(2) + "\n");
  if (f.kind == "reduced_labels") {
    Rng init = Rng(c.pretrain.seed).fork(7);
    EncoderParams encoder = init_encoder(init);
    HeadParams head = init_head(init, c.pretrain.latent_size);
    pretrain_lr_ssl(d.unlabeled, encoder, head, c.pretrain);
    CurveConfig cc;
    cc.counts = c.eval.counts;
    cc.repeats = c.eval.repeats;
    cc.seed = c.finetune.seed;
    cc.finetune = c.finetune;
    cc.eval_side = c.eval.side;
    const auto rows = reduced_label_curve(encoder, d, cc);
    write_text((dir / "curve.csv").string(), curve_csv(rows));
    out << curve_csv(rows);
  } else if (f.kind == "sweep") {
    SweepConfig sc;
    sc.batch_sizes = c.eval.batch_sizes;
    sc.latent_sizes = c.eval.latent_sizes;
    sc.repeats = c.eval.repeats;
    sc.labels_per_class = c.data.labels_per_class;
    sc.pretrain = c.pretrain;
    sc.finetune = c.finetune;
    sc.eval_side = c.eval.side;
    sc.jobs = c.eval.jobs;
    const auto cells = sweep(d, sc);
    write_text((dir / "sweep.csv").string(), sweep_csv(cells));
    out << sweep_csv(cells);
  } else if (f.kind == "repeats") {
    std::vector<RunReport> ssl, sup;
    json runs = json::array();
    for (std::size_t r = 0; r < c.eval.repeats; ++r) {
      PretrainConfig pre = c.pretrain;
      FinetuneConfig fine = c.finetune;
      pre.seed += r;
      fine.seed += r;
      ssl.push_back(run_ssl(d, pre, fine, c.data.labels_per_class, c.eval.side));
      sup.push_back(run_supervised(d, fine, c.data.labels_per_class, c.eval.side));
      runs.push_back({{"repeat", r}, {"ssl", ssl.back().to_json()}, {"supervised", sup.back().to_json()}});
    }
    const json summary = {{"ssl", aggregate(ssl).to_json()}, {"supervised", aggregate(sup).to_json()}, {"runs", runs}};
    write_text((dir / "repeats.json").string(), summary.dump(2) + "\n");
    out << json{{"ssl", summary["ssl"]}, {"supervised", summary["supervised"]}}.dump(2) << "\n";
  } else {
    throw ConfigError("experiment: --kind must be reduced_labels, sweep or repeats");
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Left-right contrastive pretraining for wrist accelerometer activity recognition"};
  app.name("lrcl");
  app.require_subcommand(1);
  app.footer("Run configuration keys (JSON, given with --config) and their defaults:\n" + config_help() +
             "\nEnvironment: LRCL_LOG=error|info|debug sets log verbosity (default info).\n"
             "Exit codes: 0 ok, 2 usage or configuration error, 3 corrupt input, 4 non-finite loss.");
  Flags f;

  auto common = [&](CLI::App* s) {
    s->add_option("--config", f.config, "JSON run configuration");
    s->add_option("--out", f.out, "Output path");
    s->add_option("--seed", f.seed, "Seed for data, pretraining and fine-tuning");
  };
  auto pretrain_flags = [&](CLI::App* s) {
    s->add_option("--data", f.data, "Canonical dataset (labels ignored); default: config data section");
    s->add_option("--epochs", f.epochs, "Pretraining epochs");
    s->add_option("--batch-size", f.batch_size, "Pairs per batch (N)");
    s->add_option("--temperature", f.temperature, "NT-Xent temperature");
    s->add_option("--lr", f.lr, "Base learning rate of the cosine schedule");
    s->add_option("--latent-size", f.latent_size, "Projection head output size");
  };
  auto finetune_flags = [&](CLI::App* s) {
    s->add_option("--data", f.data, "Canonical training dataset; default: config data section");
    s->add_option("--validation", f.validation, "Canonical validation dataset (required with --data)");
    s->add_option("--epochs", f.epochs, "Maximum epochs");
    s->add_option("--batch-size", f.batch_size, "Examples per batch");
    s->add_option("--lr", f.lr, "Adam learning rate");
    s->add_option("--labels-per-class", f.labels_per_class, "Labeled windows kept per class (0 = all)");
    s->add_option("--input", f.input, "Training windows: left, right or both");
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic symmetric-activity dataset");
  common(synth);
  synth->add_option("--split", f.split, "train, validation or test");

  auto* ingest = app.add_subcommand("ingest", "Convert a public dataset to canonical files");
  ingest->add_option("--dataset", f.dataset, "mmfit or opportunity")->required();
  ingest->add_option("--adapter-config", f.adapter_config, "JSON adapter configuration")->required();
  ingest->add_option("--out", f.out, "Output directory")->required();

  auto* pretrain = app.add_subcommand("pretrain", "Left-right contrastive pretraining");
  common(pretrain);
  pretrain_flags(pretrain);

  auto* simclr = app.add_subcommand("pretrain-simclr", "Rotation-augmentation contrastive baseline");
  common(simclr);
  pretrain_flags(simclr);
  simclr->add_option("--side", f.side, "Windows to augment: left, right or both");

  auto* fine = app.add_subcommand("finetune", "Fine-tune a pretrained encoder with a new classifier");
  common(fine);
  finetune_flags(fine);
  fine->add_option("--checkpoint", f.checkpoint, "Pretrained checkpoint")->required();
  fine->add_option("--freeze", f.freeze, "all_but_last, freeze_all or none");

  auto* sup = app.add_subcommand("supervised", "Train encoder and classifier from scratch");
  common(sup);
  finetune_flags(sup);

  auto* eval = app.add_subcommand("evaluate", "Evaluate a classifier checkpoint on one side");
  common(eval);
  eval->add_option("--checkpoint", f.checkpoint, "Checkpoint with encoder and classifier")->required();
  eval->add_option("--data", f.data, "Canonical test dataset")->required();
  eval->add_option("--side", f.side, "left, right or both");

  auto* exp = app.add_subcommand("experiment", "Reduced-label curve, hyperparameter sweep or seed repeats");
  common(exp);
  exp->add_option("--kind", f.kind, "reduced_labels, sweep or repeats")->required();
  exp->add_option("--jobs", f.jobs, "Parallel sweep cells");
  exp->add_option("--labels-per-class", f.labels_per_class, "Labeled windows kept per class (0 = all)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    set_log_level(log_level_from_env());
    if (synth->parsed()) return cmd_synth(f, out);
    if (ingest->parsed()) return cmd_ingest(f, out);
    if (pretrain->parsed()) return cmd_pretrain(f, out, false);
    if (simclr->parsed()) return cmd_pretrain(f, out, true);
    if (fine->parsed()) return cmd_finetune(f, out, false);
    if (sup->parsed()) return cmd_finetune(f, out, true);
    if (eval->parsed()) return cmd_evaluate(f, out);
    if (exp->parsed()) return cmd_experiment(f, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CorruptionError& e) {
    err << "error: " << e.what() << "\n";
    return kExitCorruption;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace lrcl
