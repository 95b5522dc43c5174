// hypcbc command-line front end. Talks to the shared library exclusively
// through the public C API (include/hypcbc.h).
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hypcbc.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;

int report_status(hypcbc_status status) {
  if (status == HYPCBC_OK) return 0;
  std::cerr << "error: " << hypcbc_last_error() << "\n";
  return static_cast<int>(status);
}

void print_and_free(char* text) {
  if (!text) return;
  std::cout << text;
  hypcbc_string_free(text);
}

// Output root: --out-root flag beats HYPCBC_OUT_ROOT beats cwd.
fs::path resolve_out(const std::string& out_root, const std::string& leaf) {
  fs::path root;
  if (!out_root.empty()) {
    root = out_root;
  } else if (const char* env = std::getenv("HYPCBC_OUT_ROOT"); env && *env) {
    root = env;
  } else {
    root = ".";
  }
  return root / leaf;
}

// Train-config flags; mirrors the TrainConfig keys in kebab-case.
struct ConfigFlags {
  std::string method;
  long long d1 = 0, d2 = 0;
  double curvature = 0, clip_radius = 0, temperature = 0, lambda = 0;
  double lr = 0, min_lr = 0, weight_decay = 0;
  long long batch_size = 0, patience = 0, max_epochs = 0, seed = 0;
  std::string split;
  bool detach_kl = false, no_detach_kl = false;
  std::string config_file;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_file,
                    "JSON config file (flags override its keys)");
    cmd->add_option("--method", method, "erm|hyperm|hypcbc");
    cmd->add_option("--d1", d1, "high-dimensional branch width");
    cmd->add_option("--d2", d2, "bottleneck branch width");
    cmd->add_option("--curvature", curvature, "ball curvature c");
    cmd->add_option("--clip-radius", clip_radius, "feature clipping radius");
    cmd->add_option("--temperature", temperature, "consistency temperature T");
    cmd->add_option("--lambda", lambda, "consistency weight");
    cmd->add_option("--lr", lr, "initial learning rate");
    cmd->add_option("--min-lr", min_lr, "cosine schedule floor");
    cmd->add_option("--weight-decay", weight_decay, "AdamW decoupled decay");
    cmd->add_option("--batch-size", batch_size, "batch size");
    cmd->add_option("--patience", patience, "early stopping patience");
    cmd->add_option("--max-epochs", max_epochs, "epoch budget");
    cmd->add_option("--seed", seed, "run seed");
    cmd->add_option("--split", split, "default|stratified|lodo:<domain>");
    cmd->add_flag("--detach-kl-target", detach_kl,
                  "detach the bottleneck logits in the KL term (default)");
    cmd->add_flag("--no-detach-kl-target", no_detach_kl,
                  "let the KL term update the bottleneck branch");
  }

  // Precedence: explicit flags > config file > library defaults.
  std::string resolve(const CLI::App* cmd) const {
    json cfg = json::object();
    if (!config_file.empty()) {
      std::ifstream f(config_file);
      if (!f) {
        std::cerr << "error: cannot open config file " << config_file << "\n";
        std::exit(kExitConfig);
      }
      try {
        f >> cfg;
      } catch (const json::exception& e) {
        std::cerr << "error: bad config file: " << e.what() << "\n";
        std::exit(kExitConfig);
      }
    }
    auto set_if = [&](const char* flag, const char* key, const json& value) {
      if (cmd->count(flag) > 0) cfg[key] = value;
    };
    set_if("--method", "method", method);
    set_if("--d1", "d1", d1);
    set_if("--d2", "d2", d2);
    set_if("--curvature", "curvature", curvature);
    set_if("--clip-radius", "clip-radius", clip_radius);
    set_if("--temperature", "temperature", temperature);
    set_if("--lambda", "lambda", lambda);
    set_if("--lr", "lr", lr);
    set_if("--min-lr", "min-lr", min_lr);
    set_if("--weight-decay", "weight-decay", weight_decay);
    set_if("--batch-size", "batch-size", batch_size);
    set_if("--patience", "patience", patience);
    set_if("--max-epochs", "max-epochs", max_epochs);
    set_if("--seed", "seed", seed);
    set_if("--split", "split", split);
    if (cmd->count("--detach-kl-target") > 0) cfg["detach-kl-target"] = true;
    if (cmd->count("--no-detach-kl-target") > 0) cfg["detach-kl-target"] = false;
    return cfg.dump();
  }
};

struct OpenedDataset {
  hypcbc_dataset* handle = nullptr;
  ~OpenedDataset() { hypcbc_dataset_close(handle); }
};

struct OpenedModel {
  hypcbc_model* handle = nullptr;
  ~OpenedModel() { hypcbc_model_close(handle); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hyperbolic classification heads on precomputed embeddings"};
  app.require_subcommand(1);

  // --- train ---------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "train a model");
  ConfigFlags train_flags;
  std::string train_dataset, train_out_root, train_run_name = "run";
  train_flags.attach(train_cmd);
  train_cmd->add_option("--dataset", train_dataset, "HEMB dataset directory")
      ->required();
  train_cmd->add_option("--out-root", train_out_root, "output root directory");
  train_cmd->add_option("--run-name", train_run_name,
                        "subdirectory for checkpoint + manifest");

  // --- eval ----------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_ckpt, eval_dataset, eval_split = "test";
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
  eval_cmd->add_option("--dataset", eval_dataset, "HEMB dataset directory")
      ->required();
  eval_cmd->add_option("--eval-split", eval_split, "train|val|test");

  // --- probe ---------------------------------------------------------------
  auto* probe_cmd = app.add_subcommand("probe", "fit a probe on frozen embeddings");
  std::string probe_ckpt, probe_dataset, probe_kind = "linear";
  std::string probe_target = "class", probe_layer, probe_split = "train";
  long long probe_epochs = 50, probe_hidden = 64, probe_seed = 0;
  long long probe_branch = 1;
  double probe_lr = 1e-4;
  probe_cmd->add_option("--checkpoint", probe_ckpt,
                        "checkpoint (omit to probe raw backbone features)");
  probe_cmd->add_option("--dataset", probe_dataset, "HEMB dataset directory")
      ->required();
  probe_cmd->add_option("--kind", probe_kind, "linear|mlp");
  probe_cmd->add_option("--target", probe_target, "class|domain");
  probe_cmd->add_option("--layer", probe_layer,
                        "backbone|premap|postmap (default: backbone, or "
                        "postmap with a checkpoint)");
  probe_cmd->add_option("--branch", probe_branch, "1|2 (with a checkpoint)");
  probe_cmd->add_option("--probe-split", probe_split, "train|val|test|all");
  probe_cmd->add_option("--epochs", probe_epochs, "probe training epochs");
  probe_cmd->add_option("--probe-lr", probe_lr, "probe learning rate");
  probe_cmd->add_option("--hidden", probe_hidden, "MLP hidden width");
  probe_cmd->add_option("--seed", probe_seed, "probe seed");

  // --- entropy ---------------------------------------------------------------
  auto* entropy_cmd =
      app.add_subcommand("entropy", "local k-NN label entropy of embeddings");
  std::string entropy_ckpt, entropy_dataset, entropy_split = "train";
  long long entropy_k = 15;
  entropy_cmd->add_option("--checkpoint", entropy_ckpt, "checkpoint path")
      ->required();
  entropy_cmd->add_option("--dataset", entropy_dataset, "HEMB dataset directory")
      ->required();
  entropy_cmd->add_option("--entropy-split", entropy_split, "train|val|test|all");
  entropy_cmd->add_option("--k", entropy_k, "neighborhood size");

  // --- export ----------------------------------------------------------------
  auto* export_cmd = app.add_subcommand("export", "write plot-ready artifacts");
  std::string export_what, export_ckpt, export_dataset, export_split = "train";
  std::string export_out, export_options;
  export_cmd->add_option("what", export_what, "disk2d|boundary_toy")->required();
  export_cmd->add_option("--checkpoint", export_ckpt, "checkpoint (disk2d)");
  export_cmd->add_option("--dataset", export_dataset, "dataset (disk2d)");
  export_cmd->add_option("--export-split", export_split, "train|val|test");
  export_cmd->add_option("--out", export_out, "output path / stem")->required();
  export_cmd->add_option("--options", export_options,
                         "JSON options (boundary_toy: p, normal, curvature, seed)");

  // --- sweep -----------------------------------------------------------------
  auto* sweep_cmd = app.add_subcommand("sweep", "grid sweep over config fields");
  ConfigFlags sweep_flags;
  std::string sweep_dataset, sweep_grid, sweep_out_root, sweep_name = "sweep";
  std::vector<unsigned long long> sweep_seeds;
  long long sweep_jobs = 1;
  sweep_flags.attach(sweep_cmd);
  sweep_cmd->add_option("--dataset", sweep_dataset, "HEMB dataset directory")
      ->required();
  sweep_cmd
      ->add_option("--grid", sweep_grid,
                   "grid JSON, e.g. {\"lambda\":[0.1,0.2],\"d2\":[2,8]}")
      ->required();
  sweep_cmd->add_option("--seeds", sweep_seeds,
                        "seed list (default 0 1 2 3 4)");
  sweep_cmd->add_option("--jobs", sweep_jobs, "parallel cells");
  sweep_cmd->add_option("--out-root", sweep_out_root, "output root directory");
  sweep_cmd->add_option("--run-name", sweep_name, "output subdirectory");

  // --- synth -----------------------------------------------------------------
  auto* synth_cmd =
      app.add_subcommand("synth", "generate a synthetic HEMB dataset");
  std::string synth_out;
  long long synth_classes = 3, synth_domains = 0, synth_dim = 64;
  long long synth_samples = 3000, synth_shift_dims = 4, synth_seed = 0;
  double synth_sep = 6.0, synth_shift = 0.0;
  synth_cmd->add_option("--out", synth_out, "output dataset directory")
      ->required();
  synth_cmd->add_option("--classes", synth_classes, "number of classes");
  synth_cmd->add_option("--domains", synth_domains, "number of domains (0 = none)");
  synth_cmd->add_option("--dim", synth_dim, "embedding width");
  synth_cmd->add_option("--samples", synth_samples, "number of samples");
  synth_cmd->add_option("--class-separation", synth_sep, "cluster separation");
  synth_cmd->add_option("--domain-shift", synth_shift, "domain offset magnitude");
  synth_cmd->add_option("--shift-dims", synth_shift_dims,
                        "width of the domain-shift subspace");
  synth_cmd->add_option("--seed", synth_seed, "generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (train_cmd->parsed()) {
    const std::string config = train_flags.resolve(train_cmd);
    const fs::path out = resolve_out(train_out_root, train_run_name);
    char* manifest = nullptr;
    const hypcbc_status status =
        hypcbc_train(config.c_str(), train_dataset.c_str(),
                     out.string().c_str(), &manifest);
    if (status == HYPCBC_OK) {
      print_and_free(manifest);
      std::cerr << "wrote " << (out / "checkpoint.hckp").string() << " and "
                << (out / "manifest.json").string() << "\n";
    }
    return report_status(status);
  }

  if (eval_cmd->parsed()) {
    OpenedModel model;
    if (auto s = hypcbc_model_open(eval_ckpt.c_str(), &model.handle);
        s != HYPCBC_OK)
      return report_status(s);
    OpenedDataset ds;
    if (auto s = hypcbc_dataset_open(eval_dataset.c_str(), &ds.handle);
        s != HYPCBC_OK)
      return report_status(s);
    char* report = nullptr;
    const hypcbc_status status =
        hypcbc_eval(model.handle, ds.handle, eval_split.c_str(), &report);
    if (status == HYPCBC_OK) print_and_free(report);
    return report_status(status);
  }

  if (probe_cmd->parsed()) {
    OpenedModel model;
    if (!probe_ckpt.empty()) {
      if (auto s = hypcbc_model_open(probe_ckpt.c_str(), &model.handle);
          s != HYPCBC_OK)
        return report_status(s);
    }
    OpenedDataset ds;
    if (auto s = hypcbc_dataset_open(probe_dataset.c_str(), &ds.handle);
        s != HYPCBC_OK)
      return report_status(s);
    if (probe_layer.empty())
      probe_layer = probe_ckpt.empty() ? "backbone" : "postmap";
    json req;
    req["kind"] = probe_kind;
    req["target"] = probe_target;
    req["layer"] = probe_layer;
    req["branch"] = probe_branch;
    req["split"] = probe_split;
    req["epochs"] = probe_epochs;
    req["lr"] = probe_lr;
    req["hidden"] = probe_hidden;
    req["seed"] = probe_seed;
    char* report = nullptr;
    const hypcbc_status status =
        hypcbc_probe(model.handle, ds.handle, req.dump().c_str(), &report);
    if (status == HYPCBC_OK) print_and_free(report);
    return report_status(status);
  }

  if (entropy_cmd->parsed()) {
    OpenedModel model;
    if (auto s = hypcbc_model_open(entropy_ckpt.c_str(), &model.handle);
        s != HYPCBC_OK)
      return report_status(s);
    OpenedDataset ds;
    if (auto s = hypcbc_dataset_open(entropy_dataset.c_str(), &ds.handle);
        s != HYPCBC_OK)
      return report_status(s);
    char* report = nullptr;
    const hypcbc_status status =
        hypcbc_entropy(model.handle, ds.handle, entropy_split.c_str(),
                       static_cast<int>(entropy_k), &report);
    if (status == HYPCBC_OK) print_and_free(report);
    return report_status(status);
  }

  if (export_cmd->parsed()) {
    OpenedModel model;
    OpenedDataset ds;
    if (!export_ckpt.empty()) {
      if (auto s = hypcbc_model_open(export_ckpt.c_str(), &model.handle);
          s != HYPCBC_OK)
        return report_status(s);
    }
    if (!export_dataset.empty()) {
      if (auto s = hypcbc_dataset_open(export_dataset.c_str(), &ds.handle);
          s != HYPCBC_OK)
        return report_status(s);
    }
    const hypcbc_status status = hypcbc_export(
        model.handle, ds.handle, export_what.c_str(), export_split.c_str(),
        export_options.empty() ? nullptr : export_options.c_str(),
        export_out.c_str());
    if (status == HYPCBC_OK) std::cerr << "wrote " << export_out << "\n";
    return report_status(status);
  }

  if (sweep_cmd->parsed()) {
    const std::string base = sweep_flags.resolve(sweep_cmd);
    const fs::path out = resolve_out(sweep_out_root, sweep_name);
    char* table = nullptr;
    const hypcbc_status status = hypcbc_sweep(
        sweep_grid.c_str(), base.c_str(), sweep_dataset.c_str(),
        out.string().c_str(),
        sweep_seeds.empty() ? nullptr : sweep_seeds.data(), sweep_seeds.size(),
        static_cast<int>(sweep_jobs), &table);
    if (status == HYPCBC_OK) {
      print_and_free(table);
      std::cerr << "wrote " << (out / "sweep_results.csv").string() << " and "
                << (out / "sweep_summary.json").string() << "\n";
    }
    return report_status(status);
  }

  if (synth_cmd->parsed()) {
    json spec;
    spec["classes"] = synth_classes;
    spec["domains"] = synth_domains;
    spec["dim"] = synth_dim;
    spec["samples"] = synth_samples;
    spec["class_separation"] = synth_sep;
    spec["domain_shift"] = synth_shift;
    spec["shift_dims"] = synth_shift_dims;
    spec["seed"] = synth_seed;
    const hypcbc_status status =
        hypcbc_synth(spec.dump().c_str(), synth_out.c_str());
    if (status == HYPCBC_OK) std::cerr << "wrote " << synth_out << "\n";
    return report_status(status);
  }

  return kExitConfig;
}
