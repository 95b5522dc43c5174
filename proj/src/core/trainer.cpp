#include "core/trainer.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "core/error.hpp"
#include "core/optimizer.hpp"

namespace hypcbc::train {

namespace fs = std::filesystem;
using nlohmann::json;

TrainConfig TrainConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw_config("train config is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) throw_config("train config must be a JSON object");

  static const std::vector<std::string> known = {
      "method", "d1", "d2", "curvature", "clip-radius", "temperature",
      "lambda", "lr", "min-lr", "weight-decay", "batch-size", "patience",
      "max-epochs", "seed", "split", "detach-kl-target"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw_config("unknown train config key '" + key + "'");
  }

  TrainConfig c;
  try {
    if (j.contains("method"))
      c.method = model::method_from_string(j.at("method").get<std::string>());
    c.d1 = j.value("d1", c.d1);
    c.d2 = j.value("d2", c.d2);
    c.curvature = j.value("curvature", c.curvature);
    c.clip_radius = j.value("clip-radius", c.clip_radius);
    c.temperature = j.value("temperature", c.temperature);
    c.lambda = j.value("lambda", c.lambda);
    c.lr = j.value("lr", c.lr);
    c.min_lr = j.value("min-lr", c.min_lr);
    c.weight_decay = j.value("weight-decay", c.weight_decay);
    c.batch_size = j.value("batch-size", c.batch_size);
    c.patience = j.value("patience", c.patience);
    c.max_epochs = j.value("max-epochs", c.max_epochs);
    c.seed = j.value("seed", c.seed);
    c.split = j.value("split", c.split);
    c.detach_kl_target = j.value("detach-kl-target", c.detach_kl_target);
  } catch (const json::exception& e) {
    throw_config("train config has a mistyped value: " + std::string(e.what()));
  }
  c.validate();
  return c;
}

std::string TrainConfig::to_json() const {
  json j;
  j["method"] = model::method_to_string(method);
  j["d1"] = d1;
  j["d2"] = d2;
  j["curvature"] = curvature;
  j["clip-radius"] = clip_radius;
  j["temperature"] = temperature;
  j["lambda"] = lambda;
  j["lr"] = lr;
  j["min-lr"] = min_lr;
  j["weight-decay"] = weight_decay;
  j["batch-size"] = batch_size;
  j["patience"] = patience;
  j["max-epochs"] = max_epochs;
  j["seed"] = seed;
  j["split"] = split;
  j["detach-kl-target"] = detach_kl_target;
  return j.dump();
}

void TrainConfig::validate() const {
  if (d1 < 1) throw_config("d1 must be >= 1");
  if (method == model::Method::HypCbc && d2 < 1)
    throw_config("hypcbc requires d2 >= 1");
  if (!(curvature > 0.0)) throw_config("curvature must be positive");
  if (!(clip_radius > 0.0)) throw_config("clip-radius must be positive");
  if (!(temperature > 0.0)) throw_config("temperature must be positive");
  if (lambda < 0.0) throw_config("lambda must be nonnegative");
  if (!(lr > 0.0)) throw_config("lr must be positive");
  if (min_lr < 0.0 || min_lr > lr) throw_config("need 0 <= min-lr <= lr");
  if (weight_decay < 0.0) throw_config("weight-decay must be nonnegative");
  if (batch_size < 1) throw_config("batch-size must be >= 1");
  if (patience < 1) throw_config("patience must be >= 1");
  if (max_epochs < 1) throw_config("max-epochs must be >= 1");
  data::SplitPlan::parse(split, seed);  // validates the plan text
}

namespace {

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

double parameter_norm(const model::ModelParams& params) {
  double s = 0.0;
  for (const auto& [name, t] : params.named_tensors())
    for (const double v : t->values) s += v * v;
  return std::sqrt(s);
}

// Quantize every trainable tensor through f32 (what the checkpoint stores).
model::ModelParams quantized_copy(const model::ModelParams& params) {
  model::ModelParams snap = params;
  for (auto& [name, t] : snap.named_tensors()) *t = ckpt::quantize_f32(*t);
  return snap;
}

// MLR offset points live in the ball: clamp row norms after each step.
void project_mlr_points(model::ModelParams& params) {
  if (params.method == model::Method::Erm) return;
  const double cap =
      (1.0 - geom::kBoundaryEps) / std::sqrt(params.curvature);
  auto clamp_rows = [cap](ad::Tensor& p) {
    for (size_t i = 0; i < p.rows(); ++i) {
      double n2 = 0.0;
      for (size_t j = 0; j < p.cols(); ++j) n2 += p.at(i, j) * p.at(i, j);
      const double n = std::sqrt(n2);
      if (n > cap) {
        const double s = cap / n;
        for (size_t j = 0; j < p.cols(); ++j) p.at(i, j) *= s;
      }
    }
  };
  clamp_rows(params.mlr1_p);
  if (params.method == model::Method::HypCbc) clamp_rows(params.mlr2_p);
}

}  // namespace

metrics::MetricsReport evaluate(const model::ModelParams& params,
                                const data::EmbeddingDataset& ds,
                                data::SplitTag split, uint64_t seed) {
  const std::vector<size_t> rows = ds.split_indices(split);
  if (rows.empty())
    throw_data("evaluate: split '" + data::split_tag_name(split) +
               "' has no samples");
  if (ds.dim != params.dims.input_dim)
    throw_data("evaluate: dataset width " + std::to_string(ds.dim) +
               " does not match checkpoint width " +
               std::to_string(params.dims.input_dim));

  // Fixed-size evaluation chunks keep memory bounded and the arithmetic
  // order identical between runs.
  constexpr size_t kChunk = 256;
  const size_t n = rows.size();
  ad::Tensor logits = ad::Tensor::zeros({n, params.dims.num_classes});
  for (size_t start = 0; start < n; start += kChunk) {
    const size_t end = std::min(n, start + kChunk);
    const std::vector<size_t> chunk(rows.begin() + static_cast<ptrdiff_t>(start),
                                    rows.begin() + static_cast<ptrdiff_t>(end));
    const ad::Tensor chunk_logits =
        model::eval_branch1_logits(params, ds.gather(chunk));
    for (size_t i = 0; i < chunk.size(); ++i)
      for (size_t j = 0; j < params.dims.num_classes; ++j)
        logits.at(start + i, j) = chunk_logits.at(i, j);
  }

  const std::vector<int> labels = ds.gather_class_labels(rows);
  metrics::MetricsReport report;
  report.split = data::split_tag_name(split);
  report.seed = seed;
  report.accuracy = metrics::accuracy(model::predict(logits), labels);
  report.loss = model::ce_loss(logits, labels);
  const ad::Tensor probs = model::softmax_with_temperature(logits, 1.0);
  report.auc_macro = metrics::auc_macro(probs, labels, &report.per_class_auc,
                                        &report.skipped_classes);
  return report;
}

TrainResult train(const TrainConfig& config, const data::EmbeddingDataset& raw,
                  const std::string& dataset_path) {
  config.validate();
  const data::SplitPlan plan = data::SplitPlan::parse(config.split, config.seed);
  const data::EmbeddingDataset ds = data::make_split(raw, plan);

  model::Dims dims;
  dims.input_dim = ds.dim;
  dims.d1 = config.d1;
  dims.d2 = config.d2;
  dims.num_classes = ds.num_classes;
  model::ModelParams params = model::init_params(
      config.seed, config.method, dims, config.curvature, config.clip_radius);

  opt::AdamWConfig ocfg;
  ocfg.weight_decay = config.weight_decay;
  opt::AdamW optimizer(ocfg);
  for (auto& [name, tensor] : params.named_tensors())
    optimizer.register_param(name, tensor);

  data::BatchIterator batches(ds, data::SplitTag::Train, config.batch_size,
                              config.seed);
  opt::Schedule schedule;
  schedule.base_lr = config.lr;
  schedule.min_lr = config.min_lr;
  schedule.total_steps = static_cast<int64_t>(config.max_epochs) *
                         static_cast<int64_t>(batches.batches_per_epoch());

  // DG (leave-one-domain-out) runs track validation AUC; in-distribution
  // runs track validation accuracy.
  const bool lodo = plan.strategy == data::SplitPlan::Strategy::Lodo;
  const std::string metric_name = lodo ? "val_auc" : "val_accuracy";

  opt::EarlyStopper stopper(config.patience, opt::StopMode::Maximize);
  model::LossWeights weights{config.lambda, config.temperature};

  TrainResult result;
  model::ModelParams best = quantized_copy(params);
  opt::AdamW best_optimizer = optimizer;
  int64_t step = 0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    double loss_sum = 0.0;
    size_t n_batches = 0;
    double last_lr = 0.0;
    for (const auto& batch : batches.epoch_batches(static_cast<uint64_t>(epoch))) {
      ad::Tape tape;
      const model::ParamVars vars = model::bind_params(tape, params);
      const ad::Var features = tape.constant(ds.gather(batch));
      const std::vector<int> labels = ds.gather_class_labels(batch);
      const model::ForwardOutput out = model::forward_with_loss(
          tape, params, vars, features, labels, weights,
          config.detach_kl_target);
      const double loss = tape.value(out.loss).values[0];
      if (!std::isfinite(loss))
        throw_numeric("non-finite loss at epoch " + std::to_string(epoch) +
                      ", batch " + std::to_string(n_batches) +
                      " (|params| = " + std::to_string(parameter_norm(params)) +
                      ")");
      tape.backward(out.loss);

      last_lr = opt::cosine_lr(schedule, step);
      std::vector<std::pair<std::string, const ad::Tensor*>> grads;
      grads.reserve(vars.vars.size());
      for (const auto& [name, var] : vars.vars)
        grads.emplace_back(name, &tape.grad(var));
      optimizer.step(grads, last_lr);
      project_mlr_points(params);
      ++step;
      loss_sum += loss;
      ++n_batches;
    }

    const metrics::MetricsReport val =
        evaluate(params, ds, data::SplitTag::Val, config.seed);
    const double metric = lodo ? val.auc_macro : val.accuracy;

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(n_batches);
    rec.val_metric = metric;
    rec.lr = last_lr;
    result.epochs.push_back(rec);

    const int prev_best = stopper.best_epoch();
    const opt::StopSignal signal = stopper.update(metric, epoch);
    if (stopper.best_epoch() != prev_best) {
      best = quantized_copy(params);
      best_optimizer = optimizer;
    }
    if (signal == opt::StopSignal::Stop) {
      result.stopped_early = true;
      break;
    }
  }

  result.best_epoch = stopper.best_epoch();

  // The recorded metrics are recomputed from the quantized snapshot, i.e.
  // from exactly what re-evaluating the checkpoint will see.
  const metrics::MetricsReport best_val =
      evaluate(best, ds, data::SplitTag::Val, config.seed);
  result.best_val_metric = lodo ? best_val.auc_macro : best_val.accuracy;
  result.test_report = evaluate(best, ds, data::SplitTag::Test, config.seed);
  result.checkpoint = to_checkpoint(best, config, &best_optimizer);

  json manifest;
  manifest["schema"] = "hypcbc.run/1";
  manifest["build"] = {{"name", kBuildName}, {"version", kBuildVersion}};
  manifest["timestamp_utc"] = timestamp_utc();
  manifest["config"] = json::parse(config.to_json());
  json dataset_info;
  dataset_info["path"] = dataset_path;
  dataset_info["num_samples"] = ds.num_samples();
  dataset_info["n"] = ds.dim;
  dataset_info["num_classes"] = ds.num_classes;
  dataset_info["embeddings_crc32"] = data::crc32(ds.embeddings);
  manifest["dataset"] = dataset_info;
  manifest["split_plan"] = plan.describe();
  manifest["metric_name"] = metric_name;
  json epochs = json::array();
  for (const EpochRecord& r : result.epochs)
    epochs.push_back({{"epoch", r.epoch},
                      {"train_loss", r.train_loss},
                      {"val_metric", r.val_metric},
                      {"lr", r.lr}});
  manifest["epochs"] = epochs;
  manifest["best_epoch"] = result.best_epoch;
  manifest["best_val_metric"] = result.best_val_metric;
  manifest["stopped_early"] = result.stopped_early;
  manifest["test"] = json::parse(result.test_report.to_json());
  manifest["checkpoint"] = "checkpoint.hckp";
  result.manifest_json = manifest.dump(2) + "\n";
  return result;
}

std::string train_to_dir(const TrainConfig& config,
                         const std::string& dataset_dir,
                         const std::string& out_dir) {
  const data::EmbeddingDataset ds = data::load_dataset(dataset_dir);
  TrainResult result = train(config, ds, dataset_dir);
  fs::create_directories(out_dir);
  ckpt::save_checkpoint(result.checkpoint,
                        (fs::path(out_dir) / "checkpoint.hckp").string());
  const fs::path manifest_path = fs::path(out_dir) / "manifest.json";
  const fs::path tmp = manifest_path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw_data("cannot write " + manifest_path.string());
    f << result.manifest_json;
  }
  fs::rename(tmp, manifest_path);
  return result.manifest_json;
}

ckpt::Checkpoint to_checkpoint(const model::ModelParams& params,
                               const TrainConfig& config,
                               const opt::AdamW* optimizer) {
  ckpt::Checkpoint c;
  json meta = json::parse(config.to_json());
  meta["input-dim"] = params.dims.input_dim;
  meta["num-classes"] = params.dims.num_classes;
  c.config_json = meta.dump();
  for (const auto& [name, tensor] : params.named_tensors())
    c.entries.push_back({name, *tensor});
  if (optimizer) {
    for (const auto& entry : optimizer->moments()) {
      c.entries.push_back({"opt.m." + entry.name, entry.m});
      c.entries.push_back({"opt.v." + entry.name, entry.v});
    }
    c.entries.push_back(
        {"opt.step",
         ad::Tensor::scalar(static_cast<double>(optimizer->step_count()))});
  }
  return c;
}

model::ModelParams params_from_checkpoint(const ckpt::Checkpoint& c,
                                          TrainConfig* config_out) {
  json meta;
  try {
    meta = json::parse(c.config_json);
  } catch (const json::exception& e) {
    throw_data("checkpoint config is not valid JSON: " + std::string(e.what()));
  }
  json cfg = meta;
  cfg.erase("input-dim");
  cfg.erase("num-classes");
  const TrainConfig config = TrainConfig::from_json(cfg.dump());
  if (config_out) *config_out = config;

  model::Dims dims;
  dims.input_dim = meta.at("input-dim").get<size_t>();
  dims.num_classes = meta.at("num-classes").get<size_t>();
  dims.d1 = config.d1;
  dims.d2 = config.d2;
  model::ModelParams params = model::init_params(
      config.seed, config.method, dims, config.curvature, config.clip_radius);
  for (auto& [name, tensor] : params.named_tensors()) {
    const ad::Tensor* stored = c.find(name);
    if (!stored) throw_data("checkpoint is missing tensor '" + name + "'");
    if (stored->shape != tensor->shape)
      throw_data("checkpoint tensor '" + name + "' has unexpected shape");
    *tensor = *stored;
  }
  return params;
}

double sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double mean = 0.0;
  for (const double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double acc = 0.0;
  for (const double x : xs) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

namespace {

struct CellTask {
  size_t cell_index;
  size_t seed_index;
};

}  // namespace

SweepResult sweep(const std::string& grid_json, const TrainConfig& base,
                  const data::EmbeddingDataset& ds,
                  const std::string& dataset_path,
                  const std::vector<uint64_t>& seeds, int jobs) {
  json grid;
  try {
    grid = json::parse(grid_json);
  } catch (const json::exception& e) {
    throw_config("sweep grid is not valid JSON: " + std::string(e.what()));
  }
  if (!grid.is_object() )
    throw_config("sweep grid must be an object of key -> array");
  if (seeds.empty()) throw_config("sweep needs at least one seed");

  // Expand the cross product in key order.
  std::vector<std::string> keys;
  std::vector<std::vector<json>> values;
  for (const auto& [key, arr] : grid.items()) {
    if (key == "seed")
      throw_config("sweep grid may not contain 'seed'; pass a seed list");
    if (!arr.is_array() || arr.empty())
      throw_config("sweep grid entry '" + key + "' must be a nonempty array");
    keys.push_back(key);
    values.emplace_back(arr.begin(), arr.end());
  }

  const json base_json = json::parse(base.to_json());
  SweepResult result;
  std::vector<size_t> cursor(keys.empty() ? 0 : keys.size(), 0);
  while (true) {
    json cell_cfg = base_json;
    std::string cell_id;
    for (size_t i = 0; i < keys.size(); ++i) {
      cell_cfg[keys[i]] = values[i][cursor[i]];
      if (!cell_id.empty()) cell_id += ",";
      cell_id += keys[i] + "=" + values[i][cursor[i]].dump();
    }
    if (cell_id.empty()) cell_id = "base";
    json no_seed = cell_cfg;
    no_seed.erase("seed");
    SweepCell cell;
    cell.cell_id = cell_id;
    cell.config_json = no_seed.dump();
    cell.seeds = seeds;
    // Validate the cell config now so config errors surface immediately.
    TrainConfig::from_json(cell_cfg.dump());
    result.cells.push_back(std::move(cell));

    size_t i = 0;
    for (; i < keys.size(); ++i) {
      if (++cursor[i] < values[i].size()) break;
      cursor[i] = 0;
    }
    if (keys.empty() || i == keys.size()) break;
  }

  // Per-seed results, fixed slots: aggregation order never depends on
  // thread timing.
  struct SlotResult {
    bool ok = false;
    bool ran = false;
    double auc = 0.0, acc = 0.0, val = 0.0;
    std::string error;
  };
  std::vector<std::vector<SlotResult>> slots(
      result.cells.size(), std::vector<SlotResult>(seeds.size()));

  std::vector<CellTask> tasks;
  for (size_t c = 0; c < result.cells.size(); ++c)
    for (size_t s = 0; s < seeds.size(); ++s) tasks.push_back({c, s});

  std::atomic<size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const size_t t = next.fetch_add(1);
      if (t >= tasks.size()) return;
      const CellTask task = tasks[t];
      SlotResult& slot = slots[task.cell_index][task.seed_index];
      slot.ran = true;
      try {
        json cfg = json::parse(result.cells[task.cell_index].config_json);
        cfg["seed"] = seeds[task.seed_index];
        const TrainConfig config = TrainConfig::from_json(cfg.dump());
        const TrainResult r = train(config, ds, dataset_path);
        slot.ok = true;
        slot.auc = r.test_report.auc_macro;
        slot.acc = r.test_report.accuracy;
        slot.val = r.best_val_metric;
      } catch (const std::exception& e) {
        slot.error = e.what();
      }
    }
  };
  const int n_workers = std::max(1, jobs);
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  for (size_t c = 0; c < result.cells.size(); ++c) {
    SweepCell& cell = result.cells[c];
    for (size_t s = 0; s < seeds.size(); ++s) {
      const SlotResult& slot = slots[c][s];
      if (slot.ok) {
        cell.test_auc.push_back(slot.auc);
        cell.test_accuracy.push_back(slot.acc);
        cell.val_metric.push_back(slot.val);
      } else {
        cell.errors.push_back("seed=" + std::to_string(seeds[s]) + ": " +
                              slot.error);
      }
    }
    if (!cell.test_auc.empty()) {
      double mean = 0.0;
      for (const double a : cell.test_auc) mean += a;
      cell.mean_auc = mean / static_cast<double>(cell.test_auc.size());
      cell.std_auc = sample_std(cell.test_auc);
    }
  }

  // Emit both table formats.
  json table = json::array();
  std::ostringstream csv;
  csv << "cell_id,seed,status,test_auc,test_accuracy,val_metric\n";
  for (const SweepCell& cell : result.cells) {
    json jc;
    jc["cell_id"] = cell.cell_id;
    jc["config"] = json::parse(cell.config_json);
    jc["seeds"] = cell.seeds;
    jc["test_auc"] = cell.test_auc;
    jc["test_accuracy"] = cell.test_accuracy;
    jc["val_metric"] = cell.val_metric;
    jc["errors"] = cell.errors;
    jc["mean_auc"] = cell.mean_auc;
    jc["std_auc"] = cell.std_auc;
    table.push_back(jc);

    size_t ok_i = 0, err_i = 0;
    for (size_t s = 0; s < cell.seeds.size(); ++s) {
      const bool ok = slots[&cell - result.cells.data()][s].ok;
      csv << cell.cell_id << ',' << cell.seeds[s] << ','
          << (ok ? "ok" : "error") << ',';
      if (ok) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g",
                      cell.test_auc[ok_i], cell.test_accuracy[ok_i],
                      cell.val_metric[ok_i]);
        csv << buf;
        ++ok_i;
      } else {
        csv << ",,";
        ++err_i;
      }
      csv << '\n';
    }
  }
  result.table_json = table.dump(2) + "\n";
  result.table_csv = csv.str();
  return result;
}

void write_sweep_outputs(const SweepResult& result, const std::string& out_dir) {
  fs::create_directories(out_dir);
  {
    std::ofstream f(fs::path(out_dir) / "sweep_summary.json",
                    std::ios::binary | std::ios::trunc);
    if (!f) throw_data("cannot write sweep_summary.json");
    f << result.table_json;
  }
  std::ofstream f(fs::path(out_dir) / "sweep_results.csv",
                  std::ios::binary | std::ios::trunc);
  if (!f) throw_data("cannot write sweep_results.csv");
  f << result.table_csv;
}

}  // namespace hypcbc::train
