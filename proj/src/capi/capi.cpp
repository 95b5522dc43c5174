#include "hypcbc.h"

#include <cstring>
#include <string>

#include <json.hpp>

#include "core/checkpoint.hpp"
#include "core/dataset.hpp"
#include "core/error.hpp"
#include "core/export.hpp"
#include "core/trainer.hpp"
#include "core/workflows.hpp"

using nlohmann::json;

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

hypcbc_status fail(hypcbc_status status, const char* msg) {
  g_last_error = msg;
  return status;
}

// Maps core exceptions onto status codes; runs `fn` and stores any message.
template <typename Fn>
hypcbc_status guarded(Fn&& fn) {
  try {
    fn();
    return HYPCBC_OK;
  } catch (const hypcbc::Error& e) {
    g_last_error = e.what();
    return static_cast<hypcbc_status>(e.status());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return HYPCBC_ERR_INTERNAL;
  }
}

}  // namespace

struct hypcbc_dataset {
  hypcbc::data::EmbeddingDataset ds;
  std::string dir;
};

struct hypcbc_model {
  hypcbc::model::ModelParams params;
  hypcbc::train::TrainConfig config;
  std::string path;
};

extern "C" {

const char* hypcbc_version(void) { return hypcbc::train::kBuildVersion; }

const char* hypcbc_last_error(void) { return g_last_error.c_str(); }

void hypcbc_string_free(char* s) { std::free(s); }

hypcbc_status hypcbc_synth(const char* spec_json, const char* out_dir) {
  if (!spec_json || !out_dir)
    return fail(HYPCBC_ERR_USAGE, "hypcbc_synth: null argument");
  return guarded([&] {
    const auto spec = hypcbc::data::SynthSpec::from_json(spec_json);
    hypcbc::data::save_dataset(hypcbc::data::synth_generate(spec), out_dir);
  });
}

hypcbc_status hypcbc_dataset_open(const char* dir, hypcbc_dataset** out) {
  if (!dir || !out)
    return fail(HYPCBC_ERR_USAGE, "hypcbc_dataset_open: null argument");
  *out = nullptr;
  return guarded([&] {
    auto* handle = new hypcbc_dataset{hypcbc::data::load_dataset(dir), dir};
    *out = handle;
  });
}

void hypcbc_dataset_close(hypcbc_dataset* ds) { delete ds; }

hypcbc_status hypcbc_dataset_info(const hypcbc_dataset* ds, char** json_out) {
  if (!ds || !json_out)
    return fail(HYPCBC_ERR_USAGE, "hypcbc_dataset_info: null argument");
  return guarded([&] {
    json j;
    j["path"] = ds->dir;
    j["n"] = ds->ds.dim;
    j["num_samples"] = ds->ds.num_samples();
    j["num_classes"] = ds->ds.num_classes;
    j["num_domains"] = ds->ds.num_domains;
    j["splits"] = {
        {"train", ds->ds.split_indices(hypcbc::data::SplitTag::Train).size()},
        {"val", ds->ds.split_indices(hypcbc::data::SplitTag::Val).size()},
        {"test", ds->ds.split_indices(hypcbc::data::SplitTag::Test).size()}};
    *json_out = dup_string(j.dump(2) + "\n");
  });
}

hypcbc_status hypcbc_train(const char* config_json, const char* dataset_dir,
                           const char* out_dir, char** manifest_json_out) {
  if (!config_json || !dataset_dir || !out_dir)
    return fail(HYPCBC_ERR_USAGE, "hypcbc_train: null argument");
  return guarded([&] {
    const auto config = hypcbc::train::TrainConfig::from_json(config_json);
    const std::string manifest =
        hypcbc::train::train_to_dir(config, dataset_dir, out_dir);
    if (manifest_json_out) *manifest_json_out = dup_string(manifest);
  });
}

hypcbc_status hypcbc_model_open(const char* checkpoint_path,
                                hypcbc_model** out) {
  if (!checkpoint_path || !out)
    return fail(HYPCBC_ERR_USAGE, "hypcbc_model_open: null argument");
  *out = nullptr;
  return guarded([&] {
    const auto checkpoint = hypcbc::ckpt::load_checkpoint(checkpoint_path);
    hypcbc::train::TrainConfig config;
    auto params = hypcbc::train::params_from_checkpoint(checkpoint, &config);
    *out = new hypcbc_model{std::move(params), config, checkpoint_path};
  });
}

void hypcbc_model_close(hypcbc_model* m) { delete m; }

hypcbc_status hypcbc_model_info(const hypcbc_model* m, char** json_out) {
  if (!m || !json_out)
    return fail(HYPCBC_ERR_USAGE, "hypcbc_model_info: null argument");
  return guarded([&] {
    json j;
    j["path"] = m->path;
    j["config"] = json::parse(m->config.to_json());
    j["input_dim"] = m->params.dims.input_dim;
    j["num_classes"] = m->params.dims.num_classes;
    *json_out = dup_string(j.dump(2) + "\n");
  });
}

hypcbc_status hypcbc_eval(const hypcbc_model* m, const hypcbc_dataset* ds,
                          const char* split, char** report_out) {
  if (!m || !ds || !split)
    return fail(HYPCBC_ERR_USAGE, "hypcbc_eval: null argument");
  return guarded([&] {
    const auto tag = hypcbc::data::split_tag_from_string(split);
    const auto report = hypcbc::train::evaluate(m->params, ds->ds, tag,
                                                m->config.seed);
    if (report_out) *report_out = dup_string(report.to_json() + "\n");
  });
}

hypcbc_status hypcbc_probe(const hypcbc_model* m, const hypcbc_dataset* ds,
                           const char* probe_json, char** report_out) {
  if (!ds || !probe_json)
    return fail(HYPCBC_ERR_USAGE, "hypcbc_probe: null argument");
  return guarded([&] {
    const auto request = hypcbc::workflows::ProbeRequest::from_json(probe_json);
    const std::string report = hypcbc::workflows::run_probe_command(
        m ? &m->params : nullptr, ds->ds, request);
    if (report_out) *report_out = dup_string(report);
  });
}

hypcbc_status hypcbc_entropy(const hypcbc_model* m, const hypcbc_dataset* ds,
                             const char* split, int k, char** report_out) {
  if (!m || !ds || !split)
    return fail(HYPCBC_ERR_USAGE, "hypcbc_entropy: null argument");
  return guarded([&] {
    const size_t kk = k > 0 ? static_cast<size_t>(k) : 15;
    const std::string report =
        hypcbc::workflows::run_entropy_command(m->params, ds->ds, split, kk);
    if (report_out) *report_out = dup_string(report);
  });
}

hypcbc_status hypcbc_export(const hypcbc_model* m, const hypcbc_dataset* ds,
                            const char* what, const char* split,
                            const char* options_json, const char* out_path) {
  if (!what || !out_path)
    return fail(HYPCBC_ERR_USAGE, "hypcbc_export: null argument");
  return guarded([&] {
    const std::string kind = what;
    if (kind == "disk2d") {
      if (!m || !ds)
        hypcbc::throw_usage("disk2d export needs a model and a dataset");
      const auto tag =
          hypcbc::data::split_tag_from_string(split ? split : "train");
      hypcbc::exporter::export_disk_embeddings(m->params, ds->ds, tag,
                                               out_path);
      return;
    }
    if (kind == "boundary_toy") {
      hypcbc::exporter::BoundaryToySpec spec;
      if (options_json && *options_json) {
        json j;
        try {
          j = json::parse(options_json);
        } catch (const json::exception& e) {
          hypcbc::throw_config("export options are not valid JSON: " +
                               std::string(e.what()));
        }
        if (j.contains("p")) spec.p = j.at("p").get<std::vector<double>>();
        if (j.contains("normal"))
          spec.normal = j.at("normal").get<std::vector<double>>();
        spec.curvature = j.value("curvature", spec.curvature);
        spec.seed = j.value("seed", spec.seed);
      }
      hypcbc::exporter::export_boundary_toy(spec, out_path);
      return;
    }
    hypcbc::throw_config("unknown export kind '" + kind +
                         "' (expected disk2d|boundary_toy)");
  });
}

hypcbc_status hypcbc_sweep(const char* grid_json, const char* base_config_json,
                           const char* dataset_dir, const char* out_dir,
                           const unsigned long long* seeds, size_t n_seeds,
                           int jobs, char** table_json_out) {
  if (!grid_json || !base_config_json || !dataset_dir || !out_dir)
    return fail(HYPCBC_ERR_USAGE, "hypcbc_sweep: null argument");
  return guarded([&] {
    const auto base = hypcbc::train::TrainConfig::from_json(base_config_json);
    const auto ds = hypcbc::data::load_dataset(dataset_dir);
    std::vector<uint64_t> seed_list;
    if (seeds && n_seeds > 0)
      seed_list.assign(seeds, seeds + n_seeds);
    else
      seed_list = {0, 1, 2, 3, 4};
    const auto result = hypcbc::train::sweep(grid_json, base, ds, dataset_dir,
                                             seed_list, jobs);
    hypcbc::train::write_sweep_outputs(result, out_dir);
    if (table_json_out) *table_json_out = dup_string(result.table_json);
  });
}

}  // extern "C"
