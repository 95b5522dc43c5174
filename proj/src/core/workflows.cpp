#include "core/workflows.hpp"

#include <json.hpp>

#include "core/error.hpp"
#include "core/metrics.hpp"

namespace hypcbc::workflows {

using nlohmann::json;

namespace {

std::vector<size_t> rows_for_split(const data::EmbeddingDataset& ds,
                                   const std::string& split) {
  if (split == "all") {
    std::vector<size_t> all(ds.num_samples());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  const data::SplitTag tag = data::split_tag_from_string(split);
  std::vector<size_t> rows = ds.split_indices(tag);
  if (rows.empty()) throw_data("split '" + split + "' has no samples");
  return rows;
}

}  // namespace

ProbeRequest ProbeRequest::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw_config("probe config is not valid JSON: " + std::string(e.what()));
  }
  ProbeRequest r;
  r.kind = j.value("kind", r.kind);
  r.target = j.value("target", r.target);
  r.layer = j.value("layer", r.layer);
  r.branch = j.value("branch", r.branch);
  r.split = j.value("split", r.split);
  r.epochs = j.value("epochs", r.epochs);
  r.lr = j.value("lr", r.lr);
  r.hidden = j.value("hidden", r.hidden);
  r.seed = j.value("seed", r.seed);
  if (r.kind != "linear" && r.kind != "mlp")
    throw_config("probe kind must be linear or mlp");
  if (r.target != "class" && r.target != "domain")
    throw_config("probe target must be class or domain");
  if (r.layer != "backbone" && r.layer != "premap" && r.layer != "postmap")
    throw_config("probe layer must be backbone, premap or postmap");
  if (r.epochs < 1) throw_config("probe epochs must be >= 1");
  if (!(r.lr > 0.0)) throw_config("probe lr must be positive");
  return r;
}

std::string run_probe_command(const model::ModelParams* params,
                              const data::EmbeddingDataset& ds,
                              const ProbeRequest& request) {
  if (request.target == "domain" && !ds.has_domains())
    throw_data("probe target is domain but the dataset has no domain labels");
  if (request.layer != "backbone" && params == nullptr)
    throw_config("probing layer '" + request.layer + "' needs a checkpoint");

  const std::vector<size_t> rows = rows_for_split(ds, request.split);
  ad::Tensor embeddings;
  if (request.layer == "backbone") {
    embeddings = ds.gather(rows);
  } else {
    constexpr size_t kChunk = 256;
    const ad::Tensor first = model::eval_embedding(
        *params, ds.gather({rows[0]}), request.branch, request.layer);
    embeddings = ad::Tensor::zeros({rows.size(), first.cols()});
    for (size_t start = 0; start < rows.size(); start += kChunk) {
      const size_t end = std::min(rows.size(), start + kChunk);
      const std::vector<size_t> chunk(
          rows.begin() + static_cast<ptrdiff_t>(start),
          rows.begin() + static_cast<ptrdiff_t>(end));
      const ad::Tensor z = model::eval_embedding(*params, ds.gather(chunk),
                                                 request.branch, request.layer);
      for (size_t i = 0; i < chunk.size(); ++i)
        for (size_t j = 0; j < z.cols(); ++j)
          embeddings.at(start + i, j) = z.at(i, j);
    }
  }

  const std::vector<int> targets = request.target == "class"
                                       ? ds.gather_class_labels(rows)
                                       : ds.gather_domain_labels(rows);
  metrics::ProbeConfig cfg;
  cfg.kind = request.kind == "mlp" ? metrics::ProbeConfig::Kind::Mlp
                                   : metrics::ProbeConfig::Kind::Linear;
  cfg.epochs = request.epochs;
  cfg.lr = request.lr;
  cfg.hidden = request.hidden;
  metrics::MetricsReport report =
      metrics::run_probe(embeddings, targets, cfg, request.seed);

  json j = json::parse(report.to_json());
  j["probe"] = {{"kind", request.kind},   {"target", request.target},
                {"layer", request.layer}, {"branch", request.branch},
                {"split", request.split}, {"epochs", request.epochs},
                {"lr", request.lr},
                {"hidden", request.kind == "mlp" ? json(request.hidden) : json()}};
  return j.dump(2) + "\n";
}

std::string run_entropy_command(const model::ModelParams& params,
                                const data::EmbeddingDataset& ds,
                                const std::string& split, size_t k) {
  if (params.method == model::Method::Erm)
    throw_config("entropy needs a hyperbolic model");
  const int branch = params.method == model::Method::HypCbc ? 2 : 1;
  const std::vector<size_t> rows = rows_for_split(ds, split);

  constexpr size_t kChunk = 256;
  std::vector<std::vector<double>> points;
  points.reserve(rows.size());
  for (size_t start = 0; start < rows.size(); start += kChunk) {
    const size_t end = std::min(rows.size(), start + kChunk);
    const std::vector<size_t> chunk(rows.begin() + static_cast<ptrdiff_t>(start),
                                    rows.begin() + static_cast<ptrdiff_t>(end));
    const ad::Tensor z =
        model::eval_embedding(params, ds.gather(chunk), branch, "postmap");
    for (size_t i = 0; i < chunk.size(); ++i) {
      std::vector<double> p(z.cols());
      for (size_t j = 0; j < z.cols(); ++j) p[j] = z.at(i, j);
      points.push_back(std::move(p));
    }
  }

  const metrics::EntropyReport class_report = metrics::knn_entropy(
      points, params.curvature, ds.gather_class_labels(rows), k);

  json j;
  j["k"] = k;
  j["split"] = split;
  j["branch"] = branch;
  j["entropy_class"] = class_report.mean_entropy;
  if (ds.has_domains()) {
    const metrics::EntropyReport domain_report = metrics::knn_entropy(
        points, params.curvature, ds.gather_domain_labels(rows), k);
    j["entropy_domain"] = domain_report.mean_entropy;
  }
  return j.dump(2) + "\n";
}

}  // namespace hypcbc::workflows
