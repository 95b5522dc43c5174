#include "core/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <json.hpp>

#include "core/autodiff.hpp"
#include "core/error.hpp"
#include "core/geometry.hpp"
#include "core/optimizer.hpp"
#include "core/rng.hpp"

namespace hypcbc::metrics {

using ad::Tensor;

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  j["accuracy"] = accuracy;
  j["auc_macro"] = auc_macro;
  nlohmann::json aucs = nlohmann::json::array();
  for (const double a : per_class_auc) {
    if (std::isnan(a))
      aucs.push_back(nullptr);
    else
      aucs.push_back(a);
  }
  j["per_class_auc"] = aucs;
  j["skipped_classes"] = skipped_classes;
  j["loss"] = loss;
  j["split"] = split;
  j["seed"] = seed;
  return j.dump(2);
}

double accuracy(const std::vector<int>& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size())
    throw_usage("accuracy: prediction/label length mismatch");
  if (preds.empty()) throw_usage("accuracy: empty input");
  size_t correct = 0;
  for (size_t i = 0; i < preds.size(); ++i)
    if (preds[i] == labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

double auc_binary(const std::vector<double>& score,
                  const std::vector<char>& is_positive) {
  const size_t n = score.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return score[a] < score[b];
  });

  // Average ranks over tie groups, then the Mann-Whitney statistic.
  std::vector<double> rank(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && score[order[j + 1]] == score[order[i]]) ++j;
    const double avg =
        (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  double rank_sum = 0.0;
  size_t n_pos = 0;
  for (size_t s = 0; s < n; ++s) {
    if (is_positive[s]) {
      rank_sum += rank[s];
      ++n_pos;
    }
  }
  const size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw_usage("auc: need both positive and negative samples");
  return (rank_sum -
          static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0) /
         (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double auc_macro(const Tensor& scores, const std::vector<int>& labels,
                 std::vector<double>* per_class, std::vector<int>* skipped) {
  const size_t n = scores.rows();
  const size_t num_classes = scores.cols();
  if (num_classes < 2) throw_usage("auc_macro: need at least two score columns");
  if (labels.size() != n) throw_usage("auc_macro: label count mismatch");

  double sum = 0.0;
  size_t used = 0;
  if (per_class) per_class->assign(num_classes, std::nan(""));
  if (skipped) skipped->clear();
  for (size_t k = 0; k < num_classes; ++k) {
    std::vector<double> col(n);
    std::vector<char> pos(n);
    size_t n_pos = 0;
    for (size_t s = 0; s < n; ++s) {
      col[s] = scores.at(s, k);
      pos[s] = labels[s] == static_cast<int>(k) ? 1 : 0;
      n_pos += pos[s];
    }
    if (n_pos == 0 || n_pos == n) {
      if (skipped) skipped->push_back(static_cast<int>(k));
      continue;
    }
    const double auc = auc_binary(col, pos);
    if (per_class) (*per_class)[k] = auc;
    sum += auc;
    ++used;
  }
  if (used == 0)
    throw_data("auc_macro: every class was degenerate (no positives or no "
               "negatives)");
  return sum / static_cast<double>(used);
}

namespace {

// Seeded stratified 80/20 split of [0, n) by target value.
void probe_split(const std::vector<int>& targets, uint64_t seed,
                 std::vector<size_t>& train, std::vector<size_t>& heldout) {
  std::map<int, std::vector<size_t>> by_target;
  for (size_t i = 0; i < targets.size(); ++i) by_target[targets[i]].push_back(i);
  if (by_target.size() < 2)
    throw_data("probe: targets contain a single class");
  size_t salt = 0;
  for (auto& [t, rows] : by_target) {
    Rng rng(seed, "probe.split", salt++);
    rng.shuffle(rows);
    const size_t n_train =
        static_cast<size_t>(std::llround(0.8 * static_cast<double>(rows.size())));
    for (size_t k = 0; k < rows.size(); ++k)
      (k < n_train ? train : heldout).push_back(rows[k]);
  }
  std::sort(train.begin(), train.end());
  std::sort(heldout.begin(), heldout.end());
  if (train.empty() || heldout.empty())
    throw_data("probe: split produced an empty side");
}

Tensor gather_rows(const Tensor& m, const std::vector<size_t>& rows) {
  Tensor out = Tensor::zeros({rows.size(), m.cols()});
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t j = 0; j < m.cols(); ++j) out.at(r, j) = m.at(rows[r], j);
  return out;
}

}  // namespace

MetricsReport run_probe(const Tensor& embeddings, const std::vector<int>& targets,
                        const ProbeConfig& cfg, uint64_t seed) {
  const size_t n = embeddings.rows();
  if (targets.size() != n) throw_usage("probe: target count mismatch");

  int max_target = 0;
  for (const int t : targets) {
    if (t < 0) throw_data("probe: negative target label");
    max_target = std::max(max_target, t);
  }
  const size_t num_classes = static_cast<size_t>(max_target) + 1;

  std::vector<size_t> train_rows, heldout_rows;
  probe_split(targets, seed, train_rows, heldout_rows);

  const size_t in_dim = embeddings.cols();
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(in_dim));
  Rng wrng(seed, "probe.init");
  const bool mlp = cfg.kind == ProbeConfig::Kind::Mlp;
  const size_t mid = mlp ? cfg.hidden : num_classes;

  Tensor w1 = Tensor::zeros({mid, in_dim});
  for (double& v : w1.values) v = wrng.uniform(-bound1, bound1);
  Tensor b1 = Tensor::zeros({mid});
  Tensor w2, b2;
  if (mlp) {
    const double bound2 = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
    w2 = Tensor::zeros({num_classes, cfg.hidden});
    for (double& v : w2.values) v = wrng.uniform(-bound2, bound2);
    b2 = Tensor::zeros({num_classes});
  }

  opt::AdamWConfig ocfg;
  ocfg.weight_decay = cfg.weight_decay;
  opt::AdamW optimizer(ocfg);
  optimizer.register_param("w1", &w1);
  optimizer.register_param("b1", &b1);
  if (mlp) {
    optimizer.register_param("w2", &w2);
    optimizer.register_param("b2", &b2);
  }

  // Plain AdamW at a fixed learning rate over shuffled mini-batches.
  std::vector<size_t> order = train_rows;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(seed, "probe.shuffle", static_cast<uint64_t>(epoch));
    shuffle_rng.shuffle(order);
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::vector<size_t> batch(order.begin() + static_cast<ptrdiff_t>(start),
                                      order.begin() + static_cast<ptrdiff_t>(end));
      Tensor x = gather_rows(embeddings, batch);
      std::vector<int> y(batch.size());
      for (size_t i = 0; i < batch.size(); ++i) y[i] = targets[batch[i]];

      ad::Tape tape;
      const ad::Var xv = tape.constant(std::move(x));
      const ad::Var w1v = tape.param(w1);
      const ad::Var b1v = tape.param(b1);
      ad::Var logits;
      ad::Var w2v{}, b2v{};
      if (mlp) {
        w2v = tape.param(w2);
        b2v = tape.param(b2);
        logits = tape.linear(tape.relu(tape.linear(xv, w1v, b1v)), w2v, b2v);
      } else {
        logits = tape.linear(xv, w1v, b1v);
      }
      const ad::Var loss = tape.cross_entropy_mean(logits, y);
      tape.backward(loss);

      std::vector<std::pair<std::string, const Tensor*>> grads;
      grads.emplace_back("w1", &tape.grad(w1v));
      grads.emplace_back("b1", &tape.grad(b1v));
      if (mlp) {
        grads.emplace_back("w2", &tape.grad(w2v));
        grads.emplace_back("b2", &tape.grad(b2v));
      }
      optimizer.step(grads, cfg.lr);
    }
  }

  // Held-out evaluation.
  Tensor hx = gather_rows(embeddings, heldout_rows);
  std::vector<int> hy(heldout_rows.size());
  for (size_t i = 0; i < heldout_rows.size(); ++i) hy[i] = targets[heldout_rows[i]];
  ad::Tape tape;
  const ad::Var xv = tape.constant(std::move(hx));
  ad::Var logits_v;
  if (mlp) {
    logits_v = tape.linear(tape.relu(tape.linear(xv, tape.constant(w1),
                                                 tape.constant(b1))),
                           tape.constant(w2), tape.constant(b2));
  } else {
    logits_v = tape.linear(xv, tape.constant(w1), tape.constant(b1));
  }
  const Tensor logits = tape.value(logits_v);

  MetricsReport report;
  report.seed = seed;
  report.split = "probe-heldout";
  report.loss = [&] {
    ad::Tape t2;
    return t2.value(t2.cross_entropy_mean(t2.constant(logits), hy)).values[0];
  }();
  std::vector<int> preds(logits.rows());
  for (size_t i = 0; i < logits.rows(); ++i) {
    size_t best = 0;
    for (size_t j = 1; j < logits.cols(); ++j)
      if (logits.at(i, j) > logits.at(i, best)) best = j;
    preds[i] = static_cast<int>(best);
  }
  report.accuracy = accuracy(preds, hy);

  // AUC over softmax scores (rank statistics are scale-free per column).
  Tensor probs = Tensor::zeros(logits.shape);
  for (size_t i = 0; i < logits.rows(); ++i) {
    double m = logits.at(i, 0);
    for (size_t j = 1; j < logits.cols(); ++j) m = std::max(m, logits.at(i, j));
    double s = 0.0;
    for (size_t j = 0; j < logits.cols(); ++j) {
      probs.at(i, j) = std::exp(logits.at(i, j) - m);
      s += probs.at(i, j);
    }
    for (size_t j = 0; j < logits.cols(); ++j) probs.at(i, j) /= s;
  }
  report.auc_macro =
      auc_macro(probs, hy, &report.per_class_auc, &report.skipped_classes);
  return report;
}

EntropyReport knn_entropy(const std::vector<std::vector<double>>& points,
                          double curvature, const std::vector<int>& labels,
                          size_t k) {
  const size_t n = points.size();
  if (labels.size() != n) throw_usage("knn_entropy: label count mismatch");
  if (k >= n) throw_usage("knn_entropy: k must be smaller than the point count");
  if (k == 0) throw_usage("knn_entropy: k must be >= 1");

  std::map<int, size_t> label_ids;
  for (const int l : labels) label_ids.emplace(l, label_ids.size());
  const size_t num_labels = label_ids.size();

  EntropyReport report;
  report.k = k;
  if (num_labels < 2) return report;  // single label: entropy defined as 0

  const double log_l = std::log(static_cast<double>(num_labels));
  double total = 0.0;
  std::vector<std::pair<double, size_t>> dists(n - 1);
  std::vector<size_t> counts(num_labels);
  for (size_t i = 0; i < n; ++i) {
    size_t m = 0;
    for (size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      dists[m++] = {geom::dist(points[i], points[j], curvature), j};
    }
    std::partial_sort(dists.begin(), dists.begin() + static_cast<ptrdiff_t>(k),
                      dists.end());
    std::fill(counts.begin(), counts.end(), 0);
    for (size_t t = 0; t < k; ++t)
      ++counts[label_ids.at(labels[dists[t].second])];
    double h = 0.0;
    for (const size_t c : counts) {
      if (c == 0) continue;
      const double p = static_cast<double>(c) / static_cast<double>(k);
      h -= p * std::log(p);
    }
    total += h / log_l;
  }
  report.mean_entropy = total / static_cast<double>(n);
  return report;
}

}  // namespace hypcbc::metrics
