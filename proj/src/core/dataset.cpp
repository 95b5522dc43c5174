#include "core/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace hypcbc::data {

namespace fs = std::filesystem;
using nlohmann::json;

std::string split_tag_name(SplitTag tag) {
  switch (tag) {
    case SplitTag::Train: return "train";
    case SplitTag::Val: return "val";
    case SplitTag::Test: return "test";
    default: return "";
  }
}

SplitTag split_tag_from_string(const std::string& s) {
  if (s == "train") return SplitTag::Train;
  if (s == "val") return SplitTag::Val;
  if (s == "test") return SplitTag::Test;
  if (s.empty()) return SplitTag::None;
  throw_data("unknown split tag '" + s + "'");
}

std::vector<size_t> EmbeddingDataset::split_indices(SplitTag tag) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < split_tags.size(); ++i)
    if (split_tags[i] == tag) out.push_back(i);
  return out;
}

ad::Tensor EmbeddingDataset::gather(const std::vector<size_t>& rows) const {
  ad::Tensor t = ad::Tensor::zeros({rows.size(), dim});
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t j = 0; j < dim; ++j)
      t.at(r, j) = static_cast<double>(embeddings[rows[r] * dim + j]);
  return t;
}

std::vector<int> EmbeddingDataset::gather_class_labels(
    const std::vector<size_t>& rows) const {
  std::vector<int> out(rows.size());
  for (size_t r = 0; r < rows.size(); ++r) out[r] = class_labels[rows[r]];
  return out;
}

std::vector<int> EmbeddingDataset::gather_domain_labels(
    const std::vector<size_t>& rows) const {
  if (!has_domains()) throw_data("dataset has no domain labels");
  std::vector<int> out(rows.size());
  for (size_t r = 0; r < rows.size(); ++r) out[r] = domain_labels[rows[r]];
  return out;
}

void EmbeddingDataset::validate() const {
  const size_t n = class_labels.size();
  if (dim == 0) throw_data("dataset: embedding width is zero");
  if (embeddings.size() != n * dim)
    throw_data("dataset: embedding row count does not match label count");
  if (split_tags.size() != n)
    throw_data("dataset: split tag count does not match label count");
  if (has_domains() && domain_labels.size() != n)
    throw_data("dataset: domain label count does not match label count");

  for (size_t i = 0; i < embeddings.size(); ++i)
    if (!std::isfinite(embeddings[i]))
      throw_data("dataset: non-finite embedding value at row " +
                 std::to_string(i / dim) + ", column " +
                 std::to_string(i % dim));

  if (num_classes < 1) throw_data("dataset: num_classes must be >= 1");
  std::vector<bool> seen(num_classes, false);
  for (size_t i = 0; i < n; ++i) {
    const int32_t c = class_labels[i];
    if (c < 0 || static_cast<size_t>(c) >= num_classes)
      throw_data("dataset: class label out of range at row " +
                 std::to_string(i));
    seen[static_cast<size_t>(c)] = true;
  }
  for (size_t c = 0; c < num_classes; ++c)
    if (!seen[c])
      throw_data("dataset: class labels not contiguous, class " +
                 std::to_string(c) + " has no samples");

  if (has_domains()) {
    for (size_t i = 0; i < n; ++i) {
      const int32_t d = domain_labels[i];
      if (d < 0 || static_cast<size_t>(d) >= num_domains)
        throw_data("dataset: domain label out of range at row " +
                   std::to_string(i));
    }
  }
}

// --- checksums --------------------------------------------------------------

namespace {
std::array<uint32_t, 256> make_crc_table() {
  std::array<uint32_t, 256> table{};
  for (uint32_t i = 0; i < 256; ++i) {
    uint32_t c = i;
    for (int k = 0; k < 8; ++k)
      c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    table[i] = c;
  }
  return table;
}
}  // namespace

uint32_t crc32(const void* data, size_t len) {
  static const std::array<uint32_t, 256> table = make_crc_table();
  const auto* bytes = static_cast<const unsigned char*>(data);
  uint32_t c = 0xFFFFFFFFu;
  for (size_t i = 0; i < len; ++i)
    c = table[(c ^ bytes[i]) & 0xFFu] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

uint32_t crc32(const std::vector<float>& values) {
  return crc32(values.data(), values.size() * sizeof(float));
}

// --- HEMB container ---------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'H', 'E', 'M', 'B'};
constexpr uint16_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "HEMB i/o assumes a little-endian host");

std::string crc_hex(uint32_t crc) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x", crc);
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw_data("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw_data("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (const char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

EmbeddingDataset load_dataset(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::exists(root / "manifest.json"))
    throw_data("no manifest.json under " + dir);

  json manifest;
  try {
    manifest = json::parse(read_file(root / "manifest.json"));
  } catch (const json::exception& e) {
    throw_data("manifest.json is not valid JSON: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != "hemb")
    throw_data("manifest.json: format is not 'hemb'");
  if (manifest.value("version", 0) != 1)
    throw_data("manifest.json: unsupported version");

  EmbeddingDataset ds;
  ds.dim = manifest.at("n").get<size_t>();
  ds.num_classes = manifest.at("num_classes").get<size_t>();
  ds.num_domains = manifest.value("num_domains", 0);
  const size_t expect_rows = manifest.at("num_samples").get<size_t>();

  // embeddings.bin
  const std::string blob = read_file(root / "embeddings.bin");
  if (blob.size() < 18 || std::memcmp(blob.data(), kMagic, 4) != 0)
    throw_data("embeddings.bin: bad magic");
  uint16_t version = 0;
  uint64_t rows = 0;
  uint32_t dim = 0;
  std::memcpy(&version, blob.data() + 4, 2);
  std::memcpy(&rows, blob.data() + 6, 8);
  std::memcpy(&dim, blob.data() + 14, 4);
  if (version != kVersion) throw_data("embeddings.bin: unsupported version");
  if (rows != expect_rows)
    throw_data("embeddings.bin: row count disagrees with manifest");
  if (dim != ds.dim)
    throw_data("embeddings.bin: dim disagrees with manifest");
  const size_t payload = blob.size() - 18;
  if (payload != rows * dim * sizeof(float))
    throw_data("embeddings.bin: truncated payload");
  ds.embeddings.resize(rows * dim);
  std::memcpy(ds.embeddings.data(), blob.data() + 18, payload);

  if (manifest.contains("checksums")) {
    const auto& sums = manifest.at("checksums");
    if (sums.contains("embeddings.bin") &&
        sums.at("embeddings.bin").get<std::string>() !=
            "crc32:" + crc_hex(crc32(ds.embeddings)))
      throw_data("embeddings.bin: checksum mismatch");
  }

  // labels.csv
  std::istringstream labels(read_file(root / "labels.csv"));
  std::string line;
  if (!std::getline(labels, line)) throw_data("labels.csv: empty file");
  if (split_csv_line(line) !=
      std::vector<std::string>{"index", "class", "domain", "split"})
    throw_data("labels.csv: unexpected header");
  ds.class_labels.reserve(expect_rows);
  ds.split_tags.reserve(expect_rows);
  size_t row = 0;
  while (std::getline(labels, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 4)
      throw_data("labels.csv: row " + std::to_string(row) +
                 " does not have 4 fields");
    try {
      if (std::stoull(fields[0]) != row)
        throw_data("labels.csv: row " + std::to_string(row) +
                   " has wrong index");
      ds.class_labels.push_back(std::stoi(fields[1]));
      if (!fields[2].empty())
        ds.domain_labels.push_back(std::stoi(fields[2]));
      else if (!ds.domain_labels.empty())
        throw_data("labels.csv: row " + std::to_string(row) +
                   " is missing a domain label");
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw_data("labels.csv: row " + std::to_string(row) +
                 " has a malformed field");
    }
    ds.split_tags.push_back(split_tag_from_string(fields[3]));
    ++row;
  }
  if (row != expect_rows)
    throw_data("labels.csv: row count disagrees with manifest");
  if (!ds.domain_labels.empty() && ds.domain_labels.size() != row)
    throw_data("labels.csv: domain column is only partially filled");
  if (ds.num_domains == 0 && !ds.domain_labels.empty())
    throw_data("labels.csv has domains but manifest lacks num_domains");

  ds.validate();
  return ds;
}

void save_dataset(const EmbeddingDataset& ds, const std::string& dir) {
  ds.validate();
  const fs::path root(dir);
  fs::create_directories(root);

  std::string blob;
  blob.resize(18 + ds.embeddings.size() * sizeof(float));
  std::memcpy(blob.data(), kMagic, 4);
  const uint16_t version = kVersion;
  const uint64_t rows = ds.num_samples();
  const uint32_t dim = static_cast<uint32_t>(ds.dim);
  std::memcpy(blob.data() + 4, &version, 2);
  std::memcpy(blob.data() + 6, &rows, 8);
  std::memcpy(blob.data() + 14, &dim, 4);
  std::memcpy(blob.data() + 18, ds.embeddings.data(),
              ds.embeddings.size() * sizeof(float));
  write_file_atomic(root / "embeddings.bin", blob);

  std::ostringstream csv;
  csv << "index,class,domain,split\n";
  for (size_t i = 0; i < ds.num_samples(); ++i) {
    csv << i << ',' << ds.class_labels[i] << ',';
    if (ds.has_domains()) csv << ds.domain_labels[i];
    csv << ',' << split_tag_name(ds.split_tags[i]) << '\n';
  }
  const std::string csv_text = csv.str();
  write_file_atomic(root / "labels.csv", csv_text);

  json manifest;
  manifest["format"] = "hemb";
  manifest["version"] = 1;
  manifest["n"] = ds.dim;
  manifest["num_samples"] = ds.num_samples();
  manifest["num_classes"] = ds.num_classes;
  if (ds.has_domains()) manifest["num_domains"] = ds.num_domains;
  manifest["checksums"] = {
      {"embeddings.bin", "crc32:" + crc_hex(crc32(ds.embeddings))},
      {"labels.csv", "crc32:" + crc_hex(crc32(csv_text.data(), csv_text.size()))}};
  write_file_atomic(root / "manifest.json", manifest.dump(2) + "\n");
}

// --- splits -----------------------------------------------------------------

SplitPlan SplitPlan::parse(const std::string& text, uint64_t seed) {
  SplitPlan plan;
  plan.seed = seed;
  if (text == "default") {
    plan.strategy = Strategy::Default;
  } else if (text == "stratified") {
    plan.strategy = Strategy::Stratified;
  } else if (text.rfind("lodo:", 0) == 0) {
    plan.strategy = Strategy::Lodo;
    try {
      plan.holdout_domain = std::stoi(text.substr(5));
    } catch (const std::exception&) {
      throw_config("bad lodo split spec '" + text + "' (expected lodo:<domain>)");
    }
  } else {
    throw_config("unknown split plan '" + text +
                 "' (expected default|stratified|lodo:<domain>)");
  }
  return plan;
}

std::string SplitPlan::describe() const {
  switch (strategy) {
    case Strategy::Default: return "default";
    case Strategy::Stratified: return "stratified";
    default: return "lodo:" + std::to_string(holdout_domain);
  }
}

namespace {

// Per-class shuffled assignment; counts are rounded per class so that the
// proportions hold within one sample per class per split.
void assign_stratified(const std::vector<size_t>& pool,
                       const std::vector<int32_t>& class_labels,
                       size_t num_classes, double train_frac, double val_frac,
                       uint64_t seed, std::string_view stream,
                       std::vector<SplitTag>& tags) {
  std::vector<std::vector<size_t>> by_class(num_classes);
  for (const size_t i : pool)
    by_class[static_cast<size_t>(class_labels[i])].push_back(i);
  for (size_t c = 0; c < num_classes; ++c) {
    auto& rows = by_class[c];
    Rng rng(seed, stream, c);
    rng.shuffle(rows);
    const size_t n = rows.size();
    const size_t n_train =
        static_cast<size_t>(std::llround(train_frac * static_cast<double>(n)));
    const size_t n_val =
        static_cast<size_t>(std::llround(val_frac * static_cast<double>(n)));
    for (size_t k = 0; k < n; ++k) {
      if (k < n_train)
        tags[rows[k]] = SplitTag::Train;
      else if (k < n_train + n_val)
        tags[rows[k]] = SplitTag::Val;
      else
        tags[rows[k]] = SplitTag::Test;
    }
  }
}

}  // namespace

EmbeddingDataset make_split(const EmbeddingDataset& ds, const SplitPlan& plan) {
  EmbeddingDataset out = ds;
  switch (plan.strategy) {
    case SplitPlan::Strategy::Default: {
      for (size_t i = 0; i < out.split_tags.size(); ++i)
        if (out.split_tags[i] == SplitTag::None)
          throw_data("default split plan: row " + std::to_string(i) +
                     " has no split tag");
      return out;
    }
    case SplitPlan::Strategy::Stratified: {
      std::vector<size_t> all(ds.num_samples());
      for (size_t i = 0; i < all.size(); ++i) all[i] = i;
      std::fill(out.split_tags.begin(), out.split_tags.end(), SplitTag::None);
      assign_stratified(all, ds.class_labels, ds.num_classes,
                        plan.train_fraction, plan.val_fraction, plan.seed,
                        "split.stratified", out.split_tags);
      return out;
    }
    case SplitPlan::Strategy::Lodo: {
      if (!ds.has_domains())
        throw_data("lodo split plan requires domain labels");
      if (plan.holdout_domain < 0 ||
          static_cast<size_t>(plan.holdout_domain) >= ds.num_domains)
        throw_config("lodo: held-out domain " +
                     std::to_string(plan.holdout_domain) + " out of range");
      std::vector<size_t> pool;
      size_t heldout_count = 0;
      for (size_t i = 0; i < ds.num_samples(); ++i) {
        if (ds.domain_labels[i] == plan.holdout_domain) {
          out.split_tags[i] = SplitTag::Test;
          ++heldout_count;
        } else {
          out.split_tags[i] = SplitTag::Train;
          pool.push_back(i);
        }
      }
      if (heldout_count == 0)
        throw_data("lodo: held-out domain " +
                   std::to_string(plan.holdout_domain) + " has zero samples");
      if (pool.empty()) throw_data("lodo: no training samples remain");
      // Validation: seeded stratified carve-out from the training domains.
      std::vector<SplitTag> carve(ds.num_samples(), SplitTag::None);
      assign_stratified(pool, ds.class_labels, ds.num_classes,
                        1.0 - plan.val_fraction, plan.val_fraction, plan.seed,
                        "split.lodo_val", carve);
      for (const size_t i : pool)
        if (carve[i] == SplitTag::Val) out.split_tags[i] = SplitTag::Val;
      return out;
    }
  }
  throw_config("unhandled split strategy");
}

// --- batches ----------------------------------------------------------------

BatchIterator::BatchIterator(const EmbeddingDataset& ds, SplitTag tag,
                             size_t batch_size, uint64_t seed, bool drop_last)
    : ds_(&ds),
      indices_(ds.split_indices(tag)),
      batch_size_(batch_size),
      seed_(seed),
      drop_last_(drop_last) {
  if (batch_size_ == 0) throw_config("batch size must be >= 1");
  if (indices_.empty())
    throw_data("split '" + split_tag_name(tag) + "' has no samples");
}

std::vector<std::vector<size_t>> BatchIterator::epoch_batches(
    uint64_t epoch) const {
  std::vector<size_t> order = indices_;
  Rng rng(seed_, "batch.shuffle", epoch);
  rng.shuffle(order);
  std::vector<std::vector<size_t>> batches;
  for (size_t start = 0; start < order.size(); start += batch_size_) {
    const size_t end = std::min(order.size(), start + batch_size_);
    if (drop_last_ && end - start < batch_size_) break;
    batches.emplace_back(order.begin() + static_cast<ptrdiff_t>(start),
                         order.begin() + static_cast<ptrdiff_t>(end));
  }
  return batches;
}

size_t BatchIterator::batches_per_epoch() const {
  if (drop_last_) return indices_.size() / batch_size_;
  return (indices_.size() + batch_size_ - 1) / batch_size_;
}

// --- synthetic data ---------------------------------------------------------

SynthSpec SynthSpec::from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw_config("synth spec is not valid JSON: " + std::string(e.what()));
  }
  SynthSpec spec;
  spec.num_classes = j.value("classes", spec.num_classes);
  spec.num_domains = j.value("domains", spec.num_domains);
  spec.dim = j.value("dim", spec.dim);
  spec.samples = j.value("samples", spec.samples);
  spec.class_separation = j.value("class_separation", spec.class_separation);
  spec.domain_shift = j.value("domain_shift", spec.domain_shift);
  spec.shift_dims = j.value("shift_dims", spec.shift_dims);
  spec.seed = j.value("seed", spec.seed);
  return spec;
}

std::string SynthSpec::to_json() const {
  json j;
  j["classes"] = num_classes;
  j["domains"] = num_domains;
  j["dim"] = dim;
  j["samples"] = samples;
  j["class_separation"] = class_separation;
  j["domain_shift"] = domain_shift;
  j["shift_dims"] = shift_dims;
  j["seed"] = seed;
  return j.dump();
}

EmbeddingDataset synth_generate(const SynthSpec& spec) {
  if (spec.num_classes < 2) throw_config("synth: need at least two classes");
  if (spec.dim == 0 || spec.samples < spec.num_classes)
    throw_config("synth: bad dim/samples");
  if (spec.shift_dims > spec.dim)
    throw_config("synth: shift_dims exceeds dim");

  // Unit-direction class means scaled by the separation.
  std::vector<std::vector<double>> means(spec.num_classes,
                                         std::vector<double>(spec.dim));
  {
    Rng rng(spec.seed, "synth.class_means");
    for (auto& mu : means) {
      double n2 = 0.0;
      for (double& v : mu) {
        v = rng.normal();
        n2 += v * v;
      }
      const double s = spec.class_separation / std::sqrt(n2);
      for (double& v : mu) v *= s;
    }
  }
  // Domain offsets confined to the first shift_dims coordinates.
  std::vector<std::vector<double>> offsets;
  if (spec.num_domains > 0) {
    Rng rng(spec.seed, "synth.domain_offsets");
    offsets.assign(spec.num_domains, std::vector<double>(spec.dim, 0.0));
    for (auto& delta : offsets) {
      double n2 = 0.0;
      for (size_t j = 0; j < spec.shift_dims; ++j) {
        delta[j] = rng.normal();
        n2 += delta[j] * delta[j];
      }
      if (n2 > 0.0) {
        const double s = spec.domain_shift / std::sqrt(n2);
        for (size_t j = 0; j < spec.shift_dims; ++j) delta[j] *= s;
      }
    }
  }

  EmbeddingDataset ds;
  ds.dim = spec.dim;
  ds.num_classes = spec.num_classes;
  ds.num_domains = spec.num_domains;
  ds.embeddings.resize(spec.samples * spec.dim);
  ds.class_labels.resize(spec.samples);
  if (spec.num_domains > 0) ds.domain_labels.resize(spec.samples);
  ds.split_tags.assign(spec.samples, SplitTag::None);

  Rng noise(spec.seed, "synth.noise");
  for (size_t i = 0; i < spec.samples; ++i) {
    const size_t cls = i % spec.num_classes;
    ds.class_labels[i] = static_cast<int32_t>(cls);
    size_t dom = 0;
    if (spec.num_domains > 0) {
      dom = (i / spec.num_classes) % spec.num_domains;
      ds.domain_labels[i] = static_cast<int32_t>(dom);
    }
    for (size_t j = 0; j < spec.dim; ++j) {
      double v = means[cls][j] + noise.normal();
      if (spec.num_domains > 0) v += offsets[dom][j];
      ds.embeddings[i * spec.dim + j] = static_cast<float>(v);
    }
  }

  // Default split tags: seeded stratified 70/10/20.
  SplitPlan plan;
  plan.strategy = SplitPlan::Strategy::Stratified;
  plan.seed = spec.seed;
  ds = make_split(ds, plan);
  ds.validate();
  return ds;
}

}  // namespace hypcbc::data
