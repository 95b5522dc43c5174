#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace hypcbc::data {

enum class SplitTag : uint8_t { None = 0, Train, Val, Test };

std::string split_tag_name(SplitTag tag);
SplitTag split_tag_from_string(const std::string& s);

// Precomputed backbone embeddings with labels and split assignment.
// Immutable after load; split re-assignment returns a copy.
struct EmbeddingDataset {
  size_t dim = 0;
  size_t num_classes = 0;
  size_t num_domains = 0;  // 0 = no domain labels
  std::vector<float> embeddings;  // row-major, num_samples x dim
  std::vector<int32_t> class_labels;
  std::vector<int32_t> domain_labels;  // empty when num_domains == 0
  std::vector<SplitTag> split_tags;

  size_t num_samples() const { return class_labels.size(); }
  bool has_domains() const { return num_domains > 0; }

  std::vector<size_t> split_indices(SplitTag tag) const;
  // Rows gathered into a double-precision {n, dim} tensor.
  ad::Tensor gather(const std::vector<size_t>& rows) const;
  std::vector<int> gather_class_labels(const std::vector<size_t>& rows) const;
  std::vector<int> gather_domain_labels(const std::vector<size_t>& rows) const;

  void validate() const;  // throws Error(Data) naming the offending row/field
};

// HEMB container: directory with manifest.json + embeddings.bin + labels.csv.
// embeddings.bin: magic "HEMB", u16 version=1, u64 rows, u32 dim, then
// little-endian f32 row-major. labels.csv: header index,class,domain,split.
EmbeddingDataset load_dataset(const std::string& dir);
void save_dataset(const EmbeddingDataset& ds, const std::string& dir);

uint32_t crc32(const void* data, size_t len);
uint32_t crc32(const std::vector<float>& values);

struct SplitPlan {
  enum class Strategy { Default, Stratified, Lodo };
  Strategy strategy = Strategy::Default;
  int holdout_domain = -1;  // Lodo only
  uint64_t seed = 0;
  // Stratified ratios; Lodo carves the validation fraction from the
  // training domains.
  double train_fraction = 0.7;
  double val_fraction = 0.1;

  static SplitPlan parse(const std::string& text, uint64_t seed);
  std::string describe() const;
};

EmbeddingDataset make_split(const EmbeddingDataset& ds, const SplitPlan& plan);

// Deterministic shuffled batches over one split.
class BatchIterator {
 public:
  BatchIterator(const EmbeddingDataset& ds, SplitTag tag, size_t batch_size,
                uint64_t seed, bool drop_last = false);

  // Shuffles the index order for the given epoch; returns batches of indices.
  std::vector<std::vector<size_t>> epoch_batches(uint64_t epoch) const;
  size_t batches_per_epoch() const;
  size_t split_size() const { return indices_.size(); }

 private:
  const EmbeddingDataset* ds_;
  std::vector<size_t> indices_;
  size_t batch_size_;
  uint64_t seed_;
  bool drop_last_;
};

// Synthetic stand-in for frozen-backbone features: Gaussian class clusters
// plus a domain-specific offset confined to the first `shift_dims`
// coordinates.
struct SynthSpec {
  size_t num_classes = 3;
  size_t num_domains = 0;
  size_t dim = 64;
  size_t samples = 3000;
  double class_separation = 6.0;
  double domain_shift = 0.0;
  size_t shift_dims = 4;
  uint64_t seed = 0;

  static SynthSpec from_json(const std::string& json_text);
  std::string to_json() const;
};

EmbeddingDataset synth_generate(const SynthSpec& spec);

}  // namespace hypcbc::data
