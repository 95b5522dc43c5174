#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace hypcbc::ckpt {

// Versioned binary container: magic "HCKP", u16 version=1, u32 config length,
// UTF-8 config JSON, u32 entry count, then per entry u16 name length, name
// bytes, u8 rank, u64 dims, little-endian f32 payload row-major.
// Save -> load -> save round-trips bit-exactly.
struct NamedTensor {
  std::string name;
  ad::Tensor tensor;  // values quantized through f32 on save
};

struct Checkpoint {
  std::string config_json;
  std::vector<NamedTensor> entries;

  const ad::Tensor* find(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Casts every value through f32 (checkpoint precision) and back.
ad::Tensor quantize_f32(const ad::Tensor& t);

}  // namespace hypcbc::ckpt
