#include "core/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "core/error.hpp"

namespace hypcbc::ckpt {

namespace {

constexpr char kMagic[4] = {'H', 'C', 'K', 'P'};
constexpr uint16_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint i/o assumes a little-endian host");

template <typename T>
void put(std::string& out, T value) {
  const size_t at = out.size();
  out.resize(at + sizeof(T));
  std::memcpy(out.data() + at, &value, sizeof(T));
}

template <typename T>
T take(const std::string& in, size_t& at) {
  if (at + sizeof(T) > in.size()) throw_data("checkpoint: truncated file");
  T value;
  std::memcpy(&value, in.data() + at, sizeof(T));
  at += sizeof(T);
  return value;
}

}  // namespace

const ad::Tensor* Checkpoint::find(const std::string& name) const {
  for (const NamedTensor& e : entries)
    if (e.name == name) return &e.tensor;
  return nullptr;
}

ad::Tensor quantize_f32(const ad::Tensor& t) {
  ad::Tensor out = t;
  for (double& v : out.values)
    v = static_cast<double>(static_cast<float>(v));
  return out;
}

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::string out;
  out.append(kMagic, 4);
  put<uint16_t>(out, kVersion);
  put<uint32_t>(out, static_cast<uint32_t>(c.config_json.size()));
  out.append(c.config_json);
  put<uint32_t>(out, static_cast<uint32_t>(c.entries.size()));
  for (const NamedTensor& e : c.entries) {
    put<uint16_t>(out, static_cast<uint16_t>(e.name.size()));
    out.append(e.name);
    put<uint8_t>(out, static_cast<uint8_t>(e.tensor.shape.size()));
    for (const size_t d : e.tensor.shape) put<uint64_t>(out, d);
    for (const double v : e.tensor.values)
      put<float>(out, static_cast<float>(v));
  }
  const std::filesystem::path target(path);
  const std::filesystem::path tmp(path + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw_data("cannot write checkpoint " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw_data("short write to checkpoint " + path);
  }
  std::filesystem::rename(tmp, target);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw_data("cannot open checkpoint " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  const std::string in = ss.str();

  size_t at = 0;
  if (in.size() < 4 || std::memcmp(in.data(), kMagic, 4) != 0)
    throw_data("checkpoint: bad magic");
  at = 4;
  if (take<uint16_t>(in, at) != kVersion)
    throw_data("checkpoint: unsupported version");

  Checkpoint c;
  const uint32_t config_len = take<uint32_t>(in, at);
  if (at + config_len > in.size()) throw_data("checkpoint: truncated config");
  c.config_json = in.substr(at, config_len);
  at += config_len;

  const uint32_t n_entries = take<uint32_t>(in, at);
  c.entries.reserve(n_entries);
  for (uint32_t e = 0; e < n_entries; ++e) {
    NamedTensor nt;
    const uint16_t name_len = take<uint16_t>(in, at);
    if (at + name_len > in.size()) throw_data("checkpoint: truncated name");
    nt.name = in.substr(at, name_len);
    at += name_len;
    const uint8_t rank = take<uint8_t>(in, at);
    std::vector<size_t> shape(rank);
    size_t count = 1;
    for (uint8_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<size_t>(take<uint64_t>(in, at));
      count *= shape[d];
    }
    std::vector<double> values(count);
    for (size_t i = 0; i < count; ++i)
      values[i] = static_cast<double>(take<float>(in, at));
    nt.tensor = ad::Tensor(std::move(shape), std::move(values));
    c.entries.push_back(std::move(nt));
  }
  if (at != in.size()) throw_data("checkpoint: trailing bytes");
  return c;
}

}  // namespace hypcbc::ckpt
