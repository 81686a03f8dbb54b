#pragma once
// Checkpoint file: magic "NMTWP1\0", then per tensor a u32 name length,
// the UTF-8 name, u32 rank, u32 dims, raw float32 data, all little-endian,
// closed by a u64 tensor count. Model dims are recovered from the stored
// shapes, so a checkpoint is self-describing.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "nmtwp/model.hpp"

namespace nmtwp {

struct TensorRecord {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

namespace ckpt {

constexpr char kMagic[7] = {'N', 'M', 'T', 'W', 'P', '1', '\0'};

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32(const std::string& buf, std::size_t& at) {
  if (at + 4 > buf.size()) throw std::runtime_error("checkpoint truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[at + static_cast<std::size_t>(i)])) << (8 * i);
  at += 4;
  return v;
}

inline std::uint64_t get_u64(const std::string& buf, std::size_t& at) {
  if (at + 8 > buf.size()) throw std::runtime_error("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[at + static_cast<std::size_t>(i)])) << (8 * i);
  at += 8;
  return v;
}

}  // namespace ckpt

inline void write_checkpoint(const std::string& path,
                             const std::vector<TensorRecord>& records) {
  std::string out(ckpt::kMagic, sizeof(ckpt::kMagic));
  for (const auto& r : records) {
    ckpt::put_u32(out, static_cast<std::uint32_t>(r.name.size()));
    out += r.name;
    ckpt::put_u32(out, static_cast<std::uint32_t>(r.shape.size()));
    for (int d : r.shape) ckpt::put_u32(out, static_cast<std::uint32_t>(d));
    const std::size_t bytes = r.data.size() * sizeof(float);
    const std::size_t start = out.size();
    out.resize(start + bytes);
    std::memcpy(out.data() + start, r.data.data(), bytes);
  }
  ckpt::put_u64(out, static_cast<std::uint64_t>(records.size()));
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write checkpoint " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("failed writing checkpoint " + path);
}

inline std::vector<TensorRecord> read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read checkpoint " + path);
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());
  if (buf.size() < sizeof(ckpt::kMagic) + 8 ||
      std::memcmp(buf.data(), ckpt::kMagic, sizeof(ckpt::kMagic)) != 0)
    throw std::runtime_error(path + " is not a checkpoint file");
  std::size_t at = sizeof(ckpt::kMagic);
  std::vector<TensorRecord> records;
  // Records fill everything up to the trailing count.
  while (buf.size() - at > 8) {
    TensorRecord r;
    const std::uint32_t name_len = ckpt::get_u32(buf, at);
    if (at + name_len > buf.size()) throw std::runtime_error("checkpoint truncated");
    r.name.assign(buf, at, name_len);
    at += name_len;
    const std::uint32_t rank = ckpt::get_u32(buf, at);
    if (rank > 2) throw std::runtime_error("checkpoint tensor rank " +
                                           std::to_string(rank) + " unsupported");
    std::size_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const std::uint32_t d = ckpt::get_u32(buf, at);
      r.shape.push_back(static_cast<int>(d));
      numel *= d;
    }
    const std::size_t bytes = numel * sizeof(float);
    if (at + bytes > buf.size() - 8) throw std::runtime_error("checkpoint truncated");
    r.data.resize(numel);
    std::memcpy(r.data.data(), buf.data() + at, bytes);
    at += bytes;
    records.push_back(std::move(r));
  }
  const std::uint64_t count = ckpt::get_u64(buf, at);
  if (count != records.size())
    throw std::runtime_error("checkpoint trailer count " + std::to_string(count) +
                             " does not match " + std::to_string(records.size()) +
                             " tensors read");
  return records;
}

template <class T>
void save_model(const std::string& path, const ModelParams<T>& m) {
  if (std::filesystem::exists(path))
    throw std::runtime_error("checkpoint " + path + " already exists");
  std::vector<TensorRecord> records;
  for (const auto& [name, t] : m.named_tensors()) {
    TensorRecord r;
    r.name = name;
    r.shape = t.shape();
    r.data.reserve(t.numel());
    for (const T& v : t.data()) r.data.push_back(static_cast<float>(v));
    records.push_back(std::move(r));
  }
  write_checkpoint(path, records);
}

template <class T>
ModelParams<T> load_model(const std::string& path) {
  std::map<std::string, TensorRecord> by_name;
  bool has_wpe = false, has_wpd = false;
  for (auto& r : read_checkpoint(path)) {
    if (r.name.rfind("wpe.", 0) == 0) has_wpe = true;
    if (r.name.rfind("wpd.", 0) == 0) has_wpd = true;
    if (!by_name.emplace(r.name, std::move(r)).second)
      throw std::runtime_error("checkpoint has duplicate tensor " + r.name);
  }
  auto shape_of = [&](const std::string& name) -> const Shape& {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw std::runtime_error("checkpoint missing tensor " + name);
    return it->second.shape;
  };
  ModelDims dims;
  dims.v_src = shape_of("encoder.emb")[0];
  dims.d_emb = shape_of("encoder.emb")[1];
  dims.d_hid = shape_of("encoder.W_s")[0];
  dims.v_tgt = shape_of("decoder.emb")[0];
  dims.d_att = shape_of("decoder.att.W")[0];
  dims.d_readout = shape_of("decoder.W_t")[0];

  ModelParams<T> m = alloc_model<T>(dims, has_wpe, has_wpd);
  std::size_t used = 0;
  for (auto& [name, t] : m.named_tensors()) {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw std::runtime_error("checkpoint missing tensor " + name);
    const TensorRecord& r = it->second;
    if (r.shape != t.shape())
      throw std::runtime_error("checkpoint tensor " + name + " has shape " +
                               shape_str(r.shape) + ", expected " +
                               shape_str(t.shape()));
    for (std::size_t i = 0; i < r.data.size(); ++i)
      t.data()[i] = static_cast<T>(r.data[i]);
    ++used;
  }
  if (used != by_name.size())
    throw std::runtime_error("checkpoint contains unrecognized tensors");
  return m;
}

}  // namespace nmtwp
