#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "meshgrow/errors.hpp"

namespace meshgrow {

// Single-file checkpoint container. Layout, all integers little-endian:
//   magic "MGAN", version u32, blob count u32, then per blob:
//   name length u32, name bytes, dtype u8, rank u32, extents u64[rank],
//   raw little-endian values.
enum class DType : uint8_t { kF32 = 0, kF64 = 1, kI64 = 2, kU8 = 3 };

size_t dtype_size(DType t);

template <typename T>
constexpr DType dtype_of() {
  if constexpr (std::is_same_v<T, float>) return DType::kF32;
  else if constexpr (std::is_same_v<T, double>) return DType::kF64;
  else if constexpr (std::is_same_v<T, int64_t>) return DType::kI64;
  else return DType::kU8;
}

struct TensorBlob {
  std::string name;
  DType dtype = DType::kF32;
  std::vector<uint64_t> extents;
  std::vector<uint8_t> bytes;

  uint64_t numel() const {
    uint64_t n = 1;
    for (uint64_t e : extents) n *= e;
    return n;
  }

  template <typename T>
  static TensorBlob from_values(std::string name,
                                std::vector<uint64_t> extents,
                                const std::vector<T>& values) {
    TensorBlob b;
    b.name = std::move(name);
    b.dtype = dtype_of<T>();
    b.extents = std::move(extents);
    b.bytes.resize(values.size() * sizeof(T));
    std::memcpy(b.bytes.data(), values.data(), b.bytes.size());
    if (b.numel() != values.size()) {
      throw ContractError("checkpoint: extents do not match value count for " +
                          b.name);
    }
    return b;
  }

  static TensorBlob from_string(std::string name, const std::string& text) {
    TensorBlob b;
    b.name = std::move(name);
    b.dtype = DType::kU8;
    b.extents = {text.size()};
    b.bytes.assign(text.begin(), text.end());
    return b;
  }

  static TensorBlob from_i64(std::string name, int64_t value) {
    return from_values<int64_t>(std::move(name), {1}, {value});
  }

  template <typename T>
  std::vector<T> values() const {
    if (dtype != dtype_of<T>()) {
      throw IoError("checkpoint: dtype mismatch reading " + name);
    }
    std::vector<T> out(numel());
    std::memcpy(out.data(), bytes.data(), bytes.size());
    return out;
  }

  std::string as_string() const {
    return std::string(bytes.begin(), bytes.end());
  }

  int64_t as_i64() const { return values<int64_t>().at(0); }
};

class CheckpointFile {
 public:
  static constexpr uint32_t kVersion = 1;

  void add(TensorBlob blob);
  bool has(const std::string& name) const;
  const TensorBlob& get(const std::string& name) const;
  const std::vector<TensorBlob>& blobs() const { return blobs_; }

  void save(const std::filesystem::path& path) const;
  static CheckpointFile load(const std::filesystem::path& path);

 private:
  std::vector<TensorBlob> blobs_;
  std::unordered_map<std::string, size_t> index_;
};

}  // namespace meshgrow
