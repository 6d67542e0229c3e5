#include "meshgrow/checkpoint.hpp"

#include <fstream>

namespace meshgrow {

namespace {

constexpr char kMagic[4] = {'M', 'G', 'A', 'N'};

template <typename T>
void write_le(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  return value;
}

}  // namespace

size_t dtype_size(DType t) {
  switch (t) {
    case DType::kF32: return 4;
    case DType::kF64: return 8;
    case DType::kI64: return 8;
    case DType::kU8: return 1;
  }
  throw IoError("checkpoint: unknown dtype tag");
}

void CheckpointFile::add(TensorBlob blob) {
  if (index_.count(blob.name)) {
    throw ContractError("checkpoint: duplicate tensor name " + blob.name);
  }
  index_[blob.name] = blobs_.size();
  blobs_.push_back(std::move(blob));
}

bool CheckpointFile::has(const std::string& name) const {
  return index_.count(name) > 0;
}

const TensorBlob& CheckpointFile::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw IoError("checkpoint: missing tensor " + name);
  }
  return blobs_[it->second];
}

void CheckpointFile::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("checkpoint: cannot write " + path.string());
  out.write(kMagic, 4);
  write_le<uint32_t>(out, kVersion);
  write_le<uint32_t>(out, static_cast<uint32_t>(blobs_.size()));
  for (const auto& b : blobs_) {
    write_le<uint32_t>(out, static_cast<uint32_t>(b.name.size()));
    out.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
    write_le<uint8_t>(out, static_cast<uint8_t>(b.dtype));
    write_le<uint32_t>(out, static_cast<uint32_t>(b.extents.size()));
    for (uint64_t e : b.extents) write_le<uint64_t>(out, e);
    out.write(reinterpret_cast<const char*>(b.bytes.data()),
              static_cast<std::streamsize>(b.bytes.size()));
  }
  if (!out) throw IoError("checkpoint: write failed for " + path.string());
}

CheckpointFile CheckpointFile::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError("checkpoint: bad magic in " + path.string());
  }
  const auto version = read_le<uint32_t>(in);
  if (version != kVersion) {
    throw IoError("checkpoint: unsupported version " +
                  std::to_string(version));
  }
  const auto count = read_le<uint32_t>(in);
  CheckpointFile ckpt;
  for (uint32_t i = 0; i < count; ++i) {
    TensorBlob b;
    const auto name_len = read_le<uint32_t>(in);
    b.name.resize(name_len);
    in.read(b.name.data(), name_len);
    b.dtype = static_cast<DType>(read_le<uint8_t>(in));
    const auto rank = read_le<uint32_t>(in);
    b.extents.resize(rank);
    for (auto& e : b.extents) e = read_le<uint64_t>(in);
    b.bytes.resize(b.numel() * dtype_size(b.dtype));
    in.read(reinterpret_cast<char*>(b.bytes.data()),
            static_cast<std::streamsize>(b.bytes.size()));
    if (!in) throw IoError("checkpoint: truncated file " + path.string());
    ckpt.add(std::move(b));
  }
  return ckpt;
}

}  // namespace meshgrow
