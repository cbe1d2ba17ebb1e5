#pragma once

// Named-tensor container.
//
//   "G2SCKPT\0"            8-byte magic
//   u32 version
//   u64 n, n bytes         metadata (JSON text)
//   u64 count
//   count x { u32 name_len, name, u8 dtype (0 = f32, 1 = f64), u32 rank,
//             rank x u64 dim, values }
//   u64 FNV-1a hash of all preceding bytes
//
// All integers and values are little-endian.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <type_traits>
#include <string>
#include <vector>

#include <json.hpp>

#include "g2s/error.hpp"

namespace g2s {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'G', '2', 'S', 'C', 'K', 'P', 'T', '\0'};

enum class DType : std::uint8_t { kF32 = 0, kF64 = 1 };

template <class T>
constexpr DType dtype_of() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? DType::kF32 : DType::kF64;
}

struct NamedTensor {
  std::string name;
  std::vector<std::uint64_t> shape;
  DType dtype = DType::kF64;
  std::vector<double> values;  // exact for both dtypes

  bool operator==(const NamedTensor&) const = default;
};

struct CheckpointFile {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

class ByteWriter {
 public:
  template <class U>
  void put(U v) {
    static_assert(std::is_integral_v<U>);
    for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
  }
  void put_f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void put_f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }
  void put_bytes(const std::string& s) { buf_ += s; }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::string& b, std::size_t end) : buf_(b), end_(end) {}

  template <class U>
  U get() {
    need(sizeof(U));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return static_cast<U>(v);
  }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  float get_f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (n > end_ - pos_) throw DataError("checkpoint corrupt: truncated");
  }
  const std::string& buf_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_checkpoint(const CheckpointFile& ck) {
  detail::ByteWriter w;
  w.put_bytes(std::string(kCheckpointMagic, sizeof(kCheckpointMagic)));
  w.put<std::uint32_t>(kCheckpointVersion);
  const std::string meta = ck.meta.dump();
  w.put<std::uint64_t>(meta.size());
  w.put_bytes(meta);
  w.put<std::uint64_t>(ck.tensors.size());
  for (const auto& t : ck.tensors) {
    std::uint64_t n = 1;
    for (auto d : t.shape) n *= d;
    if (n != t.values.size()) throw Error("tensor '" + t.name + "' shape does not match its value count");
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.name.size()));
    w.put_bytes(t.name);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(t.dtype));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) w.put<std::uint64_t>(d);
    for (double v : t.values) {
      if (t.dtype == DType::kF32) {
        w.put_f32(static_cast<float>(v));
      } else {
        w.put_f64(v);
      }
    }
  }
  std::string out = w.bytes();
  detail::ByteWriter tail;
  tail.put<std::uint64_t>(detail::fnv1a(out));
  return out + tail.bytes();
}

inline CheckpointFile deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof(kCheckpointMagic) + 4 + 8) throw DataError("checkpoint corrupt: truncated");
  if (std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
    throw DataError("not a checkpoint file (bad magic)");
  detail::ByteReader r(bytes, bytes.size());
  r.get_bytes(sizeof(kCheckpointMagic));
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  const std::size_t body_end = bytes.size() - 8;
  detail::ByteReader hash_reader(bytes, bytes.size());
  hash_reader.get_bytes(body_end);
  if (hash_reader.get<std::uint64_t>() != detail::fnv1a(bytes.substr(0, body_end)))
    throw DataError("checkpoint corrupt: checksum mismatch (truncated or modified file)");

  detail::ByteReader body(bytes, body_end);
  body.get_bytes(sizeof(kCheckpointMagic) + 4);
  CheckpointFile ck;
  const auto meta_len = body.get<std::uint64_t>();
  try {
    ck.meta = nlohmann::json::parse(body.get_bytes(meta_len));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("checkpoint corrupt: metadata ") + e.what());
  }
  const auto count = body.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = body.get_bytes(body.get<std::uint32_t>());
    const auto dt = body.get<std::uint8_t>();
    if (dt > 1) throw DataError("checkpoint corrupt: unknown dtype for '" + t.name + "'");
    t.dtype = static_cast<DType>(dt);
    const auto rank = body.get<std::uint32_t>();
    std::uint64_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      t.shape.push_back(body.get<std::uint64_t>());
      n *= t.shape.back();
    }
    const std::size_t width = t.dtype == DType::kF32 ? 4 : 8;
    if (n > (body_end - body.pos()) / width) throw DataError("checkpoint corrupt: truncated");
    t.values.reserve(n);
    for (std::uint64_t k = 0; k < n; ++k) t.values.push_back(t.dtype == DType::kF32 ? body.get_f32() : body.get_f64());
    ck.tensors.push_back(std::move(t));
  }
  if (body.pos() != body_end) throw DataError("checkpoint corrupt: trailing bytes");
  return ck;
}

inline void write_checkpoint_file(const std::string& path, const CheckpointFile& ck) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  const std::string bytes = serialize_checkpoint(ck);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint '" + path + "'");
}

inline CheckpointFile read_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace g2s
