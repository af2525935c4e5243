#include "vac/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "vac/error.hpp"

namespace vac::nn {
namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { out.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
  }
  void floats(const std::vector<float>& v) {
    u32(static_cast<std::uint32_t>(v.size()));
    for (float x : v) f32(x);
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes(b) {}
  void need(std::size_t n) const {
    if (bytes.size() - pos < n) throw Error(ErrorCode::CheckpointMismatch, "truncated checkpoint");
  }
  std::uint8_t u8() {
    need(1);
    return bytes[pos++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | bytes[pos + static_cast<std::size_t>(i)];
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    const std::uint64_t hi = u32();
    return lo | (hi << 32);
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str() {
    const std::size_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
    pos += n;
    return s;
  }
  std::vector<float> floats() {
    const std::size_t n = u32();
    need(4 * n);
    std::vector<float> v(n);
    for (auto& x : v) x = f32();
    return v;
  }
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  for (char c : {'C', 'M', 'C', 'K'}) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kCheckpointFormat);
  w.str(ckpt.descriptor);
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    std::size_t count = 1;
    for (auto d : t.shape) {
      w.u32(static_cast<std::uint32_t>(d));
      count *= d;
    }
    if (count != t.data.size()) throw Error(ErrorCode::ShapeMismatch, "record " + t.name + " has wrong length");
    for (float x : t.data) w.f32(x);
  }
  w.u8(ckpt.optimizer ? 1 : 0);
  if (ckpt.optimizer) {
    const auto& o = *ckpt.optimizer;
    w.u64(o.steps);
    w.f32(o.learning_rate);
    w.f32(o.beta1);
    w.f32(o.beta2);
    w.f32(o.eps);
    w.u32(static_cast<std::uint32_t>(o.m.size()));
    for (std::size_t i = 0; i < o.m.size(); ++i) {
      w.floats(o.m[i]);
      w.floats(o.v.at(i));
      w.floats(o.v_max.at(i));
    }
  }
  return std::move(w.out);
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.need(4);
  if (std::memcmp(bytes.data(), "CMCK", 4) != 0) throw Error(ErrorCode::CheckpointMismatch, "missing CMCK magic");
  r.pos = 4;
  const auto format = r.u32();
  if (format != kCheckpointFormat)
    throw Error(ErrorCode::CheckpointMismatch, "unsupported checkpoint format " + std::to_string(format));
  Checkpoint c;
  c.descriptor = r.str();
  const std::size_t records = r.u32();
  for (std::size_t i = 0; i < records; ++i) {
    TensorRecord t;
    t.name = r.str();
    const std::size_t rank = r.u32();
    std::size_t count = 1;
    for (std::size_t d = 0; d < rank; ++d) {
      t.shape.push_back(r.u32());
      count *= t.shape.back();
    }
    r.need(4 * count);
    t.data.resize(count);
    for (auto& x : t.data) x = r.f32();
    c.tensors.push_back(std::move(t));
  }
  if (r.u8()) {
    OptimizerRecord o;
    o.steps = r.u64();
    o.learning_rate = r.f32();
    o.beta1 = r.f32();
    o.beta2 = r.f32();
    o.eps = r.f32();
    const std::size_t slots = r.u32();
    for (std::size_t i = 0; i < slots; ++i) {
      o.m.push_back(r.floats());
      o.v.push_back(r.floats());
      o.v_max.push_back(r.floats());
    }
    c.optimizer = std::move(o);
  }
  if (r.pos != bytes.size()) throw Error(ErrorCode::CheckpointMismatch, "trailing bytes in checkpoint");
  return c;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "short write to " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace vac::nn
