#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vac::nn {

inline constexpr std::uint32_t kCheckpointFormat = 1;

struct TensorRecord {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float> data;
};

struct OptimizerRecord {
  std::uint64_t steps = 0;
  float learning_rate = 0, beta1 = 0, beta2 = 0, eps = 0;
  // Per trainable parameter, in parameter order.
  std::vector<std::vector<float>> m, v, v_max;
};

// Layout (little-endian): "CMCK", format u32, descriptor (u32 length + UTF-8),
// u32 record count, records (u32 name length, name, u32 rank, u32 dims,
// float32 data), u8 optimizer flag, optimizer state.
struct Checkpoint {
  std::string descriptor;
  std::vector<TensorRecord> tensors;
  std::optional<OptimizerRecord> optimizer;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace vac::nn
