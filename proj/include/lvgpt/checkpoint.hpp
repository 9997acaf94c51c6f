#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lvgpt/model.hpp"
#include "lvgpt/tensor.hpp"

namespace lvgpt {

// Flat little-endian checkpoint layout:
//
//   "LVGP"  u32 version
//   u32 len, config text ("key = value" lines)
//   u32 count, {u32 len, bytes} vocabulary tokens in id order
//   u32 count, {u32 len, bytes} class names in id order
//   u32 count, tensors:
//       u32 len, name bytes; u8 dtype (1 = f32, 2 = f64); u32 rank;
//       u64 extent * rank; raw element data
inline constexpr char kCheckpointMagic[4] = {'L', 'V', 'G', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class DType : std::uint8_t { f32 = 1, f64 = 2 };

template <typename T>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() { return DType::f32; }
template <>
constexpr DType dtype_of<double>() { return DType::f64; }

struct StoredTensor {
    std::string name;
    DType dtype = DType::f32;
    Shape shape;
    std::vector<std::uint8_t> raw;  // little-endian element bytes

    friend bool operator==(const StoredTensor&, const StoredTensor&) = default;
};

struct Checkpoint {
    std::string config_text;
    std::vector<std::string> vocab;
    std::vector<std::string> labels;
    std::vector<StoredTensor> tensors;

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
// Throws CheckpointError on any malformed input.
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

template <typename T>
StoredTensor store_tensor(const std::string& name, const Tensor<T>& t);

// Throws CheckpointError on dtype mismatch.
template <typename T>
Tensor<T> restore_tensor(const StoredTensor& stored);

template <typename T>
std::vector<StoredTensor> store_parameters(const LVGPTModel<T>& model);

// Copies stored values into the model's parameters, matching by name and shape.
template <typename T>
void load_parameters(LVGPTModel<T>& model, const std::vector<StoredTensor>& tensors);

}  // namespace lvgpt
