#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "lvgpt/params.hpp"
#include "lvgpt/tensor.hpp"

namespace lvgpt {

// cnn_lite stands in for a ResNet-style extractor, vit_lite for ViT/Swin.
enum class VisionBackend { cnn_lite, vit_lite };

std::string_view to_string(VisionBackend b);
VisionBackend parse_vision_backend(std::string_view s);

inline constexpr std::size_t kCnnLiteWidth = 16;

struct VisionTokenizerConfig {
    VisionBackend backend = VisionBackend::cnn_lite;
    std::size_t image_size = 32;  // square input, pixels
    std::size_t patch_grid = 4;   // g: the tokenizer emits g*g tokens
    std::size_t token_dim = 64;
    bool vit_internal_pose = true;  // vit_lite only

    std::size_t num_tokens() const { return patch_grid * patch_grid; }
    std::size_t patch_size() const { return image_size / patch_grid; }
    // Throws ConfigError.
    void validate() const;

    friend bool operator==(const VisionTokenizerConfig&, const VisionTokenizerConfig&) = default;
};

// conv(3->16, stride 2) -> residual block(16) -> conv(16->token_dim, stride s),
// GELU after each stage.
template <typename T>
struct CnnLiteParams {
    Tensor<T> stem_w, stem_b;
    Tensor<T> res1_w, res1_b;
    Tensor<T> res2_w, res2_b;
    Tensor<T> head_w, head_b;
};

// Patch flatten -> linear projection (+ learned per-patch pose).
template <typename T>
struct VitLiteParams {
    Tensor<T> proj_w, proj_b;
    std::optional<Tensor<T>> pose;
};

template <typename T>
using VisionParams = std::variant<CnnLiteParams<T>, VitLiteParams<T>>;

template <typename T>
struct VisionTokens {
    Tensor<T> tokens;  // [g*g, token_dim], row-major patch order
    std::size_t source_grid = 0;
};

template <typename T>
VisionParams<T> init_vision_params(const VisionTokenizerConfig& cfg, ParamInit<T>& init);

template <typename T>
void collect_parameters(const VisionParams<T>& params, NamedParams<T>& out);

// Non-overlapping p x p patches of a [3, S, S] image in row-major patch
// order, each flattened channel-major to 3*p*p values.
template <typename T>
Tensor<T> extract_patches(const Tensor<T>& image, std::size_t grid);

// image: [3, image_size, image_size]. Throws ValueError on a size mismatch.
template <typename T>
VisionTokens<T> tokenize_image(const Tensor<T>& image, const VisionTokenizerConfig& cfg,
                               const VisionParams<T>& params);

}  // namespace lvgpt
