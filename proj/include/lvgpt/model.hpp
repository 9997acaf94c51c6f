#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "lvgpt/adam.hpp"
#include "lvgpt/embedding.hpp"
#include "lvgpt/params.hpp"
#include "lvgpt/tensor.hpp"
#include "lvgpt/vision.hpp"

namespace lvgpt {

struct ModelConfig {
    std::size_t d = 64;
    std::size_t n_layers = 2;
    std::size_t n_heads = 4;
    std::size_t mlp_ratio = 4;
    std::size_t max_pos = 32;
    std::size_t num_classes = 2;
    std::size_t vocab_size = 2;
    std::size_t max_question_len = 12;  // word segment length (padded)
    double dropout = 0.0;
    SequencingConfig sequencing;
    VisionTokenizerConfig tokenizer;

    // Throws ConfigError.
    void validate() const;
    std::size_t sequence_length() const { return max_question_len + tokenizer.num_tokens(); }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Pre-norm GPT block.
template <typename T>
struct BlockParams {
    Tensor<T> ln1_gamma, ln1_beta;
    Tensor<T> qkv_w, qkv_b;    // [d, 3d], [3d]
    Tensor<T> proj_w, proj_b;  // [d, d], [d]
    Tensor<T> ln2_gamma, ln2_beta;
    Tensor<T> fc_w, fc_b;        // [d, mlp_ratio*d]
    Tensor<T> fc_out_w, fc_out_b;  // [mlp_ratio*d, d]
};

// Two linear layers with a GELU between them.
template <typename T>
struct HeadParams {
    Tensor<T> fc1_w, fc1_b;  // [d, d]
    Tensor<T> fc2_w, fc2_b;  // [d, num_classes]
};

template <typename T>
struct LVGPTModel {
    ModelConfig config;
    VisionParams<T> vision;
    EmbeddingTables<T> embeddings;
    std::vector<BlockParams<T>> blocks;
    Tensor<T> lnf_gamma, lnf_beta;
    HeadParams<T> head;

    // Fixed order; names are stable checkpoint keys.
    NamedParams<T> named_parameters() const;
    std::vector<Tensor<T>> parameters() const;
    std::size_t parameter_count() const;
    void zero_grad();
};

// Weights ~ N(0, 0.02), biases 0, layer-norm gains 1. Deterministic in seed.
template <typename T>
LVGPTModel<T> init_params(const ModelConfig& config, std::uint64_t seed);

// Deep copy with fresh storage.
template <typename T>
LVGPTModel<T> clone_model(const LVGPTModel<T>& model);

struct ForwardContext {
    bool training = false;
    std::mt19937_64* rng = nullptr;  // dropout source; only read when training
};

template <typename T>
Tensor<T> decoder_block(const Tensor<T>& x, const BlockParams<T>& block, const ModelConfig& cfg,
                        const ForwardContext& ctx);

// Stack of causal pre-norm blocks followed by the final layer norm: [L, d] -> [L, d].
template <typename T>
Tensor<T> decoder_forward(const TokenSequence<T>& seq, const LVGPTModel<T>& model,
                          const ForwardContext& ctx = {});

// Reads the hidden state at the last position: -> logits [num_classes].
template <typename T>
Tensor<T> classify(const TokenSequence<T>& seq, const LVGPTModel<T>& model, const ForwardContext& ctx = {});

// Tokenize image, embed both segments, order them.
template <typename T>
TokenSequence<T> build_sequence(const LVGPTModel<T>& model, const Tensor<T>& image,
                                 std::span<const std::int64_t> question_ids, const ForwardContext& ctx = {});

template <typename T>
Tensor<T> forward_logits(const LVGPTModel<T>& model, const Tensor<T>& image,
                         std::span<const std::int64_t> question_ids, const ForwardContext& ctx = {});

// Index of the largest value; ties resolve to the lowest index.
template <typename T>
std::int64_t argmax(std::span<const T> values);

template <typename T>
struct SampleInput {
    Tensor<T> image;  // [3, S, S]
    std::vector<std::int64_t> question_ids;
    std::int64_t label = 0;
};

// Mean cross-entropy over the batch, backward, one Adam step. Returns the
// loss measured before the update.
template <typename T>
T train_step(std::span<const SampleInput<T>> batch, LVGPTModel<T>& model, AdamState<T>& opt,
             const ForwardContext& ctx = {});

// Mean cross-entropy over the batch, graph attached, without stepping.
template <typename T>
Tensor<T> batch_loss(std::span<const SampleInput<T>> batch, const LVGPTModel<T>& model,
                     const ForwardContext& ctx = {});

}  // namespace lvgpt
