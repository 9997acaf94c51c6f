#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "lvgpt/model.hpp"

namespace lvgpt::testing {

// d=8, 1 layer, 2 heads, 3 word tokens, 4 vision tokens.
inline ModelConfig tiny_config(VisionBackend backend, TokenOrder order = TokenOrder::early_word,
                               VisionPoseMode pose = VisionPoseMode::zero) {
    ModelConfig c;
    c.d = 8;
    c.n_layers = 1;
    c.n_heads = 2;
    c.mlp_ratio = 2;
    c.max_pos = 8;
    c.num_classes = 3;
    c.vocab_size = 6;
    c.max_question_len = 3;
    c.sequencing.order = order;
    c.sequencing.vision_pose = pose;
    c.tokenizer.backend = backend;
    c.tokenizer.image_size = 8;
    c.tokenizer.patch_grid = 2;
    c.tokenizer.token_dim = 6;
    return c;
}

template <typename T>
Tensor<T> random_image(std::size_t size, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<T> data(3 * size * size);
    for (auto& v : data) v = T(u(rng));
    return Tensor<T>::from_data({3, size, size}, std::move(data));
}

inline std::vector<std::int64_t> random_ids(std::size_t n, std::size_t vocab, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::int64_t> u(0, static_cast<std::int64_t>(vocab) - 1);
    std::vector<std::int64_t> ids(n);
    for (auto& v : ids) v = u(rng);
    return ids;
}

// Adds N(0, stddev) to every parameter so that biases, gains and
// near-zero weights all carry non-trivial gradients.
template <typename T>
void perturb(LVGPTModel<T>& model, double stddev, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, stddev);
    for (auto& p : model.parameters())
        for (auto& v : p.data()) v += T(n(rng));
}

}  // namespace lvgpt::testing
