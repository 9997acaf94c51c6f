#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "lvgpt/tensor.hpp"

namespace lvgpt {

inline constexpr double kLayerNormEps = 1e-5;

// c[i,j] = sum_t a[i,t] * b[t,j]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

// x[..., n] + bias[n], bias broadcast over all leading rows.
template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

// tanh approximation used by GPT-2.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

// Softmax over the last axis with max subtraction. Throws ValueError on NaN.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x);

// Normalizes the last axis to zero mean / unit variance, then gamma * x + beta.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     double eps = kLayerNormEps);

// Gathers rows of table[V, d] -> [ids.size(), d].
template <typename T>
Tensor<T> embedding_lookup(const Tensor<T>& table, std::span<const std::int64_t> ids);

// Mean cross-entropy of logits [C] (one label) or [B, C] (B labels).
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::int64_t> labels);

template <typename T>
Tensor<T> sum(const Tensor<T>& x);

template <typename T>
Tensor<T> mean(const Tensor<T>& x);

// Concatenates two [n, d] and [m, d] tensors along rows.
template <typename T>
Tensor<T> concat_rows(const Tensor<T>& a, const Tensor<T>& b);

// Rows [begin, begin + count) of a 2-D tensor.
template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, std::size_t begin, std::size_t count);

// Stacks equally shaped tensors along a new leading axis.
template <typename T>
Tensor<T> stack(std::span<const Tensor<T>> xs);

template <typename T>
Tensor<T> transpose(const Tensor<T>& x);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

// x[C, H, W] * w[O, C, k, k] + b[O] with symmetric zero padding.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::size_t stride,
                 std::size_t padding);

// Multi-head self-attention with a strictly causal mask. qkv is [L, 3d] laid
// out as [q | k | v]; returns the concatenated head outputs [L, d]. Row i only
// ever reads rows j <= i.
template <typename T>
Tensor<T> causal_attention(const Tensor<T>& qkv, std::size_t n_heads);

// Inverted dropout. Identity when p == 0 or rng is null.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, std::mt19937_64* rng);

}  // namespace lvgpt
