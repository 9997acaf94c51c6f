#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "lvgpt/params.hpp"
#include "lvgpt/tensor.hpp"
#include "lvgpt/vision.hpp"

namespace lvgpt {

enum class TokenOrder { early_word, early_vision };
enum class VisionPoseMode { zero, actual };
enum class Modality : std::uint8_t { word = 0, vision = 1 };

std::string_view to_string(TokenOrder o);
std::string_view to_string(VisionPoseMode m);
TokenOrder parse_token_order(std::string_view s);
VisionPoseMode parse_vision_pose_mode(std::string_view s);

struct SequencingConfig {
    TokenOrder order = TokenOrder::early_word;
    VisionPoseMode vision_pose = VisionPoseMode::zero;
    // Type embedding on vision tokens (word tokens always carry type 0).
    bool use_type_embedding = true;
    // Custom vision embedding: tokens are used directly when their width
    // matches the word width and go through the projection otherwise. The
    // alternative (a VisualBERT-style embedding) is not provided.
    bool use_vision_projection_path = true;

    void validate() const;
    friend bool operator==(const SequencingConfig&, const SequencingConfig&) = default;
};

// Affine map from vision-token width to embedding width.
template <typename T>
struct VisionProjection {
    Tensor<T> weight;  // [token_dim, d]
    Tensor<T> bias;    // [d]
};

template <typename T>
struct EmbeddingTables {
    Tensor<T> word_table;  // [vocab, d]
    Tensor<T> type_table;  // [2, d]: row 0 word, row 1 vision
    Tensor<T> pos_table;   // [max_pos, d]
    std::optional<VisionProjection<T>> vision_projection;  // iff token_dim != d

    std::size_t width() const { return word_table.dim(1); }
    std::size_t max_pos() const { return pos_table.dim(0); }
};

template <typename T>
struct TokenSequence {
    Tensor<T> embedded;  // [L, d]
    std::vector<Modality> modality;

    std::size_t length() const { return modality.size(); }
};

template <typename T>
EmbeddingTables<T> init_embedding_tables(std::size_t vocab_size, std::size_t d, std::size_t max_pos,
                                         std::size_t token_dim, ParamInit<T>& init);

template <typename T>
void collect_parameters(const EmbeddingTables<T>& tables, NamedParams<T>& out);

// Position indices for the vision segment: all 0 (zero) or 1..m (actual).
std::vector<std::int64_t> vision_pose_indices(VisionPoseMode mode, std::size_t m);

// w_e[i] = type_table[0] + pos_table[i] + word_table[ids[i]], positions 0..n-1.
template <typename T>
Tensor<T> embed_words(std::span<const std::int64_t> ids, const EmbeddingTables<T>& tables);

// v_e[j] = type_table[1] + pos_table[p_j] + v_x[j] where v_x is the token
// itself or its projection when the widths differ.
template <typename T>
Tensor<T> embed_vision(const VisionTokens<T>& vt, const EmbeddingTables<T>& tables, const SequencingConfig& cfg);

// Concatenates the two segments in the configured order. No re-embedding.
template <typename T>
TokenSequence<T> sequence(const Tensor<T>& words_e, const Tensor<T>& vision_e, const SequencingConfig& cfg);

}  // namespace lvgpt
