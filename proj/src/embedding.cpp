#include "lvgpt/embedding.hpp"

#include <numeric>
#include <string>

#include "lvgpt/error.hpp"
#include "lvgpt/ops.hpp"

namespace lvgpt {

std::string_view to_string(TokenOrder o) { return o == TokenOrder::early_word ? "early_word" : "early_vision"; }

std::string_view to_string(VisionPoseMode m) { return m == VisionPoseMode::zero ? "zero" : "actual"; }

TokenOrder parse_token_order(std::string_view s) {
    if (s == "early_word") return TokenOrder::early_word;
    if (s == "early_vision") return TokenOrder::early_vision;
    throw ConfigError("unknown token order '" + std::string(s) + "' (expected early_word or early_vision)");
}

VisionPoseMode parse_vision_pose_mode(std::string_view s) {
    if (s == "zero") return VisionPoseMode::zero;
    if (s == "actual") return VisionPoseMode::actual;
    throw ConfigError("unknown vision pose mode '" + std::string(s) + "' (expected zero or actual)");
}

void SequencingConfig::validate() const {
    if (!use_vision_projection_path) {
        throw ConfigError("sequencing: only the custom vision embedding path is supported "
                          "(seq.vision_projection_path must be true)");
    }
}

template <typename T>
EmbeddingTables<T> init_embedding_tables(std::size_t vocab_size, std::size_t d, std::size_t max_pos,
                                         std::size_t token_dim, ParamInit<T>& init) {
    EmbeddingTables<T> t;
    t.word_table = init.normal({vocab_size, d});
    t.type_table = init.normal({2, d});
    t.pos_table = init.normal({max_pos, d});
    if (token_dim != d) t.vision_projection = VisionProjection<T>{init.normal({token_dim, d}), init.zeros({d})};
    return t;
}

template <typename T>
void collect_parameters(const EmbeddingTables<T>& tables, NamedParams<T>& out) {
    out.emplace_back("embed.word", tables.word_table);
    out.emplace_back("embed.type", tables.type_table);
    out.emplace_back("embed.pos", tables.pos_table);
    if (tables.vision_projection) {
        out.emplace_back("embed.vision_proj.weight", tables.vision_projection->weight);
        out.emplace_back("embed.vision_proj.bias", tables.vision_projection->bias);
    }
}

std::vector<std::int64_t> vision_pose_indices(VisionPoseMode mode, std::size_t m) {
    std::vector<std::int64_t> idx(m, 0);
    if (mode == VisionPoseMode::actual) std::iota(idx.begin(), idx.end(), std::int64_t{1});
    return idx;
}

template <typename T>
Tensor<T> embed_words(std::span<const std::int64_t> ids, const EmbeddingTables<T>& tables) {
    const std::size_t n = ids.size();
    if (n > tables.max_pos()) {
        throw ValueError("embed_words: " + std::to_string(n) + " words exceed the " +
                         std::to_string(tables.max_pos()) + " available positions");
    }
    std::vector<std::int64_t> pos(n), type(n, 0);
    std::iota(pos.begin(), pos.end(), std::int64_t{0});
    auto t = embedding_lookup(tables.type_table, std::span<const std::int64_t>(type));
    auto p = embedding_lookup(tables.pos_table, std::span<const std::int64_t>(pos));
    auto w = embedding_lookup(tables.word_table, ids);
    return add(add(t, p), w);
}

template <typename T>
Tensor<T> embed_vision(const VisionTokens<T>& vt, const EmbeddingTables<T>& tables, const SequencingConfig& cfg) {
    const std::size_t d = tables.width();
    const auto& tokens = vt.tokens;
    if (tokens.rank() != 2) throw ShapeError("embed_vision: tokens must be [m, token_dim]");
    const std::size_t m = tokens.dim(0);
    const bool dims_match = tokens.dim(1) == d;
    if (!dims_match && !tables.vision_projection) {
        throw ShapeError("embed_vision: vision tokens have width " + std::to_string(tokens.dim(1)) +
                         " but embeddings have width " + std::to_string(d) + " and no projection is present");
    }
    if (dims_match && tables.vision_projection) {
        throw ShapeError("embed_vision: projection present although token width equals embedding width");
    }
    Tensor<T> vx = dims_match ? tokens
                              : add_bias(matmul(tokens, tables.vision_projection->weight),
                                         tables.vision_projection->bias);

    const auto pos = vision_pose_indices(cfg.vision_pose, m);
    if (m > 0 && static_cast<std::size_t>(pos.back()) >= tables.max_pos()) {
        throw ValueError("embed_vision: pose index " + std::to_string(pos.back()) + " exceeds position table of " +
                         std::to_string(tables.max_pos()));
    }
    auto p = embedding_lookup(tables.pos_table, std::span<const std::int64_t>(pos));
    if (!cfg.use_type_embedding) return add(p, vx);
    std::vector<std::int64_t> type(m, 1);
    auto t = embedding_lookup(tables.type_table, std::span<const std::int64_t>(type));
    return add(add(t, p), vx);
}

template <typename T>
TokenSequence<T> sequence(const Tensor<T>& words_e, const Tensor<T>& vision_e, const SequencingConfig& cfg) {
    if (words_e.rank() != 2 || vision_e.rank() != 2 || words_e.dim(1) != vision_e.dim(1)) {
        throw ShapeError("sequence: segment widths differ (" + to_string(words_e.shape()) + " vs " +
                         to_string(vision_e.shape()) + ")");
    }
    const std::size_t n = words_e.dim(0), m = vision_e.dim(0);
    TokenSequence<T> seq;
    if (cfg.order == TokenOrder::early_word) {
        seq.embedded = concat_rows(words_e, vision_e);
        seq.modality.assign(n, Modality::word);
        seq.modality.insert(seq.modality.end(), m, Modality::vision);
    } else {
        seq.embedded = concat_rows(vision_e, words_e);
        seq.modality.assign(m, Modality::vision);
        seq.modality.insert(seq.modality.end(), n, Modality::word);
    }
    return seq;
}

#define LVGPT_INSTANTIATE_EMBEDDING(T)                                                                         \
    template EmbeddingTables<T> init_embedding_tables<T>(std::size_t, std::size_t, std::size_t, std::size_t,   \
                                                         ParamInit<T>&);                                       \
    template void collect_parameters<T>(const EmbeddingTables<T>&, NamedParams<T>&);                           \
    template Tensor<T> embed_words<T>(std::span<const std::int64_t>, const EmbeddingTables<T>&);               \
    template Tensor<T> embed_vision<T>(const VisionTokens<T>&, const EmbeddingTables<T>&,                      \
                                       const SequencingConfig&);                                               \
    template TokenSequence<T> sequence<T>(const Tensor<T>&, const Tensor<T>&, const SequencingConfig&);

LVGPT_INSTANTIATE_EMBEDDING(float)
LVGPT_INSTANTIATE_EMBEDDING(double)

}  // namespace lvgpt
