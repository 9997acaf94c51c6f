#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "lvgpt/embedding.hpp"
#include "lvgpt/error.hpp"
#include "lvgpt/ops.hpp"

using namespace lvgpt;

namespace {

constexpr std::size_t kD = 4;

EmbeddingTables<double> tables(std::size_t token_dim, std::uint64_t seed = 1) {
    ParamInit<double> init(seed, 1.0);
    return init_embedding_tables<double>(7, kD, 10, token_dim, init);
}

void fill(Tensor<double>& t, double v) { std::fill(t.data().begin(), t.data().end(), v); }

double row(const Tensor<double>& t, std::size_t r, std::size_t c) { return t[r * t.dim(1) + c]; }

VisionTokens<double> tokens(std::size_t m, std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n;
    std::vector<double> d(m * dim);
    for (auto& v : d) v = n(rng);
    return {Tensor<double>::from_data({m, dim}, d), 0};
}

const std::vector<std::int64_t> kIds{3, 0, 6};

TEST(EmbedWords, OnlyWordTable) {
    auto t = tables(kD);
    fill(t.type_table, 0.0);
    fill(t.pos_table, 0.0);
    auto e = embed_words(std::span(kIds), t);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t c = 0; c < kD; ++c) EXPECT_EQ(row(e, i, c), row(t.word_table, kIds[i], c));
}

TEST(EmbedWords, OnlyPosTable) {
    auto t = tables(kD);
    fill(t.type_table, 0.0);
    fill(t.word_table, 0.0);
    auto e = embed_words(std::span(kIds), t);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t c = 0; c < kD; ++c) EXPECT_EQ(row(e, i, c), row(t.pos_table, i, c));
}

TEST(EmbedWords, ExactThreeTermSum) {
    auto t = tables(kD, 5);
    auto e = embed_words(std::span(kIds), t);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t c = 0; c < kD; ++c) {
            const double expected =
                (row(t.type_table, 0, c) + row(t.pos_table, i, c)) + row(t.word_table, kIds[i], c);
            EXPECT_EQ(row(e, i, c), expected);
        }
}

TEST(EmbedWords, PositionOverflowThrows) {
    auto t = tables(kD);
    const std::vector<std::int64_t> ids(11, 2);
    EXPECT_THROW(embed_words(std::span(ids), t), ValueError);
}

TEST(EmbedVision, ZeroPoseAddendIsPosZero) {
    auto t = tables(kD, 2);
    SequencingConfig cfg;
    auto vt = tokens(5, kD, 3);
    auto e = embed_vision(vt, t, cfg);
    for (std::size_t j = 0; j < 5; ++j)
        for (std::size_t c = 0; c < kD; ++c) {
            EXPECT_EQ(row(e, j, c), (row(t.type_table, 1, c) + row(t.pos_table, 0, c)) + row(vt.tokens, j, c));
        }
}

TEST(EmbedVision, ZeroPoseVarianceIsExactlyZero) {
    auto t = tables(kD, 4);
    fill(t.type_table, 0.0);
    SequencingConfig cfg;
    // Identical tokens: any difference between output rows would come from the pose addend.
    auto vt = tokens(6, kD, 5);
    for (std::size_t j = 1; j < 6; ++j)
        for (std::size_t c = 0; c < kD; ++c) vt.tokens[j * kD + c] = vt.tokens[c];
    auto e = embed_vision(vt, t, cfg);
    for (std::size_t j = 1; j < 6; ++j)
        for (std::size_t c = 0; c < kD; ++c) EXPECT_EQ(row(e, j, c), row(e, 0, c));
}

TEST(EmbedVision, ActualPoseUsesRowsOneToM) {
    EXPECT_EQ(vision_pose_indices(VisionPoseMode::actual, 3), (std::vector<std::int64_t>{1, 2, 3}));
    EXPECT_EQ(vision_pose_indices(VisionPoseMode::zero, 3), (std::vector<std::int64_t>{0, 0, 0}));
    auto t = tables(kD, 6);
    SequencingConfig cfg;
    cfg.vision_pose = VisionPoseMode::actual;
    auto vt = tokens(3, kD, 7);
    auto e = embed_vision(vt, t, cfg);
    for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t c = 0; c < kD; ++c)
            EXPECT_EQ(row(e, j, c), (row(t.type_table, 1, c) + row(t.pos_table, j + 1, c)) + row(vt.tokens, j, c));
}

TEST(EmbedVision, TypeToggleDropsTypeTerm) {
    auto t = tables(kD, 8);
    SequencingConfig cfg;
    cfg.use_type_embedding = false;
    auto vt = tokens(2, kD, 9);
    auto e = embed_vision(vt, t, cfg);
    for (std::size_t j = 0; j < 2; ++j)
        for (std::size_t c = 0; c < kD; ++c) EXPECT_EQ(row(e, j, c), row(t.pos_table, 0, c) + row(vt.tokens, j, c));
}

TEST(EmbedVision, ProjectionPresentIffWidthsDiffer) {
    EXPECT_FALSE(tables(kD).vision_projection.has_value());
    EXPECT_TRUE(tables(kD + 2).vision_projection.has_value());
    EXPECT_TRUE(tables(kD - 1).vision_projection.has_value());
}

TEST(EmbedVision, IdentityPaddedProjectionReproducesLeadingCoordinates) {
    auto t = tables(3, 10);
    fill(t.type_table, 0.0);
    fill(t.pos_table, 0.0);
    auto& f = *t.vision_projection;
    fill(f.weight, 0.0);
    fill(f.bias, 0.0);
    for (std::size_t i = 0; i < 3; ++i) f.weight[i * kD + i] = 1.0;
    SequencingConfig cfg;
    auto vt = tokens(4, 3, 11);
    auto e = embed_vision(vt, t, cfg);
    for (std::size_t j = 0; j < 4; ++j) {
        for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(row(e, j, c), row(vt.tokens, j, c));
        EXPECT_EQ(row(e, j, 3), 0.0);
    }
}

TEST(EmbedVision, MismatchWithoutProjectionThrows) {
    auto t = tables(kD);
    SequencingConfig cfg;
    EXPECT_THROW(embed_vision(tokens(2, kD + 1, 1), t, cfg), ShapeError);
}

TEST(Sequence, TagsFollowOrder) {
    auto w = Tensor<double>::full({2, kD}, 1.0), v = Tensor<double>::full({3, kD}, 2.0);
    SequencingConfig cfg;
    auto s = sequence(w, v, cfg);
    using M = Modality;
    EXPECT_EQ(s.modality, (std::vector<M>{M::word, M::word, M::vision, M::vision, M::vision}));
    cfg.order = TokenOrder::early_vision;
    s = sequence(w, v, cfg);
    EXPECT_EQ(s.modality, (std::vector<M>{M::vision, M::vision, M::vision, M::word, M::word}));
    EXPECT_THROW(sequence(w, Tensor<double>::zeros({3, kD + 1}), cfg), ShapeError);
}

TEST(Sequence, OrdersArePermutationsWithoutReembedding) {
    auto t = tables(kD, 12);
    fill(t.pos_table, 0.0);
    SequencingConfig a, b;
    b.order = TokenOrder::early_vision;
    auto vt = tokens(4, kD, 13);
    auto we = embed_words(std::span(kIds), t);
    auto sa = sequence(we, embed_vision(vt, t, a), a);
    auto sb = sequence(we, embed_vision(vt, t, b), b);
    // early_word row r == early_vision row (r + 4) mod 7
    for (std::size_t r = 0; r < 7; ++r)
        for (std::size_t c = 0; c < kD; ++c) EXPECT_EQ(row(sa.embedded, r, c), row(sb.embedded, (r + 4) % 7, c));
}

TEST(SequencingConfig, ParseAndValidate) {
    EXPECT_EQ(parse_token_order("early_vision"), TokenOrder::early_vision);
    EXPECT_EQ(parse_vision_pose_mode("actual"), VisionPoseMode::actual);
    EXPECT_THROW(parse_token_order("late"), ConfigError);
    SequencingConfig c;
    c.use_vision_projection_path = false;
    EXPECT_THROW(c.validate(), ConfigError);
}

}  // namespace
