#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "lvgpt/error.hpp"
#include "lvgpt/ops.hpp"
#include "support/gradcheck.hpp"

using namespace lvgpt;
using lvgpt::testing::grad_check;

namespace {

Tensor<double> rand_tensor(Shape shape, std::mt19937_64& rng, bool grad = true, double lo = -1, double hi = 1) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> d(numel(shape));
    for (auto& v : d) v = u(rng);
    return Tensor<double>::from_data(std::move(shape), std::move(d), grad);
}

// Contracts an op output with fixed random weights so every output element
// carries a distinct upstream gradient.
Tensor<double> probe(const Tensor<double>& y, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return sum(mul(y, rand_tensor(y.shape(), rng, false)));
}

void expect_grads_match(NamedParams<double> leaves, const std::function<Tensor<double>()>& f) {
    for (const auto& e : grad_check(leaves, f)) EXPECT_LT(e.rel_error, 1e-6) << e.name;
}

TEST(Matmul, IdentityAndScalar) {
    auto a = Tensor<double>::from_data({2, 2}, {1, 2, 3, 4});
    auto eye = Tensor<double>::from_data({2, 2}, {1, 0, 0, 1});
    auto c = matmul(a, eye);
    EXPECT_EQ(std::vector<double>(c.data().begin(), c.data().end()), (std::vector<double>{1, 2, 3, 4}));
    EXPECT_EQ(matmul(Tensor<double>::from_data({1, 1}, {1}), Tensor<double>::from_data({1, 1}, {3})).item(), 3.0);
}

TEST(Matmul, MatchesTripleLoop) {
    std::mt19937_64 rng(1);
    auto a = rand_tensor({3, 4}, rng, false), b = rand_tensor({4, 2}, rng, false);
    auto c = matmul(a, b);
    ASSERT_EQ(c.shape(), (Shape{3, 2}));
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            double s = 0;
            for (std::size_t t = 0; t < 4; ++t) s += a[i * 4 + t] * b[t * 2 + j];
            EXPECT_LT(std::abs(c[i * 2 + j] - s), 1e-12);
        }
}

TEST(Matmul, ShapeErrorNamesBothShapes) {
    auto a = Tensor<double>::zeros({2, 3}), b = Tensor<double>::zeros({2, 3});
    try {
        matmul(a, b);
        FAIL();
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[2,3]"), std::string::npos) << msg;
    }
}

TEST(Softmax, Examples) {
    auto s = softmax(Tensor<double>::from_data({3}, {0, 0, 0}));
    for (double v : s.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
    auto t = softmax(Tensor<double>::from_data({2}, {0, std::log(2.0)}));
    EXPECT_NEAR(t[0], 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(t[1], 2.0 / 3.0, 1e-15);
}

TEST(Softmax, ShiftInvariantAndNormalized) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        auto x = rand_tensor({4, 5}, rng, false, -30, 30);
        auto shifted = x.clone();
        for (auto& v : shifted.data()) v += 17.25;
        auto a = softmax(x), b = softmax(shifted);
        for (std::size_t r = 0; r < 4; ++r) {
            double total = 0;
            for (std::size_t c = 0; c < 5; ++c) {
                EXPECT_GE(a[r * 5 + c], 0.0);
                EXPECT_LE(a[r * 5 + c], 1.0);
                EXPECT_NEAR(a[r * 5 + c], b[r * 5 + c], 1e-12);
                total += a[r * 5 + c];
            }
            EXPECT_NEAR(total, 1.0, 1e-6);
        }
    }
}

TEST(Softmax, NanThrows) {
    EXPECT_THROW(softmax(Tensor<double>::from_data({2}, {0, std::nan("")})), ValueError);
}

TEST(Elementwise, Examples) {
    EXPECT_EQ(gelu(Tensor<double>::scalar(0)).item(), 0.0);
    auto x = Tensor<double>::full({6}, 3.5);
    auto y = layer_norm(x, Tensor<double>::full({6}, 1.0), Tensor<double>::zeros({6}));
    for (double v : y.data()) EXPECT_LT(std::abs(v), 1e-3);
    for (std::int64_t label = 0; label < 5; ++label) {
        const std::int64_t l[1] = {label};
        EXPECT_NEAR(cross_entropy(Tensor<double>::full({5}, 0.7), std::span<const std::int64_t>(l)).item(),
                    std::log(5.0), 1e-12);
    }
}

TEST(Elementwise, LayerNormZeroMeanUnitVariance) {
    std::mt19937_64 rng(3);
    auto x = rand_tensor({3, 16}, rng, false, -4, 9);
    auto y = layer_norm(x, Tensor<double>::full({16}, 1.0), Tensor<double>::zeros({16}));
    for (std::size_t r = 0; r < 3; ++r) {
        double m = 0, v = 0;
        for (std::size_t c = 0; c < 16; ++c) m += y[r * 16 + c];
        m /= 16;
        for (std::size_t c = 0; c < 16; ++c) v += (y[r * 16 + c] - m) * (y[r * 16 + c] - m);
        EXPECT_NEAR(m, 0.0, 1e-12);
        EXPECT_NEAR(v / 16, 1.0, 1e-3);
    }
}

TEST(Elementwise, Errors) {
    auto a = Tensor<double>::zeros({2, 3});
    EXPECT_THROW(add(a, Tensor<double>::zeros({3, 2})), ShapeError);
    EXPECT_THROW(mul(a, Tensor<double>::zeros({6})), ShapeError);
    const std::int64_t bad[1] = {3};
    EXPECT_THROW(cross_entropy(Tensor<double>::zeros({3}), std::span<const std::int64_t>(bad)), ValueError);
    const std::int64_t oob[1] = {4};
    EXPECT_THROW(embedding_lookup(Tensor<double>::zeros({4, 2}), std::span<const std::int64_t>(oob)), ValueError);
}

TEST(Backward, SumGivesOnes) {
    std::mt19937_64 rng(4);
    auto x = rand_tensor({2, 3, 2}, rng);
    sum(x).backward();
    for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, SquareGivesTwoX) {
    std::mt19937_64 rng(5);
    auto x = rand_tensor({7}, rng);
    sum(mul(x, x)).backward();
    for (std::size_t i = 0; i < 7; ++i) EXPECT_DOUBLE_EQ(x.grad()[i], 2 * x[i]);
}

TEST(Backward, TwoPathsAccumulate) {
    // y = a*x + x*x: dy/dx = a + 2x through two uses of x.
    auto x = Tensor<double>::from_data({1}, {3.0}, true);
    auto a = Tensor<double>::from_data({1}, {5.0});
    sum(add(mul(a, x), mul(x, x))).backward();
    EXPECT_DOUBLE_EQ(x.grad()[0], 5.0 + 6.0);
}

TEST(Backward, GradientsAccumulateAcrossCalls) {
    auto x = Tensor<double>::from_data({2}, {1.0, -2.0}, true);
    sum(scale(x, 3.0)).backward();
    sum(scale(x, 3.0)).backward();
    EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
    x.zero_grad();
    EXPECT_DOUBLE_EQ(x.grad()[1], 0.0);
}

TEST(Backward, SecondBackwardThrows) {
    auto x = Tensor<double>::from_data({2}, {1.0, 2.0}, true);
    auto loss = sum(mul(x, x));
    loss.backward();
    EXPECT_THROW(loss.backward(), GraphError);
}

TEST(Backward, NonScalarThrows) {
    auto x = Tensor<double>::from_data({2}, {1.0, 2.0}, true);
    EXPECT_THROW(scale(x, 2.0).backward(), GraphError);
}

TEST(Backward, FrozenTensorsNeverAccumulate) {
    auto x = Tensor<double>::from_data({2}, {1.0, 2.0}, true);
    auto w = Tensor<double>::from_data({2}, {3.0, 4.0});
    sum(mul(x, w)).backward();
    EXPECT_FALSE(w.has_grad());
    EXPECT_TRUE(x.has_grad());
}

TEST(Backward, NoGradGuardRecordsNothing) {
    auto x = Tensor<double>::from_data({2}, {1.0, 2.0}, true);
    Tensor<double> y;
    {
        NoGradGuard g;
        y = sum(mul(x, x));
    }
    EXPECT_TRUE(y.is_leaf());
    EXPECT_FALSE(y.requires_grad());
    EXPECT_TRUE(grad_mode_enabled());
}

TEST(GradCheck, Matmul) {
    std::mt19937_64 rng(10);
    auto a = rand_tensor({3, 4}, rng), b = rand_tensor({4, 2}, rng);
    expect_grads_match({{"a", a}, {"b", b}}, [&] { return probe(matmul(a, b), 1); });
}

TEST(GradCheck, AddMulScaleBias) {
    std::mt19937_64 rng(11);
    auto a = rand_tensor({3, 4}, rng), b = rand_tensor({3, 4}, rng), bias = rand_tensor({4}, rng);
    expect_grads_match({{"a", a}, {"b", b}, {"bias", bias}},
                       [&] { return probe(add_bias(scale(add(mul(a, b), a), 0.7), bias), 2); });
}

TEST(GradCheck, Gelu) {
    std::mt19937_64 rng(12);
    auto x = rand_tensor({10}, rng, true, -3, 3);
    expect_grads_match({{"x", x}}, [&] { return probe(gelu(x), 3); });
}

TEST(GradCheck, Softmax) {
    std::mt19937_64 rng(13);
    auto x = rand_tensor({3, 5}, rng, true, -2, 2);
    expect_grads_match({{"x", x}}, [&] { return probe(softmax(x), 4); });
}

TEST(GradCheck, LayerNorm) {
    std::mt19937_64 rng(14);
    auto x = rand_tensor({3, 6}, rng, true, -2, 2), g = rand_tensor({6}, rng), b = rand_tensor({6}, rng);
    expect_grads_match({{"x", x}, {"gamma", g}, {"beta", b}}, [&] { return probe(layer_norm(x, g, b), 5); });
}

TEST(GradCheck, EmbeddingLookupWithRepeats) {
    std::mt19937_64 rng(15);
    auto table = rand_tensor({5, 3}, rng);
    const std::vector<std::int64_t> ids{4, 0, 4, 2};
    expect_grads_match({{"table", table}}, [&] { return probe(embedding_lookup(table, std::span(ids)), 6); });
}

TEST(GradCheck, CrossEntropyBatch) {
    std::mt19937_64 rng(16);
    auto logits = rand_tensor({4, 3}, rng, true, -2, 2);
    const std::vector<std::int64_t> labels{0, 2, 1, 2};
    expect_grads_match({{"logits", logits}}, [&] { return cross_entropy(logits, std::span(labels)); });
}

TEST(GradCheck, MeanConcatSliceStackTransposeReshape) {
    std::mt19937_64 rng(17);
    auto a = rand_tensor({2, 3}, rng), b = rand_tensor({3, 3}, rng), c = rand_tensor({2, 3}, rng);
    expect_grads_match({{"a", a}, {"b", b}, {"c", c}}, [&] {
        auto cat = concat_rows(a, b);
        auto mid = slice_rows(cat, 1, 3);
        std::vector<Tensor<double>> parts{transpose(slice_rows(mid, 0, 2)), transpose(c)};
        auto st = stack(std::span<const Tensor<double>>(parts));
        return add(probe(reshape(st, {4, 3}), 7), mean(mid));
    });
}

TEST(GradCheck, Conv2d) {
    std::mt19937_64 rng(18);
    auto x = rand_tensor({2, 5, 5}, rng), w = rand_tensor({3, 2, 3, 3}, rng), b = rand_tensor({3}, rng);
    expect_grads_match({{"x", x}, {"w", w}, {"b", b}}, [&] { return probe(conv2d(x, w, b, 2, 1), 8); });
}

TEST(GradCheck, CausalAttention) {
    std::mt19937_64 rng(19);
    auto qkv = rand_tensor({5, 12}, rng, true, -1.5, 1.5);
    expect_grads_match({{"qkv", qkv}}, [&] { return probe(causal_attention(qkv, 2), 9); });
}

TEST(Conv2d, MatchesDirectSum) {
    std::mt19937_64 rng(20);
    auto x = rand_tensor({2, 4, 4}, rng, false), w = rand_tensor({1, 2, 3, 3}, rng, false);
    auto b = Tensor<double>::from_data({1}, {0.25});
    auto y = conv2d(x, w, b, 1, 1);
    ASSERT_EQ(y.shape(), (Shape{1, 4, 4}));
    for (int oy = 0; oy < 4; ++oy)
        for (int ox = 0; ox < 4; ++ox) {
            double s = 0.25;
            for (int c = 0; c < 2; ++c)
                for (int ky = 0; ky < 3; ++ky)
                    for (int kx = 0; kx < 3; ++kx) {
                        const int iy = oy + ky - 1, ix = ox + kx - 1;
                        if (iy < 0 || ix < 0 || iy >= 4 || ix >= 4) continue;
                        s += x[(c * 4 + iy) * 4 + ix] * w[(c * 3 + ky) * 3 + kx];
                    }
            EXPECT_NEAR(y[oy * 4 + ox], s, 1e-12);
        }
}

TEST(CausalAttention, RowReadsOnlyEarlierRows) {
    std::mt19937_64 rng(21);
    auto qkv = rand_tensor({6, 12}, rng, false);
    auto base = causal_attention(qkv, 2);
    for (std::size_t j = 0; j < 6; ++j) {
        auto edited = qkv.clone();
        for (std::size_t c = 0; c < 12; ++c) edited[j * 12 + c] += 5.0;
        auto out = causal_attention(edited, 2);
        for (std::size_t i = 0; i < j; ++i)
            for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(out[i * 4 + c], base[i * 4 + c]);
    }
}

TEST(CausalAttention, SingleRowReturnsValue) {
    auto qkv = Tensor<double>::from_data({1, 6}, {0.3, -1, 2, 0.5, 7, -8});
    auto out = causal_attention(qkv, 2);
    EXPECT_EQ(out[0], 7.0);
    EXPECT_EQ(out[1], -8.0);
}

TEST(Dropout, IdentityWhenOffAndScaledWhenOn) {
    std::mt19937_64 rng(22);
    auto x = rand_tensor({100}, rng, false);
    EXPECT_TRUE(dropout(x, 0.0, &rng).same_storage(x));
    EXPECT_TRUE(dropout(x, 0.5, nullptr).same_storage(x));
    auto y = dropout(x, 0.5, &rng);
    for (std::size_t i = 0; i < 100; ++i) EXPECT_TRUE(y[i] == 0.0 || std::abs(y[i] - 2 * x[i]) < 1e-15);
    EXPECT_THROW(dropout(x, 1.0, &rng), ValueError);
}

}  // namespace
