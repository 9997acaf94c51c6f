#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <limits>

#include "lvgpt/checkpoint.hpp"
#include "lvgpt/error.hpp"
#include "support/fixtures.hpp"
#include "support/tempdir.hpp"

using namespace lvgpt;

namespace {

TEST(Checkpoint, TensorRoundTripIsBitwise) {
    const std::vector<float> values{0.0f, -0.0f, 1.5f, std::numeric_limits<float>::denorm_min(),
                                    std::numeric_limits<float>::infinity(), std::nanf("7"), -3.25e-30f};
    auto t = Tensor<float>::from_data({7}, values);
    auto back = restore_tensor<float>(store_tensor("x", t));
    for (std::size_t i = 0; i < values.size(); ++i)
        EXPECT_EQ(std::bit_cast<std::uint32_t>(back[i]), std::bit_cast<std::uint32_t>(values[i]));
    EXPECT_THROW(restore_tensor<double>(store_tensor("x", t)), CheckpointError);
}

TEST(Checkpoint, EncodeDecodeAndFileRoundTrip) {
    lvgpt::testing::TempDir dir;
    auto model = init_params<double>(lvgpt::testing::tiny_config(VisionBackend::cnn_lite), 4);
    Checkpoint c{"model.d = 8\n", {"<pad>", "<unk>", "what"}, {"yes", "no"}, store_parameters(model)};
    EXPECT_EQ(decode_checkpoint(encode_checkpoint(c)), c);
    write_checkpoint(dir.path() / "m.lvgp", c);
    const auto back = read_checkpoint(dir.path() / "m.lvgp");
    EXPECT_EQ(back, c);

    auto fresh = init_params<double>(lvgpt::testing::tiny_config(VisionBackend::cnn_lite), 99);
    load_parameters(fresh, back.tensors);
    EXPECT_EQ(store_parameters(fresh), store_parameters(model));
}

TEST(Checkpoint, MalformedInputsThrow) {
    auto model = init_params<float>(lvgpt::testing::tiny_config(VisionBackend::vit_lite), 1);
    Checkpoint c{"", {"<pad>", "<unk>"}, {"a", "b"}, store_parameters(model)};
    auto bytes = encode_checkpoint(c);
    auto bad = bytes;
    bad[0] = 'X';
    EXPECT_THROW(decode_checkpoint(bad), CheckpointError);
    bad = bytes;
    bad[4] = 9;  // version
    EXPECT_THROW(decode_checkpoint(bad), CheckpointError);
    bad.assign(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(bytes.size() / 2));
    EXPECT_THROW(decode_checkpoint(bad), CheckpointError);
    bad = bytes;
    bad.push_back(0);
    EXPECT_THROW(decode_checkpoint(bad), CheckpointError);
    EXPECT_THROW(read_checkpoint("/nonexistent/model.lvgp"), CheckpointError);
}

TEST(Checkpoint, LoadRejectsMismatchedTensors) {
    auto model = init_params<float>(lvgpt::testing::tiny_config(VisionBackend::vit_lite), 1);
    auto stored = store_parameters(model);
    auto missing = stored;
    missing.pop_back();
    EXPECT_THROW(load_parameters(model, missing), CheckpointError);
    auto reshaped = stored;
    reshaped[0].shape = {reshaped[0].shape[0] * reshaped[0].shape[1]};
    EXPECT_THROW(load_parameters(model, reshaped), CheckpointError);
    auto other = init_params<float>(lvgpt::testing::tiny_config(VisionBackend::cnn_lite), 1);
    EXPECT_THROW(load_parameters(other, stored), CheckpointError);
}

}  // namespace
