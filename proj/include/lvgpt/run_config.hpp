#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lvgpt/adam.hpp"
#include "lvgpt/model.hpp"

namespace lvgpt {

enum class Precision { f32, f64 };
enum class Profile { paper, desk };

std::string_view to_string(Precision p);
Profile parse_profile(std::string_view s);

// Everything a train/eval/ablate run needs. The text form is one
// "key = value" per line; '#' starts a comment; unknown keys are rejected.
// model.vocab_size and model.num_classes are overwritten from the data at
// training time.
struct RunConfig {
    ModelConfig model;
    AdamConfig optim;
    std::size_t epochs = 80;
    std::size_t batch_size = 64;
    std::uint64_t seed = 42;
    Precision precision = Precision::f32;
    std::size_t vocab_min_count = 1;
    std::string train_manifest;
    std::string test_manifest;
    std::string rephrased_manifest;
    std::string label_map;  // empty: labels.tsv beside the train manifest
    std::string out_dir = "runs/lvgpt";
    std::size_t eval_threads = 1;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// paper: 80 epochs, batch 64, lr 1e-5. desk: 10 epochs, batch 4, lr 5e-4,
// vit_lite tokenizer with one token per cell of a 2x2 scene.
RunConfig default_run_config(Profile profile = Profile::paper);

// Schema keys in serialization order.
const std::vector<std::string>& run_config_keys();

// Sets one key from its text value. Throws ConfigError on unknown keys or
// malformed values.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);
std::string get_setting(const RunConfig& cfg, std::string_view key);

RunConfig parse_run_config(std::string_view text, const RunConfig& base = default_run_config());
RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& base = default_run_config());
std::string serialize_run_config(const RunConfig& cfg);

}  // namespace lvgpt
