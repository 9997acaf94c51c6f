#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "lvgpt/dataset.hpp"
#include "lvgpt/image.hpp"

namespace lvgpt {

// Grid-of-shapes VQA generator. Question types: "color" and "shape" at a named
// grid cell, and "count" of a shape over the whole grid.
struct SyntheticSpec {
    std::size_t grid_side = 2;  // 2 or 3
    std::size_t image_size = 32;
    std::vector<std::string> shapes{"square", "circle", "triangle"};
    std::vector<std::string> colors{"red", "green", "blue"};
    std::size_t templates_per_type = 3;  // K, 2..4
    std::size_t max_count = 0;           // 0 = number of grid cells
    std::size_t n_train = 2000;
    std::size_t n_test = 400;
    // Train on templates 0..K-2 only; the test split then also draws from
    // 0..K-2 and the rephrased split uses template K-1.
    bool holdout_last_template = false;
    std::uint64_t seed = 1;

    // Throws ConfigError when the spec cannot be satisfied.
    void validate() const;
    std::size_t cells() const { return grid_side * grid_side; }
    std::size_t effective_max_count() const { return max_count == 0 ? cells() : max_count; }
};

struct SceneCell {
    std::string shape;
    std::string color;
    friend bool operator==(const SceneCell&, const SceneCell&) = default;
};

struct Scene {
    std::size_t side = 0;
    std::vector<SceneCell> cells;  // row-major

    // "side=2;red:square,green:circle,..." (row-major cells)
    std::string describe() const;
};

// Class names in id order: colors, shapes, then counts "0".."max_count".
LabelMap synthetic_label_map(const SyntheticSpec& spec);

// Phrase naming grid cell `index` ("top left", ...).
std::string cell_phrase(std::size_t side, std::size_t index);

// Renders a scene with per-shape jitter and pixel noise drawn from rng.
RgbImage render_scene(const Scene& scene, std::size_t image_size, std::mt19937_64& rng);

std::string question_text(std::string_view type, std::size_t template_id, std::string_view subject);

struct SyntheticData {
    VQADataset train;
    VQADataset test;
    VQADataset test_rephrased;  // same scenes and answers as test, template K-1
    std::filesystem::path train_manifest, test_manifest, rephrased_manifest, label_map;
};

// Writes images/, train.jsonl, test.jsonl, test_rephrased.jsonl and
// labels.tsv under out_dir. Deterministic in spec.seed; every answer class
// appears equally often (up to rounding) in each split; train and test
// scenes are disjoint.
SyntheticData generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

}  // namespace lvgpt
