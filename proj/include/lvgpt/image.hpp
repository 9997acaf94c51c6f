#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "lvgpt/tensor.hpp"

namespace lvgpt {

// 8-bit interleaved RGB image, row-major.
struct RgbImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> rgb;

    RgbImage() = default;
    RgbImage(std::size_t w, std::size_t h) : width(w), height(h), rgb(w * h * 3, 0) {}

    std::uint8_t* pixel(std::size_t x, std::size_t y) { return rgb.data() + (y * width + x) * 3; }
    const std::uint8_t* pixel(std::size_t x, std::size_t y) const { return rgb.data() + (y * width + x) * 3; }

    friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

// Binary PPM (P6) with maxval 255. Both throw DataError.
RgbImage read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const RgbImage& image);

// [3, H, W] tensor scaled to [0, 1].
template <typename T>
Tensor<T> image_to_tensor(const RgbImage& image);

}  // namespace lvgpt
