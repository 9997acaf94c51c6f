#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lvgpt/tensor.hpp"

namespace lvgpt {

template <typename T>
using NamedParams = std::vector<std::pair<std::string, Tensor<T>>>;

inline constexpr double kInitStd = 0.02;

// Seeded source of parameter tensors. Draws happen in call order, so a fixed
// construction order gives bitwise-reproducible initialization.
template <typename T>
class ParamInit {
public:
    explicit ParamInit(std::uint64_t seed, double stddev = kInitStd) : rng_(seed), stddev_(stddev) {}

    Tensor<T> normal(Shape shape) {
        std::normal_distribution<double> dist(0.0, stddev_);
        std::vector<T> data(lvgpt::numel(shape));
        for (auto& v : data) v = T(dist(rng_));
        return Tensor<T>::from_data(std::move(shape), std::move(data), true);
    }
    Tensor<T> zeros(Shape shape) { return Tensor<T>::zeros(std::move(shape), true); }
    Tensor<T> ones(Shape shape) { return Tensor<T>::full(std::move(shape), T(1), true); }

private:
    std::mt19937_64 rng_;
    double stddev_;
};

}  // namespace lvgpt
