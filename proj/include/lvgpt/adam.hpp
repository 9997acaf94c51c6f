#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lvgpt/tensor.hpp"

namespace lvgpt {

// Moment hyperparameters follow the usual Adam defaults.
struct AdamConfig {
    double lr = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

template <typename T>
struct AdamState {
    AdamConfig config;
    std::size_t step = 0;
    std::vector<std::vector<T>> m;
    std::vector<std::vector<T>> v;

    AdamState() = default;
    explicit AdamState(AdamConfig cfg) : config(cfg) {}
};

// One bias-corrected Adam update over `params`, reading each tensor's grad.
// The first call sizes the moment buffers; later calls require the same
// parameter list. Throws GraphError when a parameter has no gradient.
template <typename T>
void adam_step(std::span<Tensor<T>> params, AdamState<T>& state);

}  // namespace lvgpt
