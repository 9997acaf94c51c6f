#include "lvgpt/adam.hpp"

#include <cmath>
#include <string>

namespace lvgpt {

template <typename T>
void adam_step(std::span<Tensor<T>> params, AdamState<T>& state) {
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t p = 0; p < params.size(); ++p) {
            state.m[p].assign(params[p].numel(), T(0));
            state.v[p].assign(params[p].numel(), T(0));
        }
    }
    if (state.m.size() != params.size()) {
        throw ShapeError("adam_step: optimizer state tracks " + std::to_string(state.m.size()) +
                         " parameters, got " + std::to_string(params.size()));
    }
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (!params[p].has_grad()) {
            throw GraphError("adam_step: parameter " + std::to_string(p) + " has no gradient");
        }
        if (state.m[p].size() != params[p].numel()) {
            throw ShapeError("adam_step: moment buffers of parameter " + std::to_string(p) +
                             " do not match its shape " + to_string(params[p].shape()));
        }
    }

    ++state.step;
    const auto& cfg = state.config;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    const T b1 = T(cfg.beta1), b2 = T(cfg.beta2);
    const T lr = T(cfg.lr), eps = T(cfg.epsilon);
    const T inv_bc1 = T(1.0 / bc1), inv_bc2 = T(1.0 / bc2);

    for (std::size_t p = 0; p < params.size(); ++p) {
        auto data = params[p].data();
        auto grad = params[p].grad();
        auto& m = state.m[p];
        auto& v = state.v[p];
        for (std::size_t i = 0; i < data.size(); ++i) {
            const T g = grad[i];
            m[i] = b1 * m[i] + (T(1) - b1) * g;
            v[i] = b2 * v[i] + (T(1) - b2) * g * g;
            const T mhat = m[i] * inv_bc1;
            const T vhat = v[i] * inv_bc2;
            data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

template void adam_step<float>(std::span<Tensor<float>>, AdamState<float>&);
template void adam_step<double>(std::span<Tensor<double>>, AdamState<double>&);

}  // namespace lvgpt
