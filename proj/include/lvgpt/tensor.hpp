#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "lvgpt/error.hpp"

namespace lvgpt {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

// Graph recording is on by default. Forward passes under NoGradGuard build no
// graph, which is what makes concurrent inference over a frozen model safe.
namespace detail {
inline thread_local bool grad_enabled = true;
}

inline bool grad_mode_enabled() { return detail::grad_enabled; }

class NoGradGuard {
public:
    NoGradGuard() : previous_(detail::grad_enabled) { detail::grad_enabled = false; }
    ~NoGradGuard() { detail::grad_enabled = previous_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

namespace detail {

template <typename T>
struct TensorImpl;

template <typename T>
struct GraphNode {
    const char* op = "";
    std::vector<std::shared_ptr<TensorImpl<T>>> inputs;
    // Reads out.grad and accumulates into the inputs' grads.
    std::function<void(TensorImpl<T>& out)> backward;
};

template <typename T>
struct TensorImpl {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty until the first accumulation
    bool requires_grad = false;
    bool consumed = false;  // set on non-leaf tensors once backward has run through them
    std::shared_ptr<GraphNode<T>> node;

    T* grad_buffer() {
        if (grad.empty()) grad.assign(data.size(), T(0));
        return grad.data();
    }
};

}  // namespace detail

// Dense row-major tensor participating in a define-by-run reverse-mode graph.
//
// Tensor is a handle: copies share storage and gradient. Use clone() for a
// deep, graph-free copy.
template <typename T>
class Tensor {
public:
    using value_type = T;
    using Impl = detail::TensorImpl<T>;

    Tensor() : impl_(std::make_shared<Impl>()) {}

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return full(std::move(shape), T(0), requires_grad);
    }

    static Tensor full(Shape shape, T value, bool requires_grad = false) {
        Tensor t;
        const std::size_t n = lvgpt::numel(shape);
        t.impl_->shape = std::move(shape);
        t.impl_->data.assign(n, value);
        t.impl_->requires_grad = requires_grad;
        return t;
    }

    static Tensor from_data(Shape shape, std::vector<T> data, bool requires_grad = false) {
        if (lvgpt::numel(shape) != data.size()) {
            throw ShapeError("tensor shape " + to_string(shape) + " holds " +
                             std::to_string(lvgpt::numel(shape)) + " elements, got " +
                             std::to_string(data.size()));
        }
        Tensor t;
        t.impl_->shape = std::move(shape);
        t.impl_->data = std::move(data);
        t.impl_->requires_grad = requires_grad;
        return t;
    }

    static Tensor scalar(T value, bool requires_grad = false) {
        return from_data({}, {value}, requires_grad);
    }

    const Shape& shape() const { return impl_->shape; }
    std::size_t rank() const { return impl_->shape.size(); }
    std::size_t dim(std::size_t i) const { return impl_->shape.at(i); }
    std::size_t numel() const { return impl_->data.size(); }

    std::span<T> data() { return impl_->data; }
    std::span<const T> data() const { return impl_->data; }
    T& operator[](std::size_t i) { return impl_->data[i]; }
    const T& operator[](std::size_t i) const { return impl_->data[i]; }

    T item() const {
        if (numel() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
        return impl_->data[0];
    }

    bool requires_grad() const { return impl_->requires_grad; }

    Tensor& set_requires_grad(bool on) {
        if (!is_leaf()) throw GraphError("requires_grad can only be changed on leaf tensors");
        impl_->requires_grad = on;
        if (!on) impl_->grad.clear();
        return *this;
    }

    bool is_leaf() const { return impl_->node == nullptr; }
    bool has_grad() const { return !impl_->grad.empty(); }
    std::span<const T> grad() const { return impl_->grad; }
    std::span<T> grad_mut() { return impl_->grad; }

    // Keeps the buffer allocated; a tensor without a buffer stays without one.
    void zero_grad() { std::fill(impl_->grad.begin(), impl_->grad.end(), T(0)); }
    void clear_grad() { impl_->grad.clear(); }

    Tensor clone() const {
        return from_data(impl_->shape, impl_->data, impl_->requires_grad && is_leaf());
    }

    // Value-only copy with no graph attachment.
    Tensor detach() const { return from_data(impl_->shape, impl_->data, false); }

    void backward();

    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

    const std::shared_ptr<Impl>& impl() const { return impl_; }

    // Builds an op result. The node is only recorded when graph mode is on and
    // at least one input requires grad.
    static Tensor make_result(Shape shape, std::vector<T> data, const char* op,
                              std::vector<Tensor> inputs,
                              std::function<void(Impl& out)> backward_fn) {
        Tensor out = from_data(std::move(shape), std::move(data));
        if (!grad_mode_enabled()) return out;
        bool needs = false;
        for (const auto& in : inputs) {
            if (in.impl_->consumed) {
                throw GraphError(std::string("op '") + op +
                                 "' consumes a tensor whose graph was already differentiated");
            }
            needs = needs || in.impl_->requires_grad;
        }
        if (!needs) return out;
        auto node = std::make_shared<detail::GraphNode<T>>();
        node->op = op;
        node->inputs.reserve(inputs.size());
        for (auto& in : inputs) node->inputs.push_back(in.impl_);
        node->backward = std::move(backward_fn);
        out.impl_->requires_grad = true;
        out.impl_->node = std::move(node);
        return out;
    }

private:
    std::shared_ptr<Impl> impl_;
};

template <typename T>
void Tensor<T>::backward() {
    if (numel() != 1) {
        throw GraphError("backward() needs a scalar loss, got shape " + to_string(shape()));
    }
    if (impl_->consumed) {
        throw GraphError("backward() called twice on the same graph; run a new forward pass");
    }
    if (!impl_->requires_grad) {
        throw GraphError("backward() on a tensor that does not require grad");
    }

    // Iterative post-order DFS gives a topological order (inputs before outputs).
    std::vector<Impl*> order;
    std::unordered_set<Impl*> visited;
    std::vector<std::pair<Impl*, std::size_t>> stack{{impl_.get(), 0}};
    visited.insert(impl_.get());
    while (!stack.empty()) {
        auto& [cur, next] = stack.back();
        if (cur->node && next < cur->node->inputs.size()) {
            Impl* child = cur->node->inputs[next++].get();
            if (child->requires_grad && visited.insert(child).second) stack.push_back({child, 0});
        } else {
            order.push_back(cur);
            stack.pop_back();
        }
    }

    impl_->grad_buffer()[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Impl* t = *it;
        if (!t->node) continue;
        if (!t->grad.empty()) t->node->backward(*t);
    }
    for (Impl* t : order) {
        if (!t->node) continue;
        t->node.reset();
        t->consumed = true;
        t->grad.clear();
        t->grad.shrink_to_fit();
    }
    // Keep the loss gradient readable after the graph is released.
    impl_->grad.assign(1, T(1));
}

}  // namespace lvgpt
