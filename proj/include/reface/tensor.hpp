#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "reface/common.hpp"

namespace reface {

using Shape = std::vector<int>;

inline int64_t numel_of(const Shape& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape);

template <typename S>
struct GradNode;

// Shared storage behind a Tensor. `grad` is the persistent gradient of a
// leaf (accumulated across backward() calls); `flow` is scratch used while a
// backward pass is propagating and is released afterwards.
template <typename S>
struct TensorStorage {
    Shape shape;
    std::vector<S> data;
    bool requires_grad = false;
    std::vector<S> grad;
    std::shared_ptr<GradNode<S>> node;
    std::vector<S> flow;
};

// One recorded operation. `backward` receives the gradient flowing into the
// op's output and pointers to the flow buffers of each input (nullptr when
// that input does not need a gradient); it must ADD its contributions.
template <typename S>
struct GradNode {
    std::vector<std::shared_ptr<TensorStorage<S>>> inputs;
    std::function<void(const std::vector<S>&, const std::vector<std::vector<S>*>&)> backward;
};

// Thread-local switch: when disabled, ops do not record the graph.
class GradMode {
public:
    static bool enabled();
    static void set(bool on);
};

struct NoGradGuard {
    NoGradGuard() : prev_(GradMode::enabled()) { GradMode::set(false); }
    ~NoGradGuard() { GradMode::set(prev_); }

private:
    bool prev_;
};

template <typename S>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape)
        : store_(std::make_shared<TensorStorage<S>>()) {
        store_->shape = std::move(shape);
        store_->data.assign(numel_of(store_->shape), S(0));
    }

    Tensor(Shape shape, std::vector<S> data)
        : store_(std::make_shared<TensorStorage<S>>()) {
        REFACE_CHECK(numel_of(shape) == static_cast<int64_t>(data.size()),
                     "tensor data length ", data.size(), " does not match shape ", shape_str(shape));
        store_->shape = std::move(shape);
        store_->data = std::move(data);
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    static Tensor full(Shape shape, S value) {
        Tensor t(std::move(shape));
        for (auto& v : t.store_->data) v = value;
        return t;
    }

    static Tensor scalar(S value) { return Tensor({1}, {value}); }

    bool defined() const { return store_ != nullptr; }
    const Shape& shape() const { return store_->shape; }
    int rank() const { return static_cast<int>(store_->shape.size()); }
    int dim(int i) const { return store_->shape[static_cast<size_t>(i)]; }
    int64_t numel() const { return static_cast<int64_t>(store_->data.size()); }

    std::span<S> data() { return store_->data; }
    std::span<const S> data() const { return store_->data; }
    S* ptr() { return store_->data.data(); }
    const S* ptr() const { return store_->data.data(); }

    S item() const {
        REFACE_CHECK(numel() == 1, "item() on tensor of shape ", shape_str(shape()));
        return store_->data[0];
    }

    bool requires_grad() const { return store_->requires_grad; }
    Tensor& set_requires_grad(bool on) {
        store_->requires_grad = on;
        return *this;
    }
    bool is_leaf() const { return store_->node == nullptr; }
    bool needs_grad() const { return store_->requires_grad || store_->node != nullptr; }

    bool has_grad() const { return !store_->grad.empty(); }
    std::span<S> grad() {
        if (store_->grad.empty()) store_->grad.assign(store_->data.size(), S(0));
        return store_->grad;
    }
    std::span<const S> grad() const { return store_->grad; }
    void zero_grad() {
        for (auto& g : store_->grad) g = S(0);
    }

    // Leaf copy detached from any recorded graph.
    Tensor detach() const {
        Tensor t;
        t.store_ = std::make_shared<TensorStorage<S>>();
        t.store_->shape = store_->shape;
        t.store_->data = store_->data;
        return t;
    }

    Tensor clone() const {
        Tensor t = detach();
        t.store_->requires_grad = store_->requires_grad;
        return t;
    }

    // Debug invariant: every stored scalar is finite.
    void check_finite(const char* what) const;

    std::shared_ptr<TensorStorage<S>> store() const { return store_; }

private:
    std::shared_ptr<TensorStorage<S>> store_;
};

// Graph-construction primitive shared by every op (public so that tests can
// build custom ops, e.g. deliberately wrong gradients for harness checks).
template <typename S>
Tensor<S> make_op(const std::vector<Tensor<S>>& inputs, Shape out_shape, std::vector<S> out_data,
                  std::function<void(const std::vector<S>&, const std::vector<std::vector<S>*>&)> backward_fn);

// Reverse-mode sweep from a scalar loss. Accumulates into the persistent
// grad of every reachable requires_grad leaf; repeated calls accumulate.
template <typename S>
void backward(const Tensor<S>& loss);

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace reface
