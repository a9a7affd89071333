#pragma once

#include <vector>

#include "reface/tensor.hpp"

namespace reface {

// Bias-corrected Adam. m/v run parallel to the parameter list and are part
// of the training state a checkpoint must capture for exact resume.
template <typename S>
struct AdamState {
    int64_t step = 0;
    S lr = S(2e-4);
    S beta1 = S(0.5);
    S beta2 = S(0.999);
    S eps = S(1e-8);
    std::vector<std::vector<S>> m;
    std::vector<std::vector<S>> v;
};

// One in-place update from the parameters' accumulated grads (missing grad
// buffers count as zero). Allocates m/v lazily on first call.
template <typename S>
void adam_step(std::vector<Tensor<S>>& params, AdamState<S>& state);

template <typename S>
class Adam {
public:
    Adam() = default;
    Adam(std::vector<Tensor<S>> params, S lr, S beta1 = S(0.5), S beta2 = S(0.999),
         S eps = S(1e-8))
        : params_(std::move(params)) {
        state_.lr = lr;
        state_.beta1 = beta1;
        state_.beta2 = beta2;
        state_.eps = eps;
    }

    void step() { adam_step(params_, state_); }
    void zero_grad() {
        for (auto& p : params_) p.zero_grad();
    }

    std::vector<Tensor<S>>& params() { return params_; }
    AdamState<S>& state() { return state_; }
    const AdamState<S>& state() const { return state_; }

private:
    std::vector<Tensor<S>> params_;
    AdamState<S> state_;
};

}  // namespace reface
