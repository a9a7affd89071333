#include "reface/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace reface {

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(shape[i]);
    }
    s += ']';
    return s;
}

namespace {
thread_local bool g_grad_enabled = true;
}

bool GradMode::enabled() { return g_grad_enabled; }
void GradMode::set(bool on) { g_grad_enabled = on; }

template <typename S>
void Tensor<S>::check_finite(const char* what) const {
    for (S v : store_->data) {
        if (!std::isfinite(static_cast<double>(v)))
            fail_value("non-finite value in ", what);
    }
}

template <typename S>
Tensor<S> make_op(const std::vector<Tensor<S>>& inputs, Shape out_shape, std::vector<S> out_data,
                  std::function<void(const std::vector<S>&, const std::vector<std::vector<S>*>&)> backward_fn) {
    Tensor<S> out(std::move(out_shape), std::move(out_data));
    if (!GradMode::enabled()) return out;
    bool track = false;
    for (const auto& in : inputs)
        if (in.needs_grad()) track = true;
    if (!track) return out;

    auto node = std::make_shared<GradNode<S>>();
    node->inputs.reserve(inputs.size());
    for (const auto& in : inputs) node->inputs.push_back(in.store());
    node->backward = std::move(backward_fn);
    out.store()->node = std::move(node);
    out.store()->requires_grad = true;
    return out;
}

template <typename S>
void backward(const Tensor<S>& loss) {
    REFACE_CHECK(loss.numel() == 1, "backward() requires a scalar loss, got shape ",
                 shape_str(loss.shape()));

    using Store = TensorStorage<S>;
    Store* root = loss.store().get();
    if (!root->node && !root->requires_grad) return;

    // Iterative post-order DFS over the recorded graph.
    std::vector<Store*> topo;
    std::unordered_set<Store*> visited;
    std::vector<std::pair<Store*, size_t>> stack;
    stack.push_back({root, 0});
    visited.insert(root);
    while (!stack.empty()) {
        auto& [cur, idx] = stack.back();
        if (cur->node && idx < cur->node->inputs.size()) {
            Store* next = cur->node->inputs[idx++].get();
            if ((next->node || next->requires_grad) && !visited.count(next)) {
                visited.insert(next);
                stack.push_back({next, 0});
            }
        } else {
            topo.push_back(cur);
            stack.pop_back();
        }
    }

    for (Store* s : topo) s->flow.assign(s->data.size(), S(0));
    root->flow[0] = S(1);

    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        Store* s = *it;
        if (s->node) {
            std::vector<std::vector<S>*> gins(s->node->inputs.size(), nullptr);
            for (size_t i = 0; i < s->node->inputs.size(); ++i) {
                Store* in = s->node->inputs[i].get();
                if (in->node || in->requires_grad) gins[i] = &in->flow;
            }
            s->node->backward(s->flow, gins);
        }
        if (!s->node && s->requires_grad) {
            if (s->grad.empty()) s->grad.assign(s->data.size(), S(0));
            for (size_t i = 0; i < s->flow.size(); ++i) s->grad[i] += s->flow[i];
        }
    }

    for (Store* s : topo) {
        s->flow.clear();
        s->flow.shrink_to_fit();
    }
}

template class Tensor<float>;
template class Tensor<double>;

template Tensor<float> make_op<float>(const std::vector<Tensor<float>>&, Shape, std::vector<float>,
                                      std::function<void(const std::vector<float>&, const std::vector<std::vector<float>*>&)>);
template Tensor<double> make_op<double>(const std::vector<Tensor<double>>&, Shape, std::vector<double>,
                                        std::function<void(const std::vector<double>&, const std::vector<std::vector<double>*>&)>);
template void backward<float>(const Tensor<float>&);
template void backward<double>(const Tensor<double>&);

}  // namespace reface
