#include "reface/optim.hpp"

#include <cmath>

namespace reface {

template <typename S>
void adam_step(std::vector<Tensor<S>>& params, AdamState<S>& state) {
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i].numel(), S(0));
            state.v[i].assign(params[i].numel(), S(0));
        }
    }
    REFACE_CHECK(state.m.size() == params.size(), "adam_step: state tracks ", state.m.size(),
                 " parameters, got ", params.size());

    state.step += 1;
    const S bc1 = S(1) - static_cast<S>(std::pow(static_cast<double>(state.beta1),
                                                 static_cast<double>(state.step)));
    const S bc2 = S(1) - static_cast<S>(std::pow(static_cast<double>(state.beta2),
                                                 static_cast<double>(state.step)));
    for (size_t i = 0; i < params.size(); ++i) {
        if (!params[i].has_grad()) continue;
        REFACE_CHECK(static_cast<int64_t>(state.m[i].size()) == params[i].numel(),
                     "adam_step: moment buffer size ", state.m[i].size(),
                     " does not match parameter ", shape_str(params[i].shape()));
        auto g = params[i].grad();
        S* p = params[i].ptr();
        S* m = state.m[i].data();
        S* v = state.v[i].data();
        for (int64_t k = 0; k < params[i].numel(); ++k) {
            m[k] = state.beta1 * m[k] + (S(1) - state.beta1) * g[k];
            v[k] = state.beta2 * v[k] + (S(1) - state.beta2) * g[k] * g[k];
            const S mhat = m[k] / bc1;
            const S vhat = v[k] / bc2;
            p[k] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

template void adam_step<float>(std::vector<Tensor<float>>&, AdamState<float>&);
template void adam_step<double>(std::vector<Tensor<double>>&, AdamState<double>&);

}  // namespace reface
