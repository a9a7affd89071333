#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "reface/ops.hpp"
#include "reface/rng.hpp"
#include "reface/tensor.hpp"

namespace reface {

template <typename S>
struct NamedParam {
    std::string name;
    Tensor<S> tensor;
};

template <typename S>
using ParamList = std::vector<NamedParam<S>>;

template <typename S>
std::vector<Tensor<S>> tensors_of(const ParamList<S>& params) {
    std::vector<Tensor<S>> out;
    out.reserve(params.size());
    for (const auto& p : params) out.push_back(p.tensor);
    return out;
}

// Fan-in-scaled uniform init (bound 1/sqrt(fan_in)), the usual default for
// conv/linear layers.
template <typename S>
inline void fill_uniform(Tensor<S>& t, Rng& rng, double bound) {
    for (auto& v : t.data()) v = static_cast<S>(rng.uniform(-bound, bound));
}

// Leaky slope used throughout the networks (none of the layer specs pin it).
inline constexpr double kLeakySlope = 0.2;

template <typename S>
Tensor<S> lrelu(const Tensor<S>& x) {
    return leaky_relu(x, static_cast<S>(kLeakySlope));
}

template <typename S>
struct Conv2dLayer {
    Tensor<S> w, b;
    int stride = 1, pad = 0, groups = 1;

    Conv2dLayer() = default;
    Conv2dLayer(Rng& rng, int cin, int cout, int k, int stride_, int pad_, int groups_ = 1,
                bool zero_init = false)
        : stride(stride_), pad(pad_), groups(groups_) {
        w = Tensor<S>({cout, cin / groups_, k, k});
        b = Tensor<S>({cout});
        if (!zero_init) {
            const double bound = 1.0 / std::sqrt(double(cin / groups_) * k * k);
            fill_uniform(w, rng, bound);
            fill_uniform(b, rng, bound);
        }
        w.set_requires_grad(true);
        b.set_requires_grad(true);
    }

    Tensor<S> operator()(const Tensor<S>& x) const { return conv2d(x, w, b, stride, pad, groups); }

    void collect(const std::string& name, ParamList<S>& out) {
        out.push_back({name + ".w", w});
        out.push_back({name + ".b", b});
    }
};

template <typename S>
struct Conv1dLayer {
    Tensor<S> w, b;
    int stride = 1, pad = 0;

    Conv1dLayer() = default;
    Conv1dLayer(Rng& rng, int cin, int cout, int k, int stride_, int pad_)
        : stride(stride_), pad(pad_) {
        w = Tensor<S>({cout, cin, k});
        b = Tensor<S>({cout});
        const double bound = 1.0 / std::sqrt(double(cin) * k);
        fill_uniform(w, rng, bound);
        fill_uniform(b, rng, bound);
        w.set_requires_grad(true);
        b.set_requires_grad(true);
    }

    Tensor<S> operator()(const Tensor<S>& x) const { return conv1d(x, w, b, stride, pad); }

    void collect(const std::string& name, ParamList<S>& out) {
        out.push_back({name + ".w", w});
        out.push_back({name + ".b", b});
    }
};

template <typename S>
struct LinearLayer {
    Tensor<S> w, b;

    LinearLayer() = default;
    LinearLayer(Rng& rng, int din, int dout, bool zero_init = false) {
        w = Tensor<S>({dout, din});
        b = Tensor<S>({dout});
        if (!zero_init) {
            const double bound = 1.0 / std::sqrt(double(din));
            fill_uniform(w, rng, bound);
            fill_uniform(b, rng, bound);
        }
        w.set_requires_grad(true);
        b.set_requires_grad(true);
    }

    Tensor<S> operator()(const Tensor<S>& x) const { return linear(x, w, b); }

    void collect(const std::string& name, ParamList<S>& out) {
        out.push_back({name + ".w", w});
        out.push_back({name + ".b", b});
    }
};

template <typename S>
struct InstanceNormLayer {
    Tensor<S> scale, shift;

    InstanceNormLayer() = default;
    explicit InstanceNormLayer(int channels) {
        scale = Tensor<S>::full({channels}, S(1));
        shift = Tensor<S>({channels});
        scale.set_requires_grad(true);
        shift.set_requires_grad(true);
    }

    Tensor<S> operator()(const Tensor<S>& x) const { return instance_norm(x, scale, shift); }

    void collect(const std::string& name, ParamList<S>& out) {
        out.push_back({name + ".scale", scale});
        out.push_back({name + ".shift", shift});
    }
};

}  // namespace reface
