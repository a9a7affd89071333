#pragma once

#include <vector>

#include "reface/nn.hpp"

namespace reface::train {

struct CriticConfig {
    int layers = 4;      // stride-2 4x4 conv stages
    int base = 16;       // channels of the first stage (doubles per stage)
    double clip = 0.01;  // weight clip bound
    int critic_steps = 1;
};

// Patch critic: stride-2 4x4 convs with leaky_relu (no norm on the first
// stage), then a 1-channel 4x4 conv producing an unbounded score map.
template <typename S>
struct Critic {
    CriticConfig cfg;
    std::vector<Conv2dLayer<S>> convs;
    std::vector<InstanceNormLayer<S>> norms;  // one per stage after the first
    Conv2dLayer<S> head;

    Critic() = default;
    Critic(Rng& rng, const CriticConfig& cfg);

    Tensor<S> forward(const Tensor<S>& img) const;  // [N,3,H,W] -> [N,1,h,w]
    void collect(ParamList<S>& out);
};

}  // namespace reface::train
