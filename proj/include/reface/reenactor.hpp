#pragma once

#include <vector>

#include "reface/adaconv.hpp"
#include "reface/nn.hpp"

namespace reface::reenact {

struct ReenactorConfig {
    int resolution = 64;  // square, divisible by 4
    int c0 = 16;          // stem width
    int c = 64;           // bottleneck width
    int l = 9;            // transform block count
    int d_geo = 136;      // must equal the fuser's 2*n_lm
    int k = 3;            // AdaConv kernel
    int cg = 1;           // AdaConv channels-per-group
    int d_hidden = 128;   // AdaConv generator hidden width

    ada::AdaConvSpec adaconv_spec() const { return {k, c, cg, d_geo, d_hidden}; }
};

// Residual block with one geometry injection site:
//   y = x + conv2(ada_conv(lrelu(instance_norm(conv1(x))), gen(f_geo)))
// conv2 is zero-initialized (residual branch starts inert) and no
// normalization follows ada_conv, so the generated per-channel bias reaches
// the output unmodified.
template <typename S>
struct TransformBlock {
    Conv2dLayer<S> conv1, conv2;
    InstanceNormLayer<S> norm;
    ada::Generator<S> gen;

    TransformBlock() = default;
    TransformBlock(Rng& rng, const ada::AdaConvSpec& spec, bool identity_init);

    Tensor<S> forward(const Tensor<S>& f_in, const Tensor<S>& f_geo,
                      const ada::AdaConvSpec& spec) const;
    void collect(const std::string& name, ParamList<S>& out);
};

template <typename S>
struct Reenactor {
    ReenactorConfig cfg;
    Conv2dLayer<S> e1, e2, e3;
    InstanceNormLayer<S> en1, en2, en3;
    std::vector<TransformBlock<S>> blocks;
    Conv2dLayer<S> d1, d2, d3;
    InstanceNormLayer<S> dn1, dn2;

    Reenactor() = default;
    // identity_init: blocks start as identities (see TransformBlock); false
    // randomizes everything, which gradient checks need.
    Reenactor(Rng& rng, const ReenactorConfig& cfg, bool identity_init = true);

    Tensor<S> encode(const Tensor<S>& img) const;   // [N,3,H,W] -> [N,C,H/4,W/4]
    Tensor<S> decode(const Tensor<S>& feat) const;  // [N,C,H/4,W/4] -> [N,3,H,W]
    // decode(blocks(encode(img), f_geo))
    Tensor<S> forward(const Tensor<S>& img, const Tensor<S>& f_geo) const;
    void collect(ParamList<S>& out);
};

}  // namespace reface::reenact
