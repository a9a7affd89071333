#pragma once

#include "reface/nn.hpp"

namespace reface::ada {

// Shape contract of one dynamic-convolution injection site. cg is
// channels-per-group (groups = c/cg), the only reading under which the
// weight count k*k*cg*c matches a grouped conv and {k=1, cg=1} collapses to
// a per-channel affine map. Default {k=3, cg=1}: depthwise 3x3.
struct AdaConvSpec {
    int k = 3;
    int c = 64;
    int cg = 1;
    int d_geo = 136;
    int d_hidden = 128;
};

void validate(const AdaConvSpec& spec);

// k*k*cg*c weights + c biases
int64_t param_count(const AdaConvSpec& spec);

// The two linear layers that turn f_geo into convolution parameters. Each
// injection site owns an independent generator.
template <typename S>
struct Generator {
    LinearLayer<S> l1, l2;

    Generator() = default;
    // identity_init: l2 weights zero and l2 bias a center-tap-1/bias-0
    // kernel, so the generated convolution starts as a no-op regardless of
    // f_geo. Otherwise both layers are fan-in random (gradcheck needs live
    // paths).
    Generator(Rng& rng, const AdaConvSpec& spec, bool identity_init = true);

    void collect(const std::string& name, ParamList<S>& out) {
        l1.collect(name + ".l1", out);
        l2.collect(name + ".l2", out);
    }
};

// Per-sample generated parameters. weight stacks the N per-sample kernels
// along the leading axis ([N*C, cg, k, k]; for N=1 this is the plain
// [C, cg, k, k] layout), bias likewise [N*C]. Both stay connected to f_geo
// in the autodiff graph.
template <typename S>
struct GeneratedParams {
    Tensor<S> weight;
    Tensor<S> bias;
};

template <typename S>
GeneratedParams<S> generate_params(const Tensor<S>& f_geo, const AdaConvSpec& spec,
                                   const Generator<S>& gen);

// Grouped convolution of f_in [N,C,H,W] with the per-sample generated
// kernels, stride 1, shape-preserving padding. Implemented by folding the
// batch into the group axis so one grouped conv applies a different kernel
// per sample.
template <typename S>
Tensor<S> ada_conv(const Tensor<S>& f_in, const GeneratedParams<S>& params,
                   const AdaConvSpec& spec);

}  // namespace reface::ada
