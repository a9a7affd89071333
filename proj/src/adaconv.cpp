#include "reface/adaconv.hpp"

namespace reface::ada {

void validate(const AdaConvSpec& spec) {
    if (spec.k < 1 || spec.k % 2 == 0)
        fail_value("adaconv: kernel size must be odd and >= 1, got ", spec.k);
    if (spec.c < 1 || spec.cg < 1 || spec.c % spec.cg != 0)
        fail_value("adaconv: cg=", spec.cg, " must divide c=", spec.c);
    if (spec.d_geo < 1 || spec.d_hidden < 1)
        fail_value("adaconv: bad generator widths ", spec.d_geo, "/", spec.d_hidden);
}

int64_t param_count(const AdaConvSpec& spec) {
    return static_cast<int64_t>(spec.k) * spec.k * spec.cg * spec.c + spec.c;
}

template <typename S>
Generator<S>::Generator(Rng& rng, const AdaConvSpec& spec, bool identity_init) {
    validate(spec);
    const int p = static_cast<int>(param_count(spec));
    l1 = LinearLayer<S>(rng, spec.d_geo, spec.d_hidden);
    l2 = LinearLayer<S>(rng, spec.d_hidden, p, /*zero_init=*/identity_init);
    if (identity_init) {
        // bias encodes the identity kernel: weight part has a 1 at the
        // center tap of each channel's own within-group slice, bias part 0.
        S* pb = l2.b.ptr();
        const int kk = spec.k * spec.k;
        const int center = (spec.k / 2) * spec.k + spec.k / 2;
        for (int c = 0; c < spec.c; ++c) pb[(c * spec.cg + c % spec.cg) * kk + center] = S(1);
    }
}

template <typename S>
GeneratedParams<S> generate_params(const Tensor<S>& f_geo, const AdaConvSpec& spec,
                                   const Generator<S>& gen) {
    validate(spec);
    REFACE_CHECK(f_geo.rank() == 2 && f_geo.dim(1) == spec.d_geo,
                 "generate_params: f_geo must be [N,", spec.d_geo, "], got ",
                 shape_str(f_geo.shape()));
    const int n = f_geo.dim(0);
    const int p = static_cast<int>(param_count(spec));
    const int wlen = p - spec.c;

    Tensor<S> flat = gen.l2(lrelu(gen.l1(f_geo)));  // [N, p]
    GeneratedParams<S> out;
    out.weight = reshape(narrow(flat, 1, 0, wlen), {n * spec.c, spec.cg, spec.k, spec.k});
    out.bias = reshape(narrow(flat, 1, wlen, spec.c), {n * spec.c});
    return out;
}

template <typename S>
Tensor<S> ada_conv(const Tensor<S>& f_in, const GeneratedParams<S>& params,
                   const AdaConvSpec& spec) {
    validate(spec);
    REFACE_CHECK(f_in.rank() == 4 && f_in.dim(1) == spec.c, "ada_conv: expected [N,", spec.c,
                 ",H,W], got ", shape_str(f_in.shape()));
    const int n = f_in.dim(0), h = f_in.dim(2), w = f_in.dim(3);
    REFACE_CHECK(params.weight.rank() == 4 && params.weight.dim(0) == n * spec.c &&
                     params.weight.dim(1) == spec.cg && params.weight.dim(2) == spec.k,
                 "ada_conv: generated weight shape ", shape_str(params.weight.shape()),
                 " does not match spec/batch");
    REFACE_CHECK(params.bias.numel() == static_cast<int64_t>(n) * spec.c,
                 "ada_conv: generated bias length ", params.bias.numel(), ", expected ",
                 n * spec.c);

    // Fold batch into channels: each sample's channels form their own groups,
    // so its own kernels apply. Gradients flow through the reshapes to both
    // f_in and the generated parameters.
    Tensor<S> folded = reshape(f_in, {1, n * spec.c, h, w});
    Tensor<S> y = conv2d(folded, params.weight, params.bias, 1, (spec.k - 1) / 2,
                         n * spec.c / spec.cg);
    return reshape(y, {n, spec.c, h, w});
}

template struct Generator<float>;
template struct Generator<double>;
template GeneratedParams<float> generate_params<float>(const Tensor<float>&, const AdaConvSpec&,
                                                       const Generator<float>&);
template GeneratedParams<double> generate_params<double>(const Tensor<double>&, const AdaConvSpec&,
                                                         const Generator<double>&);
template Tensor<float> ada_conv<float>(const Tensor<float>&, const GeneratedParams<float>&,
                                       const AdaConvSpec&);
template Tensor<double> ada_conv<double>(const Tensor<double>&, const GeneratedParams<double>&,
                                         const AdaConvSpec&);

}  // namespace reface::ada
