#include "reface/reenactor.hpp"

namespace reface::reenact {

template <typename S>
TransformBlock<S>::TransformBlock(Rng& rng, const ada::AdaConvSpec& spec, bool identity_init) {
    conv1 = Conv2dLayer<S>(rng, spec.c, spec.c, 3, 1, 1);
    norm = InstanceNormLayer<S>(spec.c);
    gen = ada::Generator<S>(rng, spec, identity_init);
    conv2 = Conv2dLayer<S>(rng, spec.c, spec.c, 3, 1, 1, 1, /*zero_init=*/identity_init);
}

template <typename S>
Tensor<S> TransformBlock<S>::forward(const Tensor<S>& f_in, const Tensor<S>& f_geo,
                                     const ada::AdaConvSpec& spec) const {
    REFACE_CHECK(f_in.rank() == 4 && f_in.dim(1) == spec.c, "transform_block: expected [N,",
                 spec.c, ",H,W], got ", shape_str(f_in.shape()));
    Tensor<S> hd = lrelu(norm(conv1(f_in)));
    hd = ada::ada_conv(hd, ada::generate_params(f_geo, spec, gen), spec);
    return add(f_in, conv2(hd));
}

template <typename S>
void TransformBlock<S>::collect(const std::string& name, ParamList<S>& out) {
    conv1.collect(name + ".conv1", out);
    norm.collect(name + ".norm", out);
    gen.collect(name + ".gen", out);
    conv2.collect(name + ".conv2", out);
}

template <typename S>
Reenactor<S>::Reenactor(Rng& rng, const ReenactorConfig& cfg_, bool identity_init) : cfg(cfg_) {
    REFACE_CHECK(cfg.resolution >= 4 && cfg.resolution % 4 == 0,
                 "reenactor: resolution must be divisible by 4, got ", cfg.resolution);
    REFACE_CHECK(cfg.l >= 1, "reenactor: block count must be >= 1, got ", cfg.l);
    ada::validate(cfg.adaconv_spec());

    e1 = Conv2dLayer<S>(rng, 3, cfg.c0, 7, 1, 3);
    en1 = InstanceNormLayer<S>(cfg.c0);
    e2 = Conv2dLayer<S>(rng, cfg.c0, 2 * cfg.c0, 3, 2, 1);
    en2 = InstanceNormLayer<S>(2 * cfg.c0);
    e3 = Conv2dLayer<S>(rng, 2 * cfg.c0, cfg.c, 3, 2, 1);
    en3 = InstanceNormLayer<S>(cfg.c);

    blocks.reserve(cfg.l);
    for (int i = 0; i < cfg.l; ++i) blocks.emplace_back(rng, cfg.adaconv_spec(), identity_init);

    d1 = Conv2dLayer<S>(rng, cfg.c, 2 * cfg.c0, 3, 1, 1);
    dn1 = InstanceNormLayer<S>(2 * cfg.c0);
    d2 = Conv2dLayer<S>(rng, 2 * cfg.c0, cfg.c0, 3, 1, 1);
    dn2 = InstanceNormLayer<S>(cfg.c0);
    d3 = Conv2dLayer<S>(rng, cfg.c0, 3, 7, 1, 3);
}

template <typename S>
Tensor<S> Reenactor<S>::encode(const Tensor<S>& img) const {
    REFACE_CHECK(img.rank() == 4 && img.dim(1) == 3 && img.dim(2) == cfg.resolution &&
                     img.dim(3) == cfg.resolution,
                 "encode: expected [N,3,", cfg.resolution, ",", cfg.resolution, "], got ",
                 shape_str(img.shape()));
    Tensor<S> x = lrelu(en1(e1(img)));
    x = lrelu(en2(e2(x)));
    return lrelu(en3(e3(x)));
}

template <typename S>
Tensor<S> Reenactor<S>::decode(const Tensor<S>& feat) const {
    REFACE_CHECK(feat.rank() == 4 && feat.dim(1) == cfg.c, "decode: expected [N,", cfg.c,
                 ",H/4,W/4], got ", shape_str(feat.shape()));
    Tensor<S> x = lrelu(dn1(d1(upsample_nearest2x(feat))));
    x = lrelu(dn2(d2(upsample_nearest2x(x))));
    return tanh_op(d3(x));
}

template <typename S>
Tensor<S> Reenactor<S>::forward(const Tensor<S>& img, const Tensor<S>& f_geo) const {
    Tensor<S> x = encode(img);
    const ada::AdaConvSpec spec = cfg.adaconv_spec();
    for (const auto& block : blocks) x = block.forward(x, f_geo, spec);
    return decode(x);
}

template <typename S>
void Reenactor<S>::collect(ParamList<S>& out) {
    e1.collect("reenactor.e1", out);
    en1.collect("reenactor.en1", out);
    e2.collect("reenactor.e2", out);
    en2.collect("reenactor.en2", out);
    e3.collect("reenactor.e3", out);
    en3.collect("reenactor.en3", out);
    for (size_t i = 0; i < blocks.size(); ++i) blocks[i].collect(str("reenactor.block.", i), out);
    d1.collect("reenactor.d1", out);
    dn1.collect("reenactor.dn1", out);
    d2.collect("reenactor.d2", out);
    dn2.collect("reenactor.dn2", out);
    d3.collect("reenactor.d3", out);
}

template struct TransformBlock<float>;
template struct TransformBlock<double>;
template struct Reenactor<float>;
template struct Reenactor<double>;

}  // namespace reface::reenact
