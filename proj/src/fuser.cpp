#include "reface/fuser.hpp"

namespace reface::fuser {

template <typename S>
Fuser<S>::Fuser(Rng& rng, const FuserConfig& cfg_) : cfg(cfg_) {
    REFACE_CHECK(cfg.t >= 1 && cfg.f >= 1 && cfg.n_lm >= 1, "fuser: bad config t=", cfg.t,
                 " f=", cfg.f, " n_lm=", cfg.n_lm);
    const int s1_ch[6] = {cfg.f, 32, 64, 64, 128, 128};
    for (int i = 0; i < 5; ++i) a1[i] = Conv1dLayer<S>(rng, s1_ch[i], s1_ch[i + 1], 1, 1, 0);

    // Stage-2 geometry depends on t only through kernel sizes; channel plan
    // 128 -> 128 -> 128 -> 128 -> 192 -> 256.
    const int s2_ch[6] = {128, 128, 128, 128, 192, 256};
    int len = cfg.t;
    for (int i = 0; i < 4; ++i) {
        if (len > 1) {
            a2[i] = Conv1dLayer<S>(rng, s2_ch[i], s2_ch[i + 1], 3, 2, 1);
            len = (len + 2 - 3) / 2 + 1;
        } else {
            a2[i] = Conv1dLayer<S>(rng, s2_ch[i], s2_ch[i + 1], 1, 1, 0);
        }
    }
    a2[4] = Conv1dLayer<S>(rng, s2_ch[4], s2_ch[5], len, 1, 0);  // collapse to length 1

    const int h_ch[4] = {3, 32, 64, 64};
    for (int i = 0; i < 3; ++i) h[i] = LinearLayer<S>(rng, h_ch[i], h_ch[i + 1]);
    const int e_ch[4] = {2, 32, 64, 64};
    for (int i = 0; i < 3; ++i) e[i] = LinearLayer<S>(rng, e_ch[i], e_ch[i + 1]);

    d1 = LinearLayer<S>(rng, 256 + 64 + 64, 256);
    d2 = LinearLayer<S>(rng, 256, 2 * cfg.n_lm);
}

template <typename S>
Tensor<S> Fuser<S>::phi_a(const Tensor<S>& audio) const {
    REFACE_CHECK(audio.rank() == 3 && audio.dim(1) == cfg.t && audio.dim(2) == cfg.f,
                 "phi_a: expected [N,", cfg.t, ",", cfg.f, "], got ", shape_str(audio.shape()));
    Tensor<S> x = transpose12(audio);  // [N, F, T]
    for (int i = 0; i < 5; ++i) x = lrelu(a1[i](x));
    for (int i = 0; i < 4; ++i) x = lrelu(a2[i](x));
    x = a2[4](x);  // [N, 256, 1]
    return reshape(x, {x.dim(0), 256});
}

template <typename S>
Tensor<S> Fuser<S>::phi_h(const Tensor<S>& pose) const {
    REFACE_CHECK(pose.rank() == 2 && pose.dim(1) == 3, "phi_h: expected [N,3], got ",
                 shape_str(pose.shape()));
    return h[2](lrelu(h[1](lrelu(h[0](pose)))));
}

template <typename S>
Tensor<S> Fuser<S>::phi_e(const Tensor<S>& blink) const {
    REFACE_CHECK(blink.rank() == 2 && blink.dim(1) == 2, "phi_e: expected [N,2], got ",
                 shape_str(blink.shape()));
    return e[2](lrelu(e[1](lrelu(e[0](blink)))));
}

template <typename S>
Tensor<S> Fuser<S>::fuse(const Tensor<S>& f_a, const Tensor<S>& f_h, const Tensor<S>& f_e) const {
    REFACE_CHECK(f_a.rank() == 2 && f_a.dim(1) == 256, "fuse: f_a must be [N,256], got ",
                 shape_str(f_a.shape()));
    REFACE_CHECK(f_h.rank() == 2 && f_h.dim(1) == 64, "fuse: f_h must be [N,64], got ",
                 shape_str(f_h.shape()));
    REFACE_CHECK(f_e.rank() == 2 && f_e.dim(1) == 64, "fuse: f_e must be [N,64], got ",
                 shape_str(f_e.shape()));
    Tensor<S> f_fus = concat<S>({f_a, f_h, f_e}, 1);
    return d2(lrelu(d1(f_fus)));
}

template <typename S>
Tensor<S> Fuser<S>::forward(const Tensor<S>& audio, const Tensor<S>& pose,
                            const Tensor<S>& blink) const {
    return fuse(phi_a(audio), phi_h(pose), phi_e(blink));
}

template <typename S>
void Fuser<S>::collect(ParamList<S>& out) {
    for (int i = 0; i < 5; ++i) a1[i].collect(str("fuser.a1.", i), out);
    for (int i = 0; i < 5; ++i) a2[i].collect(str("fuser.a2.", i), out);
    for (int i = 0; i < 3; ++i) h[i].collect(str("fuser.h.", i), out);
    for (int i = 0; i < 3; ++i) e[i].collect(str("fuser.e.", i), out);
    d1.collect("fuser.d.0", out);
    d2.collect("fuser.d.1", out);
}

template struct Fuser<float>;
template struct Fuser<double>;

}  // namespace reface::fuser
