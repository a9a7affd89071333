#pragma once

#include <array>

#include "reface/nn.hpp"

namespace reface::fuser {

struct FuserConfig {
    int t = 8;      // audio time nodes
    int f = 32;     // audio feature channels per node
    int n_lm = 68;  // landmark count; f_geo length = 2*n_lm
};

// Audio-aware fuser: phi_a/phi_h/phi_e encode the drive signals, phi_d
// regresses the geometric feature from their concatenation.
template <typename S>
struct Fuser {
    FuserConfig cfg;
    // phi_a stage 1: k=1 convolutions over [N,F,T] — a shared per-time-node
    // MLP, channels f->32->64->64->128->128.
    std::array<Conv1dLayer<S>, 5> a1;
    // phi_a stage 2: convolutions along the time axis, halving the length
    // (k=3 stride 2) while it exceeds 1, then pointwise; the last layer
    // projects to 256 with kernel = remaining length.
    std::array<Conv1dLayer<S>, 5> a2;
    std::array<LinearLayer<S>, 3> h;  // pose 3->32->64->64
    std::array<LinearLayer<S>, 3> e;  // blink 2->32->64->64
    LinearLayer<S> d1, d2;            // [f_a,f_h,f_e] 384->256->2*n_lm

    Fuser() = default;
    Fuser(Rng& rng, const FuserConfig& cfg);

    Tensor<S> phi_a(const Tensor<S>& audio) const;  // [N,T,F] -> [N,256]
    Tensor<S> phi_h(const Tensor<S>& pose) const;   // [N,3]   -> [N,64]
    Tensor<S> phi_e(const Tensor<S>& blink) const;  // [N,2]   -> [N,64]
    Tensor<S> fuse(const Tensor<S>& f_a, const Tensor<S>& f_h, const Tensor<S>& f_e) const;
    // fuse(phi_a(audio), phi_h(pose), phi_e(blink))
    Tensor<S> forward(const Tensor<S>& audio, const Tensor<S>& pose,
                      const Tensor<S>& blink) const;

    int d_geo() const { return 2 * cfg.n_lm; }
    void collect(ParamList<S>& out);
};

}  // namespace reface::fuser
