#include "reface/critic.hpp"

#include "reface/ops.hpp"

namespace reface::train {

template <typename S>
Critic<S>::Critic(Rng& rng, const CriticConfig& cfg_in) : cfg(cfg_in) {
    if (cfg.layers < 1) fail_value("critic needs at least one stage, got ", cfg.layers);
    if (cfg.base < 1) fail_value("critic base channels must be positive, got ", cfg.base);
    int cin = 3;
    for (int i = 0; i < cfg.layers; ++i) {
        int cout = cfg.base << i;
        convs.emplace_back(rng, cin, cout, 4, /*stride=*/2, /*pad=*/1);
        if (i > 0) norms.emplace_back(cout);
        cin = cout;
    }
    head = Conv2dLayer<S>(rng, cin, 1, 4, /*stride=*/1, /*pad=*/1);
}

template <typename S>
Tensor<S> Critic<S>::forward(const Tensor<S>& img) const {
    Tensor<S> x = lrelu(convs[0](img));
    for (int i = 1; i < cfg.layers; ++i) x = lrelu(norms[size_t(i - 1)](convs[size_t(i)](x)));
    return head(x);
}

template <typename S>
void Critic<S>::collect(ParamList<S>& out) {
    for (size_t i = 0; i < convs.size(); ++i) convs[i].collect(str("critic.conv.", i), out);
    for (size_t i = 0; i < norms.size(); ++i) norms[i].collect(str("critic.norm.", i + 1), out);
    head.collect("critic.head", out);
}

template struct Critic<float>;
template struct Critic<double>;

}  // namespace reface::train
