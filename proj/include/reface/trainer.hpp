#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "reface/checkpoint.hpp"
#include "reface/critic.hpp"
#include "reface/fuser.hpp"
#include "reface/optim.hpp"
#include "reface/reenactor.hpp"

namespace reface::train {

struct LossWeights {
    double lambda_g = 1.0;    // landmark regression
    double lambda_c = 100.0;  // image reconstruction
    double lambda_adv = 1.0;  // adversarial term (0 disables the critic)
};

// Everything the generator side consumes for one optimization step.
template <typename S>
struct Batch {
    Tensor<S> audio;      // [N,T,F]
    Tensor<S> pose;       // [N,3]
    Tensor<S> eye;        // [N,2]
    Tensor<S> ref;        // [N,3,H,W] reference frame for each sample
    Tensor<S> target;     // [N,3,H,W] ground-truth frame
    Tensor<S> landmarks;  // [N,2*n_lm] ground-truth geometry, flattened
};

struct StepReport {
    int64_t step = 0;
    double loss_landmark = 0.0;
    double loss_recon = 0.0;
    double loss_adv = 0.0;
    double loss_critic = 0.0;
    double loss_total = 0.0;
    double grad_norm_gen = 0.0;
    double grad_norm_critic = 0.0;
};

// Fuser + reenactor trained jointly: audio/pose/eye -> geometry -> image.
template <typename S>
struct Generator {
    fuser::FuserConfig fcfg;
    reenact::ReenactorConfig rcfg;
    fuser::Fuser<S> fus;
    reenact::Reenactor<S> net;

    Generator() = default;
    // identity_init: transform blocks start inert (the training default);
    // false randomizes them so every gradient path is live.
    Generator(Rng& rng, const fuser::FuserConfig& fcfg, const reenact::ReenactorConfig& rcfg,
              bool identity_init = true);

    struct Out {
        Tensor<S> f_geo;  // [N, 2*n_lm]
        Tensor<S> image;  // [N,3,H,W]
    };
    Out forward(const Tensor<S>& audio, const Tensor<S>& pose, const Tensor<S>& eye,
                const Tensor<S>& ref) const;
    void collect(ParamList<S>& out);
};

// mean(D(fake)) - mean(D(real)); the critic minimizes this.
template <typename S>
Tensor<S> critic_loss(const Tensor<S>& d_fake, const Tensor<S>& d_real);

// -mean(D(fake)); the generator minimizes this.
template <typename S>
Tensor<S> generator_adv_loss(const Tensor<S>& d_fake);

// lambda_g*mean|f_geo - l| + lambda_c*mean|img - target| + lambda_adv*(-mean d_fake).
// Pass an empty d_fake tensor when lambda_adv == 0.
template <typename S>
Tensor<S> total_loss(const Tensor<S>& f_geo, const Tensor<S>& landmarks, const Tensor<S>& img,
                     const Tensor<S>& target, const Tensor<S>& d_fake, const LossWeights& w);

template <typename S>
double grad_norm(const std::vector<Tensor<S>>& params);

template <typename S>
void clip_params(std::vector<Tensor<S>>& params, double bound);

// Owns the models, both Adam states, the step counter and the batch-sampling
// rng — the full mutable training state a checkpoint captures.
template <typename S>
class Trainer {
public:
    Trainer() = default;
    Trainer(Generator<S> gen, Critic<S> critic, LossWeights weights, double lr,
            uint64_t sampler_seed);

    StepReport train_step(const Batch<S>& batch);

    // Persists params, optimizer moments, step counters, sampler state and a
    // config echo; load restores into an identically-constructed trainer.
    void save(const std::string& path, const std::string& config_echo) const;
    std::string load(const std::string& path);

    Generator<S>& generator() { return gen_; }
    const Generator<S>& generator() const { return gen_; }
    Critic<S>& critic() { return critic_; }
    Rng& sampler() { return sampler_; }
    int64_t step_count() const { return step_; }
    const LossWeights& weights() const { return weights_; }
    ParamList<S>& gen_params() { return gen_params_; }
    ParamList<S>& critic_params() { return critic_params_; }
    Adam<S>& gen_opt() { return opt_g_; }
    Adam<S>& critic_opt() { return opt_c_; }

private:
    Generator<S> gen_;
    Critic<S> critic_;
    LossWeights weights_;
    ParamList<S> gen_params_;
    ParamList<S> critic_params_;
    Adam<S> opt_g_;
    Adam<S> opt_c_;
    Rng sampler_;
    int64_t step_ = 0;
};

}  // namespace reface::train
