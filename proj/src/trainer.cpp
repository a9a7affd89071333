#include "reface/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "reface/ops.hpp"

namespace reface::train {

template <typename S>
Generator<S>::Generator(Rng& rng, const fuser::FuserConfig& fcfg_in,
                        const reenact::ReenactorConfig& rcfg_in, bool identity_init)
    : fcfg(fcfg_in), rcfg(rcfg_in) {
    if (2 * fcfg.n_lm != rcfg.d_geo)
        fail_value("fuser outputs ", 2 * fcfg.n_lm, " geometry dims but reenactor expects ",
                   rcfg.d_geo);
    fus = fuser::Fuser<S>(rng, fcfg);
    net = reenact::Reenactor<S>(rng, rcfg, identity_init);
}

template <typename S>
typename Generator<S>::Out Generator<S>::forward(const Tensor<S>& audio, const Tensor<S>& pose,
                                                 const Tensor<S>& eye, const Tensor<S>& ref) const {
    Out out;
    out.f_geo = fus.forward(audio, pose, eye);
    out.image = net.forward(ref, out.f_geo);
    return out;
}

template <typename S>
void Generator<S>::collect(ParamList<S>& out) {
    fus.collect(out);
    net.collect(out);
}

template <typename S>
Tensor<S> critic_loss(const Tensor<S>& d_fake, const Tensor<S>& d_real) {
    return sub(mean(d_fake), mean(d_real));
}

template <typename S>
Tensor<S> generator_adv_loss(const Tensor<S>& d_fake) {
    return scale(mean(d_fake), S(-1));
}

template <typename S>
Tensor<S> total_loss(const Tensor<S>& f_geo, const Tensor<S>& landmarks, const Tensor<S>& img,
                     const Tensor<S>& target, const Tensor<S>& d_fake, const LossWeights& w) {
    Tensor<S> loss = add(scale(l1(f_geo, landmarks), S(w.lambda_g)),
                         scale(l1(img, target), S(w.lambda_c)));
    if (w.lambda_adv != 0.0)
        loss = add(loss, scale(generator_adv_loss(d_fake), S(w.lambda_adv)));
    return loss;
}

template <typename S>
double grad_norm(const std::vector<Tensor<S>>& params) {
    double acc = 0;
    for (const auto& p : params) {
        if (!p.has_grad()) continue;
        for (S g : p.grad()) acc += double(g) * double(g);
    }
    return std::sqrt(acc);
}

template <typename S>
void clip_params(std::vector<Tensor<S>>& params, double bound) {
    const S lo = S(-bound), hi = S(bound);
    for (auto& p : params)
        for (auto& v : p.data()) v = std::clamp(v, lo, hi);
}

namespace {

template <typename S>
double checked_item(const Tensor<S>& loss, const char* term, int64_t step) {
    double v = double(loss.item());
    if (!std::isfinite(v)) fail_value("non-finite ", term, " loss at step ", step, ": ", v);
    return v;
}

}  // namespace

template <typename S>
Trainer<S>::Trainer(Generator<S> gen, Critic<S> critic, LossWeights weights, double lr,
                    uint64_t sampler_seed)
    : gen_(std::move(gen)), critic_(std::move(critic)), weights_(weights), sampler_(sampler_seed) {
    gen_.collect(gen_params_);
    critic_.collect(critic_params_);
    opt_g_ = Adam<S>(tensors_of(gen_params_), S(lr));
    opt_c_ = Adam<S>(tensors_of(critic_params_), S(lr));
}

template <typename S>
StepReport Trainer<S>::train_step(const Batch<S>& batch) {
    StepReport r;
    r.step = ++step_;
    const bool use_adv = weights_.lambda_adv != 0.0;

    auto out = gen_.forward(batch.audio, batch.pose, batch.eye, batch.ref);

    if (use_adv) {
        Tensor<S> fake_detached = out.image.detach();
        for (int k = 0; k < critic_.cfg.critic_steps; ++k) {
            opt_c_.zero_grad();
            Tensor<S> lc = critic_loss(critic_.forward(fake_detached), critic_.forward(batch.target));
            r.loss_critic = checked_item(lc, "critic", step_);
            backward(lc);
            r.grad_norm_critic = grad_norm(opt_c_.params());
            opt_c_.step();
            clip_params(opt_c_.params(), critic_.cfg.clip);
        }
    }

    opt_g_.zero_grad();
    Tensor<S> l_lm = l1(out.f_geo, batch.landmarks);
    Tensor<S> l_rec = l1(out.image, batch.target);
    r.loss_landmark = checked_item(l_lm, "landmark", step_);
    r.loss_recon = checked_item(l_rec, "reconstruction", step_);
    Tensor<S> total = add(scale(l_lm, S(weights_.lambda_g)), scale(l_rec, S(weights_.lambda_c)));
    if (use_adv) {
        Tensor<S> l_adv = generator_adv_loss(critic_.forward(out.image));
        r.loss_adv = checked_item(l_adv, "adversarial", step_);
        total = add(total, scale(l_adv, S(weights_.lambda_adv)));
    }
    r.loss_total = checked_item(total, "total", step_);
    backward(total);
    r.grad_norm_gen = grad_norm(opt_g_.params());
    opt_g_.step();
    return r;
}

namespace {

template <typename S>
void append_param_entries(std::vector<CheckpointEntry>& out, const ParamList<S>& params) {
    for (const auto& p : params) {
        std::vector<float> data(p.tensor.data().begin(), p.tensor.data().end());
        out.push_back(make_f32_entry(p.name, p.tensor.shape(), std::move(data)));
    }
}

template <typename S>
void append_opt_entries(std::vector<CheckpointEntry>& out, const std::string& prefix,
                        const ParamList<S>& params, const AdamState<S>& st) {
    out.push_back(make_u64_entry(prefix + ".step", uint64_t(st.step)));
    if (st.m.empty()) return;  // no update taken yet; moments not allocated
    for (size_t i = 0; i < params.size(); ++i) {
        std::vector<float> m(st.m[i].begin(), st.m[i].end());
        std::vector<float> v(st.v[i].begin(), st.v[i].end());
        out.push_back(make_f32_entry(prefix + ".m." + params[i].name, params[i].tensor.shape(), std::move(m)));
        out.push_back(make_f32_entry(prefix + ".v." + params[i].name, params[i].tensor.shape(), std::move(v)));
    }
}

using EntryMap = std::unordered_map<std::string, const CheckpointEntry*>;

const CheckpointEntry& find_entry(const EntryMap& map, const std::string& name) {
    auto it = map.find(name);
    if (it == map.end()) fail_value("checkpoint is missing entry '", name, "'");
    return *it->second;
}

template <typename S>
void restore_tensor(Tensor<S>& t, const CheckpointEntry& e) {
    if (e.tag != kTagF32) fail_value("entry '", e.name, "': expected tensor data");
    if (e.shape != t.shape())
        fail_value("entry '", e.name, "': stored shape does not match the model");
    auto dst = t.data();
    for (size_t i = 0; i < dst.size(); ++i) dst[i] = S(e.f32[i]);
}

template <typename S>
void restore_opt(const EntryMap& map, const std::string& prefix, const ParamList<S>& params,
                 AdamState<S>& st) {
    st.step = int64_t(read_u64_entry(find_entry(map, prefix + ".step")));
    st.m.clear();
    st.v.clear();
    if (st.step == 0) return;
    st.m.resize(params.size());
    st.v.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
        const auto& em = find_entry(map, prefix + ".m." + params[i].name);
        const auto& ev = find_entry(map, prefix + ".v." + params[i].name);
        if (em.shape != params[i].tensor.shape() || ev.shape != params[i].tensor.shape())
            fail_value("optimizer entry for '", params[i].name, "' has the wrong shape");
        st.m[i].assign(em.f32.begin(), em.f32.end());
        st.v[i].assign(ev.f32.begin(), ev.f32.end());
    }
}

}  // namespace

template <typename S>
void Trainer<S>::save(const std::string& path, const std::string& config_echo) const {
    std::vector<CheckpointEntry> entries;
    append_param_entries(entries, gen_params_);
    append_param_entries(entries, critic_params_);
    append_opt_entries(entries, "opt.g", gen_params_, opt_g_.state());
    append_opt_entries(entries, "opt.c", critic_params_, opt_c_.state());
    entries.push_back(make_u64_entry("__step__", uint64_t(step_)));
    entries.push_back(make_u64_entry("__rng__", sampler_.state()));
    entries.push_back(make_bytes_entry("__config__",
                                       std::vector<uint8_t>(config_echo.begin(), config_echo.end())));
    save_checkpoint_file(path, entries);
}

template <typename S>
std::string Trainer<S>::load(const std::string& path) {
    std::vector<CheckpointEntry> entries = load_checkpoint_file(path);
    EntryMap map;
    for (const auto& e : entries) {
        if (!map.emplace(e.name, &e).second) fail_value("duplicate checkpoint entry '", e.name, "'");
    }
    for (auto& p : gen_params_) restore_tensor(p.tensor, find_entry(map, p.name));
    for (auto& p : critic_params_) restore_tensor(p.tensor, find_entry(map, p.name));
    restore_opt(map, "opt.g", gen_params_, opt_g_.state());
    restore_opt(map, "opt.c", critic_params_, opt_c_.state());
    step_ = int64_t(read_u64_entry(find_entry(map, "__step__")));
    sampler_.set_state(read_u64_entry(find_entry(map, "__rng__")));
    const auto& cfg = find_entry(map, "__config__");
    return std::string(cfg.bytes.begin(), cfg.bytes.end());
}

#define REFACE_TRAIN_INSTANTIATE(S)                                                              \
    template struct Generator<S>;                                                                \
    template Tensor<S> critic_loss<S>(const Tensor<S>&, const Tensor<S>&);                       \
    template Tensor<S> generator_adv_loss<S>(const Tensor<S>&);                                  \
    template Tensor<S> total_loss<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&,       \
                                     const Tensor<S>&, const Tensor<S>&, const LossWeights&);    \
    template double grad_norm<S>(const std::vector<Tensor<S>>&);                                 \
    template void clip_params<S>(std::vector<Tensor<S>>&, double);                               \
    template class Trainer<S>;

REFACE_TRAIN_INSTANTIATE(float)
REFACE_TRAIN_INSTANTIATE(double)

}  // namespace reface::train
