#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <fstream>

#include "oracles.hpp"
#include "reface/gradcheck.hpp"
#include "reface/trainer.hpp"

using namespace reface;
using reftest::rand_tensor;

namespace {

template <typename S>
bool same_bits(const Tensor<S>& a, const Tensor<S>& b) {
    return a.shape() == b.shape() &&
           std::memcmp(a.ptr(), b.ptr(), sizeof(S) * size_t(a.numel())) == 0;
}

fuser::FuserConfig micro_fuser_cfg() { return {2, 4, 3}; }

reenact::ReenactorConfig micro_reenactor_cfg() {
    reenact::ReenactorConfig cfg;
    cfg.resolution = 8;
    cfg.c0 = 3;
    cfg.c = 4;
    cfg.l = 1;
    cfg.d_geo = 6;
    cfg.d_hidden = 8;
    return cfg;
}

train::CriticConfig micro_critic_cfg() {
    train::CriticConfig cfg;
    cfg.layers = 2;
    cfg.base = 4;
    return cfg;
}

template <typename S>
train::Batch<S> random_batch(Rng& rng, int n, const fuser::FuserConfig& fcfg,
                             const reenact::ReenactorConfig& rcfg) {
    train::Batch<S> b;
    b.audio = rand_tensor<S>(rng, {n, fcfg.t, fcfg.f});
    b.pose = rand_tensor<S>(rng, {n, 3}, S(-1), S(1));
    b.eye = rand_tensor<S>(rng, {n, 2}, S(0), S(1));
    b.ref = rand_tensor<S>(rng, {n, 3, rcfg.resolution, rcfg.resolution}, S(-0.8), S(0.8));
    b.target = rand_tensor<S>(rng, {n, 3, rcfg.resolution, rcfg.resolution}, S(-0.8), S(0.8));
    b.landmarks = rand_tensor<S>(rng, {n, 2 * fcfg.n_lm});
    return b;
}

train::Trainer<float> micro_trainer(uint64_t seed, train::LossWeights w, double lr = 2e-4) {
    Rng rng(seed);
    train::Generator<float> gen(rng, micro_fuser_cfg(), micro_reenactor_cfg());
    train::Critic<float> critic(rng, micro_critic_cfg());
    return train::Trainer<float>(std::move(gen), std::move(critic), w, lr, Rng::mix(seed, 77));
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(bool(f));
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

// ----------------------------------------------------------------- losses

TEST_CASE("critic objective is mean fake score minus mean real score") {
    auto fake = Tensor<double>::full({1, 1, 2, 2}, 0.3);
    auto real = Tensor<double>::full({1, 1, 2, 2}, 0.8);
    CHECK(train::critic_loss(fake, real).item() == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(train::critic_loss(fake, fake).item() == 0.0);

    Rng rng(3);
    auto a = rand_tensor<double>(rng, {1, 1, 3, 3});
    auto b = rand_tensor<double>(rng, {1, 1, 3, 3});
    const double ab = train::critic_loss(a, b).item();
    const double ba = train::critic_loss(b, a).item();
    CHECK(ab + ba == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("generator objective is the negated mean fake score") {
    auto fake = Tensor<double>::full({2, 1, 2, 2}, 0.3);
    CHECK(train::generator_adv_loss(fake).item() == doctest::Approx(-0.3).epsilon(1e-12));
    CHECK(train::generator_adv_loss(Tensor<double>({1, 1, 4, 4})).item() == 0.0);
}

TEST_CASE("adversarial gradient reaches the fake image through the critic") {
    Rng rng(5);
    train::Critic<double> critic(rng, micro_critic_cfg());
    auto img = rand_tensor<double>(rng, {1, 3, 8, 8});
    img.set_requires_grad(true);
    auto fn = [&](const std::vector<Tensor<double>>& in) {
        return train::generator_adv_loss(critic.forward(in[0]));
    };
    auto rep = grad_check(fn, {img}, 1e-4, /*max_coords=*/24, /*seed=*/17);
    INFO("max rel err ", rep.max_rel_err);
    CHECK(rep.ok(1e-5));
}

TEST_CASE("total objective weights landmark, reconstruction, adversarial terms") {
    train::LossWeights w;  // (1, 100, 1)
    auto lm = Tensor<double>::full({1, 4}, 0.25);
    auto f_geo = Tensor<double>::full({1, 4}, 0.75);              // L_G = 0.5
    auto target = Tensor<double>::full({1, 3, 4, 4}, 0.1);
    auto img = Tensor<double>::full({1, 3, 4, 4}, 0.11);          // L_C = 0.01
    auto d_fake = Tensor<double>::full({1, 1, 2, 2}, -0.2);       // L_Adv = 0.2
    const double total = train::total_loss(f_geo, lm, img, target, d_fake, w).item();
    CHECK(total == doctest::Approx(1.7).epsilon(1e-9));

    SUBCASE("perfect prediction and zero score give exactly zero") {
        auto zero_score = Tensor<double>({1, 1, 2, 2});
        CHECK(train::total_loss(lm, lm, target, target, zero_score, w).item() == 0.0);
    }
    SUBCASE("disabled adversarial weight ignores the critic map") {
        train::LossWeights off;
        off.lambda_adv = 0.0;
        const double v = train::total_loss(f_geo, lm, img, target, Tensor<double>(), off).item();
        CHECK(v == doctest::Approx(1.5).epsilon(1e-9));
    }
}

TEST_CASE("total objective reaches every generator and critic parameter") {
    Rng rng(7);
    train::Generator<double> gen(rng, micro_fuser_cfg(), micro_reenactor_cfg(),
                                 /*identity_init=*/false);
    train::Critic<double> critic(rng, micro_critic_cfg());
    auto batch = random_batch<double>(rng, 1, micro_fuser_cfg(), micro_reenactor_cfg());

    ParamList<double> params;
    gen.collect(params);
    const size_t n_gen = params.size();
    critic.collect(params);

    auto out = gen.forward(batch.audio, batch.pose, batch.eye, batch.ref);
    auto loss = train::total_loss(out.f_geo, batch.landmarks, out.image, batch.target,
                                  critic.forward(out.image), train::LossWeights{});
    backward(loss);

    for (size_t i = 0; i < params.size(); ++i) {
        INFO((i < n_gen ? "generator" : "critic"), " param ", params[i].name);
        REQUIRE(params[i].tensor.has_grad());
        double norm = 0;
        for (double g : params[i].tensor.grad()) norm += g * g;
        CHECK(norm > 0.0);
    }

    SUBCASE("composite gradients match finite differences") {
        std::vector<Tensor<double>> inputs;
        for (auto& p : params) inputs.push_back(p.tensor);
        auto fn = [&](const std::vector<Tensor<double>>&) {
            auto o = gen.forward(batch.audio, batch.pose, batch.eye, batch.ref);
            return train::total_loss(o.f_geo, batch.landmarks, o.image, batch.target,
                                     critic.forward(o.image), train::LossWeights{});
        };
        // smaller h: the 100x reconstruction weight amplifies curvature, so
        // 1e-4 leaves visible truncation error in the composite

        auto rep = grad_check(fn, inputs, 1e-5, /*max_coords=*/2, /*seed=*/31);
        INFO("max rel err ", rep.max_rel_err, " at ", rep.worst);
        CHECK(rep.ok(1e-5));
    }
}

// ------------------------------------------------------------ train steps

TEST_CASE("a training step clips the critic and reports finite losses") {
    auto trainer = micro_trainer(1001, train::LossWeights{});
    Rng data_rng(55);
    for (int i = 1; i <= 5; ++i) {
        auto batch = random_batch<float>(data_rng, 2, micro_fuser_cfg(), micro_reenactor_cfg());
        auto rep = trainer.train_step(batch);
        CHECK(rep.step == i);
        for (double v : {rep.loss_landmark, rep.loss_recon, rep.loss_adv, rep.loss_critic,
                         rep.loss_total, rep.grad_norm_gen, rep.grad_norm_critic})
            CHECK(std::isfinite(v));
        CHECK(rep.grad_norm_gen > 0.0);
        float w_max = 0;
        for (auto& p : trainer.critic_params())
            for (float v : p.tensor.data()) w_max = std::max(w_max, std::abs(v));
        CHECK(w_max <= 0.01f);
    }
}

TEST_CASE("zero adversarial weight freezes the critic entirely") {
    train::LossWeights w;
    w.lambda_adv = 0.0;
    auto trainer = micro_trainer(1002, w);
    std::vector<Tensor<float>> before;
    for (auto& p : trainer.critic_params()) before.push_back(p.tensor.clone());

    Rng data_rng(56);
    auto batch = random_batch<float>(data_rng, 2, micro_fuser_cfg(), micro_reenactor_cfg());
    auto rep = trainer.train_step(batch);
    CHECK(rep.loss_adv == 0.0);
    CHECK(rep.loss_critic == 0.0);
    CHECK(rep.grad_norm_critic == 0.0);
    for (size_t i = 0; i < before.size(); ++i)
        CHECK(same_bits(before[i], trainer.critic_params()[i].tensor));
}

TEST_CASE("repeating one batch without the critic overfits the reconstruction") {
    train::LossWeights w;
    w.lambda_adv = 0.0;
    auto trainer = micro_trainer(1003, w, /*lr=*/2e-3);
    Rng data_rng(57);
    auto batch = random_batch<float>(data_rng, 2, micro_fuser_cfg(), micro_reenactor_cfg());

    double first = 0, last = 0;
    for (int i = 0; i < 200; ++i) {
        auto rep = trainer.train_step(batch);
        if (i == 0) first = rep.loss_recon;
        last = rep.loss_recon;
    }
    INFO("reconstruction loss ", first, " -> ", last);
    CHECK(last <= 0.5 * first);
}

TEST_CASE("non-finite inputs abort with the offending term named") {
    auto trainer = micro_trainer(1004, train::LossWeights{});
    Rng data_rng(58);
    auto batch = random_batch<float>(data_rng, 1, micro_fuser_cfg(), micro_reenactor_cfg());
    batch.landmarks.ptr()[0] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_WITH_AS(trainer.train_step(batch), doctest::Contains("landmark"), ValueError);
}

// ------------------------------------------------------------ checkpoints

TEST_CASE("checkpoint entries survive a file round trip bitwise") {
    auto trainer = micro_trainer(2001, train::LossWeights{});
    Rng data_rng(59);
    for (int i = 0; i < 3; ++i)
        trainer.train_step(random_batch<float>(data_rng, 2, micro_fuser_cfg(),
                                               micro_reenactor_cfg()));
    const std::string path = "ckpt_roundtrip.bin";
    trainer.save(path, "cfg line one\ncfg line two\n");

    auto other = micro_trainer(9999, train::LossWeights{});  // different init
    bool some_param_differs = false;
    for (size_t i = 0; i < other.gen_params().size(); ++i)
        some_param_differs |=
            !same_bits(other.gen_params()[i].tensor, trainer.gen_params()[i].tensor);
    REQUIRE(some_param_differs);

    CHECK(other.load(path) == "cfg line one\ncfg line two\n");
    CHECK(other.step_count() == trainer.step_count());
    CHECK(other.sampler().state() == trainer.sampler().state());
    for (size_t i = 0; i < other.gen_params().size(); ++i)
        CHECK(same_bits(other.gen_params()[i].tensor, trainer.gen_params()[i].tensor));
    for (size_t i = 0; i < other.critic_params().size(); ++i)
        CHECK(same_bits(other.critic_params()[i].tensor, trainer.critic_params()[i].tensor));
    CHECK(other.gen_opt().state().step == trainer.gen_opt().state().step);
    for (size_t i = 0; i < trainer.gen_opt().state().m.size(); ++i) {
        CHECK(other.gen_opt().state().m[i] == trainer.gen_opt().state().m[i]);
        CHECK(other.gen_opt().state().v[i] == trainer.gen_opt().state().v[i]);
    }
    std::remove(path.c_str());
}

TEST_CASE("corrupt or truncated checkpoints are rejected cleanly") {
    auto trainer = micro_trainer(2002, train::LossWeights{});
    const std::string path = "ckpt_corrupt.bin";
    trainer.save(path, "cfg");

    std::string raw = slurp(path);
    SUBCASE("bad magic") {
        raw[0] = 'X';
        std::ofstream(path, std::ios::binary).write(raw.data(), std::streamsize(raw.size()));
        CHECK_THROWS_WITH_AS(trainer.load(path), doctest::Contains("magic"), ValueError);
    }
    SUBCASE("truncated payload") {
        std::ofstream(path, std::ios::binary)
            .write(raw.data(), std::streamsize(raw.size() - 3));
        CHECK_THROWS_WITH_AS(trainer.load(path), doctest::Contains("truncated"), ValueError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(trainer.load("no_such_checkpoint.bin"), ValueError);
    }
    std::remove(path.c_str());
}

TEST_CASE("resuming from a checkpoint replays the exact trajectory") {
    // Batches are derived from the trainer's own sampler so the data stream
    // is part of the persisted state.
    auto draw = [](train::Trainer<float>& t) {
        Rng batch_rng(t.sampler().next_u64());
        return random_batch<float>(batch_rng, 2, micro_fuser_cfg(), micro_reenactor_cfg());
    };

    auto a = micro_trainer(3001, train::LossWeights{});
    for (int i = 0; i < 3; ++i) a.train_step(draw(a));
    const std::string path = "ckpt_resume.bin";
    a.save(path, "cfg");

    std::vector<train::StepReport> gold;
    for (int i = 0; i < 2; ++i) gold.push_back(a.train_step(draw(a)));

    auto b = micro_trainer(4242, train::LossWeights{});  // unrelated init
    b.load(path);
    for (int i = 0; i < 2; ++i) {
        auto rep = b.train_step(draw(b));
        CHECK(rep.loss_total == gold[size_t(i)].loss_total);
        CHECK(rep.loss_critic == gold[size_t(i)].loss_critic);
        CHECK(rep.grad_norm_gen == gold[size_t(i)].grad_norm_gen);
    }
    for (size_t i = 0; i < a.gen_params().size(); ++i)
        CHECK(same_bits(a.gen_params()[i].tensor, b.gen_params()[i].tensor));
    for (size_t i = 0; i < a.critic_params().size(); ++i)
        CHECK(same_bits(a.critic_params()[i].tensor, b.critic_params()[i].tensor));
    std::remove(path.c_str());
}

TEST_CASE("identically seeded runs write identical checkpoint files") {
    auto run = [](const std::string& path) {
        auto t = micro_trainer(5001, train::LossWeights{});
        Rng data_rng(60);
        for (int i = 0; i < 4; ++i)
            t.train_step(random_batch<float>(data_rng, 2, micro_fuser_cfg(),
                                             micro_reenactor_cfg()));
        t.save(path, "cfg");
    };
    run("ckpt_twin_a.bin");
    run("ckpt_twin_b.bin");
    CHECK(slurp("ckpt_twin_a.bin") == slurp("ckpt_twin_b.bin"));
    std::remove("ckpt_twin_a.bin");
    std::remove("ckpt_twin_b.bin");
}
