#include "reface/gradsuite.hpp"

#include <cmath>

#include "reface/gradcheck.hpp"
#include "reface/ops.hpp"
#include "reface/trainer.hpp"

namespace reface::check {

namespace {

Tensor<double> rnd(Rng& rng, Shape shape, double lo = -1, double hi = 1, bool grad = true) {
    Tensor<double> t(std::move(shape));
    for (auto& v : t.data()) v = rng.uniform(lo, hi);
    t.set_requires_grad(grad);
    return t;
}

// keep |v| >= margin so relu-family kinks stay clear of the FD step
void away_from_zero(Tensor<double>& t, double margin) {
    for (auto& v : t.data())
        if (std::abs(v) < margin) v = v < 0 ? -margin : margin;
}

using Fn = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;

struct Suite {
    std::vector<OpReport>& out;
    double tol;

    void run(const std::string& name, const Fn& fn, std::vector<Tensor<double>> inputs,
             double h = 1e-4, int max_coords = -1, uint64_t seed = 1234) {
        auto rep = grad_check(fn, std::move(inputs), h, max_coords, seed);
        out.push_back({name, rep.max_rel_err, rep.coords_checked, rep.ok(tol)});
    }
};

void tensor_suite(Suite& s) {
    Rng rng(301);
    {
        auto a = rnd(rng, {2, 3}), b = rnd(rng, {2, 3});
        auto t = rnd(rng, {2, 3}, -1, 1, false);
        s.run("tensor.add", [&](const auto& in) { return l1(add(in[0], in[1]), t); }, {a, b});
        s.run("tensor.sub", [&](const auto& in) { return l1(sub(in[0], in[1]), t); }, {a, b});
        s.run("tensor.scale", [&](const auto& in) { return l1(scale(in[0], 1.7), t); }, {a});
        s.run("tensor.tanh", [&](const auto& in) { return l1(tanh_op(in[0]), t); }, {a});
        s.run("tensor.mean", [&](const auto& in) { return mean(in[0]); }, {a});
        s.run("tensor.l1", [&](const auto& in) { return l1(in[0], in[1]); }, {a, b});
    }
    {
        auto x = rnd(rng, {2, 4});
        away_from_zero(x, 0.05);
        auto t = rnd(rng, {2, 4}, -1, 1, false);
        s.run("tensor.relu", [&](const auto& in) { return l1(relu(in[0]), t); }, {x});
        s.run("tensor.leaky_relu",
              [&](const auto& in) { return l1(leaky_relu(in[0], 0.2), t); }, {x});
    }
    {
        auto x = rnd(rng, {2, 6});
        auto t = rnd(rng, {3, 4}, -1, 1, false);
        s.run("tensor.reshape",
              [&](const auto& in) { return l1(reshape(in[0], {3, 4}), t); }, {x});
    }
    {
        auto x = rnd(rng, {2, 5});
        auto t = rnd(rng, {2, 3}, -1, 1, false);
        s.run("tensor.narrow",
              [&](const auto& in) { return l1(narrow(in[0], 1, 1, 3), t); }, {x});
    }
    {
        auto a = rnd(rng, {2, 2}), b = rnd(rng, {2, 3});
        auto t = rnd(rng, {2, 5}, -1, 1, false);
        s.run("tensor.concat",
              [&](const auto& in) { return l1(concat<double>({in[0], in[1]}, 1), t); }, {a, b});
    }
    {
        auto x = rnd(rng, {2, 3, 4});
        auto t = rnd(rng, {2, 4, 3}, -1, 1, false);
        s.run("tensor.transpose12",
              [&](const auto& in) { return l1(transpose12(in[0]), t); }, {x});
    }
    {
        auto x = rnd(rng, {1, 2, 3, 3});
        auto t = rnd(rng, {1, 2, 6, 6}, -1, 1, false);
        s.run("tensor.upsample_nearest2x",
              [&](const auto& in) { return l1(upsample_nearest2x(in[0]), t); }, {x});
    }
    {
        auto x = rnd(rng, {2, 3}), w = rnd(rng, {4, 3}), b = rnd(rng, {4});
        auto t = rnd(rng, {2, 4}, -1, 1, false);
        s.run("tensor.linear",
              [&](const auto& in) { return l1(linear(in[0], in[1], in[2]), t); }, {x, w, b});
    }
    {
        auto x = rnd(rng, {1, 3, 5, 5}), w = rnd(rng, {4, 3, 3, 3}), b = rnd(rng, {4});
        auto t = rnd(rng, {1, 4, 5, 5}, -1, 1, false);
        s.run("tensor.conv2d_s1",
              [&](const auto& in) { return l1(conv2d(in[0], in[1], in[2], 1, 1), t); },
              {x, w, b});
    }
    {
        auto x = rnd(rng, {1, 4, 6, 6}), w = rnd(rng, {6, 2, 3, 3}), b = rnd(rng, {6});
        auto t = rnd(rng, {1, 6, 3, 3}, -1, 1, false);
        s.run("tensor.conv2d_s2_groups",
              [&](const auto& in) { return l1(conv2d(in[0], in[1], in[2], 2, 1, 2), t); },
              {x, w, b});
    }
    {
        auto x = rnd(rng, {1, 2, 6, 6}), w = rnd(rng, {3, 2, 4, 4}), b = rnd(rng, {3});
        auto t = rnd(rng, {1, 3, 3, 3}, -1, 1, false);
        s.run("tensor.conv2d_k4_s2",
              [&](const auto& in) { return l1(conv2d(in[0], in[1], in[2], 2, 1), t); },
              {x, w, b});
    }
    {
        auto x = rnd(rng, {1, 3, 7}), w = rnd(rng, {4, 3, 3}), b = rnd(rng, {4});
        auto t = rnd(rng, {1, 4, 4}, -1, 1, false);
        s.run("tensor.conv1d",
              [&](const auto& in) { return l1(conv1d(in[0], in[1], in[2], 2, 1), t); },
              {x, w, b});
    }
    {
        auto x = rnd(rng, {2, 3, 4, 4}), sc = rnd(rng, {3}), sh = rnd(rng, {3});
        auto t = rnd(rng, {2, 3, 4, 4}, -1, 1, false);
        s.run("tensor.instance_norm",
              [&](const auto& in) { return l1(instance_norm(in[0], in[1], in[2]), t); },
              {x, sc, sh});
    }
}

void adaconv_suite(Suite& s) {
    Rng rng(302);
    ada::AdaConvSpec spec{3, 4, 2, 6, 8};
    ada::Generator<double> gen(rng, spec, /*identity_init=*/false);
    auto f_geo = rnd(rng, {2, 6});
    auto x = rnd(rng, {2, 4, 5, 5});
    auto tw = rnd(rng, {8, 2, 3, 3}, -1, 1, false);
    auto tb = rnd(rng, {8}, -1, 1, false);
    auto ti = rnd(rng, {2, 4, 5, 5}, -1, 1, false);

    s.run("adaconv.generate_params",
          [&](const auto& in) {
              auto gp = ada::generate_params(in[0], spec, gen);
              return add(l1(gp.weight, tw), l1(gp.bias, tb));
          },
          {f_geo, gen.l1.w, gen.l1.b, gen.l2.w, gen.l2.b});

    auto kw = rnd(rng, {8, 2, 3, 3});
    auto kb = rnd(rng, {8});
    s.run("adaconv.ada_conv",
          [&](const auto& in) {
              ada::GeneratedParams<double> gp{in[1], in[2]};
              return l1(ada::ada_conv(in[0], gp, spec), ti);
          },
          {x, kw, kb});

    s.run("adaconv.full_path",
          [&](const auto& in) {
              auto gp = ada::generate_params(in[0], spec, gen);
              return l1(ada::ada_conv(in[1], gp, spec), ti);
          },
          {f_geo, x, gen.l1.w, gen.l1.b, gen.l2.w, gen.l2.b});
}

void fuser_suite(Suite& s) {
    Rng rng(303);
    fuser::FuserConfig cfg{2, 4, 3};
    fuser::Fuser<double> fus(rng, cfg);
    auto audio = rnd(rng, {1, 2, 4});
    auto pose = rnd(rng, {1, 3});
    auto blink = rnd(rng, {1, 2}, 0, 1);
    auto t_a = rnd(rng, {1, 256}, -1, 1, false);
    auto t_h = rnd(rng, {1, 64}, -1, 1, false);
    auto t_g = rnd(rng, {1, 6}, -1, 1, false);

    ParamList<double> params;
    fus.collect(params);
    std::vector<Tensor<double>> all = {audio, pose, blink};
    for (auto& p : params) all.push_back(p.tensor);

    s.run("fuser.phi_a", [&](const auto& in) { return l1(fus.phi_a(in[0]), t_a); }, {audio},
          1e-4, 6, 11);
    s.run("fuser.phi_h", [&](const auto& in) { return l1(fus.phi_h(in[0]), t_h); }, {pose});
    s.run("fuser.phi_e", [&](const auto& in) { return l1(fus.phi_e(in[0]), t_h); }, {blink});
    s.run("fuser.forward",
          [&](const auto& in) { return l1(fus.forward(in[0], in[1], in[2]), t_g); }, all, 1e-4,
          4, 12);
}

void reenactor_suite(Suite& s) {
    Rng rng(304);
    reenact::ReenactorConfig cfg;
    cfg.resolution = 8, cfg.c0 = 3, cfg.c = 4, cfg.l = 1;
    cfg.d_geo = 6, cfg.k = 3, cfg.cg = 1, cfg.d_hidden = 8;
    reenact::Reenactor<double> net(rng, cfg, /*identity_init=*/false);
    auto ref = rnd(rng, {1, 3, 8, 8});
    auto f_geo = rnd(rng, {1, 6});
    auto t_feat = rnd(rng, {1, 4, 2, 2}, -1, 1, false);
    auto t_img = rnd(rng, {1, 3, 8, 8}, -1, 1, false);

    ParamList<double> params;
    net.collect(params);
    std::vector<Tensor<double>> all = {ref, f_geo};
    for (auto& p : params) all.push_back(p.tensor);

    s.run("reenactor.encode", [&](const auto& in) { return l1(net.encode(in[0]), t_feat); },
          {ref}, 1e-4, 6, 13);
    {
        auto feat = rnd(rng, {1, 4, 2, 2});
        s.run("reenactor.decode", [&](const auto& in) { return l1(net.decode(in[0]), t_img); },
              {feat}, 1e-4, 6, 14);
    }
    s.run("reenactor.forward",
          [&](const auto& in) { return l1(net.forward(in[0], in[1]), t_img); }, all, 1e-4, 3,
          15);
}

void critic_suite(Suite& s) {
    Rng rng(305);
    train::CriticConfig cfg;
    cfg.layers = 2, cfg.base = 4;
    train::Critic<double> critic(rng, cfg);
    auto x = rnd(rng, {1, 3, 16, 16});

    ParamList<double> params;
    critic.collect(params);
    std::vector<Tensor<double>> all = {x};
    for (auto& p : params) all.push_back(p.tensor);

    s.run("critic.forward", [&](const auto& in) { return mean(critic.forward(in[0])); }, all,
          1e-4, 4, 16);
}

void composite_suite(Suite& s) {
    Rng rng(306);
    fuser::FuserConfig fcfg{2, 4, 3};
    reenact::ReenactorConfig rcfg;
    rcfg.resolution = 8, rcfg.c0 = 3, rcfg.c = 4, rcfg.l = 1;
    rcfg.d_geo = 6, rcfg.k = 3, rcfg.cg = 1, rcfg.d_hidden = 8;
    train::CriticConfig ccfg;
    ccfg.layers = 2, ccfg.base = 4;

    // identity init off: every path must be live, including f_geo -> kernels
    train::Generator<double> gen(rng, fcfg, rcfg, /*identity_init=*/false);
    train::Critic<double> critic(rng, ccfg);
    auto audio = rnd(rng, {1, 2, 4});
    auto pose = rnd(rng, {1, 3});
    auto eye = rnd(rng, {1, 2}, 0, 1);
    auto ref = rnd(rng, {1, 3, 8, 8});
    auto target = rnd(rng, {1, 3, 8, 8}, -1, 1, false);
    auto landmarks = rnd(rng, {1, 6}, -1, 1, false);
    train::LossWeights w;  // 1 / 100 / 1

    ParamList<double> gp, cp;
    gen.collect(gp);
    critic.collect(cp);
    std::vector<Tensor<double>> all = {audio, pose, eye, ref};
    for (auto& p : gp) all.push_back(p.tensor);
    for (auto& p : cp) all.push_back(p.tensor);

    // the reconstruction weight (100) amplifies curvature; h = 1e-5 keeps
    // the FD truncation error comfortably under the 1e-5 tolerance
    s.run("composite.total_loss",
          [&](const auto&) {
              auto out = gen.forward(audio, pose, eye, ref);
              auto d_fake = critic.forward(out.image);
              return train::total_loss(out.f_geo, landmarks, out.image, target, d_fake, w);
          },
          all, 1e-5, 2, 17);

    // image branch alone: loss reaches f_geo only through generated kernels
    {
        auto f_geo = rnd(rng, {1, 6});
        s.run("composite.image_loss_to_fgeo",
              [&](const auto& in) { return l1(gen.net.forward(ref, in[0]), target); }, {f_geo},
              1e-5, 6, 18);
    }

    s.run("composite.critic_loss",
          [&](const auto&) {
              return train::critic_loss(critic.forward(ref), critic.forward(target));
          },
          [&] {
              std::vector<Tensor<double>> v;
              for (auto& p : cp) v.push_back(p.tensor);
              return v;
          }(),
          1e-4, 3, 19);
}

void corrupt_suite(Suite& s) {
    Rng rng(307);
    auto x = rnd(rng, {2, 3});
    auto t = rnd(rng, {2, 3}, -1, 1, false);
    // identity with a backward that over-reports by 1%: the harness must flag it
    s.run("harness.corrupted_identity",
          [&](const auto& in) {
              auto y = make_op<double>(
                  {in[0]}, in[0].shape(),
                  std::vector<double>(in[0].ptr(), in[0].ptr() + in[0].numel()),
                  [](const std::vector<double>& g, const std::vector<std::vector<double>*>& f) {
                      if (f[0])
                          for (size_t i = 0; i < g.size(); ++i) (*f[0])[i] += 1.01 * g[i];
                  });
              return l1(y, t);
          },
          {x});
}

}  // namespace

const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names = {"tensor",    "adaconv", "fuser",
                                                   "reenactor", "critic",  "composite"};
    return names;
}

std::vector<OpReport> run_suite(const std::string& module, double tol, bool corrupt) {
    std::vector<OpReport> out;
    Suite s{out, tol};
    const bool all = module == "all";
    bool known = all;
    if (all || module == "tensor") tensor_suite(s), known = true;
    if (all || module == "adaconv") adaconv_suite(s), known = true;
    if (all || module == "fuser") fuser_suite(s), known = true;
    if (all || module == "reenactor") reenactor_suite(s), known = true;
    if (all || module == "critic") critic_suite(s), known = true;
    if (all || module == "composite") composite_suite(s), known = true;
    if (!known) fail_value("unknown gradcheck module '", module, "'");
    if (corrupt) corrupt_suite(s);
    return out;
}

}  // namespace reface::check
