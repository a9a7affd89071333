// End-to-end acceptance gate. Each numbered check prints one pass/FAIL line;
// the process exits nonzero if any fail. The two full training runs dominate
// the runtime (~20 min each); everything else is seconds.
#include <algorithm>
#include <array>
#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "reface/adaconv.hpp"
#include "reface/bench.hpp"
#include "reface/gradsuite.hpp"
#include "reface/metrics.hpp"
#include "reface/ops.hpp"
#include "reface/run_config.hpp"
#include "reface/synth.hpp"
#include "reface/trainer.hpp"

#ifndef REFACE_CONFIG_DIR
#error "REFACE_CONFIG_DIR must point at the preset directory"
#endif

namespace fs = std::filesystem;
using namespace reface;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Gate {
    int failures = 0;
    void report(int idx, const char* name, bool ok, const std::string& detail) {
        std::printf("[%d] %-22s %s  (%s)\n", idx, name, ok ? "pass" : "FAIL", detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }
};

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

// ---- shared model/data plumbing -------------------------------------------

train::Trainer<float> build_trainer(const cli::RunConfig& cfg, const train::LossWeights& w) {
    Rng rng(cfg.seed);
    train::Generator<float> gen(rng, cfg.fuser_cfg(), cfg.reenactor_cfg());
    train::Critic<float> critic(rng, cfg.critic_cfg());
    return train::Trainer<float>(std::move(gen), std::move(critic), w, cfg.lr,
                                 Rng::mix(cfg.seed, 77));
}

std::vector<int> split_indices(const synth::Dataset& ds, int holdout, bool held) {
    std::vector<int> out;
    const int cut = ds.frames_per_identity - holdout;
    for (size_t i = 0; i < ds.samples.size(); ++i)
        if ((ds.samples[i].frame >= cut) == held) out.push_back(int(i));
    return out;
}

train::Batch<float> make_batch(const synth::Dataset& ds, const std::vector<int>& idx) {
    const int n = int(idx.size());
    const int t_nodes = ds.t_nodes, res = ds.resolution;
    train::Batch<float> b;
    b.audio = Tensor<float>({n, t_nodes, synth::kAudioChannels});
    b.pose = Tensor<float>({n, 3});
    b.eye = Tensor<float>({n, 2});
    b.ref = Tensor<float>({n, 3, res, res});
    b.target = Tensor<float>({n, 3, res, res});
    b.landmarks = Tensor<float>({n, 2 * ds.n_lm});
    const size_t img_n = size_t(3) * res * res;
    for (int i = 0; i < n; ++i) {
        const synth::Sample& s = ds.samples[size_t(idx[size_t(i)])];
        std::copy_n(s.drive.audio.ptr(), size_t(t_nodes) * synth::kAudioChannels,
                    b.audio.ptr() + size_t(i) * t_nodes * synth::kAudioChannels);
        float* p = b.pose.ptr() + size_t(i) * 3;
        p[0] = s.drive.yaw, p[1] = s.drive.pitch, p[2] = s.drive.roll;
        float* e = b.eye.ptr() + size_t(i) * 2;
        e[0] = s.drive.blink_l, e[1] = s.drive.blink_r;
        std::copy_n(ds.references[size_t(s.identity)].ptr(), img_n,
                    b.ref.ptr() + size_t(i) * img_n);
        std::copy_n(s.target.ptr(), img_n, b.target.ptr() + size_t(i) * img_n);
        std::copy_n(s.landmarks.data(), s.landmarks.size(),
                    b.landmarks.ptr() + size_t(i) * 2 * ds.n_lm);
    }
    return b;
}

// Advances the trainer to `target` steps, drawing batches from the trainer's
// own sampler (so a resumed run replays the same draws). Optionally persists
// the states right after `mid_step` and the step following it.
void run_training(train::Trainer<float>& tr, const synth::Dataset& ds,
                  const std::vector<int>& train_idx, int batch, int target,
                  const std::string& echo, const fs::path* mid = nullptr, int mid_step = -1,
                  const fs::path* next = nullptr) {
    while (tr.step_count() < target) {
        std::vector<int> idx(static_cast<size_t>(batch));
        for (auto& v : idx)
            v = train_idx[size_t(tr.sampler().uniform_int(0, int(train_idx.size()) - 1))];
        const train::StepReport r = tr.train_step(make_batch(ds, idx));
        if (mid && r.step == mid_step) tr.save(mid->string(), echo);
        if (next && r.step == mid_step + 1) tr.save(next->string(), echo);
    }
}

Tensor<float> forward_drive(const train::Generator<float>& gen, const synth::Dataset& ds,
                            const synth::DriveSignal& d, int ref_identity) {
    const int res = ds.resolution;
    Tensor<float> audio({1, ds.t_nodes, synth::kAudioChannels});
    std::copy_n(d.audio.ptr(), audio.numel(), audio.ptr());
    Tensor<float> pose({1, 3});
    pose.ptr()[0] = d.yaw, pose.ptr()[1] = d.pitch, pose.ptr()[2] = d.roll;
    Tensor<float> eye({1, 2});
    eye.ptr()[0] = d.blink_l, eye.ptr()[1] = d.blink_r;
    Tensor<float> ref({1, 3, res, res});
    std::copy_n(ds.references[size_t(ref_identity)].ptr(), ref.numel(), ref.ptr());
    auto out = gen.forward(audio, pose, eye, ref);
    return reshape(out.image, {3, res, res});
}

std::array<double, 3> mean_masked_color(const Tensor<float>& img, const Tensor<float>& mask) {
    const int64_t plane = mask.numel();
    double n = 0;
    for (int64_t i = 0; i < plane; ++i) n += mask.ptr()[i];
    std::array<double, 3> m{};
    if (n == 0) return m;
    for (int c = 0; c < 3; ++c) {
        double s = 0;
        for (int64_t i = 0; i < plane; ++i) s += img.ptr()[c * plane + i] * mask.ptr()[i];
        m[size_t(c)] = s / n;
    }
    return m;
}

// l1 between the output's mean skin color (driven pose) and the reference's
// (neutral pose), averaged over the drive frames
double cross_drive_distance(const train::Generator<float>& gen, const synth::Dataset& ds,
                            int ref_id, int drive_id, const std::vector<int>& pool) {
    NoGradGuard no_grad;
    const synth::IdentityParams& id = ds.identities[size_t(ref_id)];
    const std::array<double, 3> ref_mean =
        mean_masked_color(ds.references[size_t(ref_id)],
                          synth::skin_mask(id, synth::DriveSignal{}, ds.resolution));
    double sum = 0;
    int count = 0;
    for (int i : pool) {
        const synth::Sample& s = ds.samples[size_t(i)];
        if (s.identity != drive_id) continue;
        const Tensor<float> out = forward_drive(gen, ds, s.drive, ref_id);
        const std::array<double, 3> got =
            mean_masked_color(out, synth::skin_mask(id, s.drive, ds.resolution));
        sum += std::abs(got[0] - ref_mean[0]) + std::abs(got[1] - ref_mean[1]) +
               std::abs(got[2] - ref_mean[2]);
        ++count;
    }
    return count ? sum / count : 1e9;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

int main() {
    Gate gate;
    const fs::path work = fs::temp_directory_path() / "reface_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);

    // [1] every gradient path against central finite differences
    {
        const auto t0 = Clock::now();
        const auto reports = check::run_suite("all", 1e-5);
        const double secs = seconds_since(t0);
        int ok_count = 0;
        double worst = 0;
        for (const auto& r : reports) {
            ok_count += r.ok;
            worst = std::max(worst, r.max_rel_err);
        }
        const bool ok = ok_count == int(reports.size()) && secs < 300.0;
        gate.report(1, "gradient suite", ok,
                    fmt("%d/%zu checks, worst rel err %.2e, %.1f s", ok_count, reports.size(),
                        worst, secs));
    }

    // [2] k=1, cg=1 collapses to a per-channel affine map (AdaIN)
    {
        NoGradGuard no_grad;
        Rng rng(0xADA1);
        double worst = 0;
        for (int trial = 0; trial < 100; ++trial) {
            ada::AdaConvSpec spec;
            spec.k = 1;
            spec.cg = 1;
            spec.c = rng.uniform_int(1, 8);
            spec.d_geo = rng.uniform_int(1, 12);
            spec.d_hidden = rng.uniform_int(1, 16);
            const int n = rng.uniform_int(1, 3);
            const int h = rng.uniform_int(1, 10), w = rng.uniform_int(1, 10);
            ada::Generator<float> gen(rng, spec, /*identity_init=*/false);
            const auto f_geo = reftest::rand_tensor<float>(rng, {n, spec.d_geo});
            const auto gp = ada::generate_params(f_geo, spec, gen);
            const auto x = reftest::rand_tensor<float>(rng, {n, spec.c, h, w});
            const auto y = ada::ada_conv(x, gp, spec);
            for (int ni = 0; ni < n; ++ni)
                for (int c = 0; c < spec.c; ++c) {
                    const float scale = gp.weight.ptr()[ni * spec.c + c];
                    const float shift = gp.bias.ptr()[ni * spec.c + c];
                    const size_t off = (size_t(ni) * spec.c + size_t(c)) * h * w;
                    for (int i = 0; i < h * w; ++i)
                        worst = std::max<double>(
                            worst, std::abs(double(y.ptr()[off + size_t(i)]) -
                                            (double(x.ptr()[off + size_t(i)]) * scale + shift)));
                }
        }
        gate.report(2, "adain reduction", worst <= 1e-6,
                    fmt("max abs diff %.2e over 100 cases", worst));
    }

    // [3] generated parameter vector length: k*k*cg*c weights + c biases
    {
        NoGradGuard no_grad;
        Rng rng(0xC0DE);
        bool ok = true;
        for (int trial = 0; trial < 50 && ok; ++trial) {
            ada::AdaConvSpec spec;
            spec.k = 2 * rng.uniform_int(0, 2) + 1;  // 1, 3, 5
            spec.cg = rng.uniform_int(1, 4);
            spec.c = spec.cg * rng.uniform_int(1, 6);
            spec.d_geo = rng.uniform_int(1, 16);
            spec.d_hidden = rng.uniform_int(1, 24);
            const int n = rng.uniform_int(1, 4);
            ada::Generator<float> gen(rng, spec, false);
            const auto gp =
                ada::generate_params(reftest::rand_tensor<float>(rng, {n, spec.d_geo}), spec, gen);
            const int64_t want_w = int64_t(n) * spec.k * spec.k * spec.cg * spec.c;
            ok = gp.weight.numel() == want_w && gp.bias.numel() == int64_t(n) * spec.c &&
                 ada::param_count(spec) == want_w / n + spec.c;
        }
        gate.report(3, "parameter formula", ok, "50 random specs, exact");
    }

    // [4] production kernels vs nested-loop direct summation
    {
        NoGradGuard no_grad;
        Rng rng(0x0AC1E);
        double worst2d = 0, worst1d = 0, worst_ada = 0;
        for (int trial = 0; trial < 20; ++trial) {
            const int groups = rng.uniform_int(1, 3);
            const int cg = rng.uniform_int(1, 3), co_per_g = rng.uniform_int(1, 3);
            const int cin = groups * cg, cout = groups * co_per_g;
            const int n = rng.uniform_int(1, 2);
            const int kh = rng.uniform_int(1, 3), kw = rng.uniform_int(1, 3);
            const int stride = rng.uniform_int(1, 2), pad = rng.uniform_int(0, 2);
            const int h = kh + rng.uniform_int(0, 5), w = kw + rng.uniform_int(0, 5);
            const auto x = reftest::rand_tensor<float>(rng, {n, cin, h, w});
            const auto wt = reftest::rand_tensor<float>(rng, {cout, cg, kh, kw});
            const auto b = reftest::rand_tensor<float>(rng, {cout});
            const auto got = conv2d(x, wt, b, stride, pad, groups);
            const auto want = reftest::conv2d_oracle(
                std::vector<float>(x.ptr(), x.ptr() + x.numel()), n, cin, h, w,
                std::vector<float>(wt.ptr(), wt.ptr() + wt.numel()), cout, kh, kw,
                std::vector<float>(b.ptr(), b.ptr() + b.numel()), stride, pad, groups);
            worst2d = std::max(worst2d, reftest::max_abs_diff(got, want));
        }
        for (int trial = 0; trial < 20; ++trial) {
            const int n = rng.uniform_int(1, 2), cin = rng.uniform_int(1, 4);
            const int cout = rng.uniform_int(1, 4), k = rng.uniform_int(1, 4);
            const int stride = rng.uniform_int(1, 2), pad = rng.uniform_int(0, 2);
            const int t = k + rng.uniform_int(0, 6);
            const auto x = reftest::rand_tensor<float>(rng, {n, cin, t});
            const auto wt = reftest::rand_tensor<float>(rng, {cout, cin, k});
            const auto b = reftest::rand_tensor<float>(rng, {cout});
            const auto got = conv1d(x, wt, b, stride, pad);
            const auto want = reftest::conv1d_oracle(
                std::vector<float>(x.ptr(), x.ptr() + x.numel()), n, cin, t,
                std::vector<float>(wt.ptr(), wt.ptr() + wt.numel()), cout, k,
                std::vector<float>(b.ptr(), b.ptr() + b.numel()), stride, pad);
            worst1d = std::max(worst1d, reftest::max_abs_diff(got, want));
        }
        for (int trial = 0; trial < 20; ++trial) {
            ada::AdaConvSpec spec;
            spec.k = 2 * rng.uniform_int(0, 1) + 1;  // 1 or 3
            spec.cg = rng.uniform_int(1, 2);
            spec.c = spec.cg * rng.uniform_int(1, 4);
            spec.d_geo = rng.uniform_int(1, 8);
            spec.d_hidden = rng.uniform_int(1, 12);
            const int n = rng.uniform_int(1, 3);
            const int h = spec.k + rng.uniform_int(0, 4), w = spec.k + rng.uniform_int(0, 4);
            ada::Generator<float> gen(rng, spec, false);
            const auto gp =
                ada::generate_params(reftest::rand_tensor<float>(rng, {n, spec.d_geo}), spec, gen);
            const auto x = reftest::rand_tensor<float>(rng, {n, spec.c, h, w});
            const auto y = ada::ada_conv(x, gp, spec);
            const size_t plane = size_t(spec.c) * h * w;
            const size_t wlen = size_t(spec.c) * spec.cg * spec.k * spec.k;
            for (int ni = 0; ni < n; ++ni) {
                const std::vector<float> xs(x.ptr() + ni * plane, x.ptr() + (ni + 1) * plane);
                const std::vector<float> ws(gp.weight.ptr() + ni * wlen,
                                            gp.weight.ptr() + (ni + 1) * wlen);
                const std::vector<float> bs(gp.bias.ptr() + size_t(ni) * spec.c,
                                            gp.bias.ptr() + size_t(ni + 1) * spec.c);
                const auto want = reftest::conv2d_oracle(xs, 1, spec.c, h, w, ws, spec.c, spec.k,
                                                         spec.k, bs, 1, spec.k / 2,
                                                         spec.c / spec.cg);
                for (size_t i = 0; i < plane; ++i)
                    worst_ada = std::max<double>(
                        worst_ada, std::abs(double(y.ptr()[ni * plane + i]) - double(want[i])));
            }
        }
        const bool ok = worst2d <= 1e-6 && worst1d <= 1e-6 && worst_ada <= 1e-6;
        gate.report(4, "convolution oracles", ok,
                    fmt("20 each: conv2d %.2e, conv1d %.2e, ada_conv %.2e", worst2d, worst1d,
                        worst_ada));
    }

    // ---- toy end-to-end training (shared by 5, 6, 9) -----------------------
    const cli::RunConfig cfg = cli::load_config_file(REFACE_CONFIG_DIR "/toy64.cfg");
    cfg.validate();
    const std::string echo = cli::config_text(cfg);
    const synth::Dataset ds = synth::make_dataset(cfg.seed, cfg.identities, cfg.frames,
                                                  cfg.resolution, cfg.landmarks, cfg.audio_nodes);
    const std::vector<int> train_idx = split_indices(ds, cfg.holdout, false);
    const std::vector<int> hold_idx = split_indices(ds, cfg.holdout, true);
    const int mid_step = cfg.steps / 2;
    const fs::path ck_final1 = work / "final1.ckpt", ck_final2 = work / "final2.ckpt";
    const fs::path ck_mid = work / "mid.ckpt", ck_next = work / "next.ckpt";
    const fs::path ck_resumed = work / "resumed.ckpt";

    train::Trainer<float> run1 = build_trainer(cfg, cfg.loss_weights());
    const auto t_train = Clock::now();
    run_training(run1, ds, train_idx, cfg.batch, cfg.steps, echo, &ck_mid, mid_step, &ck_next);
    const double train_secs = seconds_since(t_train);
    run1.save(ck_final1.string(), echo);

    // [5] held-out self-driven SSIM, cross-identity skin color, wall budget
    {
        NoGradGuard no_grad;
        double ssim_sum = 0, ssim_min = 1;
        for (int i : hold_idx) {
            const synth::Sample& s = ds.samples[size_t(i)];
            const double v =
                metrics::ssim(forward_drive(run1.generator(), ds, s.drive, s.identity), s.target);
            ssim_sum += v;
            ssim_min = std::min(ssim_min, v);
        }
        const double ssim_mean = ssim_sum / double(hold_idx.size());
        const double x01 = cross_drive_distance(run1.generator(), ds, 0, 1, hold_idx);
        const double x10 = cross_drive_distance(run1.generator(), ds, 1, 0, hold_idx);
        const bool ok = ssim_mean >= 0.80 && x01 <= 0.1 && x10 <= 0.1 && train_secs <= 1800.0;
        gate.report(5, "toy training", ok,
                    fmt("held-out ssim %.4f (min %.4f, n=%zu), cross-drive skin l1 %.4f/%.4f, "
                        "%.0f s",
                        ssim_mean, ssim_min, hold_idx.size(), x01, x10, train_secs));
    }

    // [6] blink decoupling: analytic renderer first, then the trained model
    {
        NoGradGuard no_grad;
        const synth::IdentityParams& id = ds.identities[0];
        synth::DriveSignal open;
        open.mouth_open = 0.4f;
        std::vector<float> traj(size_t(ds.t_nodes), 0.4f);
        open.audio = synth::gen_audio_feature(traj, Rng::mix(ds.seed, 0xB11D));
        synth::DriveSignal closed = open;
        closed.blink_l = closed.blink_r = 0.0f;

        const auto boxes = synth::eye_boxes(id, open, ds.resolution);
        const std::vector<metrics::Box> region{boxes[0], boxes[1]};

        const auto [oracle_in, oracle_out] =
            metrics::region_l1(synth::render_face(id, open, ds.resolution, ds.n_lm),
                               synth::render_face(id, closed, ds.resolution, ds.n_lm), region);
        const bool oracle_ok = oracle_in > 0.01 && oracle_out < 1e-6;

        const auto [model_in, model_out] =
            metrics::region_l1(forward_drive(run1.generator(), ds, open, 0),
                               forward_drive(run1.generator(), ds, closed, 0), region);
        const bool model_ok = model_in >= 2.0 * model_out;
        gate.report(6, "blink decoupling", oracle_ok && model_ok,
                    fmt("renderer in/out %.3f/%.1e; model in/out %.4f/%.4f (ratio %.1f)",
                        oracle_in, oracle_out, model_in, model_out,
                        model_in / std::max(model_out, 1e-12)));
    }

    // [7] deterministic path sanity: fixed-batch overfit without the critic
    {
        cli::RunConfig c7 = cfg;
        c7.lambda_adv = 0;
        train::Trainer<float> tr = build_trainer(c7, c7.loss_weights());
        const std::vector<int> first8(train_idx.begin(), train_idx.begin() + c7.batch);
        const train::Batch<float> fixed = make_batch(ds, first8);
        double first = 0, last = 0;
        for (int i = 0; i < 200; ++i) {
            const auto r = tr.train_step(fixed);
            if (i == 0) first = r.loss_recon;
            last = r.loss_recon;
        }
        gate.report(7, "fixed-batch overfit", last <= 0.5 * first,
                    fmt("recon %.4f -> %.4f over 200 steps", first, last));
    }

    // [8] parameter budget of the full preset; throughput at 64x64
    {
        cli::RunConfig big = cli::load_config_file(REFACE_CONFIG_DIR "/full256.cfg");
        big.validate();
        cli::RunConfig big64 = big;
        big64.resolution = 64;

        Rng r64(big64.seed);
        train::Generator<float> g64(r64, big64.fuser_cfg(), big64.reenactor_cfg());
        const auto rep64 = metrics::bench_fps(g64, big.name + "@64", 20, 3, 1);

        Rng r256(big.seed);
        train::Generator<float> g256(r256, big.fuser_cfg(), big.reenactor_cfg());
        const auto rep256 = metrics::bench_fps(g256, big.name + "@256", 3, 1, 1);

        const bool ok = rep256.total_params <= 6'000'000 && rep64.fps >= 15.0;
        gate.report(8, "lightweight", ok,
                    fmt("%lld params; %.1f fps @64 (gated), %.2f fps @256 (logged)",
                        (long long)rep256.total_params, rep64.fps, rep256.fps));
    }

    // [9] bitwise determinism: full rerun, then save/load/resume replay
    {
        train::Trainer<float> run2 = build_trainer(cfg, cfg.loss_weights());
        run_training(run2, ds, train_idx, cfg.batch, cfg.steps, echo);
        run2.save(ck_final2.string(), echo);
        const bool rerun_same = read_bytes(ck_final1) == read_bytes(ck_final2);

        train::Trainer<float> resumed = build_trainer(cfg, cfg.loss_weights());
        resumed.load(ck_mid.string());
        run_training(resumed, ds, train_idx, cfg.batch, mid_step + 1, echo);
        resumed.save(ck_resumed.string(), echo);
        const bool resume_same = read_bytes(ck_next) == read_bytes(ck_resumed);

        gate.report(9, "determinism", rerun_same && resume_same,
                    fmt("rerun checkpoints %s, resume replay %s",
                        rerun_same ? "identical" : "DIFFER",
                        resume_same ? "identical" : "DIFFERS"));
    }

    fs::remove_all(work);
    std::printf("%d/9 criteria passed\n", 9 - gate.failures);
    return gate.failures == 0 ? 0 : 1;
}
