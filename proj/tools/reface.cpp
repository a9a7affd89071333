#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "reface/bench.hpp"
#include "reface/checkpoint.hpp"
#include "reface/gradsuite.hpp"
#include "reface/image_io.hpp"
#include "reface/metrics.hpp"
#include "reface/run_config.hpp"
#include "reface/synth.hpp"
#include "reface/trainer.hpp"

using namespace reface;

namespace {

namespace fs = std::filesystem;

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) fail_value("cannot write '", path, "'");
    f << text;
}

synth::Dataset dataset_from_manifest(const std::string& path) {
    // accept the dataset directory as shorthand for its manifest
    std::string p = path;
    if (fs::is_directory(p)) p = (fs::path(p) / "manifest.txt").string();
    const synth::ManifestHeader h = synth::read_manifest_header(p);
    return synth::make_dataset(h.seed, h.identities, h.frames, h.resolution, h.n_lm, h.t_nodes);
}

void check_manifest_matches(const synth::Dataset& ds, const cli::RunConfig& cfg) {
    if (ds.seed != cfg.seed || int(ds.identities.size()) != cfg.identities ||
        ds.frames_per_identity != cfg.frames || ds.resolution != cfg.resolution ||
        ds.n_lm != cfg.landmarks || ds.t_nodes != cfg.audio_nodes)
        fail_value("manifest does not match the config (seed/identities/frames/resolution/"
                   "landmarks/audio_nodes must agree)");
}

train::Trainer<float> build_trainer(const cli::RunConfig& cfg) {
    Rng rng(cfg.seed);
    train::Generator<float> gen(rng, cfg.fuser_cfg(), cfg.reenactor_cfg());
    train::Critic<float> critic(rng, cfg.critic_cfg());
    return train::Trainer<float>(std::move(gen), std::move(critic), cfg.loss_weights(), cfg.lr,
                                 Rng::mix(cfg.seed, 77));
}

cli::RunConfig config_from_checkpoint(const std::string& path) {
    const auto entries = train::load_checkpoint_file(path);
    for (const auto& e : entries)
        if (e.name == "__config__")
            return cli::parse_config_text(std::string(e.bytes.begin(), e.bytes.end()));
    fail_value("checkpoint '", path, "' carries no config echo");
}

train::Trainer<float> trainer_from_checkpoint(const std::string& path, cli::RunConfig& cfg_out) {
    cfg_out = config_from_checkpoint(path);
    cfg_out.validate();
    train::Trainer<float> t = build_trainer(cfg_out);
    t.load(path);
    return t;
}

// rows of samples stacked as [N,...] model inputs
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
        std::copy_n(ds.references[size_t(s.identity)].ptr(), img_n, b.ref.ptr() + size_t(i) * img_n);
        std::copy_n(s.target.ptr(), img_n, b.target.ptr() + size_t(i) * img_n);
        std::copy_n(s.landmarks.data(), s.landmarks.size(),
                    b.landmarks.ptr() + size_t(i) * 2 * ds.n_lm);
    }
    return b;
}

Tensor<float> single(const Tensor<float>& batched, int i) {
    Tensor<float> out = narrow(batched, 0, i, 1);
    Shape s(batched.shape().begin() + 1, batched.shape().end());
    return reshape(out, s);
}

std::vector<int> split_indices(const synth::Dataset& ds, int holdout, const std::string& split) {
    std::vector<int> out;
    const int cut = ds.frames_per_identity - holdout;
    for (size_t i = 0; i < ds.samples.size(); ++i) {
        const bool held = ds.samples[i].frame >= cut;
        if (split == "all" || (split == "holdout" && held) || (split == "train" && !held))
            out.push_back(int(i));
    }
    if (out.empty()) fail_value("split '", split, "' selects no samples");
    return out;
}

// ---- gen-data --------------------------------------------------------------

struct GenDataArgs {
    uint64_t seed = 1;
    int ids = 2, frames = 64, res = 64, landmarks = 20, audio_nodes = 8;
    std::string out;
};

int cmd_gen_data(const GenDataArgs& a) {
    synth::Dataset ds = synth::make_dataset(a.seed, a.ids, a.frames, a.res, a.landmarks,
                                            a.audio_nodes);
    fs::create_directories(a.out);
    for (size_t i = 0; i < ds.identities.size(); ++i)
        img::save_png(str(a.out, "/ref_", i, ".png"), ds.references[i]);
    for (const auto& s : ds.samples)
        img::save_png(str(a.out, "/id", s.identity, "_f", s.frame, ".png"), s.target);
    const std::string manifest = a.out + "/manifest.txt";
    write_file(manifest, synth::manifest_text(ds));
    std::printf("%s\n", manifest.c_str());
    return 0;
}

// ---- train -------------------------------------------------------------------

struct TrainArgs {
    std::string config, data, out, resume;
    std::vector<std::string> overrides;
    int steps = -1;
    bool deterministic = false;
};

void write_sample_grid(const std::string& path, const train::Generator<float>& gen,
                       const train::Batch<float>& b) {
    NoGradGuard no_grad;
    auto out = gen.forward(b.audio, b.pose, b.eye, b.ref);
    std::vector<Tensor<float>> rows;
    for (int i = 0; i < b.ref.dim(0); ++i)
        rows.push_back(img::hstack_images(
            {single(b.ref, i), single(out.image, i), single(b.target, i)}));
    img::save_png(path, img::vstack_images(rows));
}

int cmd_train(const TrainArgs& a) {
    cli::RunConfig cfg = cli::load_config_file(a.config);
    for (const auto& o : a.overrides) cli::apply_override(cfg, o);
    if (a.steps > 0) cfg.steps = a.steps;
    cfg.validate();

    synth::Dataset ds = dataset_from_manifest(a.data);
    check_manifest_matches(ds, cfg);
    const std::vector<int> train_idx = split_indices(ds, cfg.holdout, "train");

    fs::create_directories(a.out);
    const std::string resolved = cli::config_text(cfg);
    write_file(a.out + "/config_resolved.cfg", resolved);

    train::Trainer<float> trainer = build_trainer(cfg);
    if (!a.resume.empty()) trainer.load(a.resume);

    std::ofstream log(a.out + "/train_log.csv",
                      a.resume.empty() ? std::ios::trunc : std::ios::app);
    if (trainer.step_count() == 0)
        log << "step,loss_landmark,loss_recon,loss_adv,loss_critic,loss_total,grad_norm_gen,"
               "grad_norm_critic\n";

    // fixed preview batch: the first few training samples
    std::vector<int> preview(train_idx.begin(),
                             train_idx.begin() + std::min<size_t>(4, train_idx.size()));
    const train::Batch<float> preview_batch = make_batch(ds, preview);

    while (trainer.step_count() < cfg.steps) {
        std::vector<int> idx(size_t(cfg.batch));
        for (auto& v : idx)
            v = train_idx[size_t(trainer.sampler().uniform_int(0, int(train_idx.size()) - 1))];
        const train::StepReport r = trainer.train_step(make_batch(ds, idx));
        char line[256];
        std::snprintf(line, sizeof(line), "%lld,%.8g,%.8g,%.8g,%.8g,%.8g,%.8g,%.8g\n",
                      (long long)r.step, r.loss_landmark, r.loss_recon, r.loss_adv,
                      r.loss_critic, r.loss_total, r.grad_norm_gen, r.grad_norm_critic);
        log << line;
        const bool window = r.step % cfg.log_every == 0 || r.step == cfg.steps;
        if (window) {
            std::printf("step %lld  total %.5f  recon %.5f  landmark %.5f  adv %.5f\n",
                        (long long)r.step, r.loss_total, r.loss_recon, r.loss_landmark,
                        r.loss_adv);
            std::fflush(stdout);
            trainer.save(str(a.out, "/ckpt_step", r.step, ".ckpt"), resolved);
            write_sample_grid(str(a.out, "/sample_step", r.step, ".png"), trainer.generator(),
                              preview_batch);
        }
    }
    const std::string final_path = a.out + "/final.ckpt";
    trainer.save(final_path, resolved);
    std::printf("%s\n", final_path.c_str());
    return 0;
}

// ---- reenact -----------------------------------------------------------------

struct ReenactArgs {
    std::string ckpt, ref_image, out;
    std::string drive_manifest;
    int drive_row = -1;
    double yaw = 0, pitch = 0, roll = 0, blink_l = 1, blink_r = 1, mouth = 0.2;
    uint64_t audio_seed = 1234;
    std::string sweep;  // yaw|pitch|roll|blink|mouth
    double sweep_from = -0.4, sweep_to = 0.4;
    int sweep_steps = 5;
};

synth::DriveSignal drive_from_args(const ReenactArgs& a, int audio_nodes) {
    synth::DriveSignal d;
    d.yaw = float(a.yaw), d.pitch = float(a.pitch), d.roll = float(a.roll);
    d.blink_l = float(a.blink_l), d.blink_r = float(a.blink_r);
    d.mouth_open = float(a.mouth);
    std::vector<float> traj(size_t(audio_nodes), d.mouth_open);
    d.audio = synth::gen_audio_feature(traj, a.audio_seed);
    return d;
}

Tensor<float> reenact_one(const train::Generator<float>& gen, const Tensor<float>& ref,
                          const synth::DriveSignal& d) {
    NoGradGuard no_grad;
    Tensor<float> audio = reshape(d.audio, {1, d.audio.dim(0), d.audio.dim(1)});
    Tensor<float> pose({1, 3}, {d.yaw, d.pitch, d.roll});
    Tensor<float> eye({1, 2}, {d.blink_l, d.blink_r});
    Tensor<float> ref_b = reshape(ref, {1, ref.dim(0), ref.dim(1), ref.dim(2)});
    auto out = gen.forward(audio, pose, eye, ref_b);
    return single(out.image, 0);
}

int cmd_reenact(const ReenactArgs& a) {
    cli::RunConfig cfg;
    train::Trainer<float> trainer = trainer_from_checkpoint(a.ckpt, cfg);
    Tensor<float> ref = img::load_png(a.ref_image);
    if (ref.dim(1) != cfg.resolution || ref.dim(2) != cfg.resolution)
        fail_value("reference image is ", ref.dim(2), "x", ref.dim(1), ", model wants ",
                   cfg.resolution, "x", cfg.resolution);

    synth::DriveSignal base;
    if (!a.drive_manifest.empty()) {
        if (a.drive_row < 0) fail_value("--drive-manifest needs --drive-row");
        synth::Dataset ds = dataset_from_manifest(a.drive_manifest);
        if (ds.t_nodes != cfg.audio_nodes)
            fail_value("drive manifest audio_nodes ", ds.t_nodes, " != model's ",
                       cfg.audio_nodes);
        if (a.drive_row >= int(ds.samples.size()))
            fail_value("--drive-row ", a.drive_row, " out of range (", ds.samples.size(),
                       " samples)");
        base = ds.samples[size_t(a.drive_row)].drive;
    } else {
        base = drive_from_args(a, cfg.audio_nodes);
    }

    fs::create_directories(fs::path(a.out).parent_path().empty()
                               ? "."
                               : fs::path(a.out).parent_path().string());
    if (a.sweep.empty()) {
        img::save_png(a.out, reenact_one(trainer.generator(), ref, base));
        std::printf("%s\n", a.out.c_str());
        return 0;
    }

    if (a.sweep_steps < 2) fail_value("--sweep-steps must be >= 2");
    std::vector<Tensor<float>> frames;
    for (int i = 0; i < a.sweep_steps; ++i) {
        const double v = a.sweep_from +
                         (a.sweep_to - a.sweep_from) * double(i) / double(a.sweep_steps - 1);
        synth::DriveSignal d = base;
        if (a.sweep == "yaw")
            d.yaw = float(v);
        else if (a.sweep == "pitch")
            d.pitch = float(v);
        else if (a.sweep == "roll")
            d.roll = float(v);
        else if (a.sweep == "blink")
            d.blink_l = d.blink_r = float(std::clamp(v, 0.0, 1.0));
        else if (a.sweep == "mouth") {
            d.mouth_open = float(std::clamp(v, 0.0, 1.0));
            std::vector<float> traj(size_t(cfg.audio_nodes), d.mouth_open);
            d.audio = synth::gen_audio_feature(traj, a.audio_seed);
        } else
            fail_value("unknown sweep component '", a.sweep,
                       "' (yaw|pitch|roll|blink|mouth)");
        frames.push_back(reenact_one(trainer.generator(), ref, d));
    }
    img::save_png(a.out, img::hstack_images(frames));
    std::printf("%s\n", a.out.c_str());
    return 0;
}

// ---- gradcheck ---------------------------------------------------------------

int cmd_gradcheck(const std::string& module, double tol, bool mutate) {
    const auto reports = check::run_suite(module, tol, mutate);
    int bad = 0;
    for (const auto& r : reports) {
        std::printf("%-32s max_rel_err %.3e  coords %lld  %s\n", r.name.c_str(), r.max_rel_err,
                    (long long)r.coords, r.ok ? "ok" : "FAIL");
        if (!r.ok) ++bad;
    }
    std::printf("%d/%zu checks passed\n", int(reports.size()) - bad, reports.size());
    return bad ? 2 : 0;
}

// ---- bench -------------------------------------------------------------------

struct BenchArgs {
    std::string ckpt, config, out;
    int res = 0, iters = 200, warmup = 20, threads = 1;
};

int cmd_bench(const BenchArgs& a) {
    if (a.ckpt.empty() == a.config.empty())
        fail_value("bench needs exactly one of --ckpt or --config");
    cli::RunConfig cfg;
    train::Trainer<float> trainer;
    if (!a.ckpt.empty()) {
        trainer = trainer_from_checkpoint(a.ckpt, cfg);
    } else {
        cfg = cli::load_config_file(a.config);
        cfg.validate();
        trainer = build_trainer(cfg);
    }
    if (a.res > 0 && a.res != cfg.resolution) {
        // parameter shapes are resolution-independent, so rebuilding at the
        // requested size keeps any loaded weights
        cli::RunConfig at_res = cfg;
        at_res.resolution = a.res;
        at_res.validate();
        train::Trainer<float> rebuilt = build_trainer(at_res);
        if (!a.ckpt.empty()) rebuilt.load(a.ckpt);
        trainer = std::move(rebuilt);
        cfg = at_res;
    }
    metrics::BenchReport r =
        metrics::bench_fps(trainer.generator(), cfg.name, a.iters, a.warmup, a.threads);
    std::printf("%s", r.text().c_str());
    if (!a.out.empty()) {
        fs::create_directories(a.out);
        write_file(a.out + "/bench.csv", r.csv());
        write_file(a.out + "/config_resolved.cfg", cli::config_text(cfg));
    }
    return 0;
}

// ---- eval --------------------------------------------------------------------

struct EvalArgs {
    std::string ckpt, data, out;
    std::string split = "holdout";
    bool gt_as_prediction = false;
};

int cmd_eval(const EvalArgs& a) {
    cli::RunConfig cfg;
    train::Trainer<float> trainer = trainer_from_checkpoint(a.ckpt, cfg);
    synth::Dataset ds = dataset_from_manifest(a.data);
    check_manifest_matches(ds, cfg);
    const std::vector<int> idx = split_indices(ds, cfg.holdout, a.split);

    NoGradGuard no_grad;
    double ssim_sum = 0, lm_sum = 0;
    for (int i : idx) {
        const synth::Sample& s = ds.samples[size_t(i)];
        const train::Batch<float> b = make_batch(ds, {i});
        Tensor<float> pred, geo;
        if (a.gt_as_prediction) {
            pred = single(b.target, 0);
            geo = b.landmarks;
        } else {
            auto out = trainer.generator().forward(b.audio, b.pose, b.eye, b.ref);
            pred = single(out.image, 0);
            geo = out.f_geo;
        }
        ssim_sum += metrics::ssim(pred, s.target);
        lm_sum += metrics::landmark_error(geo, b.landmarks);
    }
    const double ssim_mean = ssim_sum / double(idx.size());
    const double lm_mean = lm_sum / double(idx.size());

    // decoupling: vary only the blink and measure leakage outside the eyes
    double in_sum = 0, out_sum = 0;
    for (size_t id = 0; id < ds.identities.size(); ++id) {
        synth::DriveSignal d;  // neutral pose, training-like audio
        std::vector<float> traj(size_t(ds.t_nodes), 0.4f);
        d.audio = synth::gen_audio_feature(traj, Rng::mix(ds.seed, 0xB11D));
        d.mouth_open = 0.4f;
        synth::DriveSignal open = d, shut = d;
        open.blink_l = open.blink_r = 1.0f;
        shut.blink_l = shut.blink_r = 0.0f;
        const Tensor<float>& ref = ds.references[id];
        Tensor<float> img_open = reenact_one(trainer.generator(), ref, open);
        Tensor<float> img_shut = reenact_one(trainer.generator(), ref, shut);
        auto boxes = synth::eye_boxes(ds.identities[id], d, ds.resolution);
        auto [inside, outside] =
            metrics::region_l1(img_open, img_shut, {boxes[0], boxes[1]});
        in_sum += inside;
        out_sum += outside;
    }
    const double blink_in = in_sum / double(ds.identities.size());
    const double blink_out = out_sum / double(ds.identities.size());
    const double ratio = blink_in / std::max(blink_out, 1e-9);

    std::string text;
    text += str("split: ", a.split, "\n");
    text += str("samples: ", idx.size(), "\n");
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", ssim_mean);
    text += str("ssim_mean: ", buf, "\n");
    std::snprintf(buf, sizeof(buf), "%.6f", lm_mean);
    text += str("landmark_error_mean: ", buf, "\n");
    std::snprintf(buf, sizeof(buf), "%.6f", blink_in);
    text += str("blink_region_l1_inside: ", buf, "\n");
    std::snprintf(buf, sizeof(buf), "%.6f", blink_out);
    text += str("blink_region_l1_outside: ", buf, "\n");
    std::snprintf(buf, sizeof(buf), "%.3f", ratio);
    text += str("blink_decoupling_ratio: ", buf, "\n");
    std::printf("%s", text.c_str());
    if (!a.out.empty()) {
        fs::create_directories(a.out);
        write_file(a.out + "/eval.txt", text);
        write_file(a.out + "/config_resolved.cfg", cli::config_text(cfg));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"audio-driven multi-face reenactment toolkit"};
    app.require_subcommand(1);

    GenDataArgs gd;
    auto* c_gd = app.add_subcommand("gen-data", "render a synthetic dataset + manifest");
    c_gd->add_option("--seed", gd.seed);
    c_gd->add_option("--ids", gd.ids);
    c_gd->add_option("--frames", gd.frames);
    c_gd->add_option("--res", gd.res);
    c_gd->add_option("--landmarks", gd.landmarks);
    c_gd->add_option("--audio-nodes", gd.audio_nodes);
    c_gd->add_option("--out", gd.out)->required();

    TrainArgs tr;
    auto* c_tr = app.add_subcommand("train", "train fuser+reenactor (and critic)");
    c_tr->add_option("--config", tr.config)->required();
    c_tr->add_option("--data", tr.data)->required();
    c_tr->add_option("--out", tr.out)->required();
    c_tr->add_option("--steps", tr.steps);
    c_tr->add_option("--resume", tr.resume);
    c_tr->add_option("--set", tr.overrides, "key=value config override")->take_all();
    c_tr->add_flag("--deterministic", tr.deterministic,
                   "fixed-seed runs are byte-reproducible (always on; flag documents intent)");

    ReenactArgs re;
    auto* c_re = app.add_subcommand("reenact", "drive a reference face from a checkpoint");
    c_re->add_option("--ckpt", re.ckpt)->required();
    c_re->add_option("--ref-image", re.ref_image)->required();
    c_re->add_option("--out", re.out)->required();
    c_re->add_option("--drive-manifest", re.drive_manifest);
    c_re->add_option("--drive-row", re.drive_row);
    c_re->add_option("--yaw", re.yaw);
    c_re->add_option("--pitch", re.pitch);
    c_re->add_option("--roll", re.roll);
    c_re->add_option("--blink-l", re.blink_l);
    c_re->add_option("--blink-r", re.blink_r);
    c_re->add_option("--mouth", re.mouth);
    c_re->add_option("--audio-seed", re.audio_seed);
    c_re->add_option("--sweep", re.sweep, "yaw|pitch|roll|blink|mouth");
    c_re->add_option("--sweep-from", re.sweep_from);
    c_re->add_option("--sweep-to", re.sweep_to);
    c_re->add_option("--sweep-steps", re.sweep_steps);

    std::string gc_module = "all";
    double gc_tol = 1e-5;
    bool gc_mutate = false;
    auto* c_gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    c_gc->add_option("--module", gc_module, "all|tensor|adaconv|fuser|reenactor|critic");
    c_gc->add_option("--tol", gc_tol);
    c_gc->add_flag("--mutate", gc_mutate,
                   "inject a deliberately wrong gradient; the run must flag it");

    BenchArgs be;
    auto* c_be = app.add_subcommand("bench", "forward-latency benchmark");
    c_be->add_option("--ckpt", be.ckpt);
    c_be->add_option("--config", be.config);
    c_be->add_option("--res", be.res);
    c_be->add_option("--iters", be.iters);
    c_be->add_option("--warmup", be.warmup);
    c_be->add_option("--threads", be.threads);
    c_be->add_option("--out", be.out);

    EvalArgs ev;
    auto* c_ev = app.add_subcommand("eval", "SSIM / landmark error / blink decoupling");
    c_ev->add_option("--ckpt", ev.ckpt)->required();
    c_ev->add_option("--data", ev.data)->required();
    c_ev->add_option("--split", ev.split, "holdout|train|all");
    c_ev->add_option("--out", ev.out);
    c_ev->add_flag("--gt-as-prediction", ev.gt_as_prediction);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;  // usage errors -> 1; --help -> 0
    }

    try {
        if (c_gd->parsed()) return cmd_gen_data(gd);
        if (c_tr->parsed()) return cmd_train(tr);
        if (c_re->parsed()) return cmd_reenact(re);
        if (c_gc->parsed()) return cmd_gradcheck(gc_module, gc_tol, gc_mutate);
        if (c_be->parsed()) return cmd_bench(be);
        if (c_ev->parsed()) return cmd_eval(ev);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
